#include "egosal/patches.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "egosal/error.hpp"
#include "egosal/text_io.hpp"

namespace egosal::patches {

Image resize_bilinear(const Image& src, int out_w, int out_h) {
    if (src.width == out_w && src.height == out_h) return src;
    Image out(out_w, out_h, src.channels);
    const double sx = static_cast<double>(src.width) / out_w;
    const double sy = static_cast<double>(src.height) / out_h;
    for (int y = 0; y < out_h; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, src.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width - 1.0);
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, src.width - 1);
            const double wx = fx - x0;
            for (int c = 0; c < src.channels; ++c) {
                const double top = (1.0 - wx) * src.at(x0, y0, c) + wx * src.at(x1, y0, c);
                const double bot = (1.0 - wx) * src.at(x0, y1, c) + wx * src.at(x1, y1, c);
                out.at(x, y, c) = static_cast<std::uint8_t>(
                    std::clamp(std::lround((1.0 - wy) * top + wy * bot), 0L, 255L));
            }
        }
    }
    return out;
}

Patch extract_object_patch(const Image& frame, const BoundingBox& box, int out_size) {
    if (!box.inside(frame.width, frame.height)) {
        throw Error(Errc::BoxOutOfBounds, "object box outside frame");
    }
    Patch p;
    p.box = box;
    p.pixels = resize_bilinear(crop(frame, box), out_size, out_size);
    return p;
}

ExclusionZone make_exclusion_zone(const BoundingBox& object_box, int frame_w, int frame_h,
                                  double margin_factor) {
    const double margin = margin_factor * object_box.height();
    const int y0 = std::max(0, static_cast<int>(std::floor(object_box.y0 - margin)));
    const int y1 = std::min(frame_h, static_cast<int>(std::ceil(object_box.y1 + margin)));
    return ExclusionZone{BoundingBox{0, y0, frame_w, y1}};
}

double overlap_ratio(const BoundingBox& a, const BoundingBox& b) {
    const long long smaller = std::min(a.area(), b.area());
    if (smaller == 0) return 0.0;
    return static_cast<double>(intersect(a, b).area()) / static_cast<double>(smaller);
}

bool background_box_acceptable(const BoundingBox& box, const ExclusionZone& zone,
                               const std::vector<BoundingBox>& accepted, int frame_w, int frame_h,
                               int min_size, double max_overlap) {
    if (!box.inside(frame_w, frame_h)) return false;
    if (box.width() < min_size || box.height() < min_size) return false;
    if (intersect(box, zone.band).area() > 0) return false;
    return std::all_of(accepted.begin(), accepted.end(), [&](const BoundingBox& other) {
        return overlap_ratio(box, other) <= max_overlap;
    });
}

namespace {

// Free rectangles around the zone, each of which can host background boxes.
std::vector<BoundingBox> free_regions(int w, int h, const BoundingBox& z) {
    std::vector<BoundingBox> regions;
    const BoundingBox candidates[] = {
        {0, 0, w, std::clamp(z.y0, 0, h)},
        {0, std::clamp(z.y1, 0, h), w, h},
        {0, 0, std::clamp(z.x0, 0, w), h},
        {std::clamp(z.x1, 0, w), 0, w, h},
    };
    for (const auto& c : candidates) {
        if (!c.empty()) regions.push_back(c);
    }
    return regions;
}

}  // namespace

std::vector<BoundingBox> sample_background_boxes(int frame_w, int frame_h,
                                                 const ExclusionZone& zone,
                                                 const BackgroundParams& params,
                                                 std::mt19937_64& rng) {
    if (params.count < 1) throw Error(Errc::InvalidConfig, "background count must be >= 1");
    const auto regions = free_regions(frame_w, frame_h, zone.band);
    int max_side = 0;
    for (const auto& r : regions) max_side = std::max(max_side, std::min(r.width(), r.height()));
    if (max_side < params.min_size) {
        throw Error(Errc::NoFreeSpace, "no " + std::to_string(params.min_size) +
                                           "px square fits outside the exclusion zone");
    }

    std::vector<BoundingBox> accepted;
    std::uniform_int_distribution<int> side_dist(params.min_size, max_side);
    const int budget = params.count * params.max_attempts_per_box;
    for (int attempt = 0; attempt < budget && static_cast<int>(accepted.size()) < params.count;
         ++attempt) {
        const int side = side_dist(rng);
        std::vector<const BoundingBox*> fitting;
        for (const auto& r : regions) {
            if (r.width() >= side && r.height() >= side) fitting.push_back(&r);
        }
        if (fitting.empty()) continue;
        const auto& region =
            *fitting[std::uniform_int_distribution<std::size_t>(0, fitting.size() - 1)(rng)];
        const int x0 = std::uniform_int_distribution<int>(region.x0, region.x1 - side)(rng);
        const int y0 = std::uniform_int_distribution<int>(region.y0, region.y1 - side)(rng);
        const BoundingBox box{x0, y0, x0 + side, y0 + side};
        if (background_box_acceptable(box, zone, accepted, frame_w, frame_h, params.min_size,
                                      params.max_overlap)) {
            accepted.push_back(box);
        }
    }
    return accepted;
}

std::vector<Patch> sample_background(const Image& frame, const ExclusionZone& zone,
                                     const BackgroundParams& params, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Patch> out;
    for (const auto& box : sample_background_boxes(frame.width, frame.height, zone, params, rng)) {
        Patch p;
        p.box = box;
        p.pixels = crop(frame, box);
        p.label = kBackgroundLabel;
        out.push_back(std::move(p));
    }
    return out;
}

Image rotate90(const Image& src, int quarter_turns) {
    quarter_turns = ((quarter_turns % 4) + 4) % 4;
    if (quarter_turns == 0) return src;
    const bool swap = quarter_turns % 2 == 1;
    Image out(swap ? src.height : src.width, swap ? src.width : src.height, src.channels);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            int sx = 0, sy = 0;
            switch (quarter_turns) {
                case 1: sx = y; sy = src.height - 1 - x; break;
                case 2: sx = src.width - 1 - x; sy = src.height - 1 - y; break;
                case 3: sx = src.width - 1 - y; sy = x; break;
            }
            for (int c = 0; c < src.channels; ++c) out.at(x, y, c) = src.at(sx, sy, c);
        }
    }
    return out;
}

double blur_sigma_for_kernel(int kernel) {
    return 0.3 * ((kernel - 1) * 0.5 - 1.0) + 0.8;
}

namespace {

int reflect101(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * (n - 1) - i;
    }
    return i;
}

}  // namespace

Image gaussian_blur(const Image& src, int kernel) {
    if (kernel < 1 || kernel % 2 == 0) {
        throw Error(Errc::InvalidConfig, "blur kernel must be odd and positive");
    }
    if (kernel == 1) return src;
    const int radius = kernel / 2;
    const double sigma = blur_sigma_for_kernel(kernel);
    std::vector<double> weights(kernel);
    double sum = 0.0;
    for (int i = 0; i < kernel; ++i) {
        const double d = i - radius;
        weights[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += weights[i];
    }
    for (auto& w : weights) w /= sum;

    const int w = src.width, h = src.height, ch = src.channels;
    std::vector<double> tmp(static_cast<std::size_t>(w) * h * ch, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (int k = 0; k < kernel; ++k) {
                    acc += weights[k] * src.at(reflect101(x + k - radius, w), y, c);
                }
                tmp[(static_cast<std::size_t>(y) * w + x) * ch + c] = acc;
            }
        }
    }
    Image out(w, h, ch);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (int k = 0; k < kernel; ++k) {
                    const int yy = reflect101(y + k - radius, h);
                    acc += weights[k] * tmp[(static_cast<std::size_t>(yy) * w + x) * ch + c];
                }
                out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(acc), 0L, 255L));
            }
        }
    }
    return out;
}

std::vector<Patch> augment(const Patch& patch) {
    if (!patch.is_original()) {
        throw Error(Errc::AlreadyAugmented, "patch already carries rotation " +
                                                std::to_string(patch.rotation_deg) + " blur " +
                                                std::to_string(patch.blur_kernel));
    }
    std::vector<Patch> out;
    out.reserve(16);
    for (int rot : kRotations) {
        const Image rotated = rotate90(patch.pixels, rot / 90);
        for (int k : kBlurKernels) {
            Patch v = patch;
            v.pixels = gaussian_blur(rotated, k);
            v.rotation_deg = rot;
            v.blur_kernel = k;
            out.push_back(std::move(v));
        }
    }
    return out;
}

std::string format_manifest_row(const ManifestRow& r) {
    std::ostringstream out;
    out << r.patch_file << ',' << r.label << ',' << r.video_id << ',' << r.frame << ',' << r.box.x0
        << ',' << r.box.y0 << ',' << r.box.x1 << ',' << r.box.y1 << ',' << r.rotation << ','
        << r.blur_k;
    return out.str();
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
    const auto table = read_csv(path);
    const std::size_t c_file = table.column("patch_file"), c_label = table.column("label"),
                      c_video = table.column("video_id"), c_frame = table.column("frame"),
                      c_x0 = table.column("box_x0"), c_y0 = table.column("box_y0"),
                      c_x1 = table.column("box_x1"), c_y1 = table.column("box_y1"),
                      c_rot = table.column("rotation"), c_blur = table.column("blur_k");
    std::vector<ManifestRow> rows;
    rows.reserve(table.rows.size());
    int line = 1;
    for (const auto& f : table.rows) {
        ++line;
        if (f.size() != table.header.size()) {
            throw Error(Errc::MalformedRow, path.string() + ":" + std::to_string(line));
        }
        try {
            ManifestRow r;
            r.patch_file = f[c_file];
            r.label = std::stoi(f[c_label]);
            r.video_id = f[c_video];
            r.frame = std::stoi(f[c_frame]);
            r.box = {std::stoi(f[c_x0]), std::stoi(f[c_y0]), std::stoi(f[c_x1]), std::stoi(f[c_y1])};
            r.rotation = std::stoi(f[c_rot]);
            r.blur_k = std::stoi(f[c_blur]);
            rows.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw Error(Errc::MalformedRow, path.string() + ":" + std::to_string(line));
        }
    }
    return rows;
}

PatchWriter::PatchWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

ManifestRow PatchWriter::write(const Patch& patch) {
    char name[96];
    std::snprintf(name, sizeof(name), "%s_%06d_l%d_r%d_b%d_%06zu.png", patch.video_id.c_str(),
                  patch.frame, patch.label, patch.rotation_deg, patch.blur_kernel, rows_.size());
    write_png(dir_ / name, patch.pixels);
    ManifestRow row{name, patch.label, patch.video_id, patch.frame, patch.box, patch.rotation_deg,
                    patch.blur_kernel};
    rows_.push_back(row);
    return row;
}

void PatchWriter::finish(const std::filesystem::path& manifest_path) const {
    std::ostringstream out;
    out << kManifestHeader << '\n';
    for (const auto& r : rows_) out << format_manifest_row(r) << '\n';
    write_text_file_atomic(manifest_path, out.str());
}

}  // namespace egosal::patches
