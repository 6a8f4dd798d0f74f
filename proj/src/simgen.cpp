#include "egosal/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>

#include "egosal/dataset.hpp"
#include "egosal/error.hpp"
#include "egosal/patches.hpp"
#include "egosal/seed.hpp"
#include "egosal/text_io.hpp"

namespace egosal::sim {

namespace fs = std::filesystem;

namespace {

std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) { return derive_seed(seed, stream); }

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Shape footprints in unit coordinates, centre (0,0), half-extent 0.5.
bool inside_shape(ShapeKind kind, double x, double y) {
    const double ax = std::abs(x), ay = std::abs(y);
    switch (kind) {
        case ShapeKind::Cube: return ax <= 0.5 && ay <= 0.5;
        case ShapeKind::Cylinder: {
            if (ax <= 0.3 && ay <= 0.35) return true;
            const double cap = (y < 0 ? y + 0.35 : y - 0.35) / 0.15;
            return (x / 0.3) * (x / 0.3) + cap * cap <= 1.0;
        }
        case ShapeKind::Cone: return y >= -0.5 && y <= 0.5 && ax <= 0.5 * (y + 0.5);
        case ShapeKind::Sphere: return x * x + y * y <= 0.25;
        case ShapeKind::Prism: return ax <= 0.5 && ay <= 0.433 && 0.866 * ax + 0.5 * ay <= 0.433;
        case ShapeKind::Torus: {
            const double r2 = x * x + y * y;
            return r2 <= 0.25 && r2 >= 0.0576;
        }
        case ShapeKind::Cross: return (ax <= 0.17 && ay <= 0.5) || (ay <= 0.17 && ax <= 0.5);
        case ShapeKind::Pyramid: return ax + ay <= 0.5;
    }
    return false;
}

// Smooth value noise on a coarse lattice, bilinearly interpolated, in [-1, 1].
class ValueNoise {
public:
    ValueNoise(int width, int height, int cell, std::uint64_t seed)
        : cell_(cell), gw_(width / cell + 2), gh_(height / cell + 2), grid_(static_cast<std::size_t>(gw_) * gh_) {
        std::mt19937_64 rng(seed);
        for (auto& v : grid_) v = uniform(rng, -1.0, 1.0);
    }

    double operator()(int x, int y) const {
        const double gx = static_cast<double>(x) / cell_, gy = static_cast<double>(y) / cell_;
        const int ix = static_cast<int>(gx), iy = static_cast<int>(gy);
        const double fx = gx - ix, fy = gy - iy;
        auto g = [&](int i, int j) { return grid_[static_cast<std::size_t>(j) * gw_ + i]; };
        const double top = g(ix, iy) * (1 - fx) + g(ix + 1, iy) * fx;
        const double bottom = g(ix, iy + 1) * (1 - fx) + g(ix + 1, iy + 1) * fx;
        return top * (1 - fy) + bottom * fy;
    }

private:
    int cell_, gw_, gh_;
    std::vector<double> grid_;
};

std::uint8_t clamp_byte(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

std::string_view category_name(int label) {
    static constexpr std::string_view names[kClassCount] = {
        "background", "cube", "cylinder", "cone", "sphere", "prism", "torus", "cross", "pyramid"};
    if (label < 0 || label >= kClassCount) throw Error(Errc::LabelOutOfRange, "no category " + std::to_string(label));
    return names[label];
}

std::array<std::uint8_t, 3> category_color(int label) {
    static constexpr std::array<std::uint8_t, 3> colors[kClassCount] = {
        {{128, 128, 128}}, {{200, 40, 40}}, {{40, 90, 200}},  {{230, 180, 30}}, {{40, 160, 60}},
        {{150, 60, 170}},  {{240, 120, 30}}, {{30, 170, 170}}, {{90, 60, 40}}};
    if (label < 0 || label >= kClassCount) throw Error(Errc::LabelOutOfRange, "no category " + std::to_string(label));
    return colors[label];
}

BoundingBox SceneObject::box() const {
    const int x0 = cx - size / 2, y0 = cy - size / 2;
    return {x0, y0, x0 + size, y0 + size};
}

void SceneSpec::validate() const {
    for (std::size_t i = 0; i < objects.size(); ++i) {
        const auto& o = objects[i];
        if (o.category < 1 || o.category > kObjectCategories) {
            throw Error(Errc::LabelOutOfRange, "object category " + std::to_string(o.category));
        }
        if (o.size < 1 || !o.box().inside(width, height)) {
            throw Error(Errc::OverlappingObjects, "object " + std::to_string(i) + " leaves the frame");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (!intersect(o.box(), objects[j].box()).empty()) {
                throw Error(Errc::OverlappingObjects,
                            "objects " + std::to_string(j) + " and " + std::to_string(i) + " overlap");
            }
        }
    }
}

Image render_scene(const SceneSpec& spec, std::uint64_t seed, int dx, int dy) {
    spec.validate();
    Image img(spec.width, spec.height, 3);
    std::mt19937_64 rng(seed);
    if (spec.texture_noise > 0) {
        // Texture is attached to the table, so it moves with the shift.
        constexpr int kMargin = 64;
        const ValueNoise noise(spec.width + 2 * kMargin, spec.height + 2 * kMargin, 16, spec.texture_seed);
        const int ox = kMargin - std::clamp(dx, -kMargin, kMargin);
        const int oy = kMargin - std::clamp(dy, -kMargin, kMargin);
        for (int y = 0; y < spec.height; ++y) {
            for (int x = 0; x < spec.width; ++x) {
                const double n = spec.texture_noise * noise(x + ox, y + oy);
                for (int c = 0; c < 3; ++c) img.at(x, y, c) = clamp_byte(spec.background[c] + n);
            }
        }
    } else {
        for (int y = 0; y < spec.height; ++y) {
            for (int x = 0; x < spec.width; ++x) {
                for (int c = 0; c < 3; ++c) img.at(x, y, c) = spec.background[c];
            }
        }
    }
    for (const auto& o : spec.objects) {
        const auto b = o.box();
        const auto kind = static_cast<ShapeKind>(o.category);
        for (int y = std::max(0, b.y0 + dy); y < std::min(spec.height, b.y1 + dy); ++y) {
            for (int x = std::max(0, b.x0 + dx); x < std::min(spec.width, b.x1 + dx); ++x) {
                const double u = (x - dx - b.x0 + 0.5) / o.size - 0.5;
                const double v = (y - dy - b.y0 + 0.5) / o.size - 0.5;
                if (!inside_shape(kind, u, v)) continue;
                for (int c = 0; c < 3; ++c) img.at(x, y, c) = o.color[c];
            }
        }
    }
    if (spec.blur_probability > 0.0 && uniform(rng, 0.0, 1.0) < spec.blur_probability) {
        img = patches::gaussian_blur(img, spec.blur_kernel);
    }
    return img;
}

std::string_view phase_name(Phase p) {
    switch (p) {
        case Phase::Discovery: return "discovery";
        case Phase::Fixation: return "fixation";
        case Phase::Distractor: return "distractor";
        case Phase::Grasp: return "grasp";
    }
    return "fixation";
}

const PhaseSegment& GazeScript::at(double t_ms) const {
    if (phases.empty()) throw Error(Errc::EmptySequence, "empty gaze script");
    for (const auto& p : phases) {
        if (t_ms < p.end_ms()) return p;
    }
    return phases.back();
}

double CameraMotion::dx(double t_ms) const {
    return amplitude * std::sin(2.0 * std::numbers::pi * t_ms / 1700.0 + phase_x);
}

double CameraMotion::dy(double t_ms) const {
    return 0.5 * amplitude * std::sin(2.0 * std::numbers::pi * t_ms / 2300.0 + phase_y);
}

SimulatedGaze simulate_gaze(const SceneSpec& spec, int target_index, const GazeParams& params,
                            std::uint64_t seed, const CameraMotion& motion) {
    const int n_objects = static_cast<int>(spec.objects.size());
    if (target_index < 0 || target_index >= n_objects) {
        throw Error(Errc::InvalidConfig, "target index " + std::to_string(target_index) + " out of range");
    }
    const double min_duration = kDiscoveryMax + kDistractorMax + 2 * kFixationMin + kGraspMin;
    if (params.duration_ms < min_duration) {
        throw Error(Errc::InvalidConfig, "recordings must last at least " +
                                             std::to_string(static_cast<int>(min_duration)) + " ms");
    }
    std::mt19937_64 rng(seed);
    auto other_object = [&] {
        if (n_objects == 1) return target_index;
        int k = std::uniform_int_distribution<int>(0, n_objects - 2)(rng);
        return k >= target_index ? k + 1 : k;
    };

    SimulatedGaze out;
    auto& phases = out.script.phases;
    const double discovery = uniform(rng, kDiscoveryMin, kDiscoveryMax);
    const double split = discovery * uniform(rng, 0.35, 0.65);
    phases.push_back({Phase::Discovery, 0.0, split, other_object()});
    phases.push_back({Phase::Discovery, split, discovery - split, other_object()});

    const bool distractor = uniform(rng, 0.0, 1.0) < params.distractor_probability;
    const double distract = distractor ? uniform(rng, kDistractorMin, kDistractorMax) : 0.0;
    const double rest = params.duration_ms - discovery;
    const double fixation_needed = distractor ? 2 * kFixationMin : kFixationMin;
    double grasp = uniform(rng, kGraspMin, kGraspMax);
    // The microsecond of slack keeps both fixation halves >= the minimum after rounding.
    grasp = std::min(grasp, rest - distract - fixation_needed - 1e-3);
    const double fixation = rest - grasp - distract;

    double t = discovery;
    if (distractor) {
        const double first = uniform(rng, kFixationMin, fixation - kFixationMin);
        phases.push_back({Phase::Fixation, t, first, target_index});
        t += first;
        phases.push_back({Phase::Distractor, t, distract, other_object()});
        t += distract;
        phases.push_back({Phase::Fixation, t, fixation - first, target_index});
        t += fixation - first;
    } else {
        phases.push_back({Phase::Fixation, t, fixation, target_index});
        t += fixation;
    }
    phases.push_back({Phase::Grasp, t, params.duration_ms - t, target_index});

    const double period = 1000.0 / params.rate_hz;
    if (uniform(rng, 0.0, 1.0) < params.blink_probability) {
        // Inside the grasp phase, aligned to the sample grid, clear of both ends.
        const auto& g = phases.back();
        const double dur = std::round(uniform(rng, 100.0, 150.0) / period) * period;
        const double lo = g.start_ms + 2 * period, hi = g.end_ms() - dur - 2 * period;
        const double start = std::ceil(uniform(rng, lo, std::max(lo, hi)) / period) * period;
        out.script.blinks.push_back({start, dur});
    }

    // Aim point per segment, micro-saccade jitter on top.
    std::vector<std::pair<double, double>> aims;
    for (const auto& p : phases) {
        const auto& o = spec.objects[p.object_index];
        aims.emplace_back(o.cx + uniform(rng, -0.2, 0.2) * o.size, o.cy + uniform(rng, -0.2, 0.2) * o.size);
    }
    const double focal_px = spec.width / (2.0 * std::tan(params.beta_deg * std::numbers::pi / 180.0));
    const double jitter_radius = focal_px * std::tan(params.micro_saccade_deg * std::numbers::pi / 180.0);
    std::normal_distribution<double> dist_noise(0.0, params.distance_noise_mm);
    double jx = 0.0, jy = 0.0, next_saccade = 0.0;

    out.track.nominal_rate_hz = params.rate_hz;
    const auto n_samples = static_cast<long>(std::floor(params.duration_ms / period + 1e-9));
    for (long k = 0; k < n_samples; ++k) {
        const double ts = k * period;
        if (ts >= next_saccade) {
            const double r = jitter_radius * std::sqrt(uniform(rng, 0.0, 1.0));
            const double a = uniform(rng, 0.0, 2.0 * std::numbers::pi);
            jx = r * std::cos(a);
            jy = r * std::sin(a);
            next_saccade = ts + uniform(rng, kMicroSaccadeMin, kMicroSaccadeMax);
        }
        std::size_t seg = 0;
        while (seg + 1 < phases.size() && ts >= phases[seg].end_ms()) ++seg;
        gaze::GazeSample s;
        s.t_ms = ts;
        s.x = std::clamp(aims[seg].first + jx + motion.dx(ts), 0.0, spec.width - 1.0);
        s.y = std::clamp(aims[seg].second + jy + motion.dy(ts), 0.0, spec.height - 1.0);
        s.d = std::max(1.0, params.distance_mm + dist_noise(rng));
        s.valid = true;
        for (const auto& b : out.script.blinks) {
            if (ts >= b.start_ms && ts < b.start_ms + b.duration_ms) s.valid = false;
        }
        if (!s.valid) s.x = s.y = s.d = 0.0;
        out.track.samples.push_back(s);
    }
    return out;
}

SceneSpec random_lineup(int width, int height, int target_category, std::uint64_t seed) {
    if (target_category < 1 || target_category > kObjectCategories) {
        throw Error(Errc::LabelOutOfRange, "target category " + std::to_string(target_category));
    }
    std::mt19937_64 rng(seed);
    std::vector<int> others;
    for (int c = 1; c <= kObjectCategories; ++c) {
        if (c != target_category) others.push_back(c);
    }
    std::shuffle(others.begin(), others.end(), rng);
    std::vector<int> chosen = {target_category, others[0], others[1], others[2]};
    std::shuffle(chosen.begin(), chosen.end(), rng);

    SceneSpec spec;
    spec.width = width;
    spec.height = height;
    spec.texture_seed = rng();
    const double slot = width / 4.0;
    for (int i = 0; i < 4; ++i) {
        SceneObject o;
        o.category = chosen[i];
        o.size = static_cast<int>(std::lround(0.1 * width * uniform(rng, 0.85, 1.15)));
        o.cx = static_cast<int>(std::lround(slot * (i + 0.5) + uniform(rng, -0.03, 0.03) * width));
        o.cy = static_cast<int>(std::lround(0.58 * height + uniform(rng, -0.03, 0.03) * height));
        const auto base = category_color(o.category);
        for (int c = 0; c < 3; ++c) o.color[c] = clamp_byte(base[c] + uniform(rng, -12.0, 12.0));
        spec.objects.push_back(o);
    }
    spec.validate();
    return spec;
}

std::vector<std::string> assign_splits(const std::vector<int>& categories, std::uint64_t seed) {
    std::vector<std::string> out(categories.size(), "train");
    std::vector<int> classes = categories;
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    for (int c : classes) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < categories.size(); ++i) {
            if (categories[i] == c) members.push_back(i);
        }
        std::mt19937_64 rng(derive(seed, 1000 + static_cast<std::uint64_t>(c)));
        std::shuffle(members.begin(), members.end(), rng);
        const auto k = static_cast<double>(members.size());
        const auto n_val = static_cast<std::size_t>(std::lround(0.2 * k));
        const auto n_test = static_cast<std::size_t>(std::lround(0.2 * k));
        for (std::size_t j = 0; j < members.size(); ++j) {
            if (j < n_val) out[members[j]] = "val";
            else if (j < n_val + n_test) out[members[j]] = "test";
        }
    }
    return out;
}

std::vector<CorpusVideo> generate_corpus(const fs::path& root, const CorpusConfig& cfg) {
    if (cfg.videos < 1) throw Error(Errc::InvalidConfig, "need at least one video");
    std::vector<int> categories;
    for (int i = 0; i < cfg.videos; ++i) categories.push_back(i % kObjectCategories + 1);
    const auto splits = assign_splits(categories, cfg.seed);
    const int n_frames = static_cast<int>(std::floor(cfg.gaze.duration_ms * cfg.fps / 1000.0 + 1e-9));

    std::vector<CorpusVideo> videos;
    try {
        fs::create_directories(root / "videos");
        std::ostringstream split_csv;
        split_csv << dataset::kSplitHeader << '\n';
        for (int i = 0; i < cfg.videos; ++i) {
            char id[32];
            std::snprintf(id, sizeof id, "vid_%04d", i);
            const std::uint64_t vseed = derive(cfg.seed, static_cast<std::uint64_t>(i));
            const int category = categories[i];

            SceneSpec scene = random_lineup(cfg.width, cfg.height, category, derive(vseed, 1));
            scene.jitter_px = cfg.jitter_px;
            scene.blur_probability = cfg.blur_probability;
            scene.texture_noise = cfg.texture_noise;
            int target = 0;
            while (scene.objects[target].category != category) ++target;

            std::mt19937_64 rng(derive(vseed, 2));
            CameraMotion motion{scene.jitter_px, uniform(rng, 0, 2 * std::numbers::pi),
                                uniform(rng, 0, 2 * std::numbers::pi)};
            const auto sim = simulate_gaze(scene, target, cfg.gaze, derive(vseed, 3), motion);

            const fs::path dir = root / "videos" / id;
            fs::create_directories(dir / "frames");
            std::ostringstream truth;
            truth << dataset::kTruthHeader << '\n';
            for (int f = 0; f < n_frames; ++f) {
                const double t = 1000.0 * f / cfg.fps;
                const int dx = static_cast<int>(std::lround(motion.dx(t)));
                const int dy = static_cast<int>(std::lround(motion.dy(t)));
                const Image frame = render_scene(scene, derive(vseed, 100 + static_cast<std::uint64_t>(f)), dx, dy);
                char name[32];
                std::snprintf(name, sizeof name, "%06d.png", f);
                write_png(dir / "frames" / name, frame);

                BoundingBox box = scene.objects[target].box();
                box = intersect({box.x0 + dx, box.y0 + dy, box.x1 + dx, box.y1 + dy},
                                {0, 0, cfg.width, cfg.height});
                truth << dataset::format_truth_row({f, box, category, std::string(phase_name(sim.script.at(t).phase))})
                      << '\n';
            }
            write_text_file_atomic(dir / "truth.csv", truth.str());
            write_text_file_atomic(dir / "gaze.csv", gaze::format_gaze_csv(sim.track));

            KeyValueConfig meta;
            meta.set("frames", std::to_string(n_frames));
            meta.set("fps", std::to_string(cfg.fps));
            meta.set("gaze_rate_hz", std::to_string(cfg.gaze.rate_hz));
            meta.set("width", std::to_string(cfg.width));
            meta.set("height", std::to_string(cfg.height));
            meta.set("category", std::to_string(category));
            meta.set("category_name", std::string(category_name(category)));
            meta.set("target_index", std::to_string(target));
            bool has_distractor = false;
            for (const auto& p : sim.script.phases) has_distractor |= p.phase == Phase::Distractor;
            meta.set("distractor", has_distractor ? "1" : "0");
            meta.set("blinks", std::to_string(sim.script.blinks.size()));
            write_text_file_atomic(dir / "video.cfg", meta.serialize());

            split_csv << id << ',' << splits[i] << '\n';
            videos.push_back({id, category, splits[i], n_frames});
        }
        write_text_file_atomic(root / "split.csv", split_csv.str());
    } catch (const fs::filesystem_error& e) {
        throw Error(Errc::DiskWriteFailure, e.what());
    } catch (const Error& e) {
        if (e.code() == Errc::IoError) throw Error(Errc::DiskWriteFailure, e.what());
        throw;
    }
    return videos;
}

}  // namespace egosal::sim
