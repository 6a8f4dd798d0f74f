#include "egosal/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "egosal/error.hpp"

namespace egosal::saliency {

void WoodingParams::validate() const {
    if (!(alpha_deg > 0.0 && beta_deg > 0.0 && max_distance_mm > 0.0 && epsilon > 0.0)) {
        throw Error(Errc::InvalidConfig, "Wooding parameters must be strictly positive");
    }
    if (!(alpha_deg < beta_deg)) {
        throw Error(Errc::InvalidConfig, "fovea angle must be smaller than the camera angle");
    }
}

double SaliencyMap::max_value() const {
    return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
}

double sigma_of_distance(const WoodingParams& params, int image_width, double distance_mm) {
    if (!(distance_mm > 0.0)) {
        throw Error(Errc::NonPositiveDistance, "distance must be > 0, got " +
                                                   std::to_string(distance_mm));
    }
    constexpr double deg = std::numbers::pi / 180.0;
    return (params.max_distance_mm / distance_mm) *
           (static_cast<double>(image_width) * std::tan(params.alpha_deg * deg)) /
           (2.0 * std::tan(params.beta_deg * deg));
}

SaliencyMap wooding_map(int width, int height, double fix_x, double fix_y, double distance_mm,
                        const WoodingParams& params, const MapOptions& opts) {
    if (!(fix_x >= 0.0 && fix_x < width && fix_y >= 0.0 && fix_y < height)) {
        throw Error(Errc::FixationOutOfBounds, "fixation (" + std::to_string(fix_x) + ", " +
                                                   std::to_string(fix_y) + ") outside " +
                                                   std::to_string(width) + "x" +
                                                   std::to_string(height));
    }
    SaliencyMap map;
    map.width = width;
    map.height = height;
    map.fixation_x = fix_x;
    map.fixation_y = fix_y;
    map.sigma = sigma_of_distance(params, width, distance_mm);
    map.normalization = opts.normalization;
    map.values.assign(static_cast<std::size_t>(width) * height, 0.0);

    const double denom = 2.0 * map.sigma * map.sigma + params.epsilon;
    int x_lo = 0, x_hi = width, y_lo = 0, y_hi = height;
    double cutoff2 = std::numeric_limits<double>::infinity();
    if (opts.truncate_sigmas > 0.0) {
        const double r = opts.truncate_sigmas * map.sigma;
        cutoff2 = r * r;
        x_lo = std::max(0, static_cast<int>(std::floor(fix_x - r)));
        x_hi = std::min(width, static_cast<int>(std::ceil(fix_x + r)) + 1);
        y_lo = std::max(0, static_cast<int>(std::floor(fix_y - r)));
        y_hi = std::min(height, static_cast<int>(std::ceil(fix_y + r)) + 1);
    }

    double peak = 0.0;
    double total = 0.0;
    for (int y = y_lo; y < y_hi; ++y) {
        const double dy = y - fix_y;
        double* row = &map.values[static_cast<std::size_t>(y) * width];
        for (int x = x_lo; x < x_hi; ++x) {
            const double dx = x - fix_x;
            const double r2 = dx * dx + dy * dy;
            if (r2 > cutoff2) continue;
            const double v = std::exp(-r2 / denom);
            row[x] = v;
            peak = std::max(peak, v);
            total += v;
        }
    }
    const double scale = opts.normalization == Normalization::Peak ? peak : total;
    if (scale > 0.0) {
        for (int y = y_lo; y < y_hi; ++y) {
            double* row = &map.values[static_cast<std::size_t>(y) * width];
            for (int x = x_lo; x < x_hi; ++x) row[x] /= scale;
        }
    }
    return map;
}

Mask threshold_mask(const SaliencyMap& map, double tau) {
    if (!(tau > 0.0 && tau < 1.0)) {
        throw Error(Errc::TauOutOfRange, "tau must lie in (0,1), got " + std::to_string(tau));
    }
    Mask mask(map.width, map.height);
    const double peak = map.normalization == Normalization::Peak ? 1.0 : map.max_value();
    const double cut = tau * peak;
    for (std::size_t i = 0; i < map.values.size(); ++i) mask.bits[i] = map.values[i] >= cut;
    return mask;
}

BoundingBox peak_component_bbox(const Mask& mask, int fx, int fy) {
    if (fx < 0 || fy < 0 || fx >= mask.width || fy >= mask.height || !mask.at(fx, fy)) {
        throw Error(Errc::EmptyMaskAtFixation,
                    "mask is empty at (" + std::to_string(fx) + ", " + std::to_string(fy) + ")");
    }
    std::vector<std::uint8_t> seen(mask.bits.size(), 0);
    std::vector<std::pair<int, int>> stack{{fx, fy}};
    seen[static_cast<std::size_t>(fy) * mask.width + fx] = 1;
    BoundingBox box{fx, fy, fx + 1, fy + 1};
    while (!stack.empty()) {
        const auto [x, y] = stack.back();
        stack.pop_back();
        box.x0 = std::min(box.x0, x);
        box.y0 = std::min(box.y0, y);
        box.x1 = std::max(box.x1, x + 1);
        box.y1 = std::max(box.y1, y + 1);
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                const int nx = x + dx, ny = y + dy;
                if (nx < 0 || ny < 0 || nx >= mask.width || ny >= mask.height) continue;
                const auto idx = static_cast<std::size_t>(ny) * mask.width + nx;
                if (seen[idx] || !mask.bits[idx]) continue;
                seen[idx] = 1;
                stack.emplace_back(nx, ny);
            }
        }
    }
    return box;
}

BoundingBox saliency_bbox(int width, int height, double fix_x, double fix_y, double distance_mm,
                          double tau, const WoodingParams& params, const MapOptions& opts) {
    const auto map = wooding_map(width, height, fix_x, fix_y, distance_mm, params, opts);
    const auto mask = threshold_mask(map, tau);
    return peak_component_bbox(mask, std::min(width - 1, static_cast<int>(std::lround(fix_x))),
                               std::min(height - 1, static_cast<int>(std::lround(fix_y))));
}

Image to_grayscale(const SaliencyMap& map) {
    Image out(map.width, map.height, 1);
    const double peak = map.max_value();
    const double scale = peak > 0.0 ? 255.0 / peak : 0.0;
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        out.data[i] = static_cast<std::uint8_t>(std::lround(map.values[i] * scale));
    }
    return out;
}

namespace {

// Piecewise-linear "jet" colour ramp on [0,1].
void jet(double v, double& r, double& g, double& b) {
    v = std::clamp(v, 0.0, 1.0);
    r = std::clamp(1.5 - std::abs(4.0 * v - 3.0), 0.0, 1.0);
    g = std::clamp(1.5 - std::abs(4.0 * v - 2.0), 0.0, 1.0);
    b = std::clamp(1.5 - std::abs(4.0 * v - 1.0), 0.0, 1.0);
}

std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

Image heatmap_overlay(const Image& frame, const SaliencyMap& map, double opacity) {
    Image out(frame.width, frame.height, 3);
    const double peak = map.max_value();
    for (int y = 0; y < frame.height; ++y) {
        for (int x = 0; x < frame.width; ++x) {
            const double v = peak > 0.0 ? map.at(x, y) / peak : 0.0;
            double rgb[3];
            jet(v, rgb[0], rgb[1], rgb[2]);
            for (int c = 0; c < 3; ++c) {
                const double base = frame.at(x, y, frame.channels == 3 ? c : 0);
                out.at(x, y, c) = to_byte((1.0 - opacity) * base + opacity * 255.0 * rgb[c]);
            }
        }
    }
    return out;
}

Image weighted_overlay(const Image& frame, const SaliencyMap& map) {
    Image out = frame;
    const double peak = map.max_value();
    for (int y = 0; y < frame.height; ++y) {
        for (int x = 0; x < frame.width; ++x) {
            const double w = peak > 0.0 ? map.at(x, y) / peak : 0.0;
            for (int c = 0; c < frame.channels; ++c) out.at(x, y, c) = to_byte(frame.at(x, y, c) * w);
        }
    }
    return out;
}

void draw_mask_outline(Image& frame, const Mask& mask, std::uint8_t r, std::uint8_t g,
                       std::uint8_t b) {
    const std::uint8_t rgb[3] = {r, g, b};
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(x, y)) continue;
            const bool edge = x == 0 || y == 0 || x == mask.width - 1 || y == mask.height - 1 ||
                              !mask.at(x - 1, y) || !mask.at(x + 1, y) || !mask.at(x, y - 1) ||
                              !mask.at(x, y + 1);
            if (!edge) continue;
            for (int c = 0; c < frame.channels; ++c) frame.at(x, y, c) = rgb[c % 3];
        }
    }
}

void draw_box(Image& frame, const BoundingBox& box, std::uint8_t r, std::uint8_t g, std::uint8_t b,
              int thickness) {
    const std::uint8_t rgb[3] = {r, g, b};
    auto paint = [&](int x, int y) {
        if (x < 0 || y < 0 || x >= frame.width || y >= frame.height) return;
        for (int c = 0; c < frame.channels; ++c) frame.at(x, y, c) = rgb[c % 3];
    };
    for (int t = 0; t < thickness; ++t) {
        for (int x = box.x0; x < box.x1; ++x) {
            paint(x, box.y0 + t);
            paint(x, box.y1 - 1 - t);
        }
        for (int y = box.y0; y < box.y1; ++y) {
            paint(box.x0 + t, y);
            paint(box.x1 - 1 - t, y);
        }
    }
}

}  // namespace egosal::saliency
