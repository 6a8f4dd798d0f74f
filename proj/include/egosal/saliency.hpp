#pragma once

#include <filesystem>
#include <vector>

#include "egosal/image.hpp"

namespace egosal::saliency {

/// Foveal projection model. Angles in degrees, distances in millimetres.
struct WoodingParams {
    double alpha_deg = 2.0;    ///< fovea projection angle
    double beta_deg = 24.0;    ///< camera opening angle on the width
    double max_distance_mm = 1600.0;
    double epsilon = 0.01;

    void validate() const;
};

enum class Normalization {
    Peak,  ///< divide by the maximum; the fixation pixel is exactly 1
    Sum,   ///< divide by the total mass; values sum to 1
};

struct MapOptions {
    Normalization normalization = Normalization::Peak;
    /// Zero the map beyond this many sigmas (values there are below e^-8). <= 0 disables.
    double truncate_sigmas = 4.0;
};

struct SaliencyMap {
    int width = 0;
    int height = 0;
    std::vector<double> values;  // row-major
    double fixation_x = 0.0;
    double fixation_y = 0.0;
    double sigma = 0.0;
    Normalization normalization = Normalization::Peak;

    double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
    double max_value() const;
};

/// Gaussian spread in pixels for a fixation at distance `distance_mm`.
double sigma_of_distance(const WoodingParams& params, int image_width, double distance_mm);

SaliencyMap wooding_map(int width, int height, double fix_x, double fix_y, double distance_mm,
                        const WoodingParams& params, const MapOptions& opts = {});

/// mask = map / max(map) >= tau. Peak-normalized maps compare directly.
Mask threshold_mask(const SaliencyMap& map, double tau);

/// Tight box around the 8-connected component of `mask` holding (fx, fy).
BoundingBox peak_component_bbox(const Mask& mask, int fx, int fy);

/// Convenience for the online path: map, threshold, component box.
BoundingBox saliency_bbox(int width, int height, double fix_x, double fix_y, double distance_mm,
                          double tau, const WoodingParams& params, const MapOptions& opts = {});

// Debug visualisations.
Image to_grayscale(const SaliencyMap& map);
Image heatmap_overlay(const Image& frame, const SaliencyMap& map, double opacity = 0.5);
/// Brightness of the frame weighted by saliency.
Image weighted_overlay(const Image& frame, const SaliencyMap& map);
void draw_mask_outline(Image& frame, const Mask& mask, std::uint8_t r, std::uint8_t g,
                       std::uint8_t b);
void draw_box(Image& frame, const BoundingBox& box, std::uint8_t r, std::uint8_t g, std::uint8_t b,
              int thickness = 2);

}  // namespace egosal::saliency
