#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "egosal/image.hpp"

namespace egosal::patches {

inline constexpr int kBackgroundLabel = 0;

struct Patch {
    Image pixels;
    BoundingBox box;  ///< in source frame coordinates
    int label = kBackgroundLabel;
    std::string video_id;
    int frame = 0;
    int rotation_deg = 0;  ///< clockwise, multiple of 90
    int blur_kernel = 1;   ///< 1 means no blur

    bool is_original() const { return rotation_deg == 0 && blur_kernel == 1; }
};

/// Full-width band barred from background sampling.
struct ExclusionZone {
    BoundingBox band;
};

/// Bilinear resize with pixel-centre alignment; identity when sizes match.
Image resize_bilinear(const Image& src, int out_w, int out_h);

Patch extract_object_patch(const Image& frame, const BoundingBox& box, int out_size);

ExclusionZone make_exclusion_zone(const BoundingBox& object_box, int frame_w, int frame_h,
                                  double margin_factor);

/// Intersection area over the smaller box's area.
double overlap_ratio(const BoundingBox& a, const BoundingBox& b);

bool background_box_acceptable(const BoundingBox& box, const ExclusionZone& zone,
                               const std::vector<BoundingBox>& accepted, int frame_w, int frame_h,
                               int min_size, double max_overlap);

struct BackgroundParams {
    int count = 1;
    int min_size = 95;
    double max_overlap = 0.20;
    /// Give up after count * this many rejected proposals.
    int max_attempts_per_box = 200;
};

/// Square boxes outside the zone. Deterministic for a given generator state.
std::vector<BoundingBox> sample_background_boxes(int frame_w, int frame_h,
                                                 const ExclusionZone& zone,
                                                 const BackgroundParams& params,
                                                 std::mt19937_64& rng);

std::vector<Patch> sample_background(const Image& frame, const ExclusionZone& zone,
                                     const BackgroundParams& params, std::uint64_t seed);

/// Clockwise rotation by quarter_turns * 90 degrees.
Image rotate90(const Image& src, int quarter_turns);

/// Conventional kernel-size to sigma mapping used by gaussian_blur.
double blur_sigma_for_kernel(int kernel);
/// Separable Gaussian blur, kernel x kernel, reflective (mirror-101) borders.
Image gaussian_blur(const Image& src, int kernel);

inline constexpr int kRotations[4] = {0, 90, 180, 270};
inline constexpr int kBlurKernels[4] = {1, 3, 5, 7};

/// The 16 rotation x blur variants of an original patch, identity first.
std::vector<Patch> augment(const Patch& patch);

// Patch datasets on disk: image files plus manifest.csv with columns
// patch_file,label,video_id,frame,box_x0,box_y0,box_x1,box_y1,rotation,blur_k
struct ManifestRow {
    std::string patch_file;
    int label = 0;
    std::string video_id;
    int frame = 0;
    BoundingBox box;
    int rotation = 0;
    int blur_k = 1;

    friend bool operator==(const ManifestRow&, const ManifestRow&) = default;
};

inline constexpr const char* kManifestHeader =
    "patch_file,label,video_id,frame,box_x0,box_y0,box_x1,box_y1,rotation,blur_k";

std::string format_manifest_row(const ManifestRow& row);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

/// Streams patches into `dir`, one PNG each, and accumulates manifest rows.
class PatchWriter {
public:
    explicit PatchWriter(std::filesystem::path dir);

    ManifestRow write(const Patch& patch);
    void finish(const std::filesystem::path& manifest_path) const;
    const std::vector<ManifestRow>& rows() const { return rows_; }

private:
    std::filesystem::path dir_;
    std::vector<ManifestRow> rows_;
};

}  // namespace egosal::patches
