#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "egosal/gaze.hpp"
#include "egosal/image.hpp"

namespace egosal::sim {

inline constexpr int kObjectCategories = 8;
/// Labels: 0 background, 1..8 objects.
inline constexpr int kClassCount = kObjectCategories + 1;

enum class ShapeKind { Cube = 1, Cylinder, Cone, Sphere, Prism, Torus, Cross, Pyramid };

std::string_view category_name(int label);
/// Default colour of each object category.
std::array<std::uint8_t, 3> category_color(int label);

struct SceneObject {
    int category = 1;
    std::array<std::uint8_t, 3> color{};
    int size = 64;  ///< side of the square footprint, px
    int cx = 0;
    int cy = 0;

    /// Footprint [cx - size/2, cx - size/2 + size) on both axes.
    BoundingBox box() const;
};

struct SceneSpec {
    int width = 640;
    int height = 360;
    std::vector<SceneObject> objects;
    std::array<std::uint8_t, 3> background{228, 224, 216};
    /// Peak amplitude of the smooth global image shift, px.
    double jitter_px = 6.0;
    /// Per-frame chance of a motion-blurred frame.
    double blur_probability = 0.0;
    int blur_kernel = 5;
    /// Amplitude of the smooth background texture (0 = flat table).
    int texture_noise = 0;
    std::uint64_t texture_seed = 0;

    /// Raises OverlappingObjects when footprints intersect or leave the frame.
    void validate() const;
};

/// Rasterises the scene shifted by (dx, dy). `seed` drives the motion-blur draw.
Image render_scene(const SceneSpec& spec, std::uint64_t seed, int dx = 0, int dy = 0);

enum class Phase { Discovery, Fixation, Distractor, Grasp };

std::string_view phase_name(Phase p);

struct PhaseSegment {
    Phase phase = Phase::Fixation;
    double start_ms = 0.0;
    double duration_ms = 0.0;
    int object_index = 0;  ///< index into SceneSpec::objects
    double end_ms() const { return start_ms + duration_ms; }
};

struct Blink {
    double start_ms = 0.0;
    double duration_ms = 0.0;
};

struct GazeScript {
    std::vector<PhaseSegment> phases;
    std::vector<Blink> blinks;

    double duration_ms() const { return phases.empty() ? 0.0 : phases.back().end_ms(); }
    const PhaseSegment& at(double t_ms) const;
};

struct GazeParams {
    double duration_ms = 2000.0;
    double rate_hz = 50.0;
    /// Chance of one distractor excursion to a non-target object.
    double distractor_probability = 0.0;
    double blink_probability = 0.0;
    double distance_mm = 600.0;
    double distance_noise_mm = 20.0;
    double micro_saccade_deg = 0.5;
    /// Camera opening angle used to convert degrees to pixels.
    double beta_deg = 24.0;
};

// Timing ranges of the observed gaze behaviour, ms.
inline constexpr double kDiscoveryMin = 240, kDiscoveryMax = 300;
inline constexpr double kFixationMin = 250;
inline constexpr double kDistractorMin = 100, kDistractorMax = 500;
inline constexpr double kGraspMin = 400, kGraspMax = 900;
inline constexpr double kMicroSaccadeMin = 6, kMicroSaccadeMax = 300;

struct SimulatedGaze {
    GazeScript script;
    gaze::GazeTrack track;
};

/// Global image shift at time t, shared by the frames and the gaze stream.
struct CameraMotion {
    double amplitude = 0.0;
    double phase_x = 0.0;
    double phase_y = 0.0;

    double dx(double t_ms) const;
    double dy(double t_ms) const;
};

SimulatedGaze simulate_gaze(const SceneSpec& spec, int target_index, const GazeParams& params,
                            std::uint64_t seed, const CameraMotion& motion = {});

/// Scene of four distinct categories in a row, `target_category` among them.
SceneSpec random_lineup(int width, int height, int target_category, std::uint64_t seed);

struct CorpusConfig {
    int videos = 40;
    std::uint64_t seed = 1;
    int width = 640;
    int height = 360;
    double fps = 25.0;
    GazeParams gaze;
    double jitter_px = 6.0;
    double blur_probability = 0.1;
    int texture_noise = 4;
};

struct CorpusVideo {
    std::string id;
    int category = 0;
    std::string split;
    int frames = 0;
};

/// Writes the full dataset layout under `root` (see dataset.hpp). Deterministic in the seed.
std::vector<CorpusVideo> generate_corpus(const std::filesystem::path& root, const CorpusConfig& cfg);

/// Stratified 60/20/20 assignment per class, rounding the validation and test shares.
std::vector<std::string> assign_splits(const std::vector<int>& categories, std::uint64_t seed);

}  // namespace egosal::sim
