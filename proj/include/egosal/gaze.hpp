#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace egosal::gaze {

/// One eye-tracker record. x, y and d are meaningful only when `valid`.
struct GazeSample {
    double t_ms = 0.0;
    double x = 0.0;  ///< pixels, image plane
    double y = 0.0;
    double d = 0.0;  ///< millimetres to the fixated surface
    bool valid = false;

    friend bool operator==(const GazeSample&, const GazeSample&) = default;
};

struct GazeTrack {
    std::vector<GazeSample> samples;
    double nominal_rate_hz = 50.0;

    std::size_t valid_count() const;
};

struct FrameClock {
    std::vector<double> frame_times_ms;
    double rate_hz = 25.0;

    static FrameClock uniform(std::size_t frame_count, double rate_hz = 25.0, double t0_ms = 0.0);
};

struct SyncedFixation {
    int frame_index = 0;
    double x = 0.0;
    double y = 0.0;
    double d = 0.0;
    /// No valid raw sample within half a gaze period of the frame time.
    bool interpolated = false;
    /// Frame sits inside a blink gap longer than the bridging limit.
    bool low_confidence = false;
};

/// Natural cubic spline through (t_i, y_i): second derivative vanishes at both ends.
class NaturalCubicSpline {
public:
    NaturalCubicSpline(std::vector<double> knots, std::vector<double> values);

    double operator()(double t) const;
    double front() const { return knots_.front(); }
    double back() const { return knots_.back(); }

private:
    std::vector<double> knots_;
    std::vector<double> values_;
    std::vector<double> second_;  // second derivatives at the knots
};

struct InterpolationOptions {
    int frame_width = 1920;
    int frame_height = 1080;
    double max_bridged_gap_ms = 500.0;
};

GazeTrack parse_gaze_csv(std::string_view text, const std::string& source_name = "<memory>");
GazeTrack parse_gaze_file(const std::filesystem::path& path);
std::string format_gaze_csv(const GazeTrack& track);

/// Resamples the valid gaze onto the frame clock. Frames outside
/// [first valid t, last valid t] are dropped, never extrapolated.
std::vector<SyncedFixation> interpolate_track(const GazeTrack& track, const FrameClock& clock,
                                              const InterpolationOptions& opts = {});

}  // namespace egosal::gaze
