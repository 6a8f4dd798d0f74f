#include "egosal/gaze.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "egosal/error.hpp"
#include "egosal/text_io.hpp"

namespace egosal::gaze {

std::size_t GazeTrack::valid_count() const {
    return static_cast<std::size_t>(
        std::count_if(samples.begin(), samples.end(), [](const GazeSample& s) { return s.valid; }));
}

FrameClock FrameClock::uniform(std::size_t frame_count, double rate_hz, double t0_ms) {
    FrameClock clock;
    clock.rate_hz = rate_hz;
    clock.frame_times_ms.reserve(frame_count);
    for (std::size_t i = 0; i < frame_count; ++i) {
        clock.frame_times_ms.push_back(t0_ms + 1000.0 * static_cast<double>(i) / rate_hz);
    }
    return clock;
}

NaturalCubicSpline::NaturalCubicSpline(std::vector<double> knots, std::vector<double> values)
    : knots_(std::move(knots)), values_(std::move(values)), second_(knots_.size(), 0.0) {
    const std::size_t n = knots_.size();
    if (n < 2 || values_.size() != n) {
        throw Error(Errc::InsufficientSamples, "spline needs at least two knots");
    }
    if (n == 2) return;
    // Tridiagonal system for the interior second derivatives (Thomas algorithm).
    const std::size_t m = n - 2;
    std::vector<double> diag(m), upper(m), rhs(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double h0 = knots_[i + 1] - knots_[i];
        const double h1 = knots_[i + 2] - knots_[i + 1];
        diag[i] = 2.0 * (h0 + h1);
        upper[i] = h1;
        rhs[i] = 6.0 * ((values_[i + 2] - values_[i + 1]) / h1 - (values_[i + 1] - values_[i]) / h0);
    }
    for (std::size_t i = 1; i < m; ++i) {
        const double lower = knots_[i + 1] - knots_[i];
        const double w = lower / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    second_[m] = rhs[m - 1] / diag[m - 1];
    for (std::size_t i = m - 1; i-- > 0;) {
        second_[i + 1] = (rhs[i] - upper[i] * second_[i + 2]) / diag[i];
    }
}

double NaturalCubicSpline::operator()(double t) const {
    auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
    std::size_t hi = static_cast<std::size_t>(it - knots_.begin());
    hi = std::clamp<std::size_t>(hi, 1, knots_.size() - 1);
    const std::size_t lo = hi - 1;
    const double h = knots_[hi] - knots_[lo];
    const double a = (knots_[hi] - t) / h;
    const double b = (t - knots_[lo]) / h;
    return a * values_[lo] + b * values_[hi] +
           ((a * a * a - a) * second_[lo] + (b * b * b - b) * second_[hi]) * (h * h) / 6.0;
}

namespace {

double parse_field(const std::string& field, const std::string& source, int line_no,
                   const char* name) {
    try {
        std::size_t used = 0;
        const double v = std::stod(field, &used);
        if (used != field.size() || !std::isfinite(v)) throw std::invalid_argument(name);
        return v;
    } catch (const std::exception&) {
        throw Error(Errc::MalformedRow, source + ":" + std::to_string(line_no) + ": bad " + name +
                                            " '" + field + "'");
    }
}

}  // namespace

GazeTrack parse_gaze_csv(std::string_view text, const std::string& source_name) {
    GazeTrack track;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        const auto fields = split_csv(line);
        if (fields.size() != 5) {
            throw Error(Errc::MalformedRow, source_name + ":" + std::to_string(line_no) +
                                                ": expected 5 fields, got " +
                                                std::to_string(fields.size()));
        }
        GazeSample s;
        s.t_ms = parse_field(fields[0], source_name, line_no, "t_ms");
        if (fields[4] == "1") {
            s.valid = true;
        } else if (fields[4] == "0") {
            s.valid = false;
        } else {
            throw Error(Errc::MalformedRow,
                        source_name + ":" + std::to_string(line_no) + ": valid must be 0 or 1");
        }
        if (s.valid) {
            s.x = parse_field(fields[1], source_name, line_no, "x_px");
            s.y = parse_field(fields[2], source_name, line_no, "y_px");
            s.d = parse_field(fields[3], source_name, line_no, "d_mm");
            if (s.d <= 0.0) {
                throw Error(Errc::MalformedRow,
                            source_name + ":" + std::to_string(line_no) + ": d_mm must be > 0");
            }
        }
        if (!track.samples.empty() && s.t_ms <= track.samples.back().t_ms) {
            throw Error(Errc::NonMonotonicTime,
                        source_name + ":" + std::to_string(line_no) + ": t=" + fields[0] +
                            " does not follow t=" + std::to_string(track.samples.back().t_ms));
        }
        track.samples.push_back(s);
    }
    if (track.samples.empty()) throw Error(Errc::EmptyFile, source_name + ": no gaze rows");
    return track;
}

GazeTrack parse_gaze_file(const std::filesystem::path& path) {
    return parse_gaze_csv(read_text_file(path), path.string());
}

std::string format_gaze_csv(const GazeTrack& track) {
    std::ostringstream out;
    out << "t_ms,x_px,y_px,d_mm,valid\n";
    out << std::setprecision(10);
    for (const auto& s : track.samples) {
        out << s.t_ms << ',';
        if (s.valid) {
            out << s.x << ',' << s.y << ',' << s.d << ",1\n";
        } else {
            out << ",,,0\n";
        }
    }
    return out.str();
}

std::vector<SyncedFixation> interpolate_track(const GazeTrack& track, const FrameClock& clock,
                                              const InterpolationOptions& opts) {
    std::vector<double> t, xs, ys, ds;
    for (const auto& s : track.samples) {
        if (!s.valid) continue;
        t.push_back(s.t_ms);
        xs.push_back(s.x);
        ys.push_back(s.y);
        ds.push_back(s.d);
    }
    if (t.size() < 4) {
        throw Error(Errc::InsufficientSamples,
                    "cubic interpolation needs 4 valid samples, have " + std::to_string(t.size()));
    }
    if (clock.frame_times_ms.empty()) {
        throw Error(Errc::InsufficientSamples, "frame clock is empty");
    }

    const NaturalCubicSpline sx(t, xs), sy(t, ys), sd(t, ds);
    const double half_period = 500.0 / track.nominal_rate_hz;
    const double max_x = static_cast<double>(opts.frame_width - 1);
    const double max_y = static_cast<double>(opts.frame_height - 1);

    std::vector<SyncedFixation> out;
    for (std::size_t f = 0; f < clock.frame_times_ms.size(); ++f) {
        const double ft = clock.frame_times_ms[f];
        if (ft < t.front() || ft > t.back()) continue;

        auto hi_it = std::lower_bound(t.begin(), t.end(), ft);
        const std::size_t hi = static_cast<std::size_t>(hi_it - t.begin());
        const std::size_t lo = hi == 0 ? 0 : hi - 1;
        std::size_t nearest = hi;
        if (hi >= t.size() || (hi > 0 && ft - t[lo] < t[hi] - ft)) nearest = lo;
        const double nearest_dt = std::abs(t[nearest] - ft);

        SyncedFixation fx;
        fx.frame_index = static_cast<int>(f);
        // The spline is exact at its knots, so coinciding frames reproduce the raw sample.
        fx.x = sx(ft);
        fx.y = sy(ft);
        fx.d = sd(ft);
        fx.interpolated = nearest_dt > half_period;
        if (fx.interpolated && hi < t.size() && hi > 0) {
            fx.low_confidence = (t[hi] - t[lo]) > opts.max_bridged_gap_ms;
        }
        fx.x = std::clamp(fx.x, 0.0, max_x);
        fx.y = std::clamp(fx.y, 0.0, max_y);
        // Overshoot across a long gap can drive the distance negative.
        fx.d = std::max(fx.d, 1.0);
        out.push_back(fx);
    }
    return out;
}

}  // namespace egosal::gaze
