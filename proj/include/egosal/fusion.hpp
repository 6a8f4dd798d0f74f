#pragma once

#include <string>
#include <vector>

#include "egosal/nnet/network.hpp"

namespace egosal::fusion {

using nn::ScoreVector;

struct ScoreEntry {
    int frame = 0;
    ScoreVector scores;
    /// Set for frames inside long blink gaps; skipped by default.
    bool low_confidence = false;
};

/// Per-frame class scores of one video, frames strictly increasing.
struct ScoreSequence {
    std::string video_id;
    std::vector<ScoreEntry> entries;

    void validate() const;
};

struct FusionOptions {
    bool exclude_low_confidence = true;
};

/// Index of the largest value; ties go to the lowest index and set `tie`.
int argmax(const ScoreVector& scores, bool* tie = nullptr);

struct MeanDecision {
    int category = 0;
    std::vector<double> sums;
    bool tie = false;
    int frames_used = 0;
    /// Winning class sum divided by frames_used.
    double top_score = 0.0;
};

struct MajorityDecision {
    int category = 0;
    std::vector<int> votes;
    bool tie = false;
};

struct WindowDecision {
    int frame = 0;
    int category = 0;
    bool tie = false;
};

/// Class with the largest summed score over the sequence.
MeanDecision fuse_mean(const ScoreSequence& seq, const FusionOptions& opts = {});
/// Most frequent per-frame argmax.
MajorityDecision fuse_majority(const ScoreSequence& seq, const FusionOptions& opts = {});
/// fuse_mean over the trailing `window` frames ending at each frame.
std::vector<WindowDecision> fuse_windowed(const ScoreSequence& seq, int window,
                                          const FusionOptions& opts = {});

/// Incremental trailing-window fusion for the online path.
class FusionBuffer {
public:
    FusionBuffer(int class_count, int window);

    WindowDecision push(int frame, const ScoreVector& scores);
    void reset();

private:
    int window_;
    std::vector<ScoreVector> ring_;
    std::vector<double> sums_;
    std::size_t next_ = 0;
    std::size_t filled_ = 0;
};

inline constexpr const char* kReportHeader =
    "video_id,n_frames,decision,decision_majority,tie,top_score";

std::string format_report_row(const std::string& video_id, const MeanDecision& mean,
                              const MajorityDecision& majority);

}  // namespace egosal::fusion
