#include "egosal/fusion.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "egosal/error.hpp"

namespace egosal::fusion {

void ScoreSequence::validate() const {
    if (entries.empty()) throw Error(Errc::EmptySequence, "video " + video_id + " has no scored frames");
    const std::size_t c = entries.front().scores.size();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].scores.size() != c || c == 0) {
            throw Error(Errc::ShapeMismatch, "score vectors of differing length in " + video_id);
        }
        if (i > 0 && entries[i].frame <= entries[i - 1].frame) {
            throw Error(Errc::InvalidConfig, "frame indices not increasing in " + video_id);
        }
    }
}

int argmax(const ScoreVector& scores, bool* tie) {
    int best = 0;
    bool tied = false;
    for (std::size_t k = 1; k < scores.size(); ++k) {
        if (scores[k] > scores[best]) {
            best = static_cast<int>(k);
            tied = false;
        } else if (scores[k] == scores[best]) {
            tied = true;
        }
    }
    if (tie) *tie = tied;
    return best;
}

namespace {

std::vector<const ScoreEntry*> used_entries(const ScoreSequence& seq, const FusionOptions& opts) {
    seq.validate();
    std::vector<const ScoreEntry*> used;
    for (const auto& e : seq.entries) {
        if (!(opts.exclude_low_confidence && e.low_confidence)) used.push_back(&e);
    }
    // Every frame flagged: fall back to all of them rather than return nothing.
    if (used.empty()) {
        for (const auto& e : seq.entries) used.push_back(&e);
    }
    return used;
}

MeanDecision decide(std::vector<double> sums, int frames) {
    MeanDecision d;
    d.category = argmax(sums, &d.tie);
    d.frames_used = frames;
    d.top_score = sums[d.category] / frames;
    d.sums = std::move(sums);
    return d;
}

}  // namespace

MeanDecision fuse_mean(const ScoreSequence& seq, const FusionOptions& opts) {
    const auto used = used_entries(seq, opts);
    std::vector<double> sums(used.front()->scores.size(), 0.0);
    for (const auto* e : used) {
        for (std::size_t k = 0; k < sums.size(); ++k) sums[k] += e->scores[k];
    }
    return decide(std::move(sums), static_cast<int>(used.size()));
}

MajorityDecision fuse_majority(const ScoreSequence& seq, const FusionOptions& opts) {
    const auto used = used_entries(seq, opts);
    MajorityDecision d;
    d.votes.assign(used.front()->scores.size(), 0);
    for (const auto* e : used) ++d.votes[argmax(e->scores)];
    int best = 0;
    for (std::size_t k = 1; k < d.votes.size(); ++k) {
        if (d.votes[k] > d.votes[best]) best = static_cast<int>(k);
    }
    d.category = best;
    d.tie = std::count(d.votes.begin(), d.votes.end(), d.votes[best]) > 1;
    return d;
}

std::vector<WindowDecision> fuse_windowed(const ScoreSequence& seq, int window,
                                          const FusionOptions& opts) {
    if (window < 1) throw Error(Errc::WindowTooSmall, "fusion window must be >= 1");
    const auto used = used_entries(seq, opts);
    FusionBuffer buffer(static_cast<int>(used.front()->scores.size()), window);
    std::vector<WindowDecision> out;
    out.reserve(used.size());
    for (const auto* e : used) out.push_back(buffer.push(e->frame, e->scores));
    return out;
}

FusionBuffer::FusionBuffer(int class_count, int window)
    : window_(window), sums_(static_cast<std::size_t>(std::max(class_count, 1)), 0.0) {
    if (window < 1) throw Error(Errc::WindowTooSmall, "fusion window must be >= 1");
    ring_.resize(static_cast<std::size_t>(window));
}

WindowDecision FusionBuffer::push(int frame, const ScoreVector& scores) {
    if (scores.size() != sums_.size()) {
        throw Error(Errc::ShapeMismatch, "score vector length differs from the buffer's class count");
    }
    ring_[next_] = scores;
    next_ = (next_ + 1) % ring_.size();
    filled_ = std::min(filled_ + 1, ring_.size());
    // Summed oldest to newest so a full-length window matches fuse_mean bit for bit.
    std::fill(sums_.begin(), sums_.end(), 0.0);
    const std::size_t start = (next_ + ring_.size() - filled_) % ring_.size();
    for (std::size_t i = 0; i < filled_; ++i) {
        const auto& s = ring_[(start + i) % ring_.size()];
        for (std::size_t k = 0; k < sums_.size(); ++k) sums_[k] += s[k];
    }
    WindowDecision d;
    d.frame = frame;
    d.category = argmax(sums_, &d.tie);
    return d;
}

void FusionBuffer::reset() {
    next_ = 0;
    filled_ = 0;
    std::fill(sums_.begin(), sums_.end(), 0.0);
}

std::string format_report_row(const std::string& video_id, const MeanDecision& mean,
                              const MajorityDecision& majority) {
    std::ostringstream out;
    out << video_id << ',' << mean.frames_used << ',' << mean.category << ',' << majority.category
        << ',' << (mean.tie ? 1 : 0) << ',' << std::setprecision(6) << std::fixed << mean.top_score;
    return out.str();
}

}  // namespace egosal::fusion
