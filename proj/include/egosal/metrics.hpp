#pragma once

#include <chrono>
#include <map>
#include <string>
#include <vector>

namespace egosal::metrics {

/// One classification outcome: a whole video after fusion, or a single frame without it.
struct Decision {
    std::string video_id;
    int frame = -1;  ///< -1 for video-level decisions
    int predicted = 0;
    int truth = 0;
    double score = 0.0;
};

/// Precision averaged at each correct retrieval over the score-ranked decisions
/// predicted as `category`, divided by the number of ground-truth positives.
double average_precision(const std::vector<Decision>& decisions, int category);

struct MapResult {
    double map = 0.0;
    /// Classes with at least one positive, in increasing order.
    std::map<int, double> per_class;
};

/// Mean AP over object classes 1..class_count-1; classes without positives are skipped.
MapResult mean_average_precision(const std::vector<Decision>& decisions, int class_count,
                                 int background = 0);

double accuracy(const std::vector<Decision>& decisions);

class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int class_count);

    void add(int truth, int predicted);
    long long at(int truth, int predicted) const;
    long long row_sum(int truth) const;
    long long trace() const;
    long long total() const;
    int class_count() const { return n_; }
    std::string csv() const;

private:
    int n_;
    std::vector<long long> cells_;
};

struct StageStats {
    std::size_t count = 0;
    double mean_ms = 0.0;
    double p95_ms = 0.0;
    double max_ms = 0.0;
};

/// Per-frame wall-clock timings of the online path, grouped by stage.
class LatencyProfile {
public:
    static constexpr const char* kStages[4] = {"saliency", "patch", "inference", "fusion"};

    void begin_frame();
    void record(const std::string& stage, double ms);
    /// Closes the current frame; its total is the sum of the stages recorded since begin_frame.
    void end_frame();

    std::size_t frame_count() const { return totals_.size(); }
    StageStats stage(const std::string& name) const;
    StageStats total() const;

    /// Throws BudgetExceeded when the mean per-frame total exceeds `budget_ms`.
    void check_budget(double budget_ms) const;
    std::string csv() const;

private:
    std::map<std::string, std::vector<double>> stages_;
    std::vector<double> totals_;
    double current_ = 0.0;
    bool open_ = false;
};

/// Adds the elapsed steady-clock time to `stage` on destruction.
class StageTimer {
public:
    StageTimer(LatencyProfile& profile, std::string stage);
    ~StageTimer();
    StageTimer(const StageTimer&) = delete;
    StageTimer& operator=(const StageTimer&) = delete;

private:
    LatencyProfile& profile_;
    std::string stage_;
    std::chrono::steady_clock::time_point start_;
};

StageStats summarize(std::vector<double> samples_ms);

struct EvalReport {
    MapResult fused;
    MapResult unfused;
    double frame_accuracy = 0.0;
    double video_accuracy = 0.0;
    ConfusionMatrix confusion{1};
    LatencyProfile latency;
    std::vector<std::string> class_names;

    /// Key/metric/value rows.
    std::string summary_csv() const;
    /// Bar-chart data: class,ap_unfused,ap_fused.
    std::string ap_plot_data() const;
};

}  // namespace egosal::metrics
