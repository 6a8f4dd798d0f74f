#include "egosal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "egosal/error.hpp"

namespace egosal::metrics {

double average_precision(const std::vector<Decision>& decisions, int category) {
    const auto positives = std::count_if(decisions.begin(), decisions.end(),
                                         [&](const Decision& d) { return d.truth == category; });
    if (positives == 0) {
        throw Error(Errc::NoPositives, "class " + std::to_string(category) + " has no positives");
    }
    std::vector<const Decision*> ranked;
    for (const auto& d : decisions) {
        if (d.predicted == category) ranked.push_back(&d);
    }
    // Stable: equal scores keep input order.
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const Decision* a, const Decision* b) { return a->score > b->score; });
    double sum = 0.0;
    long hits = 0;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        if (ranked[i]->truth != category) continue;
        ++hits;
        sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
    return sum / static_cast<double>(positives);
}

MapResult mean_average_precision(const std::vector<Decision>& decisions, int class_count,
                                 int background) {
    MapResult r;
    for (int c = 0; c < class_count; ++c) {
        if (c == background) continue;
        const bool any = std::any_of(decisions.begin(), decisions.end(),
                                     [&](const Decision& d) { return d.truth == c; });
        if (any) r.per_class[c] = average_precision(decisions, c);
    }
    if (r.per_class.empty()) throw Error(Errc::NoPositives, "no object class has positives");
    double sum = 0.0;
    for (const auto& [c, ap] : r.per_class) sum += ap;
    r.map = sum / static_cast<double>(r.per_class.size());
    return r;
}

double accuracy(const std::vector<Decision>& decisions) {
    if (decisions.empty()) throw Error(Errc::NoFrames, "accuracy of an empty decision list");
    const auto ok = std::count_if(decisions.begin(), decisions.end(),
                                  [](const Decision& d) { return d.predicted == d.truth; });
    return static_cast<double>(ok) / static_cast<double>(decisions.size());
}

ConfusionMatrix::ConfusionMatrix(int class_count)
    : n_(class_count), cells_(static_cast<std::size_t>(class_count) * class_count, 0) {}

void ConfusionMatrix::add(int truth, int predicted) {
    if (truth < 0 || truth >= n_ || predicted < 0 || predicted >= n_) {
        throw Error(Errc::LabelOutOfRange, "confusion entry out of range");
    }
    ++cells_[static_cast<std::size_t>(truth) * n_ + predicted];
}

long long ConfusionMatrix::at(int truth, int predicted) const {
    return cells_[static_cast<std::size_t>(truth) * n_ + predicted];
}

long long ConfusionMatrix::row_sum(int truth) const {
    long long s = 0;
    for (int p = 0; p < n_; ++p) s += at(truth, p);
    return s;
}

long long ConfusionMatrix::trace() const {
    long long s = 0;
    for (int c = 0; c < n_; ++c) s += at(c, c);
    return s;
}

long long ConfusionMatrix::total() const {
    return std::accumulate(cells_.begin(), cells_.end(), 0LL);
}

std::string ConfusionMatrix::csv() const {
    std::ostringstream out;
    out << "truth\\predicted";
    for (int p = 0; p < n_; ++p) out << ',' << p;
    out << '\n';
    for (int t = 0; t < n_; ++t) {
        out << t;
        for (int p = 0; p < n_; ++p) out << ',' << at(t, p);
        out << '\n';
    }
    return out.str();
}

StageStats summarize(std::vector<double> samples_ms) {
    StageStats s;
    s.count = samples_ms.size();
    if (samples_ms.empty()) return s;
    std::sort(samples_ms.begin(), samples_ms.end());
    s.mean_ms = std::accumulate(samples_ms.begin(), samples_ms.end(), 0.0) / static_cast<double>(s.count);
    // Nearest-rank percentile.
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(s.count)));
    s.p95_ms = samples_ms[std::max<std::size_t>(rank, 1) - 1];
    s.max_ms = samples_ms.back();
    return s;
}

void LatencyProfile::begin_frame() {
    current_ = 0.0;
    open_ = true;
}

void LatencyProfile::record(const std::string& stage, double ms) {
    stages_[stage].push_back(ms);
    current_ += ms;
}

void LatencyProfile::end_frame() {
    if (!open_) return;
    totals_.push_back(current_);
    open_ = false;
}

StageStats LatencyProfile::stage(const std::string& name) const {
    auto it = stages_.find(name);
    return it == stages_.end() ? StageStats{} : summarize(it->second);
}

StageStats LatencyProfile::total() const {
    if (totals_.empty()) throw Error(Errc::NoFrames, "latency profile holds no frames");
    return summarize(totals_);
}

void LatencyProfile::check_budget(double budget_ms) const {
    const auto t = total();
    if (t.mean_ms > budget_ms) {
        std::ostringstream msg;
        msg << "mean per-frame latency " << t.mean_ms << " ms exceeds " << budget_ms << " ms";
        throw Error(Errc::BudgetExceeded, msg.str());
    }
}

std::string LatencyProfile::csv() const {
    std::ostringstream out;
    out << std::fixed << std::setprecision(4);
    out << "stage,count,mean_ms,p95_ms,max_ms\n";
    auto row = [&](const std::string& name, const StageStats& s) {
        out << name << ',' << s.count << ',' << s.mean_ms << ',' << s.p95_ms << ',' << s.max_ms << '\n';
    };
    for (const char* name : kStages) row(name, stage(name));
    for (const auto& [name, samples] : stages_) {
        if (std::find_if(std::begin(kStages), std::end(kStages),
                         [&](const char* k) { return name == k; }) == std::end(kStages)) {
            row(name, summarize(samples));
        }
    }
    if (!totals_.empty()) row("total", total());
    return out.str();
}

StageTimer::StageTimer(LatencyProfile& profile, std::string stage)
    : profile_(profile), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {}

StageTimer::~StageTimer() {
    const auto elapsed = std::chrono::steady_clock::now() - start_;
    profile_.record(stage_, std::chrono::duration<double, std::milli>(elapsed).count());
}

std::string EvalReport::summary_csv() const {
    std::ostringstream out;
    out << std::setprecision(6) << std::fixed;
    out << "metric,value\n";
    out << "map_fused," << fused.map << '\n';
    out << "map_unfused," << unfused.map << '\n';
    out << "frame_accuracy," << frame_accuracy << '\n';
    out << "video_accuracy," << video_accuracy << '\n';
    if (latency.frame_count() > 0) {
        const auto t = latency.total();
        out << "latency_frames," << latency.frame_count() << '\n';
        out << "latency_mean_ms," << t.mean_ms << '\n';
        out << "latency_p95_ms," << t.p95_ms << '\n';
        out << "latency_max_ms," << t.max_ms << '\n';
    }
    return out.str();
}

std::string EvalReport::ap_plot_data() const {
    std::ostringstream out;
    out << std::setprecision(6) << std::fixed;
    out << "class,name,ap_unfused,ap_fused\n";
    std::map<int, std::pair<double, double>> rows;
    for (const auto& [c, ap] : unfused.per_class) rows[c].first = ap;
    for (const auto& [c, ap] : fused.per_class) rows[c].second = ap;
    for (const auto& [c, v] : rows) {
        const std::string name =
            c < static_cast<int>(class_names.size()) ? class_names[c] : std::to_string(c);
        out << c << ',' << name << ',' << v.first << ',' << v.second << '\n';
    }
    out << "mean,mAP," << unfused.map << ',' << fused.map << '\n';
    return out.str();
}

}  // namespace egosal::metrics
