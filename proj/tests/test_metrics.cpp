#include <cmath>
#include <random>
#include <thread>

#include "doctest.h"
#include "egosal/error.hpp"
#include "egosal/metrics.hpp"

using namespace egosal;
using namespace egosal::metrics;

namespace {

Decision dec(int predicted, int truth, double score) {
    return Decision{"v", -1, predicted, truth, score};
}

// Brute force: for every correct retrieval, count by pairwise comparison how many
// retrieved items rank at or above it (higher score, or equal score earlier in the list).
double ap_oracle(const std::vector<Decision>& ds, int c) {
    double positives = 0;
    for (const auto& d : ds) positives += d.truth == c ? 1 : 0;
    double sum = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds[i].predicted != c || ds[i].truth != c) continue;
        double above = 0, hits_above = 0;
        for (std::size_t j = 0; j < ds.size(); ++j) {
            if (ds[j].predicted != c) continue;
            const bool ahead = ds[j].score > ds[i].score || (ds[j].score == ds[i].score && j <= i);
            if (!ahead) continue;
            above += 1;
            hits_above += ds[j].truth == c ? 1 : 0;
        }
        sum += hits_above / above;
    }
    return sum / positives;
}

std::vector<Decision> random_decisions(std::mt19937_64& rng, int n, int classes) {
    std::uniform_int_distribution<int> cls(1, classes - 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Decision> ds;
    for (int i = 0; i < n; ++i) {
        const int t = cls(rng);
        ds.push_back(dec(u(rng) < 0.6 ? t : cls(rng), t, u(rng)));
    }
    return ds;
}

}  // namespace

TEST_CASE("average precision examples") {
    CHECK(average_precision({dec(2, 2, 0.1), dec(2, 2, 0.9), dec(3, 3, 0.5)}, 2) == 1.0);
    const std::vector<Decision> ranked = {dec(1, 1, 0.9), dec(1, 2, 0.8), dec(1, 1, 0.7)};
    CHECK(average_precision(ranked, 1) == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));
    CHECK(average_precision(ranked, 1) == doctest::Approx(0.8333).epsilon(1e-3));
    // a positive never retrieved counts as zero precision
    CHECK(average_precision({dec(1, 1, 0.9), dec(2, 1, 0.8)}, 1) == doctest::Approx(0.5));
    CHECK_THROWS_AS(average_precision(ranked, 4), Error);
}

TEST_CASE("average precision matches the brute-force oracle") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 100; ++trial) {
        const auto ds = random_decisions(rng, 30, 5);
        for (int c = 1; c < 5; ++c) {
            bool any = false;
            for (const auto& d : ds) any |= d.truth == c;
            if (!any) continue;
            CHECK(average_precision(ds, c) == doctest::Approx(ap_oracle(ds, c)).epsilon(1e-12));
        }
    }
}

TEST_CASE("AP is invariant under strictly monotone score transforms") {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 100; ++trial) {
        auto ds = random_decisions(rng, 25, 4);
        auto transformed = ds;
        for (auto& d : transformed) d.score = std::exp(3.0 * d.score) - 7.0;
        const auto a = mean_average_precision(ds, 4);
        const auto b = mean_average_precision(transformed, 4);
        CHECK(a.map == b.map);
    }
}

TEST_CASE("mean average precision") {
    SUBCASE("perfect classifier") {
        std::vector<Decision> ds;
        for (int c = 1; c < 9; ++c) ds.push_back(dec(c, c, 0.5 + 0.01 * c));
        CHECK(mean_average_precision(ds, 9).map == 1.0);
    }
    SUBCASE("constant classifier equals the oracle value") {
        std::mt19937_64 rng(23);
        auto ds = random_decisions(rng, 40, 5);
        for (auto& d : ds) d.predicted = 2;
        double expected = 0;
        int classes = 0;
        for (int c = 1; c < 5; ++c) {
            bool any = false;
            for (const auto& d : ds) any |= d.truth == c;
            if (!any) continue;
            ++classes;
            expected += ap_oracle(ds, c);
        }
        CHECK(mean_average_precision(ds, 5).map == doctest::Approx(expected / classes).epsilon(1e-12));
    }
    SUBCASE("background and absent classes are skipped") {
        const auto r = mean_average_precision({dec(0, 0, 0.9), dec(1, 1, 0.8), dec(0, 2, 0.4)}, 4);
        CHECK(r.per_class.size() == 2);
        CHECK(r.per_class.count(0) == 0);
        CHECK(r.per_class.at(1) == 1.0);
        CHECK(r.per_class.at(2) == 0.0);
        CHECK(r.map == 0.5);
    }
}

TEST_CASE("accuracy and confusion matrix") {
    std::mt19937_64 rng(24);
    const auto ds = random_decisions(rng, 200, 6);
    ConfusionMatrix cm(6);
    long correct = 0;
    for (const auto& d : ds) {
        cm.add(d.truth, d.predicted);
        correct += d.truth == d.predicted ? 1 : 0;
    }
    CHECK(cm.trace() == correct);
    CHECK(cm.total() == 200);
    for (int c = 0; c < 6; ++c) {
        long support = 0;
        for (const auto& d : ds) support += d.truth == c ? 1 : 0;
        CHECK(cm.row_sum(c) == support);
    }
    CHECK(accuracy(ds) == doctest::Approx(correct / 200.0));
    CHECK_THROWS_AS(accuracy({}), Error);
    CHECK_THROWS_AS(cm.add(6, 0), Error);
    CHECK(cm.csv().rfind("truth\\predicted,0,1,2,3,4,5\n", 0) == 0);
}

TEST_CASE("latency profile") {
    LatencyProfile profile;
    CHECK_THROWS_AS(profile.total(), Error);
    for (int i = 1; i <= 100; ++i) {
        profile.begin_frame();
        profile.record("saliency", i);
        profile.record("inference", 2.0);
        profile.end_frame();
    }
    CHECK(profile.frame_count() == 100);
    const auto s = profile.stage("saliency");
    CHECK(s.mean_ms == doctest::Approx(50.5));
    CHECK(s.p95_ms == 95.0);
    CHECK(s.max_ms == 100.0);
    CHECK(profile.total().mean_ms == doctest::Approx(52.5));
    CHECK_NOTHROW(profile.check_budget(250));
    try {
        profile.check_budget(10);
        FAIL("expected BudgetExceeded");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::BudgetExceeded);
    }
    CHECK(profile.csv().find("total,100,52.5000") != std::string::npos);

    LatencyProfile timed;
    timed.begin_frame();
    {
        StageTimer t(timed, "patch");
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    timed.end_frame();
    CHECK(timed.stage("patch").mean_ms >= 4.5);
}

TEST_CASE("report files") {
    EvalReport r;
    r.fused.map = 1.0;
    r.fused.per_class = {{1, 1.0}, {2, 1.0}};
    r.unfused.map = 0.75;
    r.unfused.per_class = {{1, 0.5}, {2, 1.0}};
    r.class_names = {"background", "cube", "cylinder"};
    const auto plot = r.ap_plot_data();
    CHECK(plot.find("1,cube,0.500000,1.000000") != std::string::npos);
    CHECK(plot.find("mean,mAP,0.750000,1.000000") != std::string::npos);
    CHECK(r.summary_csv().find("map_fused,1.000000") != std::string::npos);
}
