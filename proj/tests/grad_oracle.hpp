#pragma once

// Central finite-difference oracle for layer and network gradients. Test-only:
// it drives layers purely through forward() and never looks at backward() internals.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "egosal/nnet/layers.hpp"
#include "egosal/nnet/network.hpp"

namespace egosal::testing {

struct GradReport {
    double worst_rel = 0.0;
    std::size_t checked = 0;
    std::string worst_where;
};

/// |a - n| / max(|a|, |n|); pairs where both magnitudes sit below `floor` are
/// compared absolutely against `floor * 1e-3` instead, since their relative
/// error is pure rounding noise.
inline double rel_error(double analytic, double numeric, double floor = 1e-7) {
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    const double diff = std::abs(analytic - numeric);
    if (scale < floor) return diff <= floor * 1e-3 ? 0.0 : diff / floor;
    return diff / scale;
}

inline void note(GradReport& r, double err, const std::string& where) {
    ++r.checked;
    if (err > r.worst_rel) {
        r.worst_rel = err;
        r.worst_where = where;
    }
}

/// Checks d(sum(out * probe))/d(in) and d/d(params) for a single layer.
/// `reseed` is applied before every forward so stochastic layers see a fixed mask.
inline GradReport check_layer(nn::Layer<double>& layer, nn::Tensor<double> input,
                              std::uint64_t probe_seed, double h = 1e-5,
                              nn::Mode mode = nn::Mode::Train) {
    std::mt19937_64 rng;
    auto run = [&](const nn::Tensor<double>& in) {
        rng.seed(1234);
        nn::Tensor<double> out;
        layer.forward(in, out, mode, rng);
        return out;
    };
    const nn::Tensor<double> out = run(input);
    nn::Tensor<double> probe(out.shape);
    std::mt19937_64 prng(probe_seed);
    std::normal_distribution<double> g(0.0, 1.0);
    for (auto& v : probe.data) v = g(prng);
    auto objective = [&](const nn::Tensor<double>& in) {
        const auto o = run(in);
        double s = 0.0;
        for (std::size_t i = 0; i < o.data.size(); ++i) s += o.data[i] * probe.data[i];
        return s;
    };

    for (auto* p : layer.params()) p->grad.zero();
    run(input);
    nn::Tensor<double> din;
    layer.backward(input, out, probe, din, true);

    GradReport report;
    for (std::size_t i = 0; i < input.data.size(); ++i) {
        const double saved = input.data[i];
        input.data[i] = saved + h;
        const double fp = objective(input);
        input.data[i] = saved - h;
        const double fm = objective(input);
        input.data[i] = saved;
        note(report, rel_error(din.data[i], (fp - fm) / (2 * h)), "input[" + std::to_string(i) + "]");
    }
    for (auto* p : layer.params()) {
        for (std::size_t i = 0; i < p->value.data.size(); ++i) {
            const double saved = p->value.data[i];
            p->value.data[i] = saved + h;
            const double fp = objective(input);
            p->value.data[i] = saved - h;
            const double fm = objective(input);
            p->value.data[i] = saved;
            note(report, rel_error(p->grad.data[i], (fp - fm) / (2 * h)),
                 p->name + "[" + std::to_string(i) + "]");
        }
    }
    return report;
}

/// Checks the whole-network objective mean(-log p_label) + lambda * 0.5 * |W|^2,
/// i.e. the softmax + loss composite plus weight decay, against every parameter.
inline GradReport check_network(nn::Network<double>& net, const nn::Tensor<double>& input,
                                const std::vector<int>& labels, double lambda, double h = 1e-5) {
    auto objective = [&] {
        net.reseed_dropout(99);
        net.forward(input, nn::Mode::Train);
        return net.data_loss(labels) + lambda * net.regularizer();
    };
    objective();
    net.backward(labels, lambda);
    std::vector<std::vector<double>> analytic;
    for (auto* p : net.params()) analytic.push_back(p->grad.data);

    GradReport report;
    auto params = net.params();
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto* p = params[k];
        for (std::size_t i = 0; i < p->value.data.size(); ++i) {
            const double saved = p->value.data[i];
            p->value.data[i] = saved + h;
            const double fp = objective();
            p->value.data[i] = saved - h;
            const double fm = objective();
            p->value.data[i] = saved;
            note(report, rel_error(analytic[k][i], (fp - fm) / (2 * h)),
                 p->name + "[" + std::to_string(i) + "]");
        }
    }
    return report;
}

/// Uniform values in [-1,1] pushed at least `gap` away from zero, so ReLU kinks
/// stay outside the finite-difference stencil.
inline nn::Tensor<double> random_tensor(std::vector<int> dims, std::uint64_t seed, double gap = 0.0) {
    nn::Tensor<double> t(std::move(dims));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& v : t.data) {
        double x = u(rng);
        if (std::abs(x) < gap) x = x < 0 ? x - gap : x + gap;
        v = x;
    }
    return t;
}

/// Distinct values with pairwise gaps well above h, shuffled, so max-pool argmaxes are stable.
inline nn::Tensor<double> distinct_tensor(std::vector<int> dims, std::uint64_t seed) {
    nn::Tensor<double> t(std::move(dims));
    for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] = 0.01 * static_cast<double>(i);
    std::mt19937_64 rng(seed);
    std::shuffle(t.data.begin(), t.data.end(), rng);
    return t;
}

}  // namespace egosal::testing
