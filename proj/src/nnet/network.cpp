#include "egosal/nnet/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "egosal/error.hpp"

namespace egosal::nn {

double loss(const ScoreVector& scores, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= scores.size()) {
        throw Error(Errc::LabelOutOfRange, "label " + std::to_string(label) + " with " +
                                               std::to_string(scores.size()) + " classes");
    }
    return -std::log(std::max(scores[label], std::numeric_limits<double>::min()));
}

template <typename T>
Network<T>::Network(NetworkSpec spec, std::uint64_t seed) : spec_(std::move(spec)), rng_(seed) {
    build();
    std::normal_distribution<double> gauss(0.0, spec_.init_std);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        auto ps = layers_[i]->params();
        if (ps.empty()) continue;
        for (auto& v : ps[0]->value.data) v = static_cast<T>(gauss(rng_));
        std::fill(ps[1]->value.data.begin(), ps[1]->value.data.end(),
                  static_cast<T>(layers_[i]->spec().bias_init));
    }
}

template <typename T>
void Network<T>::build() {
    infer_shapes(spec_);
    layers_.clear();
    Shape shape = spec_.input;
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
        layers_.push_back(make_layer<T>(spec_.layers[i], shape, i + 1));
        shape = layers_.back()->output_shape();
    }
    acts_.assign(layers_.size() + 1, {});
    grads_.assign(layers_.size() + 1, {});
}

template <typename T>
Network<T>::Network(const Network& other) : spec_(other.spec_), rng_(other.rng_), checked_(other.checked_) {
    build();
    auto dst = params();
    auto src = other.params();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i]->value = src[i]->value;
}

template <typename T>
Network<T>& Network<T>::operator=(const Network& other) {
    if (this != &other) {
        Network tmp(other);
        *this = std::move(tmp);
    }
    return *this;
}

template <typename T>
const Tensor<T>& Network<T>::forward(const Tensor<T>& batch, Mode mode) {
    if (batch.shape.size() != 4 || batch.shape[1] != spec_.input.c ||
        batch.shape[2] != spec_.input.h || batch.shape[3] != spec_.input.w) {
        std::string got;
        for (int d : batch.shape) got += std::to_string(d) + " ";
        throw Error(Errc::ShapeMismatch, "input shape [" + got + "] vs expected " + spec_.input.str());
    }
    acts_[0] = batch;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        layers_[i]->forward(acts_[i], acts_[i + 1], mode, rng_);
        if (checked_ && !acts_[i + 1].all_finite()) {
            throw Error(Errc::NonFiniteValue, "non-finite output from layer " + spec_.layers[i].name);
        }
    }
    return acts_.back();
}

template <typename T>
double Network<T>::data_loss(std::span<const int> labels) const {
    const auto& probs = acts_.back();
    const int n = probs.batch_size();
    if (static_cast<int>(labels.size()) != n) {
        throw Error(Errc::ShapeMismatch, "label count differs from batch size");
    }
    double total = 0.0;
    for (int b = 0; b < n; ++b) {
        const int label = labels[b];
        if (label < 0 || label >= spec_.class_count) {
            throw Error(Errc::LabelOutOfRange, "label " + std::to_string(label));
        }
        total -= std::log(std::max(static_cast<double>(probs.sample(b)[label]),
                                   std::numeric_limits<double>::min()));
    }
    return total / n;
}

template <typename T>
double Network<T>::regularizer() const {
    double sum = 0.0;
    for (const auto* p : params()) {
        if (!p->decay) continue;
        for (T v : p->value.data) sum += static_cast<double>(v) * v;
    }
    return 0.5 * sum;
}

template <typename T>
void Network<T>::backward(std::span<const int> labels, double weight_decay) {
    const auto& probs = acts_.back();
    const int n = probs.batch_size();
    const int c = spec_.class_count;
    if (static_cast<int>(labels.size()) != n) {
        throw Error(Errc::ShapeMismatch, "label count differs from batch size");
    }
    for (auto* p : params()) p->grad.zero();

    // Softmax fused with the loss: d(mean E)/d(logits) = (p - onehot) / N.
    const std::size_t last = layers_.size() - 1;
    Tensor<T>& dlogits = grads_[last];
    dlogits.reshape_like(probs.shape);
    for (int b = 0; b < n; ++b) {
        if (labels[b] < 0 || labels[b] >= c) {
            throw Error(Errc::LabelOutOfRange, "label " + std::to_string(labels[b]));
        }
        const T* p = probs.sample(b);
        T* d = dlogits.sample(b);
        for (int k = 0; k < c; ++k) d[k] = p[k] / static_cast<T>(n);
        d[labels[b]] -= T(1) / static_cast<T>(n);
    }
    for (std::size_t i = last; i-- > 0;) {
        layers_[i]->backward(acts_[i], acts_[i + 1], grads_[i + 1], grads_[i], i > 0);
        if (checked_ && i > 0 && !grads_[i].all_finite()) {
            throw Error(Errc::NonFiniteValue, "non-finite gradient into layer " + spec_.layers[i].name);
        }
    }
    if (weight_decay != 0.0) {
        const T lambda = static_cast<T>(weight_decay);
        for (auto* p : params()) {
            if (!p->decay) continue;
            for (std::size_t j = 0; j < p->grad.data.size(); ++j) {
                p->grad.data[j] += lambda * p->value.data[j];
            }
        }
    }
}

template <typename T>
ScoreVector Network<T>::predict(const Tensor<T>& sample) {
    Tensor<T> batch = sample;
    if (batch.shape.size() == 3) batch.shape.insert(batch.shape.begin(), 1);
    const auto& probs = forward(batch, Mode::Test);
    return ScoreVector(probs.data.begin(), probs.data.begin() + spec_.class_count);
}

template <typename T>
std::vector<Param<T>*> Network<T>::params() {
    std::vector<Param<T>*> out;
    for (auto& l : layers_) {
        for (auto* p : l->params()) out.push_back(p);
    }
    return out;
}

template <typename T>
std::vector<const Param<T>*> Network<T>::params() const {
    std::vector<const Param<T>*> out;
    for (const auto& l : layers_) {
        for (auto* p : l->params()) out.push_back(p);
    }
    return out;
}

template class Network<float>;
template class Network<double>;

}  // namespace egosal::nn
