#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "egosal/nnet/layers.hpp"
#include "egosal/nnet/spec.hpp"

namespace egosal::nn {

/// Class probabilities for one input.
using ScoreVector = std::vector<double>;

/// Multinomial logistic loss of one prediction: -log(scores[label]).
double loss(const ScoreVector& scores, int label);

template <typename T>
class Network {
public:
    /// Weights drawn from N(0, init_std^2), biases set to each layer's bias_init.
    explicit Network(NetworkSpec spec, std::uint64_t seed = 0);

    Network(const Network& other);
    Network& operator=(const Network& other);
    Network(Network&&) noexcept = default;
    Network& operator=(Network&&) noexcept = default;

    const NetworkSpec& spec() const { return spec_; }
    int class_count() const { return spec_.class_count; }
    Shape input_shape() const { return spec_.input; }

    /// Probabilities, N x C x 1 x 1. Activations are cached for backward().
    const Tensor<T>& forward(const Tensor<T>& batch, Mode mode);

    /// Mean -log p(label) over the batch of the last forward pass.
    double data_loss(std::span<const int> labels) const;
    /// 0.5 * sum of squared weights (biases excluded).
    double regularizer() const;

    /// Gradients of mean data loss + weight_decay * regularizer, into Param::grad.
    void backward(std::span<const int> labels, double weight_decay);

    ScoreVector predict(const Tensor<T>& sample);

    std::vector<Param<T>*> params();
    std::vector<const Param<T>*> params() const;
    std::size_t layer_count() const { return layers_.size(); }
    Layer<T>& layer(std::size_t i) { return *layers_[i]; }

    /// Checked mode raises NonFiniteValue as soon as any activation or gradient is NaN/Inf.
    void set_checked(bool on) { checked_ = on; }
    void reseed_dropout(std::uint64_t seed) { rng_.seed(seed); }

private:
    void build();

    NetworkSpec spec_;
    std::vector<std::unique_ptr<Layer<T>>> layers_;
    std::vector<Tensor<T>> acts_;  // acts_[0] = input, acts_[i+1] = output of layer i
    std::vector<Tensor<T>> grads_;
    std::mt19937_64 rng_;
    bool checked_ = false;
};

extern template class Network<float>;
extern template class Network<double>;

}  // namespace egosal::nn
