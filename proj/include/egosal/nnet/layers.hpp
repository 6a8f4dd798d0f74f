#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "egosal/nnet/spec.hpp"
#include "egosal/nnet/tensor.hpp"

namespace egosal::nn {

enum class Mode { Train, Test };

/// A learnable array with its gradient accumulator.
template <typename T>
struct Param {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
    bool decay = true;  ///< weights take weight decay, biases do not
};

template <typename T>
class Layer {
public:
    Layer(LayerSpec spec, Shape in, Shape out) : spec_(std::move(spec)), in_(in), out_(out) {}
    virtual ~Layer() = default;

    const LayerSpec& spec() const { return spec_; }
    Shape input_shape() const { return in_; }
    Shape output_shape() const { return out_; }

    virtual void forward(const Tensor<T>& in, Tensor<T>& out, Mode mode, std::mt19937_64& rng) = 0;
    /// Adds parameter gradients into Param::grad and, if requested, writes dL/din.
    virtual void backward(const Tensor<T>& in, const Tensor<T>& out, const Tensor<T>& dout,
                          Tensor<T>& din, bool need_input_grad) = 0;
    virtual std::vector<Param<T>*> params() { return {}; }

protected:
    LayerSpec spec_;
    Shape in_;
    Shape out_;
};

template <typename T>
class ConvolutionLayer final : public Layer<T> {
public:
    ConvolutionLayer(const LayerSpec& spec, Shape in, Shape out);
    void forward(const Tensor<T>& in, Tensor<T>& out, Mode mode, std::mt19937_64& rng) override;
    void backward(const Tensor<T>& in, const Tensor<T>& out, const Tensor<T>& dout, Tensor<T>& din,
                  bool need_input_grad) override;
    std::vector<Param<T>*> params() override { return {&weights_, &bias_}; }

private:
    void im2col(const T* src);
    void col2im(T* dst) const;

    Param<T> weights_;  // filters x (C*k*k)
    Param<T> bias_;     // filters
    std::vector<T> col_;
    std::vector<T> dcol_;
};

template <typename T>
class FullyConnectedLayer final : public Layer<T> {
public:
    FullyConnectedLayer(const LayerSpec& spec, Shape in, Shape out);
    void forward(const Tensor<T>& in, Tensor<T>& out, Mode mode, std::mt19937_64& rng) override;
    void backward(const Tensor<T>& in, const Tensor<T>& out, const Tensor<T>& dout, Tensor<T>& din,
                  bool need_input_grad) override;
    std::vector<Param<T>*> params() override { return {&weights_, &bias_}; }

private:
    Param<T> weights_;  // outputs x inputs
    Param<T> bias_;
};

template <typename T>
class ReLULayer final : public Layer<T> {
public:
    using Layer<T>::Layer;
    void forward(const Tensor<T>& in, Tensor<T>& out, Mode mode, std::mt19937_64& rng) override;
    void backward(const Tensor<T>& in, const Tensor<T>& out, const Tensor<T>& dout, Tensor<T>& din,
                  bool need_input_grad) override;
};

template <typename T>
class MaxPoolLayer final : public Layer<T> {
public:
    using Layer<T>::Layer;
    void forward(const Tensor<T>& in, Tensor<T>& out, Mode mode, std::mt19937_64& rng) override;
    void backward(const Tensor<T>& in, const Tensor<T>& out, const Tensor<T>& dout, Tensor<T>& din,
                  bool need_input_grad) override;

private:
    std::vector<std::size_t> argmax_;  // flat input index per output element
};

/// Cross-channel local response normalisation:
/// out_c = in_c / (k + alpha/n * sum_{window} in_j^2)^beta
template <typename T>
class LRNLayer final : public Layer<T> {
public:
    using Layer<T>::Layer;
    void forward(const Tensor<T>& in, Tensor<T>& out, Mode mode, std::mt19937_64& rng) override;
    void backward(const Tensor<T>& in, const Tensor<T>& out, const Tensor<T>& dout, Tensor<T>& din,
                  bool need_input_grad) override;

private:
    std::vector<T> scale_;
};

/// Inverted dropout: masks and rescales by 1/(1-ratio) at train time, identity at test.
template <typename T>
class DropoutLayer final : public Layer<T> {
public:
    using Layer<T>::Layer;
    void forward(const Tensor<T>& in, Tensor<T>& out, Mode mode, std::mt19937_64& rng) override;
    void backward(const Tensor<T>& in, const Tensor<T>& out, const Tensor<T>& dout, Tensor<T>& din,
                  bool need_input_grad) override;

private:
    std::vector<T> mask_;
    bool last_train_ = false;
};

template <typename T>
class SoftMaxLayer final : public Layer<T> {
public:
    using Layer<T>::Layer;
    void forward(const Tensor<T>& in, Tensor<T>& out, Mode mode, std::mt19937_64& rng) override;
    /// Full Jacobian-vector product; the network fuses softmax with the loss instead.
    void backward(const Tensor<T>& in, const Tensor<T>& out, const Tensor<T>& dout, Tensor<T>& din,
                  bool need_input_grad) override;
};

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, const Shape& in, std::size_t index);

}  // namespace egosal::nn
