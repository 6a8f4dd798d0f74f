#include "egosal/nnet/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "egosal/error.hpp"

namespace egosal::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using VecMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;

template <typename T>
Param<T> make_param(std::string name, std::vector<int> dims, bool decay) {
    Param<T> p;
    p.name = std::move(name);
    p.value = Tensor<T>(dims);
    p.grad = Tensor<T>(std::move(dims));
    p.decay = decay;
    return p;
}

template <typename T>
void shape_like(Tensor<T>& t, int n, const Shape& s) {
    t.reshape_like({n, s.c, s.h, s.w});
}

}  // namespace

// ---------------------------------------------------------------- Convolution

template <typename T>
ConvolutionLayer<T>::ConvolutionLayer(const LayerSpec& spec, Shape in, Shape out)
    : Layer<T>(spec, in, out) {
    const int patch = in.c * spec.kernel * spec.kernel;
    weights_ = make_param<T>(spec.name + ".weights", {spec.filters, patch}, true);
    bias_ = make_param<T>(spec.name + ".bias", {spec.filters}, false);
    col_.resize(static_cast<std::size_t>(patch) * out.h * out.w);
    dcol_.resize(col_.size());
}

template <typename T>
void ConvolutionLayer<T>::im2col(const T* src) {
    const auto& s = this->spec_;
    const int k = s.kernel, ih = this->in_.h, iw = this->in_.w;
    const int oh = this->out_.h, ow = this->out_.w;
    T* dst = col_.data();
    for (int c = 0; c < this->in_.c; ++c) {
        const T* plane = src + static_cast<std::size_t>(c) * ih * iw;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                for (int oy = 0; oy < oh; ++oy) {
                    const int y = oy * s.stride - s.pad + ky;
                    if (y < 0 || y >= ih) {
                        std::fill(dst, dst + ow, T(0));
                        dst += ow;
                        continue;
                    }
                    const T* row = plane + static_cast<std::size_t>(y) * iw;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int x = ox * s.stride - s.pad + kx;
                        *dst++ = (x >= 0 && x < iw) ? row[x] : T(0);
                    }
                }
            }
        }
    }
}

template <typename T>
void ConvolutionLayer<T>::col2im(T* dst) const {
    const auto& s = this->spec_;
    const int k = s.kernel, ih = this->in_.h, iw = this->in_.w;
    const int oh = this->out_.h, ow = this->out_.w;
    const T* src = dcol_.data();
    for (int c = 0; c < this->in_.c; ++c) {
        T* plane = dst + static_cast<std::size_t>(c) * ih * iw;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                for (int oy = 0; oy < oh; ++oy) {
                    const int y = oy * s.stride - s.pad + ky;
                    if (y < 0 || y >= ih) {
                        src += ow;
                        continue;
                    }
                    T* row = plane + static_cast<std::size_t>(y) * iw;
                    for (int ox = 0; ox < ow; ++ox, ++src) {
                        const int x = ox * s.stride - s.pad + kx;
                        if (x >= 0 && x < iw) row[x] += *src;
                    }
                }
            }
        }
    }
}

template <typename T>
void ConvolutionLayer<T>::forward(const Tensor<T>& in, Tensor<T>& out, Mode, std::mt19937_64&) {
    const int n = in.batch_size();
    shape_like(out, n, this->out_);
    const int filters = this->out_.c;
    const int patch = weights_.value.dim(1);
    const int spatial = this->out_.h * this->out_.w;
    ConstMatMap<T> w(weights_.value.data.data(), filters, patch);
    ConstMatMap<T> col(col_.data(), patch, spatial);
    const auto b = VecMap<T>(bias_.value.data.data(), filters);
    for (int i = 0; i < n; ++i) {
        im2col(in.sample(i));
        MatMap<T> o(out.sample(i), filters, spatial);
        o.noalias() = w * col;
        o.colwise() += b;
    }
}

template <typename T>
void ConvolutionLayer<T>::backward(const Tensor<T>& in, const Tensor<T>&, const Tensor<T>& dout,
                                   Tensor<T>& din, bool need_input_grad) {
    const int n = in.batch_size();
    const int filters = this->out_.c;
    const int patch = weights_.value.dim(1);
    const int spatial = this->out_.h * this->out_.w;
    ConstMatMap<T> w(weights_.value.data.data(), filters, patch);
    MatMap<T> dw(weights_.grad.data.data(), filters, patch);
    VecMap<T> db(bias_.grad.data.data(), filters);
    ConstMatMap<T> col(col_.data(), patch, spatial);
    MatMap<T> dcol(dcol_.data(), patch, spatial);
    if (need_input_grad) {
        shape_like(din, n, this->in_);
        din.zero();
    }
    for (int i = 0; i < n; ++i) {
        im2col(in.sample(i));
        ConstMatMap<T> d(dout.sample(i), filters, spatial);
        dw.noalias() += d * col.transpose();
        db += d.rowwise().sum();
        if (need_input_grad) {
            dcol.noalias() = w.transpose() * d;
            col2im(din.sample(i));
        }
    }
}

// ------------------------------------------------------------ FullyConnected

template <typename T>
FullyConnectedLayer<T>::FullyConnectedLayer(const LayerSpec& spec, Shape in, Shape out)
    : Layer<T>(spec, in, out) {
    weights_ = make_param<T>(spec.name + ".weights", {out.c, static_cast<int>(in.size())}, true);
    bias_ = make_param<T>(spec.name + ".bias", {out.c}, false);
}

template <typename T>
void FullyConnectedLayer<T>::forward(const Tensor<T>& in, Tensor<T>& out, Mode, std::mt19937_64&) {
    const int n = in.batch_size();
    const int d_in = static_cast<int>(this->in_.size());
    const int d_out = this->out_.c;
    shape_like(out, n, this->out_);
    ConstMatMap<T> x(in.data.data(), n, d_in);
    ConstMatMap<T> w(weights_.value.data.data(), d_out, d_in);
    MatMap<T> y(out.data.data(), n, d_out);
    y.noalias() = x * w.transpose();
    y.rowwise() += VecMap<T>(bias_.value.data.data(), d_out).transpose();
}

template <typename T>
void FullyConnectedLayer<T>::backward(const Tensor<T>& in, const Tensor<T>&, const Tensor<T>& dout,
                                      Tensor<T>& din, bool need_input_grad) {
    const int n = in.batch_size();
    const int d_in = static_cast<int>(this->in_.size());
    const int d_out = this->out_.c;
    ConstMatMap<T> x(in.data.data(), n, d_in);
    ConstMatMap<T> dy(dout.data.data(), n, d_out);
    MatMap<T> dw(weights_.grad.data.data(), d_out, d_in);
    dw.noalias() += dy.transpose() * x;
    VecMap<T>(bias_.grad.data.data(), d_out) += dy.colwise().sum().transpose();
    if (need_input_grad) {
        shape_like(din, n, this->in_);
        ConstMatMap<T> w(weights_.value.data.data(), d_out, d_in);
        MatMap<T>(din.data.data(), n, d_in).noalias() = dy * w;
    }
}

// ---------------------------------------------------------------------- ReLU

template <typename T>
void ReLULayer<T>::forward(const Tensor<T>& in, Tensor<T>& out, Mode, std::mt19937_64&) {
    out.reshape_like(in.shape);
    std::transform(in.data.begin(), in.data.end(), out.data.begin(),
                   [](T v) { return v > T(0) ? v : T(0); });
}

template <typename T>
void ReLULayer<T>::backward(const Tensor<T>& in, const Tensor<T>&, const Tensor<T>& dout,
                            Tensor<T>& din, bool need_input_grad) {
    if (!need_input_grad) return;
    din.reshape_like(in.shape);
    for (std::size_t i = 0; i < in.data.size(); ++i) {
        din.data[i] = in.data[i] > T(0) ? dout.data[i] : T(0);
    }
}

// ------------------------------------------------------------------- MaxPool

template <typename T>
void MaxPoolLayer<T>::forward(const Tensor<T>& in, Tensor<T>& out, Mode, std::mt19937_64&) {
    const auto& s = this->spec_;
    const int n = in.batch_size();
    const int c = this->in_.c, ih = this->in_.h, iw = this->in_.w;
    const int oh = this->out_.h, ow = this->out_.w;
    shape_like(out, n, this->out_);
    argmax_.resize(out.data.size());
    std::size_t o = 0;
    for (int b = 0; b < n; ++b) {
        for (int ch = 0; ch < c; ++ch) {
            const std::size_t plane = (static_cast<std::size_t>(b) * c + ch) * ih * iw;
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox, ++o) {
                    T best = -std::numeric_limits<T>::infinity();
                    std::size_t best_idx = plane;
                    for (int ky = 0; ky < s.kernel; ++ky) {
                        const int y = oy * s.stride - s.pad + ky;
                        if (y < 0 || y >= ih) continue;
                        for (int kx = 0; kx < s.kernel; ++kx) {
                            const int x = ox * s.stride - s.pad + kx;
                            if (x < 0 || x >= iw) continue;
                            const std::size_t idx = plane + static_cast<std::size_t>(y) * iw + x;
                            if (in.data[idx] > best) {
                                best = in.data[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    out.data[o] = best;
                    argmax_[o] = best_idx;
                }
            }
        }
    }
}

template <typename T>
void MaxPoolLayer<T>::backward(const Tensor<T>& in, const Tensor<T>&, const Tensor<T>& dout,
                               Tensor<T>& din, bool need_input_grad) {
    if (!need_input_grad) return;
    din.reshape_like(in.shape);
    din.zero();
    for (std::size_t o = 0; o < dout.data.size(); ++o) din.data[argmax_[o]] += dout.data[o];
}

// ----------------------------------------------------------------------- LRN

template <typename T>
void LRNLayer<T>::forward(const Tensor<T>& in, Tensor<T>& out, Mode, std::mt19937_64&) {
    const auto& s = this->spec_;
    const int n = in.batch_size();
    const int c = this->in_.c;
    const std::size_t hw = static_cast<std::size_t>(this->in_.h) * this->in_.w;
    const int half = s.lrn_size / 2;
    const T coef = static_cast<T>(s.lrn_alpha / s.lrn_size);
    out.reshape_like(in.shape);
    scale_.resize(in.data.size());
    for (int b = 0; b < n; ++b) {
        const std::size_t base = static_cast<std::size_t>(b) * c * hw;
        for (std::size_t p = 0; p < hw; ++p) {
            for (int ch = 0; ch < c; ++ch) {
                T sumsq = 0;
                for (int j = std::max(0, ch - half); j <= std::min(c - 1, ch + half); ++j) {
                    const T v = in.data[base + j * hw + p];
                    sumsq += v * v;
                }
                const std::size_t idx = base + ch * hw + p;
                scale_[idx] = static_cast<T>(s.lrn_k) + coef * sumsq;
                out.data[idx] = in.data[idx] * std::pow(scale_[idx], static_cast<T>(-s.lrn_beta));
            }
        }
    }
}

template <typename T>
void LRNLayer<T>::backward(const Tensor<T>& in, const Tensor<T>& out, const Tensor<T>& dout,
                           Tensor<T>& din, bool need_input_grad) {
    if (!need_input_grad) return;
    const auto& s = this->spec_;
    const int n = in.batch_size();
    const int c = this->in_.c;
    const std::size_t hw = static_cast<std::size_t>(this->in_.h) * this->in_.w;
    const int half = s.lrn_size / 2;
    const T factor = static_cast<T>(2.0 * s.lrn_alpha * s.lrn_beta / s.lrn_size);
    din.reshape_like(in.shape);
    for (int b = 0; b < n; ++b) {
        const std::size_t base = static_cast<std::size_t>(b) * c * hw;
        for (std::size_t p = 0; p < hw; ++p) {
            for (int ch = 0; ch < c; ++ch) {
                const std::size_t idx = base + ch * hw + p;
                T cross = 0;
                for (int j = std::max(0, ch - half); j <= std::min(c - 1, ch + half); ++j) {
                    const std::size_t jdx = base + j * hw + p;
                    cross += dout.data[jdx] * out.data[jdx] / scale_[jdx];
                }
                din.data[idx] = dout.data[idx] * std::pow(scale_[idx], static_cast<T>(-s.lrn_beta)) -
                                factor * in.data[idx] * cross;
            }
        }
    }
}

// ------------------------------------------------------------------- Dropout

template <typename T>
void DropoutLayer<T>::forward(const Tensor<T>& in, Tensor<T>& out, Mode mode,
                              std::mt19937_64& rng) {
    out.reshape_like(in.shape);
    last_train_ = mode == Mode::Train && this->spec_.dropout_ratio > 0.0;
    if (!last_train_) {
        out.data = in.data;
        return;
    }
    const double ratio = this->spec_.dropout_ratio;
    const T keep_scale = static_cast<T>(1.0 / (1.0 - ratio));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    mask_.resize(in.data.size());
    for (std::size_t i = 0; i < in.data.size(); ++i) {
        mask_[i] = u(rng) >= ratio ? keep_scale : T(0);
        out.data[i] = in.data[i] * mask_[i];
    }
}

template <typename T>
void DropoutLayer<T>::backward(const Tensor<T>& in, const Tensor<T>&, const Tensor<T>& dout,
                               Tensor<T>& din, bool need_input_grad) {
    if (!need_input_grad) return;
    din.reshape_like(in.shape);
    if (!last_train_) {
        din.data = dout.data;
        return;
    }
    for (std::size_t i = 0; i < dout.data.size(); ++i) din.data[i] = dout.data[i] * mask_[i];
}

// ------------------------------------------------------------------- SoftMax

template <typename T>
void SoftMaxLayer<T>::forward(const Tensor<T>& in, Tensor<T>& out, Mode, std::mt19937_64&) {
    out.reshape_like(in.shape);
    const int n = in.batch_size();
    const std::size_t k = in.sample_size();
    for (int b = 0; b < n; ++b) {
        const T* x = in.sample(b);
        T* y = out.sample(b);
        const T peak = *std::max_element(x, x + k);
        T total = 0;
        for (std::size_t i = 0; i < k; ++i) {
            y[i] = std::exp(x[i] - peak);
            total += y[i];
        }
        for (std::size_t i = 0; i < k; ++i) y[i] /= total;
    }
}

template <typename T>
void SoftMaxLayer<T>::backward(const Tensor<T>& in, const Tensor<T>& out, const Tensor<T>& dout,
                               Tensor<T>& din, bool need_input_grad) {
    if (!need_input_grad) return;
    din.reshape_like(in.shape);
    const int n = in.batch_size();
    const std::size_t k = in.sample_size();
    for (int b = 0; b < n; ++b) {
        const T* p = out.sample(b);
        const T* g = dout.sample(b);
        T dot = 0;
        for (std::size_t i = 0; i < k; ++i) dot += g[i] * p[i];
        T* d = din.sample(b);
        for (std::size_t i = 0; i < k; ++i) d[i] = p[i] * (g[i] - dot);
    }
}

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, const Shape& in, std::size_t index) {
    const Shape out = layer_output_shape(spec, in, index);
    switch (spec.kind) {
        case LayerKind::Convolution: return std::make_unique<ConvolutionLayer<T>>(spec, in, out);
        case LayerKind::FullyConnected: return std::make_unique<FullyConnectedLayer<T>>(spec, in, out);
        case LayerKind::ReLU: return std::make_unique<ReLULayer<T>>(spec, in, out);
        case LayerKind::MaxPool: return std::make_unique<MaxPoolLayer<T>>(spec, in, out);
        case LayerKind::LRN: return std::make_unique<LRNLayer<T>>(spec, in, out);
        case LayerKind::Dropout: return std::make_unique<DropoutLayer<T>>(spec, in, out);
        case LayerKind::SoftMax: return std::make_unique<SoftMaxLayer<T>>(spec, in, out);
    }
    throw Error(Errc::InvalidConfig, "unknown layer kind");
}

#define EGOSAL_INSTANTIATE(T)                                                              \
    template class ConvolutionLayer<T>;                                                    \
    template class FullyConnectedLayer<T>;                                                 \
    template class ReLULayer<T>;                                                           \
    template class MaxPoolLayer<T>;                                                        \
    template class LRNLayer<T>;                                                            \
    template class DropoutLayer<T>;                                                        \
    template class SoftMaxLayer<T>;                                                        \
    template std::unique_ptr<Layer<T>> make_layer<T>(const LayerSpec&, const Shape&, std::size_t);

EGOSAL_INSTANTIATE(float)
EGOSAL_INSTANTIATE(double)
#undef EGOSAL_INSTANTIATE

}  // namespace egosal::nn
