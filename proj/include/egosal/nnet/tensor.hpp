#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

namespace egosal::nn {

/// Per-sample activation shape, channels x height x width. FC outputs are C x 1 x 1.
struct Shape {
    int c = 0;
    int h = 1;
    int w = 1;

    std::size_t size() const { return static_cast<std::size_t>(c) * h * w; }
    std::string str() const;

    friend bool operator==(const Shape&, const Shape&) = default;
};

/// Dense row-major n-dimensional array.
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> dims, T fill = T(0)) : shape(std::move(dims)) {
        data.assign(element_count(shape), fill);
    }

    static std::size_t element_count(const std::vector<int>& dims) {
        return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                               [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
    }

    /// Batch tensor N x C x H x W.
    static Tensor batch(int n, const Shape& s, T fill = T(0)) { return Tensor({n, s.c, s.h, s.w}, fill); }

    std::size_t size() const { return data.size(); }
    int dim(std::size_t i) const { return shape[i]; }
    int batch_size() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t sample_size() const { return shape.empty() ? 0 : data.size() / shape[0]; }

    T* sample(int n) { return data.data() + static_cast<std::size_t>(n) * sample_size(); }
    const T* sample(int n) const { return data.data() + static_cast<std::size_t>(n) * sample_size(); }

    void reshape_like(const std::vector<int>& dims) {
        shape = dims;
        data.resize(element_count(shape));
    }
    void zero() { std::fill(data.begin(), data.end(), T(0)); }

    bool all_finite() const {
        for (const T& v : data) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }
};

}  // namespace egosal::nn
