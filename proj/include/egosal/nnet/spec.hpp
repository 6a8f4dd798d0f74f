#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "egosal/nnet/tensor.hpp"

namespace egosal::nn {

enum class LayerKind { Convolution, ReLU, MaxPool, LRN, FullyConnected, Dropout, SoftMax };

std::string_view layer_kind_name(LayerKind kind);
LayerKind parse_layer_kind(std::string_view name);

/// One row of an architecture table. Fields irrelevant to `kind` are ignored.
struct LayerSpec {
    LayerKind kind = LayerKind::ReLU;
    std::string name;
    int kernel = 1;
    int filters = 0;  ///< conv filter count / FC output count
    int stride = 1;
    int pad = 0;
    double bias_init = 0.0;
    // LRN
    int lrn_size = 5;
    double lrn_alpha = 1e-4;
    double lrn_beta = 0.75;
    double lrn_k = 1.0;
    // Dropout
    double dropout_ratio = 0.5;

    bool has_weights() const {
        return kind == LayerKind::Convolution || kind == LayerKind::FullyConnected;
    }
};

struct NetworkSpec {
    Shape input;
    int class_count = 0;
    std::vector<LayerSpec> layers;
    // Pixel preprocessing: value = (byte - input_mean) * input_scale.
    double input_mean = 127.5;
    double input_scale = 1.0 / 128.0;
    double init_std = 0.01;
};

/// Output shape after every layer, element 0 being the input itself.
std::vector<Shape> infer_shapes(const NetworkSpec& spec);
Shape layer_output_shape(const LayerSpec& layer, const Shape& in, std::size_t index);

/// The 23-layer ImageNet-style architecture on 227x227x3 inputs.
NetworkSpec imagenet_spec(int class_count);
/// Small variant on 64x64x3 that still uses every layer kind except LRN.
NetworkSpec desk_scale_spec(int class_count);

// Text form:
//   input = 64 64 3
//   classes = 9
//   layer = conv name=conv1 k=5 nb=16 s=2 pad=0 b=0
//   layer = relu
std::string format_network_spec(const NetworkSpec& spec);
NetworkSpec parse_network_spec(std::string_view text);
NetworkSpec load_network_spec(const std::filesystem::path& path);

}  // namespace egosal::nn
