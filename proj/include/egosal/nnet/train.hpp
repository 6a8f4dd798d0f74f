#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "egosal/image.hpp"
#include "egosal/nnet/network.hpp"

namespace egosal::nn {

struct TrainConfig {
    double base_lr = 0.001;
    double momentum = 0.9;
    double weight_decay = 0.0005;
    long lr_halving_period = 30000;
    long max_iterations = 2000;
    int batch_size = 64;
    std::uint64_t seed = 1;
    long val_interval = 100;
    /// Validation uses at most this many samples (0 = all).
    long val_max_samples = 0;
    long checkpoint_interval = 0;  ///< 0 = only at the end
    /// Stop once validation accuracy reaches this value (<= 0 never stops early).
    double target_val_accuracy = 0.0;
    bool checked = false;

    void validate() const;
};

TrainConfig parse_train_config(std::string_view text);
TrainConfig load_train_config(const std::filesystem::path& path);
std::string format_train_config(const TrainConfig& cfg);

/// base_lr * 0.5^floor(iteration / lr_halving_period)
double learning_rate(const TrainConfig& cfg, long iteration);

/// V <- mu V - lr grad ; W <- W + V
template <typename T>
class SgdMomentum {
public:
    SgdMomentum() = default;
    SgdMomentum(double momentum, const std::vector<Param<T>*>& params);

    void step(const std::vector<Param<T>*>& params, double lr);
    void set_momentum(double momentum) { momentum_ = momentum; }

    std::vector<std::vector<T>>& velocities() { return velocity_; }
    const std::vector<std::vector<T>>& velocities() const { return velocity_; }

private:
    double momentum_ = 0.9;
    std::vector<std::vector<T>> velocity_;
};

/// Fixed-size 8-bit patches held in memory, HWC interleaved per sample.
struct PatchDataset {
    int width = 0;
    int height = 0;
    int channels = 3;
    std::vector<std::uint8_t> pixels;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
    std::size_t sample_bytes() const { return static_cast<std::size_t>(width) * height * channels; }
    void add(const Image& img, int label);
    Image image(std::size_t i) const;
};

/// Loads every manifest row, resizing patches to the network input if needed.
PatchDataset load_patch_dataset(const std::filesystem::path& manifest,
                                const std::filesystem::path& patch_dir, const Shape& input);

/// Writes the indexed samples into an N x C x H x W batch, normalised per the network spec.
template <typename T>
void fill_batch(const PatchDataset& data, std::span<const std::size_t> indices,
                const NetworkSpec& spec, Tensor<T>& batch);

template <typename T>
Tensor<T> image_to_tensor(const Image& img, const NetworkSpec& spec);

struct LossPoint {
    long iteration = 0;
    double loss = 0.0;
    double lr = 0.0;
};

struct AccuracyPoint {
    long iteration = 0;
    double accuracy = 0.0;
};

struct TrainCurves {
    std::vector<LossPoint> loss;
    std::vector<AccuracyPoint> validation;

    std::string loss_csv() const;
    std::string validation_csv() const;
};

/// Mutable training state persisted in checkpoints.
template <typename T>
struct TrainState {
    long iteration = 0;
    SgdMomentum<T> optimizer;
};

template <typename T>
struct TrainHooks {
    std::function<void(const LossPoint&)> on_iteration;
    std::function<void(const AccuracyPoint&)> on_validation;
    /// Called with the iteration count at every checkpoint boundary.
    std::function<void(const Network<T>&, const TrainState<T>&)> on_checkpoint;
};

template <typename T>
double evaluate_accuracy(Network<T>& net, const PatchDataset& data, long max_samples = 0,
                         int batch_size = 64);

/// Seeded shuffled mini-batch SGD. Continues from `state` (fresh when iteration = 0).
template <typename T>
TrainCurves train(Network<T>& net, const TrainConfig& cfg, const PatchDataset& train_set,
                  const PatchDataset& val_set, TrainState<T>& state,
                  const TrainHooks<T>& hooks = {});

// Checkpoint binary layout (little-endian):
//   "EGOSALCK" | u32 version | u32 scalar bytes | u64 iteration
//   | u64 spec text length | spec text
//   | u32 param count | per param: u32 rank, u32 dims[rank], f64 values[], f64 velocity[]
//   | u64 FNV-1a hash of everything before it
template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Network<T>& net,
                     const TrainState<T>& state);

template <typename T>
struct Checkpoint {
    Network<T> net;
    TrainState<T> state;
};

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path);

}  // namespace egosal::nn
