#include "egosal/nnet/train.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "egosal/error.hpp"
#include "egosal/patches.hpp"
#include "egosal/text_io.hpp"

namespace egosal::nn {

void TrainConfig::validate() const {
    if (!(base_lr > 0.0) || !(momentum >= 0.0 && momentum < 1.0) || weight_decay < 0.0 ||
        lr_halving_period < 1 || max_iterations < 1 || batch_size < 1 || val_interval < 1) {
        throw Error(Errc::InvalidConfig, "training configuration out of range");
    }
}

TrainConfig parse_train_config(std::string_view text) {
    const auto kv = KeyValueConfig::parse(text);
    TrainConfig c;
    c.base_lr = kv.get_double("base_lr", c.base_lr);
    c.momentum = kv.get_double("momentum", c.momentum);
    c.weight_decay = kv.get_double("weight_decay", c.weight_decay);
    c.lr_halving_period = kv.get_int("lr_halving_period", c.lr_halving_period);
    c.max_iterations = kv.get_int("max_iterations", c.max_iterations);
    c.batch_size = static_cast<int>(kv.get_int("batch_size", c.batch_size));
    c.seed = kv.get_uint64("seed", c.seed);
    c.val_interval = kv.get_int("val_interval", c.val_interval);
    c.val_max_samples = kv.get_int("val_max_samples", c.val_max_samples);
    c.checkpoint_interval = kv.get_int("checkpoint_interval", c.checkpoint_interval);
    c.target_val_accuracy = kv.get_double("target_val_accuracy", c.target_val_accuracy);
    c.checked = kv.get_bool("checked", c.checked);
    c.validate();
    return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
    return parse_train_config(read_text_file(path));
}

std::string format_train_config(const TrainConfig& c) {
    std::ostringstream out;
    out.precision(17);
    out << "base_lr = " << c.base_lr << "\nmomentum = " << c.momentum
        << "\nweight_decay = " << c.weight_decay << "\nlr_halving_period = " << c.lr_halving_period
        << "\nmax_iterations = " << c.max_iterations << "\nbatch_size = " << c.batch_size
        << "\nseed = " << c.seed << "\nval_interval = " << c.val_interval
        << "\nval_max_samples = " << c.val_max_samples
        << "\ncheckpoint_interval = " << c.checkpoint_interval
        << "\ntarget_val_accuracy = " << c.target_val_accuracy
        << "\nchecked = " << (c.checked ? "true" : "false") << '\n';
    return out.str();
}

double learning_rate(const TrainConfig& cfg, long iteration) {
    return cfg.base_lr * std::pow(0.5, static_cast<double>(iteration / cfg.lr_halving_period));
}

template <typename T>
SgdMomentum<T>::SgdMomentum(double momentum, const std::vector<Param<T>*>& params)
    : momentum_(momentum) {
    for (const auto* p : params) velocity_.emplace_back(p->value.data.size(), T(0));
}

template <typename T>
void SgdMomentum<T>::step(const std::vector<Param<T>*>& params, double lr) {
    const T mu = static_cast<T>(momentum_);
    const T alpha = static_cast<T>(lr);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& v = velocity_[i];
        auto& w = params[i]->value.data;
        const auto& g = params[i]->grad.data;
        for (std::size_t j = 0; j < v.size(); ++j) {
            v[j] = mu * v[j] - alpha * g[j];
            w[j] += v[j];
        }
    }
}

void PatchDataset::add(const Image& img, int label) {
    if (size() == 0 && pixels.empty() && width == 0) {
        width = img.width;
        height = img.height;
        channels = img.channels;
    }
    if (img.width != width || img.height != height || img.channels != channels) {
        throw Error(Errc::ShapeMismatch, "patch size differs from dataset size");
    }
    pixels.insert(pixels.end(), img.data.begin(), img.data.end());
    labels.push_back(label);
}

Image PatchDataset::image(std::size_t i) const {
    Image img(width, height, channels);
    std::memcpy(img.data.data(), pixels.data() + i * sample_bytes(), sample_bytes());
    return img;
}

PatchDataset load_patch_dataset(const std::filesystem::path& manifest,
                                const std::filesystem::path& patch_dir, const Shape& input) {
    PatchDataset data;
    data.width = input.w;
    data.height = input.h;
    data.channels = input.c;
    for (const auto& row : patches::read_manifest(manifest)) {
        Image img = read_png(patch_dir / row.patch_file);
        if (img.channels != input.c) {
            throw Error(Errc::ShapeMismatch, row.patch_file + ": channel count mismatch");
        }
        if (img.width != input.w || img.height != input.h) {
            img = patches::resize_bilinear(img, input.w, input.h);
        }
        data.add(img, row.label);
    }
    return data;
}

namespace {

template <typename T>
void write_sample(const std::uint8_t* hwc, int w, int h, int c, const NetworkSpec& spec, T* chw) {
    const T mean = static_cast<T>(spec.input_mean);
    const T scale = static_cast<T>(spec.input_scale);
    const std::size_t plane = static_cast<std::size_t>(w) * h;
    for (std::size_t p = 0; p < plane; ++p) {
        for (int ch = 0; ch < c; ++ch) {
            chw[ch * plane + p] = (static_cast<T>(hwc[p * c + ch]) - mean) * scale;
        }
    }
}

}  // namespace

template <typename T>
void fill_batch(const PatchDataset& data, std::span<const std::size_t> indices,
                const NetworkSpec& spec, Tensor<T>& batch) {
    batch.reshape_like({static_cast<int>(indices.size()), data.channels, data.height, data.width});
    for (std::size_t i = 0; i < indices.size(); ++i) {
        write_sample(data.pixels.data() + indices[i] * data.sample_bytes(), data.width, data.height,
                     data.channels, spec, batch.sample(static_cast<int>(i)));
    }
}

template <typename T>
Tensor<T> image_to_tensor(const Image& img, const NetworkSpec& spec) {
    Tensor<T> t({1, img.channels, img.height, img.width});
    write_sample(img.data.data(), img.width, img.height, img.channels, spec, t.data.data());
    return t;
}

std::string TrainCurves::loss_csv() const {
    std::ostringstream out;
    out.precision(10);
    out << "iteration,loss,lr\n";
    for (const auto& p : loss) out << p.iteration << ',' << p.loss << ',' << p.lr << '\n';
    return out.str();
}

std::string TrainCurves::validation_csv() const {
    std::ostringstream out;
    out.precision(10);
    out << "iteration,val_accuracy\n";
    for (const auto& p : validation) out << p.iteration << ',' << p.accuracy << '\n';
    return out.str();
}

template <typename T>
double evaluate_accuracy(Network<T>& net, const PatchDataset& data, long max_samples,
                         int batch_size) {
    std::size_t total = data.size();
    if (max_samples > 0) total = std::min<std::size_t>(total, static_cast<std::size_t>(max_samples));
    if (total == 0) return 0.0;
    // Evenly strided subset so a capped evaluation still spans every class.
    const double stride = static_cast<double>(data.size()) / static_cast<double>(total);
    std::vector<std::size_t> idx(total);
    for (std::size_t i = 0; i < total; ++i) idx[i] = static_cast<std::size_t>(i * stride);

    std::size_t correct = 0;
    Tensor<T> batch;
    const int classes = net.class_count();
    for (std::size_t start = 0; start < total; start += batch_size) {
        const std::size_t count = std::min<std::size_t>(batch_size, total - start);
        std::span<const std::size_t> chunk(idx.data() + start, count);
        fill_batch(data, chunk, net.spec(), batch);
        const auto& probs = net.forward(batch, Mode::Test);
        for (std::size_t i = 0; i < count; ++i) {
            const T* p = probs.sample(static_cast<int>(i));
            const int pred = static_cast<int>(std::max_element(p, p + classes) - p);
            if (pred == data.labels[chunk[i]]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(total);
}

template <typename T>
TrainCurves train(Network<T>& net, const TrainConfig& cfg, const PatchDataset& train_set,
                  const PatchDataset& val_set, TrainState<T>& state, const TrainHooks<T>& hooks) {
    cfg.validate();
    if (train_set.size() == 0) throw Error(Errc::DatasetEmpty, "training set is empty");
    net.set_checked(cfg.checked);
    auto params = net.params();
    if (state.optimizer.velocities().size() != params.size()) {
        state.optimizer = SgdMomentum<T>(cfg.momentum, params);
    }
    state.optimizer.set_momentum(cfg.momentum);

    // Shuffle order and dropout masks are pure functions of (seed, iteration), so a
    // resumed run replays exactly what an uninterrupted run would have seen.
    const std::size_t n = train_set.size();
    const std::size_t batch = std::min<std::size_t>(cfg.batch_size, n);
    const std::size_t batches_per_epoch = std::max<std::size_t>(1, n / batch);
    std::vector<std::size_t> order(n);
    long epoch_loaded = -1;
    auto ensure_epoch = [&](long epoch) {
        if (epoch == epoch_loaded) return;
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 shuffle_rng(cfg.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        epoch_loaded = epoch;
    };

    TrainCurves curves;
    Tensor<T> input;
    std::vector<int> labels(batch);
    while (state.iteration < cfg.max_iterations) {
        const long it = state.iteration;
        const long epoch = static_cast<long>(static_cast<std::size_t>(it) / batches_per_epoch);
        const std::size_t offset = (static_cast<std::size_t>(it) % batches_per_epoch) * batch;
        ensure_epoch(epoch);
        std::span<const std::size_t> chunk(order.data() + offset, batch);
        fill_batch(train_set, chunk, net.spec(), input);
        for (std::size_t i = 0; i < batch; ++i) labels[i] = train_set.labels[chunk[i]];

        net.reseed_dropout(cfg.seed ^ (static_cast<std::uint64_t>(it) * 0xD1B54A32D192ED03ULL));
        net.forward(input, Mode::Train);
        const double objective = net.data_loss(labels) + cfg.weight_decay * net.regularizer();
        if (!std::isfinite(objective)) {
            throw Error(Errc::DivergenceDetected, "loss is " + std::to_string(objective) +
                                                      " at iteration " + std::to_string(it));
        }
        net.backward(labels, cfg.weight_decay);
        const double lr = learning_rate(cfg, it);
        state.optimizer.step(params, lr);
        ++state.iteration;

        const LossPoint lp{state.iteration, objective, lr};
        curves.loss.push_back(lp);
        if (hooks.on_iteration) hooks.on_iteration(lp);

        const bool last = state.iteration == cfg.max_iterations;
        bool stop = false;
        if (val_set.size() > 0 && (state.iteration % cfg.val_interval == 0 || last)) {
            const AccuracyPoint ap{state.iteration,
                                   evaluate_accuracy(net, val_set, cfg.val_max_samples)};
            curves.validation.push_back(ap);
            if (hooks.on_validation) hooks.on_validation(ap);
            stop = cfg.target_val_accuracy > 0.0 && ap.accuracy >= cfg.target_val_accuracy;
        }
        if (hooks.on_checkpoint &&
            (last || stop ||
             (cfg.checkpoint_interval > 0 && state.iteration % cfg.checkpoint_interval == 0))) {
            hooks.on_checkpoint(net, state);
        }
        if (stop) break;
    }
    return curves;
}

// ---------------------------------------------------------------- checkpoints

namespace {

constexpr char kMagic[8] = {'E', 'G', 'O', 'S', 'A', 'L', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes little-endian");

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Writer {
public:
    template <typename V>
    void put(V v) {
        buf_.append(reinterpret_cast<const char*>(&v), sizeof(V));
    }
    void put_bytes(const std::string& s) { buf_.append(s); }
    const std::string& bytes() const { return buf_; }

private:
    std::string buf_;
};

class Reader {
public:
    explicit Reader(const std::string& buf, std::size_t end) : buf_(buf), end_(end) {}

    template <typename V>
    V get() {
        need(sizeof(V));
        V v;
        std::memcpy(&v, buf_.data() + pos_, sizeof(V));
        pos_ += sizeof(V);
        return v;
    }
    std::string get_bytes(std::size_t n) {
        need(n);
        std::string s = buf_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == end_; }

private:
    void need(std::size_t n) const {
        if (n > end_ - pos_) throw Error(Errc::CorruptCheckpoint, "truncated checkpoint");
    }
    const std::string& buf_;
    std::size_t end_;
    std::size_t pos_ = 0;
};

}  // namespace

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Network<T>& net,
                     const TrainState<T>& state) {
    Writer w;
    w.put_bytes(std::string(kMagic, sizeof(kMagic)));
    w.put<std::uint32_t>(kVersion);
    w.put<std::uint32_t>(sizeof(T));
    w.put<std::uint64_t>(static_cast<std::uint64_t>(state.iteration));
    const std::string spec_text = format_network_spec(net.spec());
    w.put<std::uint64_t>(spec_text.size());
    w.put_bytes(spec_text);
    const auto params = net.params();
    const auto& vel = state.optimizer.velocities();
    w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& t = params[i]->value;
        w.put<std::uint32_t>(static_cast<std::uint32_t>(t.shape.size()));
        for (int d : t.shape) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
        for (T v : t.data) w.put<double>(static_cast<double>(v));
        for (std::size_t j = 0; j < t.data.size(); ++j) {
            w.put<double>(i < vel.size() ? static_cast<double>(vel[i][j]) : 0.0);
        }
    }
    w.put<std::uint64_t>(fnv1a(w.bytes()));
    write_text_file_atomic(path, w.bytes());
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
    const std::string buf = read_text_file(path);
    if (buf.size() < sizeof(kMagic) + 8) throw Error(Errc::CorruptCheckpoint, "file too short");
    const std::size_t body = buf.size() - sizeof(std::uint64_t);
    std::uint64_t stored_hash;
    std::memcpy(&stored_hash, buf.data() + body, sizeof(stored_hash));
    if (stored_hash != fnv1a(buf.substr(0, body))) {
        throw Error(Errc::CorruptCheckpoint, path.string() + ": checksum mismatch");
    }
    Reader r(buf, body);
    if (r.get_bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
        throw Error(Errc::CorruptCheckpoint, "bad magic");
    }
    if (r.get<std::uint32_t>() != kVersion) throw Error(Errc::CorruptCheckpoint, "unsupported version");
    r.get<std::uint32_t>();  // writer precision, informational
    const auto iteration = static_cast<long>(r.get<std::uint64_t>());
    const auto spec_len = r.get<std::uint64_t>();
    NetworkSpec spec;
    try {
        spec = parse_network_spec(r.get_bytes(spec_len));
    } catch (const Error& e) {
        throw Error(Errc::CorruptCheckpoint, std::string("embedded spec: ") + e.what());
    }
    Checkpoint<T> ck{Network<T>(spec), {}};
    auto params = ck.net.params();
    if (r.get<std::uint32_t>() != params.size()) {
        throw Error(Errc::CorruptCheckpoint, "parameter count mismatch");
    }
    std::vector<std::vector<T>> velocity;
    for (auto* p : params) {
        const auto rank = r.get<std::uint32_t>();
        std::vector<int> dims;
        for (std::uint32_t i = 0; i < rank; ++i) dims.push_back(static_cast<int>(r.get<std::uint32_t>()));
        if (dims != p->value.shape) throw Error(Errc::CorruptCheckpoint, p->name + ": shape mismatch");
        for (auto& v : p->value.data) v = static_cast<T>(r.get<double>());
        std::vector<T> vel(p->value.data.size());
        for (auto& v : vel) v = static_cast<T>(r.get<double>());
        velocity.push_back(std::move(vel));
    }
    if (!r.done()) throw Error(Errc::CorruptCheckpoint, "trailing bytes");
    ck.state.iteration = iteration;
    ck.state.optimizer = SgdMomentum<T>(0.9, params);
    ck.state.optimizer.velocities() = std::move(velocity);
    return ck;
}

#define EGOSAL_INSTANTIATE(T)                                                                    \
    template class SgdMomentum<T>;                                                               \
    template void fill_batch<T>(const PatchDataset&, std::span<const std::size_t>,              \
                                const NetworkSpec&, Tensor<T>&);                                 \
    template Tensor<T> image_to_tensor<T>(const Image&, const NetworkSpec&);                    \
    template double evaluate_accuracy<T>(Network<T>&, const PatchDataset&, long, int);           \
    template TrainCurves train<T>(Network<T>&, const TrainConfig&, const PatchDataset&,         \
                                  const PatchDataset&, TrainState<T>&, const TrainHooks<T>&);   \
    template void save_checkpoint<T>(const std::filesystem::path&, const Network<T>&,           \
                                     const TrainState<T>&);                                      \
    template Checkpoint<T> load_checkpoint<T>(const std::filesystem::path&);

EGOSAL_INSTANTIATE(float)
EGOSAL_INSTANTIATE(double)
#undef EGOSAL_INSTANTIATE

}  // namespace egosal::nn
