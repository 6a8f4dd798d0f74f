#include "egosal/nnet/spec.hpp"

#include <sstream>

#include "egosal/error.hpp"
#include "egosal/text_io.hpp"

namespace egosal::nn {

std::string Shape::str() const {
    if (h == 1 && w == 1) return std::to_string(c);
    return std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c);
}

std::string_view layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::Convolution: return "conv";
        case LayerKind::ReLU: return "relu";
        case LayerKind::MaxPool: return "pool";
        case LayerKind::LRN: return "lrn";
        case LayerKind::FullyConnected: return "fc";
        case LayerKind::Dropout: return "dropout";
        case LayerKind::SoftMax: return "softmax";
    }
    return "?";
}

LayerKind parse_layer_kind(std::string_view name) {
    for (auto k : {LayerKind::Convolution, LayerKind::ReLU, LayerKind::MaxPool, LayerKind::LRN,
                   LayerKind::FullyConnected, LayerKind::Dropout, LayerKind::SoftMax}) {
        if (layer_kind_name(k) == name) return k;
    }
    throw Error(Errc::InvalidConfig, "unknown layer kind '" + std::string(name) + "'");
}

namespace {

int windowed(int in, int pad, int kernel, int stride) { return (in + 2 * pad - kernel) / stride + 1; }

[[noreturn]] void incompatible(std::size_t index, const std::string& why) {
    throw Error(Errc::IncompatibleShapes, "layer " + std::to_string(index) + ": " + why);
}

}  // namespace

Shape layer_output_shape(const LayerSpec& l, const Shape& in, std::size_t index) {
    switch (l.kind) {
        case LayerKind::Convolution:
        case LayerKind::MaxPool: {
            if (l.kernel < 1 || l.stride < 1 || l.pad < 0) incompatible(index, "bad window params");
            if (in.h + 2 * l.pad < l.kernel || in.w + 2 * l.pad < l.kernel) {
                incompatible(index, "kernel " + std::to_string(l.kernel) + " exceeds input " +
                                        in.str());
            }
            const int c = l.kind == LayerKind::Convolution ? l.filters : in.c;
            if (c < 1) incompatible(index, "convolution needs nb >= 1");
            return {c, windowed(in.h, l.pad, l.kernel, l.stride),
                    windowed(in.w, l.pad, l.kernel, l.stride)};
        }
        case LayerKind::FullyConnected:
            if (l.filters < 1) incompatible(index, "fully connected needs nb >= 1");
            return {l.filters, 1, 1};
        case LayerKind::LRN:
            if (l.lrn_size < 1 || l.lrn_size % 2 == 0) incompatible(index, "LRN size must be odd");
            return in;
        case LayerKind::ReLU:
        case LayerKind::Dropout:
            if (l.kind == LayerKind::Dropout && !(l.dropout_ratio >= 0.0 && l.dropout_ratio < 1.0)) {
                incompatible(index, "dropout ratio must lie in [0,1)");
            }
            return in;
        case LayerKind::SoftMax:
            if (in.h != 1 || in.w != 1) incompatible(index, "softmax expects a vector input");
            return in;
    }
    incompatible(index, "unknown layer");
}

std::vector<Shape> infer_shapes(const NetworkSpec& spec) {
    if (spec.input.size() == 0) incompatible(0, "empty input shape");
    std::vector<Shape> shapes{spec.input};
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        shapes.push_back(layer_output_shape(spec.layers[i], shapes.back(), i + 1));
    }
    if (spec.layers.empty() || spec.layers.back().kind != LayerKind::SoftMax) {
        incompatible(spec.layers.size(), "network must end with a softmax");
    }
    if (shapes.back().size() != static_cast<std::size_t>(spec.class_count)) {
        incompatible(spec.layers.size(), "softmax width " + shapes.back().str() +
                                             " differs from class count " +
                                             std::to_string(spec.class_count));
    }
    return shapes;
}

namespace {

LayerSpec conv(const char* name, int k, int nb, int s, int pad, double b) {
    LayerSpec l;
    l.kind = LayerKind::Convolution;
    l.name = name;
    l.kernel = k;
    l.filters = nb;
    l.stride = s;
    l.pad = pad;
    l.bias_init = b;
    return l;
}

LayerSpec simple(LayerKind kind, const char* name) {
    LayerSpec l;
    l.kind = kind;
    l.name = name;
    return l;
}

LayerSpec pool(const char* name, int k, int s) {
    LayerSpec l = simple(LayerKind::MaxPool, name);
    l.kernel = k;
    l.stride = s;
    return l;
}

LayerSpec fc(const char* name, int nb, double b) {
    LayerSpec l = simple(LayerKind::FullyConnected, name);
    l.filters = nb;
    l.bias_init = b;
    return l;
}

LayerSpec dropout(const char* name, double ratio) {
    LayerSpec l = simple(LayerKind::Dropout, name);
    l.dropout_ratio = ratio;
    return l;
}

}  // namespace

NetworkSpec imagenet_spec(int class_count) {
    NetworkSpec spec;
    spec.input = {3, 227, 227};
    spec.class_count = class_count;
    spec.layers = {
        conv("conv1", 11, 96, 4, 0, 0.0),
        simple(LayerKind::ReLU, "relu1"),
        pool("pool1", 3, 2),
        simple(LayerKind::LRN, "norm1"),
        conv("conv2", 5, 256, 1, 2, 1.0),
        simple(LayerKind::ReLU, "relu2"),
        pool("pool2", 3, 2),
        simple(LayerKind::LRN, "norm2"),
        conv("conv3", 3, 384, 1, 1, 0.0),
        simple(LayerKind::ReLU, "relu3"),
        conv("conv4", 3, 384, 1, 1, 1.0),
        simple(LayerKind::ReLU, "relu4"),
        conv("conv5", 3, 256, 1, 1, 1.0),
        simple(LayerKind::ReLU, "relu5"),
        pool("pool5", 3, 2),
        fc("ip6", 4096, 1.0),
        simple(LayerKind::ReLU, "relu6"),
        dropout("drop6", 0.5),
        fc("ip7", 4096, 1.0),
        simple(LayerKind::ReLU, "relu7"),
        dropout("drop7", 0.5),
        fc("ip8", class_count, 0.0),
        simple(LayerKind::SoftMax, "prob"),
    };
    return spec;
}

NetworkSpec desk_scale_spec(int class_count) {
    NetworkSpec spec;
    spec.input = {3, 64, 64};
    spec.class_count = class_count;
    spec.layers = {
        conv("conv1", 5, 16, 2, 0, 0.0),
        simple(LayerKind::ReLU, "relu1"),
        pool("pool1", 3, 2),
        conv("conv2", 3, 32, 1, 1, 0.0),
        simple(LayerKind::ReLU, "relu2"),
        pool("pool2", 3, 2),
        fc("ip3", 128, 0.0),
        simple(LayerKind::ReLU, "relu3"),
        dropout("drop3", 0.5),
        fc("ip4", class_count, 0.0),
        simple(LayerKind::SoftMax, "prob"),
    };
    return spec;
}

std::string format_network_spec(const NetworkSpec& spec) {
    std::ostringstream out;
    out.precision(17);
    out << "input = " << spec.input.w << ' ' << spec.input.h << ' ' << spec.input.c << '\n';
    out << "classes = " << spec.class_count << '\n';
    out << "input_mean = " << spec.input_mean << '\n';
    out << "input_scale = " << spec.input_scale << '\n';
    out << "init_std = " << spec.init_std << '\n';
    for (const auto& l : spec.layers) {
        out << "layer = " << layer_kind_name(l.kind);
        if (!l.name.empty()) out << " name=" << l.name;
        switch (l.kind) {
            case LayerKind::Convolution:
                out << " k=" << l.kernel << " nb=" << l.filters << " s=" << l.stride
                    << " pad=" << l.pad << " b=" << l.bias_init;
                break;
            case LayerKind::MaxPool:
                out << " k=" << l.kernel << " s=" << l.stride << " pad=" << l.pad;
                break;
            case LayerKind::FullyConnected:
                out << " nb=" << l.filters << " b=" << l.bias_init;
                break;
            case LayerKind::LRN:
                out << " size=" << l.lrn_size << " alpha=" << l.lrn_alpha << " beta=" << l.lrn_beta
                    << " kbias=" << l.lrn_k;
                break;
            case LayerKind::Dropout:
                out << " ratio=" << l.dropout_ratio;
                break;
            case LayerKind::ReLU:
            case LayerKind::SoftMax:
                break;
        }
        out << '\n';
    }
    return out.str();
}

namespace {

double to_double(const std::string& v, const std::string& what) {
    try {
        std::size_t used = 0;
        double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(what);
        return d;
    } catch (const std::exception&) {
        throw Error(Errc::InvalidConfig, "bad value for " + what + ": '" + v + "'");
    }
}

int to_int(const std::string& v, const std::string& what) {
    const double d = to_double(v, what);
    if (d != static_cast<int>(d)) throw Error(Errc::InvalidConfig, what + " must be an integer");
    return static_cast<int>(d);
}

LayerSpec parse_layer(const std::string& text, int class_count) {
    std::istringstream in(text);
    std::string kind;
    in >> kind;
    LayerSpec l;
    l.kind = parse_layer_kind(kind);
    std::string tok;
    while (in >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw Error(Errc::InvalidConfig, "expected key=value: " + tok);
        const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "name") l.name = val;
        else if (key == "k") l.kernel = to_int(val, key);
        else if (key == "nb") l.filters = (val == "C") ? class_count : to_int(val, key);
        else if (key == "s") l.stride = to_int(val, key);
        else if (key == "pad") l.pad = to_int(val, key);
        else if (key == "b") l.bias_init = to_double(val, key);
        else if (key == "size") l.lrn_size = to_int(val, key);
        else if (key == "alpha") l.lrn_alpha = to_double(val, key);
        else if (key == "beta") l.lrn_beta = to_double(val, key);
        else if (key == "kbias") l.lrn_k = to_double(val, key);
        else if (key == "ratio") l.dropout_ratio = to_double(val, key);
        else throw Error(Errc::InvalidConfig, "unknown layer parameter '" + key + "'");
    }
    return l;
}

}  // namespace

NetworkSpec parse_network_spec(std::string_view text) {
    NetworkSpec spec;
    spec.layers.clear();
    std::vector<std::string> layer_lines;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        std::string_view view = line;
        if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
        view = trim(view);
        if (view.empty()) continue;
        const auto eq = view.find('=');
        if (eq == std::string_view::npos) {
            throw Error(Errc::InvalidConfig, "expected 'key = value': " + std::string(view));
        }
        const std::string key(trim(view.substr(0, eq)));
        const std::string val(trim(view.substr(eq + 1)));
        if (key == "input") {
            std::istringstream dims(val);
            if (!(dims >> spec.input.w >> spec.input.h >> spec.input.c)) {
                throw Error(Errc::InvalidConfig, "input expects 'W H C'");
            }
        } else if (key == "classes") {
            spec.class_count = to_int(val, key);
        } else if (key == "input_mean") {
            spec.input_mean = to_double(val, key);
        } else if (key == "input_scale") {
            spec.input_scale = to_double(val, key);
        } else if (key == "init_std") {
            spec.init_std = to_double(val, key);
        } else if (key == "layer") {
            layer_lines.push_back(val);
        } else {
            throw Error(Errc::InvalidConfig, "unknown network key '" + key + "'");
        }
    }
    // Layers may say nb=C, so resolve them once the class count is known.
    for (const auto& l : layer_lines) spec.layers.push_back(parse_layer(l, spec.class_count));
    return spec;
}

NetworkSpec load_network_spec(const std::filesystem::path& path) {
    return parse_network_spec(read_text_file(path));
}

}  // namespace egosal::nn
