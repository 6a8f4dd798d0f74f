#include "egosal/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "egosal/error.hpp"
#include "egosal/fusion.hpp"
#include "egosal/patches.hpp"
#include "egosal/seed.hpp"
#include "egosal/simgen.hpp"
#include "egosal/text_io.hpp"

namespace egosal::pipeline {

namespace fs = std::filesystem;
using dataset::Dataset;
using dataset::Split;

std::string_view precision_name(Precision p) { return p == Precision::Single ? "single" : "double"; }

Precision parse_precision(std::string_view name) {
    if (name == "double") return Precision::Double;
    if (name == "single") return Precision::Single;
    throw Error(Errc::InvalidConfig, "precision must be 'double' or 'single', got '" + std::string(name) + "'");
}

// ------------------------------------------------------------------ config

void PipelineConfig::validate() const {
    wooding.validate();
    auto fail = [](const std::string& what) { throw Error(Errc::InvalidConfig, what); };
    if (!(tau > 0.0 && tau < 1.0)) fail("tau must lie in (0,1)");
    if (patch_size < 8) fail("patch_size must be at least 8");
    if (background_min_size < 0) fail("background_min_size must be non-negative");
    if (background_count < 0) fail("background_count must be non-negative");
    if (!(max_overlap >= 0.0 && max_overlap <= 1.0)) fail("max_overlap must lie in [0,1]");
    if (exclusion_margin < 0.0) fail("exclusion_margin must be non-negative");
    if (frame_stride < 1) fail("frame_stride must be at least 1");
    if (fusion_window < 0) fail("fusion_window must be non-negative");
    if (class_count < 2) fail("class_count must be at least 2");
}

int PipelineConfig::min_background_size(int frame_height) const {
    if (background_min_size > 0) return background_min_size;
    return std::max(8, static_cast<int>(std::lround(95.0 * frame_height / 1080.0)));
}

PipelineConfig parse_config(std::string_view text) {
    const auto kv = KeyValueConfig::parse(text);
    PipelineConfig c;
    static const char* known[] = {
        "dataset_root", "alpha_deg", "beta_deg", "max_distance_mm", "epsilon", "normalization",
        "truncate_sigmas", "tau", "patch_size", "background_min_size", "background_count", "max_overlap",
        "exclusion_margin", "frame_stride", "augment_validation", "network_spec", "train_config",
        "fusion_window", "seed", "precision", "class_count"};
    for (const auto& [key, value] : kv.entries()) {
        if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
            throw Error(Errc::InvalidConfig, "unknown config key '" + key + "'");
        }
    }
    c.dataset_root = kv.get_string("dataset_root", "");
    c.wooding.alpha_deg = kv.get_double("alpha_deg", c.wooding.alpha_deg);
    c.wooding.beta_deg = kv.get_double("beta_deg", c.wooding.beta_deg);
    c.wooding.max_distance_mm = kv.get_double("max_distance_mm", c.wooding.max_distance_mm);
    c.wooding.epsilon = kv.get_double("epsilon", c.wooding.epsilon);
    const auto norm = kv.get_string("normalization", "peak");
    if (norm == "peak") {
        c.map.normalization = saliency::Normalization::Peak;
    } else if (norm == "sum") {
        c.map.normalization = saliency::Normalization::Sum;
    } else {
        throw Error(Errc::InvalidConfig, "normalization must be 'peak' or 'sum'");
    }
    c.map.truncate_sigmas = kv.get_double("truncate_sigmas", c.map.truncate_sigmas);
    c.tau = kv.get_double("tau", c.tau);
    c.patch_size = static_cast<int>(kv.get_int("patch_size", c.patch_size));
    c.background_min_size = static_cast<int>(kv.get_int("background_min_size", c.background_min_size));
    c.background_count = static_cast<int>(kv.get_int("background_count", c.background_count));
    c.max_overlap = kv.get_double("max_overlap", c.max_overlap);
    c.exclusion_margin = kv.get_double("exclusion_margin", c.exclusion_margin);
    c.frame_stride = static_cast<int>(kv.get_int("frame_stride", c.frame_stride));
    c.augment_validation = kv.get_bool("augment_validation", c.augment_validation);
    c.network_spec = kv.get_string("network_spec", "");
    c.train_config = kv.get_string("train_config", "");
    c.fusion_window = static_cast<int>(kv.get_int("fusion_window", c.fusion_window));
    c.seed = kv.get_uint64("seed", c.seed);
    c.precision = parse_precision(kv.get_string("precision", "double"));
    c.class_count = static_cast<int>(kv.get_int("class_count", c.class_count));
    c.validate();
    return c;
}

PipelineConfig load_config(const fs::path& path) {
    auto c = parse_config(read_text_file(path));
    // Relative paths inside the file are relative to the file itself.
    const auto base = path.parent_path();
    for (fs::path* p : {&c.dataset_root, &c.network_spec, &c.train_config}) {
        if (!p->empty() && p->is_relative()) *p = base / *p;
    }
    return c;
}

std::string format_config(const PipelineConfig& c) {
    std::ostringstream out;
    out.precision(17);
    out << "dataset_root = " << c.dataset_root.string() << '\n'
        << "alpha_deg = " << c.wooding.alpha_deg << '\n'
        << "beta_deg = " << c.wooding.beta_deg << '\n'
        << "max_distance_mm = " << c.wooding.max_distance_mm << '\n'
        << "epsilon = " << c.wooding.epsilon << '\n'
        << "normalization = " << (c.map.normalization == saliency::Normalization::Sum ? "sum" : "peak") << '\n'
        << "truncate_sigmas = " << c.map.truncate_sigmas << '\n'
        << "tau = " << c.tau << '\n'
        << "patch_size = " << c.patch_size << '\n'
        << "background_min_size = " << c.background_min_size << '\n'
        << "background_count = " << c.background_count << '\n'
        << "max_overlap = " << c.max_overlap << '\n'
        << "exclusion_margin = " << c.exclusion_margin << '\n'
        << "frame_stride = " << c.frame_stride << '\n'
        << "augment_validation = " << (c.augment_validation ? "true" : "false") << '\n'
        << "network_spec = " << c.network_spec.string() << '\n'
        << "train_config = " << c.train_config.string() << '\n'
        << "fusion_window = " << c.fusion_window << '\n'
        << "seed = " << c.seed << '\n'
        << "precision = " << precision_name(c.precision) << '\n'
        << "class_count = " << c.class_count << '\n';
    return out.str();
}

nn::TrainConfig desk_train_config() {
    nn::TrainConfig t;
    t.max_iterations = 10000;
    t.batch_size = 64;
    t.val_interval = 250;
    return t;
}

nn::NetworkSpec resolve_network_spec(const PipelineConfig& cfg, int class_count) {
    if (!cfg.network_spec.empty()) return nn::load_network_spec(cfg.network_spec);
    return nn::desk_scale_spec(class_count);
}

nn::TrainConfig resolve_train_config(const PipelineConfig& cfg) {
    if (!cfg.train_config.empty()) return nn::load_train_config(cfg.train_config);
    auto t = desk_train_config();
    t.seed = derive_seed(cfg.seed, hash_name("train"));
    return t;
}

annotation::VideoAnnotation oracle_annotation(const Dataset& ds, const std::string& video_id, double tau) {
    annotation::VideoAnnotation a;
    a.video_id = video_id;
    a.tau = tau;
    a.category = ds.info(video_id).category;
    a.note = "oracle";
    for (const auto& row : ds.truth(video_id)) {
        if (row.phase != "discovery") {
            a.start_frame = row.frame;
            break;
        }
    }
    return a;
}

namespace {

void log_line(const Logger& log, const std::string& line) {
    if (log) log(line);
}

std::vector<gaze::SyncedFixation> synced_fixations(const Dataset& ds, const std::string& id) {
    const auto info = ds.info(id);
    gaze::InterpolationOptions opts;
    opts.frame_width = info.width;
    opts.frame_height = info.height;
    return gaze::interpolate_track(ds.gaze(id), ds.clock(id), opts);
}

BoundingBox proposal_box(const PipelineConfig& cfg, const Image& frame, const gaze::SyncedFixation& f, double tau) {
    return saliency::saliency_bbox(frame.width, frame.height, f.x, f.y, f.d, tau, cfg.wooding, cfg.map);
}

}  // namespace

// ------------------------------------------------------------------ extract

std::string ExtractSummary::counts_csv() const {
    std::ostringstream out;
    out << "split,label,count\n";
    for (const auto& [split, per_label] : counts) {
        for (const auto& [label, n] : per_label) out << split << ',' << label << ',' << n << '\n';
    }
    return out.str();
}

ExtractSummary extract(const PipelineConfig& cfg, const ExtractOptions& opts) {
    cfg.validate();
    if (opts.out.empty()) throw Error(Errc::InvalidConfig, "extract needs an output directory");
    const Dataset ds(cfg.dataset_root);

    std::optional<annotation::AnnotationStore> store;
    if (!opts.oracle) {
        const auto path = opts.annotations.empty() ? cfg.dataset_root / "annotations.jsonl" : opts.annotations;
        if (!fs::exists(path)) {
            throw Error(Errc::MissingAnnotations, "no annotation store at " + path.string() + " (use --oracle for synthetic data)");
        }
        store.emplace(path);
        std::vector<std::string> missing;
        for (auto split : opts.splits) {
            for (const auto& id : ds.videos_in(split)) {
                if (!store->current(id)) missing.push_back(id);
            }
        }
        if (!missing.empty()) {
            std::string list;
            for (std::size_t i = 0; i < missing.size() && i < 5; ++i) list += (i ? ", " : "") + missing[i];
            throw Error(Errc::MissingAnnotations, std::to_string(missing.size()) + " video(s) lack an annotation: " + list +
                                                      (missing.size() > 5 ? ", ..." : ""));
        }
    }

    ExtractSummary summary;
    for (auto split : opts.splits) {
        const std::string split_dir_name(dataset::split_name(split));
        const auto split_dir = opts.out / split_dir_name;
        fs::remove_all(split_dir);
        fs::create_directories(split_dir / "patches");
        patches::PatchWriter writer(split_dir / "patches");
        auto& counts = summary.counts[split_dir_name];
        const bool augment = split == Split::Train || (split == Split::Validation && cfg.augment_validation);
        const bool with_background = split != Split::Test && cfg.background_count > 0;

        auto emit = [&](const patches::Patch& p) {
            if (augment) {
                for (const auto& v : patches::augment(p)) writer.write(v);
                counts[p.label] += 16;
            } else {
                writer.write(p);
                counts[p.label] += 1;
            }
        };

        for (const auto& id : ds.videos_in(split)) {
            const auto ann = opts.oracle ? oracle_annotation(ds, id, cfg.tau) : *store->current(id);
            const auto info = ds.info(id);
            patches::BackgroundParams bg;
            bg.count = cfg.background_count;
            bg.min_size = cfg.min_background_size(info.height);
            bg.max_overlap = cfg.max_overlap;

            for (const auto& f : synced_fixations(ds, id)) {
                if (f.frame_index < ann.start_frame || (f.frame_index - ann.start_frame) % cfg.frame_stride != 0) continue;
                if (f.interpolated || f.low_confidence) {
                    ++summary.frames_skipped;
                    continue;
                }
                const Image frame = ds.frame(id, f.frame_index);
                const auto box = proposal_box(cfg, frame, f, ann.tau);
                auto obj = patches::extract_object_patch(frame, box, cfg.patch_size);
                obj.label = ann.category;
                obj.video_id = id;
                obj.frame = f.frame_index;
                emit(obj);
                ++summary.frames_used;

                if (!with_background) continue;
                const auto zone = patches::make_exclusion_zone(box, frame.width, frame.height, cfg.exclusion_margin);
                std::mt19937_64 rng(derive_seed(cfg.seed, hash_name(id) ^ static_cast<std::uint64_t>(f.frame_index)));
                std::vector<BoundingBox> boxes;
                try {
                    boxes = patches::sample_background_boxes(frame.width, frame.height, zone, bg, rng);
                } catch (const Error& e) {
                    if (e.code() != Errc::NoFreeSpace) throw;
                }
                for (const auto& b : boxes) {
                    auto p = patches::extract_object_patch(frame, b, cfg.patch_size);
                    p.label = patches::kBackgroundLabel;
                    p.video_id = id;
                    p.frame = f.frame_index;
                    emit(p);
                }
            }
        }
        writer.finish(split_dir / "manifest.csv");
        std::ostringstream line;
        line << split_dir_name << ": " << writer.rows().size() << " patches;";
        for (const auto& [label, n] : counts) line << ' ' << label << '=' << n;
        log_line(opts.log, line.str());
    }
    write_text_file_atomic(opts.out / "counts.csv", summary.counts_csv());
    return summary;
}

// ------------------------------------------------------------------ train

namespace {

template <typename T>
TrainSummary train_impl(const PipelineConfig& cfg, const TrainOptions& opts) {
    const auto tcfg = resolve_train_config(cfg);
    std::optional<nn::Network<T>> net;
    nn::TrainState<T> state;
    if (!opts.resume.empty()) {
        auto ck = nn::load_checkpoint<T>(opts.resume);
        net.emplace(std::move(ck.net));
        state = std::move(ck.state);
        log_line(opts.log, "resuming from iteration " + std::to_string(state.iteration));
    } else {
        net.emplace(resolve_network_spec(cfg, cfg.class_count), derive_seed(cfg.seed, hash_name("init")));
    }
    net->set_checked(tcfg.checked);
    const auto input = net->input_shape();
    const auto train_set =
        nn::load_patch_dataset(opts.patches / "train" / "manifest.csv", opts.patches / "train" / "patches", input);
    nn::PatchDataset val_set;
    if (fs::exists(opts.patches / "val" / "manifest.csv")) {
        val_set = nn::load_patch_dataset(opts.patches / "val" / "manifest.csv", opts.patches / "val" / "patches", input);
    }
    log_line(opts.log, "train patches " + std::to_string(train_set.size()) + ", validation patches " +
                           std::to_string(val_set.size()));

    fs::create_directories(opts.out);
    const auto ckpt = opts.out / "model.ckpt";
    write_text_file_atomic(opts.out / "network.spec", nn::format_network_spec(net->spec()));
    write_text_file_atomic(opts.out / "train.cfg", nn::format_train_config(tcfg));

    nn::TrainHooks<T> hooks;
    hooks.on_validation = [&](const nn::AccuracyPoint& p) {
        std::ostringstream line;
        line << "iteration " << p.iteration << " validation accuracy " << p.accuracy;
        log_line(opts.log, line.str());
    };
    hooks.on_checkpoint = [&](const nn::Network<T>& n, const nn::TrainState<T>& s) {
        const auto tmp = fs::path(ckpt.string() + ".tmp");
        nn::save_checkpoint(tmp, n, s);
        fs::rename(tmp, ckpt);
    };
    TrainSummary summary;
    summary.curves = nn::train(*net, tcfg, train_set, val_set, state, hooks);
    summary.iterations = state.iteration;
    summary.checkpoint = ckpt;
    if (!summary.curves.validation.empty()) summary.final_val_accuracy = summary.curves.validation.back().accuracy;

    const bool resumed = !opts.resume.empty();
    auto write_curve = [&](const fs::path& path, const std::string& csv) {
        if (resumed && fs::exists(path)) {
            const auto body = csv.substr(csv.find('\n') + 1);
            write_text_file_atomic(path, read_text_file(path) + body);
        } else {
            write_text_file_atomic(path, csv);
        }
    };
    write_curve(opts.out / "loss.csv", summary.curves.loss_csv());
    write_curve(opts.out / "validation.csv", summary.curves.validation_csv());
    return summary;
}

}  // namespace

TrainSummary train(const PipelineConfig& cfg, const TrainOptions& opts) {
    cfg.validate();
    if (opts.patches.empty() || opts.out.empty()) {
        throw Error(Errc::InvalidConfig, "train needs a patch directory and an output directory");
    }
    return cfg.precision == Precision::Single ? train_impl<float>(cfg, opts) : train_impl<double>(cfg, opts);
}

// ------------------------------------------------------------------ online path

namespace {

/// Per-frame online stages, timed into `latency` when given.
template <typename T>
struct OnlineClassifier {
    const PipelineConfig& cfg;
    nn::Network<T> net;

    nn::ScoreVector classify(const Image& frame, const gaze::SyncedFixation& f, fusion::FusionBuffer& buffer,
                             metrics::LatencyProfile& latency) {
        latency.begin_frame();
        BoundingBox box;
        {
            metrics::StageTimer t(latency, "saliency");
            box = proposal_box(cfg, frame, f, cfg.tau);
        }
        patches::Patch patch;
        {
            metrics::StageTimer t(latency, "patch");
            patch = patches::extract_object_patch(frame, box, net.input_shape().w);
        }
        nn::ScoreVector scores;
        {
            metrics::StageTimer t(latency, "inference");
            scores = net.predict(nn::image_to_tensor<T>(patch.pixels, net.spec()));
        }
        {
            metrics::StageTimer t(latency, "fusion");
            buffer.push(f.frame_index, scores);
        }
        latency.end_frame();
        return scores;
    }
};

template <typename T>
EvalResult evaluate_impl(const PipelineConfig& cfg, const EvalOptions& opts) {
    const Dataset ds(cfg.dataset_root);
    const auto ids = ds.videos_in(opts.split);
    if (ids.empty()) {
        throw Error(Errc::DatasetEmpty, std::string("no videos in the ") + std::string(dataset::split_name(opts.split)) +
                                            " split");
    }
    OnlineClassifier<T> online{cfg, nn::load_checkpoint<T>(opts.checkpoint).net};
    const int classes = online.net.class_count();

    EvalResult result;
    auto& report = result.report;
    report.confusion = metrics::ConfusionMatrix(classes);
    for (int c = 0; c < classes; ++c) {
        report.class_names.emplace_back(c < sim::kClassCount ? std::string(sim::category_name(c)) : std::to_string(c));
    }

    for (const auto& id : ids) {
        const auto info = ds.info(id);
        fusion::FusionBuffer buffer(classes, cfg.fusion_window > 0 ? cfg.fusion_window : std::max(1, info.frame_count));
        fusion::ScoreSequence seq{id, {}};
        for (const auto& f : synced_fixations(ds, id)) {
            if (f.interpolated) continue;  // no proposal without gaze
            const Image frame = ds.frame(id, f.frame_index);
            auto scores = online.classify(frame, f, buffer, report.latency);
            const int predicted = fusion::argmax(scores);
            result.frame_decisions.push_back({id, f.frame_index, predicted, info.category, scores[predicted]});
            seq.entries.push_back({f.frame_index, std::move(scores), f.low_confidence});
        }
        if (seq.entries.empty()) {
            log_line(opts.log, id + ": no gaze-backed frames, skipped");
            continue;
        }
        const auto mean = fusion::fuse_mean(seq);
        const auto majority = fusion::fuse_majority(seq);
        result.video_decisions.push_back({id, -1, mean.category, info.category, mean.top_score});
        result.fusion_rows.push_back(fusion::format_report_row(id, mean, majority));
        report.confusion.add(info.category, mean.category);
    }
    if (result.video_decisions.empty()) throw Error(Errc::NoFrames, "no video produced a decision");

    report.fused = metrics::mean_average_precision(result.video_decisions, classes);
    report.unfused = metrics::mean_average_precision(result.frame_decisions, classes);
    report.frame_accuracy = metrics::accuracy(result.frame_decisions);
    report.video_accuracy = metrics::accuracy(result.video_decisions);
    std::ostringstream line;
    line << "videos " << result.video_decisions.size() << ", frames " << result.frame_decisions.size()
         << ", mAP fused " << report.fused.map << ", unfused " << report.unfused.map;
    log_line(opts.log, line.str());
    return result;
}

}  // namespace

EvalResult evaluate(const PipelineConfig& cfg, const EvalOptions& opts) {
    cfg.validate();
    return cfg.precision == Precision::Single ? evaluate_impl<float>(cfg, opts) : evaluate_impl<double>(cfg, opts);
}

void write_eval_outputs(const EvalResult& r, const fs::path& out) {
    fs::create_directories(out);
    write_text_file_atomic(out / "report.csv", r.report.summary_csv());
    write_text_file_atomic(out / "ap_plot.csv", r.report.ap_plot_data());
    std::string fusion = std::string(fusion::kReportHeader) + "\n";
    for (const auto& row : r.fusion_rows) fusion += row + "\n";
    write_text_file_atomic(out / "fusion.csv", fusion);
    write_text_file_atomic(out / "confusion.csv", r.report.confusion.csv());
    write_text_file_atomic(out / "latency.csv", r.report.latency.csv());
    std::ostringstream frames;
    frames.precision(10);
    frames << "video_id,frame,predicted,truth,score\n";
    for (const auto& d : r.frame_decisions) {
        frames << d.video_id << ',' << d.frame << ',' << d.predicted << ',' << d.truth << ',' << d.score << '\n';
    }
    write_text_file_atomic(out / "frames.csv", frames.str());
}

// ------------------------------------------------------------------ profile

bool ProfileResult::within_budget() const {
    return latency.frame_count() > 0 && latency.total().mean_ms <= kFixationBudgetMs;
}

std::string ProfileResult::csv() const {
    std::ostringstream out;
    out << latency.csv();
    out.precision(6);
    out << std::fixed;
    if (full_hd_saliency) {
        const auto& s = *full_hd_saliency;
        out << "saliency_1920x1080," << s.count << ',' << s.mean_ms << ',' << s.p95_ms << ',' << s.max_ms << '\n';
    }
    out << "budget_ms," << kFixationBudgetMs << "\nreference_total_ms," << kReferenceTotalMs << '\n';
    return out.str();
}

namespace {

template <typename T>
ProfileResult profile_impl(const PipelineConfig& cfg, const ProfileOptions& opts) {
    const Dataset ds(cfg.dataset_root);
    auto ids = ds.videos_in(Split::Test);
    if (ids.empty()) ids = ds.video_ids();
    if (ids.empty()) throw Error(Errc::DatasetEmpty, "dataset has no videos to profile");
    OnlineClassifier<T> online{cfg, nn::load_checkpoint<T>(opts.checkpoint).net};
    const int classes = online.net.class_count();

    ProfileResult result;
    bool progressed = true;
    while (static_cast<long>(result.latency.frame_count()) < opts.frames && progressed) {
        progressed = false;
        for (const auto& id : ids) {
            fusion::FusionBuffer buffer(classes, cfg.fusion_window > 0 ? cfg.fusion_window : ds.info(id).frame_count);
            for (const auto& f : synced_fixations(ds, id)) {
                if (f.interpolated) continue;
                const Image frame = ds.frame(id, f.frame_index);
                online.classify(frame, f, buffer, result.latency);
                progressed = true;
                if (static_cast<long>(result.latency.frame_count()) >= opts.frames) break;
            }
            if (static_cast<long>(result.latency.frame_count()) >= opts.frames) break;
        }
    }
    if (opts.full_hd_saliency) {
        metrics::LatencyProfile hd;
        std::mt19937_64 rng(derive_seed(cfg.seed, hash_name("profile")));
        std::uniform_real_distribution<double> ux(0.0, 1919.0), uy(0.0, 1079.0), ud(300.0, 1200.0);
        for (int i = 0; i < 20; ++i) {
            hd.begin_frame();
            {
                metrics::StageTimer t(hd, "saliency");
                saliency::saliency_bbox(1920, 1080, ux(rng), uy(rng), ud(rng), cfg.tau, cfg.wooding, cfg.map);
            }
            hd.end_frame();
        }
        result.full_hd_saliency = hd.stage("saliency");
    }
    std::ostringstream line;
    line.precision(4);
    line << std::fixed << "frames " << result.latency.frame_count() << ", mean total "
         << result.latency.total().mean_ms << " ms (budget " << kFixationBudgetMs << " ms, reference "
         << kReferenceTotalMs << " ms)";
    log_line(opts.log, line.str());
    return result;
}

}  // namespace

ProfileResult profile(const PipelineConfig& cfg, const ProfileOptions& opts) {
    cfg.validate();
    return cfg.precision == Precision::Single ? profile_impl<float>(cfg, opts) : profile_impl<double>(cfg, opts);
}

}  // namespace egosal::pipeline
