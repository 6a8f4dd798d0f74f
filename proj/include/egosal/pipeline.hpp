#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "egosal/annotation.hpp"
#include "egosal/dataset.hpp"
#include "egosal/metrics.hpp"
#include "egosal/nnet/train.hpp"
#include "egosal/saliency.hpp"

namespace egosal::pipeline {

enum class Precision { Double, Single };

std::string_view precision_name(Precision p);
Precision parse_precision(std::string_view name);

/// Stage settings shared by every subcommand. Text form is key = value (see format_config).
struct PipelineConfig {
    std::filesystem::path dataset_root;
    saliency::WoodingParams wooding;
    saliency::MapOptions map;

    double tau = 0.5;
    int patch_size = 64;
    /// Smallest background side in px; 0 scales 95 px at 1080 rows to the frame height.
    int background_min_size = 0;
    int background_count = 1;
    double max_overlap = 0.20;
    double exclusion_margin = 0.25;
    /// Keep every n-th annotated frame when extracting.
    int frame_stride = 1;
    bool augment_validation = false;

    /// Empty paths select the built-in desk-scale network and training defaults.
    std::filesystem::path network_spec;
    std::filesystem::path train_config;

    /// Trailing window of the online fusion buffer; 0 uses the whole video.
    int fusion_window = 0;
    std::uint64_t seed = 1;
    Precision precision = Precision::Double;
    /// Output classes of the built-in network, background included.
    int class_count = 9;

    void validate() const;
    int min_background_size(int frame_height) const;
};

PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);
std::string format_config(const PipelineConfig& cfg);

/// Training defaults for the desk-scale acceptance runs.
nn::TrainConfig desk_train_config();
nn::NetworkSpec resolve_network_spec(const PipelineConfig& cfg, int class_count);
nn::TrainConfig resolve_train_config(const PipelineConfig& cfg);

/// Ground-truth annotation for synthetic videos: first frame after discovery, true label.
annotation::VideoAnnotation oracle_annotation(const dataset::Dataset& ds, const std::string& video_id, double tau);

using Logger = std::function<void(const std::string&)>;

struct ExtractOptions {
    std::filesystem::path out;
    bool oracle = false;
    /// Annotation store; defaults to <dataset_root>/annotations.jsonl.
    std::filesystem::path annotations;
    std::vector<dataset::Split> splits{dataset::Split::Train, dataset::Split::Validation, dataset::Split::Test};
    Logger log;
};

struct ExtractSummary {
    /// split name -> label -> patch count
    std::map<std::string, std::map<int, long>> counts;
    long frames_used = 0;
    long frames_skipped = 0;

    std::string counts_csv() const;
};

/// Writes <out>/<split>/manifest.csv plus patch images. Raises MissingAnnotations.
ExtractSummary extract(const PipelineConfig& cfg, const ExtractOptions& opts);

struct TrainOptions {
    std::filesystem::path patches;  ///< extract output directory
    std::filesystem::path out;
    std::filesystem::path resume;   ///< checkpoint to continue from
    Logger log;
};

struct TrainSummary {
    long iterations = 0;
    double final_val_accuracy = 0.0;
    std::filesystem::path checkpoint;
    nn::TrainCurves curves;
};

/// Writes <out>/model.ckpt, loss.csv, validation.csv and the resolved configs.
TrainSummary train(const PipelineConfig& cfg, const TrainOptions& opts);

struct EvalOptions {
    std::filesystem::path checkpoint;
    dataset::Split split = dataset::Split::Test;
    Logger log;
};

struct EvalResult {
    metrics::EvalReport report;
    std::vector<metrics::Decision> frame_decisions;
    std::vector<metrics::Decision> video_decisions;
    /// One fusion report row per video (fusion::kReportHeader columns).
    std::vector<std::string> fusion_rows;
};

/// Online path: gaze -> saliency box -> patch -> network -> fusion. Reads gaze, frames and the
/// per-video label only; never the ground-truth boxes.
EvalResult evaluate(const PipelineConfig& cfg, const EvalOptions& opts);

/// report.csv, ap_plot.csv, fusion.csv, confusion.csv, latency.csv, frames.csv.
void write_eval_outputs(const EvalResult& result, const std::filesystem::path& out);

inline constexpr double kFixationBudgetMs = 250.0;
inline constexpr double kReferenceTotalMs = 28.6;

struct ProfileOptions {
    std::filesystem::path checkpoint;
    long frames = 500;
    /// Also time the saliency stage alone at 1920x1080.
    bool full_hd_saliency = true;
    Logger log;
};

struct ProfileResult {
    metrics::LatencyProfile latency;
    std::optional<metrics::StageStats> full_hd_saliency;

    bool within_budget() const;
    std::string csv() const;
};

/// Runs the online path over at least `frames` gaze-backed frames, cycling through the test videos.
ProfileResult profile(const PipelineConfig& cfg, const ProfileOptions& opts);

}  // namespace egosal::pipeline
