// Command-line entry point: simgen, annotate, extract, train, eval, profile.

#include <csignal>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "egosal/annotation_http.hpp"
#include "egosal/error.hpp"
#include "egosal/pipeline.hpp"
#include "egosal/simgen.hpp"
#include "egosal/text_io.hpp"

namespace fs = std::filesystem;
using namespace egosal;

namespace {

constexpr int kUsageError = 2;

annotation::HttpServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

void log_stderr(const std::string& line) { std::cerr << line << '\n'; }

std::vector<dataset::Split> parse_splits(const std::string& text) {
    std::vector<dataset::Split> out;
    for (const auto& name : split_csv(text)) out.push_back(dataset::parse_split(trim(name)));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaze-driven object recognition pipeline for egocentric video"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string precision;
    std::string dataset_root;
    app.add_option("--config", config_path, "Pipeline config file (key = value)")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Seed for every random stage");
    app.add_option("--precision", precision, "Arithmetic precision: double or single")
        ->check(CLI::IsMember({"double", "single"}));
    app.add_option("--dataset", dataset_root, "Dataset root (overrides the config)");

    // simgen
    auto* simgen = app.add_subcommand("simgen", "Generate a synthetic video corpus");
    sim::CorpusConfig corpus;
    std::string sim_out;
    simgen->add_option("--out", sim_out, "Output dataset root")->required();
    simgen->add_option("--videos", corpus.videos, "Number of videos")->check(CLI::PositiveNumber);
    simgen->add_option("--width", corpus.width, "Frame width, px")->check(CLI::PositiveNumber);
    simgen->add_option("--height", corpus.height, "Frame height, px")->check(CLI::PositiveNumber);
    simgen->add_option("--fps", corpus.fps, "Frame rate, Hz")->check(CLI::PositiveNumber);
    simgen->add_option("--duration-ms", corpus.gaze.duration_ms, "Video duration, ms");
    simgen->add_option("--gaze-rate", corpus.gaze.rate_hz, "Gaze sampling rate, Hz")->check(CLI::PositiveNumber);
    simgen->add_option("--distractor-rate", corpus.gaze.distractor_probability,
                       "Fraction of videos with a distractor excursion")
        ->check(CLI::Range(0.0, 1.0));
    simgen->add_option("--blink-rate", corpus.gaze.blink_probability, "Fraction of videos with a blink")
        ->check(CLI::Range(0.0, 1.0));
    simgen->add_option("--texture-noise", corpus.texture_noise, "Table texture amplitude");
    simgen->add_option("--blur-rate", corpus.blur_probability, "Per-frame motion blur probability")
        ->check(CLI::Range(0.0, 1.0));

    // annotate
    auto* annotate = app.add_subcommand("annotate", "Serve the annotation HTTP endpoints");
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string store_path;
    annotate->add_option("--host", host, "Bind address");
    annotate->add_option("--port", port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
    annotate->add_option("--store", store_path, "Annotation store (default <dataset>/annotations.jsonl)");

    // extract
    auto* extract = app.add_subcommand("extract", "Cut object and background patches");
    std::string extract_out, annotations_path, splits = "train,val,test";
    bool oracle = false;
    extract->add_option("--out", extract_out, "Patch output directory")->required();
    extract->add_flag("--oracle", oracle, "Use simulator ground truth instead of stored annotations");
    extract->add_option("--annotations", annotations_path, "Annotation store");
    extract->add_option("--splits", splits, "Comma-separated splits to extract");

    // train
    auto* train = app.add_subcommand("train", "Train the network on extracted patches");
    std::string patches_dir, train_out, resume;
    train->add_option("--patches", patches_dir, "Extract output directory")->required()->check(CLI::ExistingDirectory);
    train->add_option("--out", train_out, "Model output directory")->required();
    train->add_option("--resume", resume, "Checkpoint to continue from")->check(CLI::ExistingFile);

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate the online path with fusion");
    std::string checkpoint, eval_out, eval_split = "test";
    eval->add_option("--checkpoint", checkpoint, "Trained model")->required()->check(CLI::ExistingFile);
    eval->add_option("--out", eval_out, "Report directory")->required();
    eval->add_option("--split", eval_split, "Split to evaluate");

    // profile
    auto* prof = app.add_subcommand("profile", "Per-stage latency of the online path");
    long frames = 500;
    std::string profile_out;
    bool no_hd = false;
    prof->add_option("--checkpoint", checkpoint, "Trained model")->required()->check(CLI::ExistingFile);
    prof->add_option("--frames", frames, "Frames to time")->check(CLI::PositiveNumber);
    prof->add_option("--out", profile_out, "Write the latency CSV here");
    prof->add_flag("--no-full-hd", no_hd, "Skip the 1920x1080 saliency timing");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsageError;
    }

    try {
        pipeline::PipelineConfig cfg;
        if (!config_path.empty()) cfg = pipeline::load_config(config_path);
        if (seed) cfg.seed = *seed;
        if (!precision.empty()) cfg.precision = pipeline::parse_precision(precision);
        if (!dataset_root.empty()) cfg.dataset_root = dataset_root;

        auto need_dataset = [&] {
            if (cfg.dataset_root.empty()) {
                throw CLI::RequiredError("--dataset (or dataset_root in --config)");
            }
        };

        if (*simgen) {
            corpus.seed = cfg.seed;
            const auto videos = sim::generate_corpus(sim_out, corpus);
            std::cout << "wrote " << videos.size() << " videos to " << sim_out << '\n';
        } else if (*annotate) {
            need_dataset();
            annotation::ServiceConfig scfg;
            scfg.dataset_root = cfg.dataset_root;
            scfg.store_path = store_path;
            scfg.wooding = cfg.wooding;
            scfg.map = cfg.map;
            scfg.class_count = cfg.class_count;
            annotation::AnnotationService service(scfg);
            annotation::HttpServer server(service);
            const int bound = server.bind(host, port);
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cout << "annotation service on http://" << host << ':' << bound << '\n' << std::flush;
            server.serve();
            g_server = nullptr;
        } else if (*extract) {
            need_dataset();
            pipeline::ExtractOptions opts;
            opts.out = extract_out;
            opts.oracle = oracle;
            opts.annotations = annotations_path;
            opts.splits = parse_splits(splits);
            opts.log = log_stderr;
            const auto summary = pipeline::extract(cfg, opts);
            std::cout << summary.counts_csv();
        } else if (*train) {
            pipeline::TrainOptions opts;
            opts.patches = patches_dir;
            opts.out = train_out;
            opts.resume = resume;
            opts.log = log_stderr;
            const auto summary = pipeline::train(cfg, opts);
            std::cout << "iterations " << summary.iterations << ", validation accuracy "
                      << summary.final_val_accuracy << ", checkpoint " << summary.checkpoint.string() << '\n';
        } else if (*eval) {
            need_dataset();
            pipeline::EvalOptions opts;
            opts.checkpoint = checkpoint;
            opts.split = dataset::parse_split(eval_split);
            opts.log = log_stderr;
            const auto result = pipeline::evaluate(cfg, opts);
            pipeline::write_eval_outputs(result, eval_out);
            std::cout << result.report.summary_csv();
        } else if (*prof) {
            need_dataset();
            pipeline::ProfileOptions opts;
            opts.checkpoint = checkpoint;
            opts.frames = frames;
            opts.full_hd_saliency = !no_hd;
            opts.log = log_stderr;
            const auto result = pipeline::profile(cfg, opts);
            if (!profile_out.empty()) write_text_file_atomic(profile_out, result.csv());
            std::cout << result.csv();
            std::cout << (result.within_budget() ? "within" : "over") << " the " << pipeline::kFixationBudgetMs
                      << " ms budget\n";
        }
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsageError;
    } catch (const Error& e) {
        std::cerr << "error [" << errc_name(e.code()) << "]: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
