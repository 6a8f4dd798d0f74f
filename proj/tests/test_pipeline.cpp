#include <cstdlib>
#include <filesystem>
#include <map>
#include <set>

#include "doctest.h"
#include "egosal/annotation.hpp"
#include "egosal/dataset.hpp"
#include "egosal/error.hpp"
#include "egosal/patches.hpp"
#include "egosal/pipeline.hpp"
#include "egosal/simgen.hpp"
#include "egosal/text_io.hpp"

using namespace egosal;
using namespace egosal::pipeline;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("egosal_pipe_" + name);
    fs::remove_all(dir);
    return dir;
}

/// Small corpus at 192x108; `splits` overrides the generated assignment in order.
fs::path make_corpus(const std::string& name, int videos, double duration_ms, std::vector<std::string> splits = {}) {
    const auto root = fresh_dir(name);
    sim::CorpusConfig cfg;
    cfg.videos = videos;
    cfg.seed = 5;
    cfg.width = 192;
    cfg.height = 108;
    cfg.gaze.duration_ms = duration_ms;
    const auto made = sim::generate_corpus(root, cfg);
    if (!splits.empty()) {
        std::string text = std::string(dataset::kSplitHeader) + "\n";
        for (std::size_t i = 0; i < made.size(); ++i) text += made[i].id + "," + splits[i] + "\n";
        write_text_file_atomic(root / "split.csv", text);
    }
    return root;
}

PipelineConfig small_config(const fs::path& root) {
    PipelineConfig cfg;
    cfg.dataset_root = root;
    cfg.patch_size = 32;
    return cfg;
}

std::map<int, int> label_counts(const fs::path& manifest) {
    std::map<int, int> out;
    for (const auto& row : patches::read_manifest(manifest)) ++out[row.label];
    return out;
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_text_file(e.path());
    }
    return out;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(EGOSAL_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("pipeline config text") {
    PipelineConfig cfg;
    cfg.dataset_root = "/data/corpus";
    cfg.tau = 0.35;
    cfg.frame_stride = 3;
    cfg.fusion_window = 7;
    cfg.seed = 18446744073709551615ULL;
    cfg.precision = Precision::Single;
    cfg.map.normalization = saliency::Normalization::Sum;
    const auto back = parse_config(format_config(cfg));
    CHECK(format_config(back) == format_config(cfg));
    CHECK(back.seed == cfg.seed);
    CHECK(back.tau == 0.35);

    CHECK_THROWS_AS(parse_config("colour = blue\n"), Error);
    CHECK_THROWS_AS(parse_config("tau = 1.5\n"), Error);
    CHECK_THROWS_AS(parse_config("precision = half\n"), Error);
    CHECK_THROWS_AS(parse_config("frame_stride = 0\n"), Error);

    const auto dir = fresh_dir("cfg");
    fs::create_directories(dir);
    write_text_file_atomic(dir / "run.cfg", "dataset_root = data\ntrain_config = /abs/train.cfg\n");
    const auto loaded = load_config(dir / "run.cfg");
    CHECK(loaded.dataset_root == dir / "data");
    CHECK(loaded.train_config == "/abs/train.cfg");

    CHECK(cfg.min_background_size(1080) == 95);
    CHECK(cfg.min_background_size(360) == 32);
    cfg.background_min_size = 50;
    CHECK(cfg.min_background_size(360) == 50);
    fs::remove_all(dir);
}

TEST_CASE("desk training defaults keep the published schedule") {
    const auto t = desk_train_config();
    CHECK(t.base_lr == 0.001);
    CHECK(t.momentum == 0.9);
    CHECK(t.weight_decay == 0.0005);
    CHECK(t.lr_halving_period == 30000);
    CHECK(t.max_iterations == 10000);
    CHECK(t.batch_size == 64);
}

TEST_CASE("oracle annotations") {
    const auto root = make_corpus("oracle", 2, 1800);
    const dataset::Dataset ds(root);
    for (const auto& id : ds.video_ids()) {
        const auto a = oracle_annotation(ds, id, 0.4);
        const auto truth = ds.truth(id);
        CHECK(a.category == ds.info(id).category);
        CHECK(a.tau == 0.4);
        REQUIRE(a.start_frame > 0);
        CHECK(truth[a.start_frame].phase != "discovery");
        CHECK(truth[a.start_frame - 1].phase == "discovery");
    }
    fs::remove_all(root);
}

TEST_CASE("extraction") {
    SUBCASE("100 annotated train frames give 100x16 object and 100x16 background patches") {
        const auto root = make_corpus("hundred", 1, 4000, {"train"});
        const dataset::Dataset ds(root);
        const auto id = ds.video_ids().front();
        REQUIRE(ds.info(id).frame_count == 100);
        annotation::AnnotationStore store(root / "annotations.jsonl");
        annotation::VideoAnnotation a;
        a.video_id = id;
        a.start_frame = 0;
        a.tau = 0.5;
        a.category = ds.info(id).category;
        store.append(a);

        const auto out = fresh_dir("hundred_out");
        ExtractOptions opts;
        opts.out = out;
        opts.splits = {dataset::Split::Train};
        const auto summary = extract(small_config(root), opts);
        CHECK(summary.frames_used == 100);
        const auto counts = label_counts(out / "train" / "manifest.csv");
        CHECK(counts.at(a.category) == 1600);
        CHECK(counts.at(0) == 1600);
        CHECK(summary.counts.at("train").at(a.category) == 1600);
        CHECK(read_text_file(out / "counts.csv").find("train," + std::to_string(a.category) + ",1600") !=
              std::string::npos);
        fs::remove_all(out);
        fs::remove_all(root);
    }
    SUBCASE("start_frame gates extraction, and the split decides augmentation and background") {
        const auto root = make_corpus("splits", 3, 1800, {"train", "val", "test"});
        const dataset::Dataset ds(root);
        annotation::AnnotationStore store(root / "annotations.jsonl");
        for (const auto& id : ds.video_ids()) {
            annotation::VideoAnnotation a;
            a.video_id = id;
            a.start_frame = 20;
            a.tau = 0.6;
            a.category = ds.info(id).category;
            store.append(a);
        }
        const auto out = fresh_dir("splits_out");
        ExtractOptions opts;
        opts.out = out;
        extract(small_config(root), opts);
        for (const char* split : {"train", "val", "test"}) {
            INFO(split);
            const auto rows = patches::read_manifest(out / split / "manifest.csv");
            REQUIRE_FALSE(rows.empty());
            std::set<std::pair<int, int>> variants;
            bool background = false;
            for (const auto& r : rows) {
                CHECK(r.frame >= 20);
                variants.insert({r.rotation, r.blur_k});
                background = background || r.label == 0;
            }
            const std::string s = split;
            CHECK(variants.size() == (s == "train" ? 16u : 1u));
            CHECK(background == (s != "test"));
        }
        fs::remove_all(out);
        fs::remove_all(root);
    }
    SUBCASE("missing annotations") {
        const auto root = make_corpus("missing", 2, 1800);
        ExtractOptions opts;
        opts.out = fresh_dir("missing_out");
        try {
            extract(small_config(root), opts);
            FAIL("expected MissingAnnotations");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::MissingAnnotations);
        }
        const dataset::Dataset ds(root);
        annotation::AnnotationStore store(root / "annotations.jsonl");
        store.append(oracle_annotation(ds, ds.video_ids().front(), 0.5));
        try {
            extract(small_config(root), opts);
            FAIL("expected MissingAnnotations");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::MissingAnnotations);
        }
        fs::remove_all(opts.out);
        fs::remove_all(root);
    }
}

TEST_CASE("train, resume, evaluate and profile on a tiny corpus") {
    const auto root = make_corpus("tiny", 6, 1800, {"train", "train", "train", "val", "test", "test"});
    auto cfg = small_config(root);
    cfg.frame_stride = 6;
    const auto work = fresh_dir("tiny_work");
    fs::create_directories(work);

    ExtractOptions xo;
    xo.out = work / "patches";
    xo.oracle = true;
    extract(cfg, xo);

    auto tcfg = desk_train_config();
    tcfg.max_iterations = 30;
    tcfg.batch_size = 16;
    tcfg.val_interval = 10;
    tcfg.seed = 3;
    write_text_file_atomic(work / "train30.cfg", nn::format_train_config(tcfg));
    tcfg.max_iterations = 15;
    write_text_file_atomic(work / "train15.cfg", nn::format_train_config(tcfg));

    TrainOptions to;
    to.patches = xo.out;
    cfg.train_config = work / "train30.cfg";
    to.out = work / "full";
    const auto full = train(cfg, to);
    CHECK(full.iterations == 30);
    CHECK(fs::exists(work / "full" / "model.ckpt"));
    CHECK(split_csv(read_text_file(work / "full" / "loss.csv")).size() > 1);

    SUBCASE("resume continues the same run") {
        cfg.train_config = work / "train15.cfg";
        to.out = work / "half";
        train(cfg, to);
        cfg.train_config = work / "train30.cfg";
        to.resume = work / "half" / "model.ckpt";
        const auto resumed = train(cfg, to);
        CHECK(resumed.iterations == 30);
        REQUIRE(resumed.curves.loss.size() == 15);
        const double before = full.curves.loss[15].loss;
        const double after = resumed.curves.loss.front().loss;
        CHECK(std::abs(after - before) <= 0.05 * before);
        CHECK(resumed.curves.loss.back().loss == doctest::Approx(full.curves.loss.back().loss).epsilon(1e-12));
        const auto table = read_csv(work / "half" / "loss.csv");
        CHECK(table.rows.size() == 30);
    }
    SUBCASE("corrupted checkpoint") {
        const auto bad = work / "bad.ckpt";
        auto bytes = read_text_file(work / "full" / "model.ckpt");
        bytes[bytes.size() / 2] ^= 0x5A;
        write_text_file_atomic(bad, bytes);
        to.resume = bad;
        to.out = work / "never";
        CHECK_THROWS_AS(train(cfg, to), Error);
        CHECK_FALSE(fs::exists(work / "never" / "model.ckpt"));
    }
    SUBCASE("evaluation is deterministic and reports every artefact") {
        EvalOptions eo;
        eo.checkpoint = work / "full" / "model.ckpt";
        const auto a = evaluate(cfg, eo);
        const auto b = evaluate(cfg, eo);
        REQUIRE(a.video_decisions.size() == 2);
        CHECK(a.fusion_rows == b.fusion_rows);
        CHECK(a.report.fused.map == b.report.fused.map);
        CHECK(a.report.unfused.map == b.report.unfused.map);
        REQUIRE(a.frame_decisions.size() == b.frame_decisions.size());
        for (std::size_t i = 0; i < a.frame_decisions.size(); ++i) {
            CHECK(a.frame_decisions[i].score == b.frame_decisions[i].score);
        }
        CHECK(a.report.latency.frame_count() == a.frame_decisions.size());
        write_eval_outputs(a, work / "eval");
        for (const char* f : {"report.csv", "ap_plot.csv", "fusion.csv", "confusion.csv", "latency.csv", "frames.csv"}) {
            CHECK(fs::exists(work / "eval" / f));
        }
        CHECK(read_text_file(work / "eval" / "fusion.csv").rfind("video_id,n_frames", 0) == 0);
    }
    SUBCASE("empty split") {
        auto other = cfg;
        const auto root2 = make_corpus("tiny_notest", 2, 1800, {"train", "val"});
        other.dataset_root = root2;
        EvalOptions eo;
        eo.checkpoint = work / "full" / "model.ckpt";
        CHECK_THROWS_AS(evaluate(other, eo), Error);
        fs::remove_all(root2);
    }
    SUBCASE("profile") {
        ProfileOptions po;
        po.checkpoint = work / "full" / "model.ckpt";
        po.frames = 120;
        po.full_hd_saliency = true;
        const auto p = profile(cfg, po);
        CHECK(p.latency.frame_count() == 120);
        CHECK(p.full_hd_saliency.has_value());
        CHECK(p.within_budget());
        CHECK(p.csv().find("reference_total_ms,28.6") != std::string::npos);
    }
    fs::remove_all(work);
    fs::remove_all(root);
}

TEST_CASE("command line") {
    CHECK(run_cli("") == 2);
    CHECK(run_cli("simgen --videos 2") == 2);
    CHECK(run_cli("--precision quad simgen --out /tmp/x") == 2);
    CHECK(run_cli("--help") == 0);

    const auto a = fresh_dir("cli_a"), b = fresh_dir("cli_b");
    const std::string common = " --videos 2 --width 160 --height 90 --duration-ms 1700 --distractor-rate 0.5";
    CHECK(run_cli("--seed 7 simgen --out " + a.string() + common) == 0);
    CHECK(run_cli("--seed 7 simgen --out " + b.string() + common) == 0);
    CHECK(fs::exists(a / "split.csv"));
    CHECK(tree_contents(a) == tree_contents(b));

    CHECK(run_cli("--dataset " + a.string() + " extract --out " + (a / "p").string()) == 1);
    CHECK(run_cli("--dataset " + a.string() + " extract --oracle --out " + (a / "p").string()) == 0);
    CHECK(fs::exists(a / "p" / "train" / "manifest.csv"));
    fs::remove_all(a);
    fs::remove_all(b);
}
