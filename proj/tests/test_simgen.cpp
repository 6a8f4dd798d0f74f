#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "doctest.h"
#include "egosal/dataset.hpp"
#include "egosal/error.hpp"
#include "egosal/simgen.hpp"
#include "egosal/text_io.hpp"

using namespace egosal;
using namespace egosal::sim;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("egosal_sim_" + name);
    fs::remove_all(dir);
    return dir;
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_text_file(e.path());
    }
    return out;
}

CorpusConfig small_corpus(int videos) {
    CorpusConfig cfg;
    cfg.videos = videos;
    cfg.seed = 7;
    cfg.width = 192;
    cfg.height = 108;
    cfg.gaze.duration_ms = 1800;
    return cfg;
}

}  // namespace

TEST_CASE("render a red square on white") {
    SceneSpec spec;
    spec.width = 100;
    spec.height = 80;
    spec.background = {255, 255, 255};
    spec.objects.push_back({static_cast<int>(ShapeKind::Cube), {255, 0, 0}, 20, 50, 40});
    const auto img = render_scene(spec, 1);
    const auto box = spec.objects[0].box();
    for (int y = 0; y < 80; ++y) {
        for (int x = 0; x < 100; ++x) {
            const bool white = img.at(x, y, 0) == 255 && img.at(x, y, 1) == 255 && img.at(x, y, 2) == 255;
            CHECK(white == !box.contains(x, y));
        }
    }
    CHECK(render_scene(spec, 1) == render_scene(spec, 1));
    CHECK(render_scene(spec, 1, 3, -2).at(box.x0 + 3, box.y0 - 2, 1) == 0);
}

TEST_CASE("scene validation") {
    SceneSpec spec;
    spec.objects.push_back({1, {0, 0, 0}, 40, 100, 100});
    spec.objects.push_back({2, {0, 0, 0}, 40, 130, 100});
    CHECK_THROWS_AS(spec.validate(), Error);
    spec.objects[1].cx = 140;
    CHECK_NOTHROW(spec.validate());
    spec.objects[1].cx = 635;
    CHECK_THROWS_AS(spec.validate(), Error);
}

TEST_CASE("motion blur preserves the mean") {
    auto spec = random_lineup(320, 180, 3, 5);
    spec.texture_noise = 6;
    const auto sharp = render_scene(spec, 9);
    spec.blur_probability = 1.0;
    const auto blurred = render_scene(spec, 9);
    CHECK(blurred != sharp);
    CHECK(std::abs(mean_intensity(blurred) - mean_intensity(sharp)) <= 0.5);
}

TEST_CASE("random line-up") {
    for (int c = 1; c <= kObjectCategories; ++c) {
        const auto spec = random_lineup(640, 360, c, 100 + c);
        REQUIRE(spec.objects.size() == 4);
        std::set<int> cats;
        for (const auto& o : spec.objects) cats.insert(o.category);
        CHECK(cats.size() == 4);
        CHECK(cats.count(c) == 1);
    }
}

TEST_CASE("gaze scripts") {
    GazeParams params;
    SUBCASE("phase durations stay in the observed ranges") {
        params.distractor_probability = 0.5;
        params.blink_probability = 0.5;
        for (std::uint64_t seed = 0; seed < 300; ++seed) {
            const auto spec = random_lineup(640, 360, 1 + seed % 8, seed);
            const auto g = simulate_gaze(spec, static_cast<int>(seed % 4), params, seed);
            double discovery = 0;
            for (const auto& p : g.script.phases) {
                switch (p.phase) {
                    case Phase::Discovery: discovery += p.duration_ms; break;
                    case Phase::Fixation: CHECK(p.duration_ms >= kFixationMin); break;
                    case Phase::Distractor:
                        CHECK(p.duration_ms >= kDistractorMin);
                        CHECK(p.duration_ms <= kDistractorMax);
                        break;
                    case Phase::Grasp:
                        CHECK(p.duration_ms >= kGraspMin);
                        CHECK(p.duration_ms <= kGraspMax);
                        break;
                }
            }
            CHECK(discovery >= kDiscoveryMin);
            CHECK(discovery <= kDiscoveryMax);
            CHECK(g.script.duration_ms() == doctest::Approx(params.duration_ms));
            CHECK(g.track.samples.size() == 100);
        }
    }
    SUBCASE("without distractors every post-discovery sample lies on the target") {
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            const auto spec = random_lineup(640, 360, 4, seed);
            const int target = static_cast<int>(seed % 4);
            const auto g = simulate_gaze(spec, target, params, seed);
            const auto box = spec.objects[target].box();
            for (const auto& s : g.track.samples) {
                if (g.script.at(s.t_ms).phase == Phase::Discovery) continue;
                CHECK(box.contains(static_cast<int>(s.x), static_cast<int>(s.y)));
            }
        }
    }
    SUBCASE("a distractor is one contiguous 100-500 ms run on another object") {
        params.distractor_probability = 1.0;
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            const auto spec = random_lineup(640, 360, 2, seed);
            const auto g = simulate_gaze(spec, 1, params, seed);
            int first = -1, last = -1, count = 0;
            for (std::size_t k = 0; k < g.track.samples.size(); ++k) {
                const auto& s = g.track.samples[k];
                if (g.script.at(s.t_ms).phase != Phase::Distractor) continue;
                if (first < 0) first = static_cast<int>(k);
                last = static_cast<int>(k);
                ++count;
                CHECK_FALSE(spec.objects[1].box().contains(static_cast<int>(s.x), static_cast<int>(s.y)));
            }
            REQUIRE(first >= 0);
            CHECK(last - first + 1 == count);
            CHECK(count * 20 >= 100 - 20);
            CHECK(count * 20 <= 500 + 20);
        }
    }
    SUBCASE("blinks are runs of invalid samples") {
        params.blink_probability = 1.0;
        bool saw_120 = false;
        for (std::uint64_t seed = 0; seed < 40; ++seed) {
            const auto spec = random_lineup(640, 360, 5, seed);
            const auto g = simulate_gaze(spec, 0, params, seed);
            REQUIRE(g.script.blinks.size() == 1);
            int invalid = 0;
            for (const auto& s : g.track.samples) invalid += s.valid ? 0 : 1;
            const double dur = g.script.blinks[0].duration_ms;
            CHECK(invalid == static_cast<int>(dur / 20.0 + 0.5));
            if (dur == 120.0) {
                saw_120 = true;
                CHECK(invalid == 6);
            }
        }
        CHECK(saw_120);
    }
    SUBCASE("truth boxes contain the gaze during fixations, with camera motion") {
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            const auto spec = random_lineup(640, 360, 6, seed);
            const CameraMotion motion{6.0, 0.3 * seed, 1.1 * seed};
            const auto g = simulate_gaze(spec, 2, params, seed, motion);
            for (const auto& s : g.track.samples) {
                if (g.script.at(s.t_ms).phase != Phase::Fixation) continue;
                const int dx = static_cast<int>(std::lround(motion.dx(s.t_ms)));
                const int dy = static_cast<int>(std::lround(motion.dy(s.t_ms)));
                auto b = spec.objects[2].box();
                CHECK(BoundingBox{b.x0 + dx, b.y0 + dy, b.x1 + dx, b.y1 + dy}.contains(
                    static_cast<int>(s.x), static_cast<int>(s.y)));
            }
        }
    }
    SUBCASE("too short") {
        params.duration_ms = 1000;
        CHECK_THROWS_AS(simulate_gaze(random_lineup(640, 360, 1, 1), 0, params, 1), Error);
    }
}

TEST_CASE("split assignment") {
    std::vector<int> cats;
    for (int i = 0; i < 40; ++i) cats.push_back(i % 8 + 1);
    const auto splits = assign_splits(cats, 3);
    std::map<std::string, int> count;
    std::map<int, std::map<std::string, int>> per_class;
    for (std::size_t i = 0; i < cats.size(); ++i) {
        ++count[splits[i]];
        ++per_class[cats[i]][splits[i]];
    }
    CHECK(count["train"] == 24);
    CHECK(count["val"] == 8);
    CHECK(count["test"] == 8);
    for (const auto& [c, m] : per_class) CHECK(m.at("train") == 3);
    CHECK(assign_splits({4}, 1) == std::vector<std::string>{"train"});
    CHECK(assign_splits(cats, 3) == splits);
}

TEST_CASE("corpus generation") {
    SUBCASE("forty videos") {
        const auto root = fresh_dir("forty");
        const auto videos = generate_corpus(root, small_corpus(40));
        REQUIRE(videos.size() == 40);
        std::map<int, int> per_class;
        for (const auto& v : videos) ++per_class[v.category];
        CHECK(per_class.size() == 8);
        for (const auto& [c, n] : per_class) CHECK(n == 5);

        const dataset::Dataset ds(root);
        const auto train = ds.videos_in(dataset::Split::Train);
        const auto val = ds.videos_in(dataset::Split::Validation);
        const auto test = ds.videos_in(dataset::Split::Test);
        CHECK(train.size() == 24);
        CHECK(val.size() == 8);
        CHECK(test.size() == 8);
        std::set<std::string> all(train.begin(), train.end());
        all.insert(val.begin(), val.end());
        all.insert(test.begin(), test.end());
        CHECK(all.size() == 40);

        const auto& id = videos[3].id;
        const auto info = ds.info(id);
        CHECK(info.frame_count == 45);
        CHECK(info.category == videos[3].category);
        const auto truth = ds.truth(id);
        CHECK(truth.size() == 45);
        const auto track = ds.gaze(id);
        CHECK(std::abs(static_cast<long>(track.samples.size()) - 2L * info.frame_count) <= 2);
        const auto frame = ds.frame(id, 44);
        CHECK(frame.width == 192);
        CHECK_THROWS_AS(ds.frame(id, 45), Error);
        for (const auto& row : truth) {
            CHECK(row.label == info.category);
            CHECK(row.box.inside(192, 108));
        }
        fs::remove_all(root);
    }
    SUBCASE("single video goes to train") {
        const auto root = fresh_dir("one");
        const auto videos = generate_corpus(root, small_corpus(1));
        CHECK(videos.at(0).split == "train");
        fs::remove_all(root);
    }
    SUBCASE("same seed, same tree") {
        const auto a = fresh_dir("det_a"), b = fresh_dir("det_b");
        auto cfg = small_corpus(3);
        cfg.gaze.distractor_probability = 0.5;
        cfg.gaze.blink_probability = 0.5;
        generate_corpus(a, cfg);
        generate_corpus(b, cfg);
        CHECK(tree_contents(a) == tree_contents(b));
        fs::remove_all(a);
        fs::remove_all(b);
    }
    SUBCASE("unwritable root") {
        const auto root = fresh_dir("blocked");
        write_text_file_atomic(root.string() + "_file", "x");
        CHECK_THROWS_AS(generate_corpus(root.string() + "_file", small_corpus(1)), Error);
        fs::remove(root.string() + "_file");
    }
}
