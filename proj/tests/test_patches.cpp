#include <filesystem>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "egosal/error.hpp"
#include "egosal/patches.hpp"

using namespace egosal;
using namespace egosal::patches;

namespace {

Image noise_image(int w, int h, std::uint64_t seed, int channels = 3) {
    Image img(w, h, channels);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> u(0, 255);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(u(rng));
    return img;
}

long long pixel_sum(const Image& img) {
    return std::accumulate(img.data.begin(), img.data.end(), 0LL);
}

Patch original(const Image& pixels) {
    Patch p;
    p.pixels = pixels;
    p.box = {0, 0, pixels.width, pixels.height};
    p.label = 3;
    p.video_id = "v";
    return p;
}

}  // namespace

TEST_CASE("object patch extraction") {
    const auto frame = noise_image(400, 300, 1);
    SUBCASE("100x100 crop becomes 227x227x3") {
        const auto p = extract_object_patch(frame, {50, 60, 150, 160}, 227);
        CHECK(p.pixels.width == 227);
        CHECK(p.pixels.height == 227);
        CHECK(p.pixels.channels == 3);
        CHECK(p.is_original());
    }
    SUBCASE("same size crop is unchanged") {
        const BoundingBox box{10, 20, 237, 247};
        CHECK(extract_object_patch(frame, box, 227).pixels == crop(frame, box));
    }
    SUBCASE("uniform colour stays uniform") {
        Image flat(300, 200, 3);
        for (int y = 0; y < 200; ++y) {
            for (int x = 0; x < 300; ++x) {
                flat.at(x, y, 0) = 17;
                flat.at(x, y, 1) = 130;
                flat.at(x, y, 2) = 250;
            }
        }
        for (int size : {7, 64, 227}) {
            const auto p = extract_object_patch(flat, {13, 5, 200, 83}, size);
            for (int y = 0; y < size; ++y) {
                for (int x = 0; x < size; ++x) {
                    CHECK(p.pixels.at(x, y, 0) == 17);
                    CHECK(p.pixels.at(x, y, 1) == 130);
                    CHECK(p.pixels.at(x, y, 2) == 250);
                }
            }
        }
    }
    SUBCASE("box outside the frame") {
        CHECK_THROWS_AS(extract_object_patch(frame, {350, 0, 401, 50}, 64), Error);
        CHECK_THROWS_AS(extract_object_patch(frame, {-1, 0, 10, 50}, 64), Error);
    }
}

TEST_CASE("exclusion zone") {
    CHECK(make_exclusion_zone({800, 400, 1000, 600}, 1920, 1080, 0.25).band == BoundingBox{0, 350, 1920, 650});
    CHECK(make_exclusion_zone({800, 400, 1000, 600}, 1920, 1080, 0.0).band == BoundingBox{0, 400, 1920, 600});
    const auto top = make_exclusion_zone({100, 0, 200, 80}, 1920, 1080, 0.5).band;
    CHECK(top == BoundingBox{0, 0, 1920, 120});
    CHECK(top.contains(BoundingBox{100, 0, 200, 80}));
}

TEST_CASE("overlap ratio and acceptance rule") {
    const BoundingBox a{0, 0, 100, 100}, b{80, 0, 180, 100};
    CHECK(overlap_ratio(a, b) == doctest::Approx(0.20));
    const ExclusionZone zone{{0, 400, 1920, 600}};
    CHECK(background_box_acceptable(b, zone, {a}, 1920, 1080, 95, 0.20));
    CHECK_FALSE(background_box_acceptable({79, 0, 179, 100}, zone, {a}, 1920, 1080, 95, 0.20));
    // one pixel into the zone
    CHECK_FALSE(background_box_acceptable({300, 301, 400, 401}, zone, {}, 1920, 1080, 95, 0.20));
    CHECK(background_box_acceptable({300, 300, 400, 400}, zone, {}, 1920, 1080, 95, 0.20));
    CHECK_FALSE(background_box_acceptable({0, 0, 94, 94}, zone, {}, 1920, 1080, 95, 0.20));
    CHECK_FALSE(background_box_acceptable({1900, 0, 2000, 100}, zone, {}, 1920, 1080, 95, 0.20));
}

TEST_CASE("background sampling on full HD frames") {
    const ExclusionZone zone = make_exclusion_zone({800, 400, 1000, 600}, 1920, 1080, 0.25);
    BackgroundParams params;
    params.count = 2;

    SUBCASE("two patches at least 95 px") {
        const auto frame = noise_image(1920, 1080, 2);
        const auto patches = sample_background(frame, zone, params, 7);
        REQUIRE(patches.size() == 2);
        for (const auto& p : patches) {
            CHECK(p.label == kBackgroundLabel);
            CHECK(p.pixels.width >= 95);
            CHECK(p.pixels.height == p.pixels.width);
        }
    }

    SUBCASE("1000 seeds respect every constraint") {
        params.count = 3;
        for (std::uint64_t seed = 0; seed < 1000; ++seed) {
            std::mt19937_64 rng(seed);
            const auto boxes = sample_background_boxes(1920, 1080, zone, params, rng);
            CHECK(!boxes.empty());
            for (std::size_t i = 0; i < boxes.size(); ++i) {
                const auto& b = boxes[i];
                CHECK(b.inside(1920, 1080));
                CHECK(b.width() == b.height());
                CHECK(b.width() >= 95);
                CHECK(intersect(b, zone.band).empty());
                for (std::size_t j = 0; j < i; ++j) CHECK(overlap_ratio(b, boxes[j]) <= 0.20);
            }
        }
    }

    SUBCASE("deterministic under seed") {
        std::mt19937_64 r1(99), r2(99);
        CHECK(sample_background_boxes(1920, 1080, zone, params, r1) ==
              sample_background_boxes(1920, 1080, zone, params, r2));
    }

    SUBCASE("no room left") {
        const ExclusionZone wide{{0, 50, 1920, 1030}};
        std::mt19937_64 rng(1);
        CHECK_THROWS_AS(sample_background_boxes(1920, 1080, wide, params, rng), Error);
    }
}

TEST_CASE("rotation") {
    Image two(2, 2, 1);
    two.data = {1, 2, 3, 4};  // [[a,b],[c,d]]
    const auto r = rotate90(two, 1);
    CHECK(r.data == std::vector<std::uint8_t>{3, 1, 4, 2});  // [[c,a],[d,b]]

    const auto img = noise_image(13, 7, 4);
    Image cur = img;
    for (int i = 0; i < 4; ++i) {
        cur = rotate90(cur, 1);
        CHECK(pixel_sum(cur) == pixel_sum(img));
    }
    CHECK(cur == img);
    CHECK(rotate90(img, 1).width == 7);
    CHECK(rotate90(img, 2) == rotate90(rotate90(img, 1), 1));
}

TEST_CASE("gaussian blur") {
    CHECK(blur_sigma_for_kernel(3) == doctest::Approx(0.8));
    CHECK(blur_sigma_for_kernel(5) == doctest::Approx(1.1));
    CHECK(blur_sigma_for_kernel(7) == doctest::Approx(1.4));
    const auto img = noise_image(40, 30, 5);
    CHECK(gaussian_blur(img, 1) == img);
    for (int k : {3, 5, 7}) {
        const auto out = gaussian_blur(img, k);
        CHECK(std::abs(mean_intensity(out) - mean_intensity(img)) <= 0.5);
        CHECK(out != img);
    }
    CHECK_THROWS_AS(gaussian_blur(img, 4), Error);
}

TEST_CASE("augmentation") {
    const auto p = original(noise_image(32, 32, 6));
    const auto variants = augment(p);
    REQUIRE(variants.size() == 16);
    std::set<std::pair<int, int>> tags;
    for (const auto& v : variants) {
        tags.insert({v.rotation_deg, v.blur_kernel});
        CHECK(v.label == p.label);
        CHECK(v.box == p.box);
    }
    CHECK(tags.size() == 16);
    CHECK(variants[0].is_original());
    CHECK(variants[0].pixels == p.pixels);
    for (const auto& v : variants) {
        if (v.blur_kernel == 1) CHECK(pixel_sum(v.pixels) == pixel_sum(p.pixels));
    }
    CHECK_THROWS_AS(augment(variants[5]), Error);
}

TEST_CASE("patch writer and manifest") {
    const auto dir = std::filesystem::temp_directory_path() / "egosal_patch_writer";
    std::filesystem::remove_all(dir);
    PatchWriter writer(dir);
    auto p = original(noise_image(16, 16, 7));
    p.video_id = "vid_003";
    p.frame = 12;
    p.box = {5, 6, 21, 22};
    for (const auto& v : augment(p)) writer.write(v);
    writer.finish(dir / "manifest.csv");
    const auto rows = read_manifest(dir / "manifest.csv");
    REQUIRE(rows.size() == 16);
    CHECK(rows == writer.rows());
    CHECK(rows[0].box == p.box);
    CHECK(rows[0].video_id == "vid_003");
    CHECK(read_png(dir / rows[0].patch_file) == p.pixels);
    std::filesystem::remove_all(dir);
}
