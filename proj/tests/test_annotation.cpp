#include <filesystem>
#include <thread>

#include "doctest.h"
#include "egosal/annotation.hpp"
#include "egosal/annotation_http.hpp"
#include "egosal/dataset.hpp"
#include "egosal/error.hpp"
#include "egosal/simgen.hpp"
#include "egosal/text_io.hpp"
#include "httplib.h"
#include "json.hpp"

using namespace egosal;
using namespace egosal::annotation;
namespace fs = std::filesystem;

namespace {

/// Three small videos, each with one blink.
const fs::path& corpus_root() {
    static const fs::path root = [] {
        const auto dir = fs::temp_directory_path() / "egosal_annotation_corpus";
        fs::remove_all(dir);
        sim::CorpusConfig cfg;
        cfg.videos = 3;
        cfg.seed = 11;
        cfg.width = 192;
        cfg.height = 108;
        cfg.gaze.duration_ms = 1800;
        cfg.gaze.blink_probability = 1.0;
        sim::generate_corpus(dir, cfg);
        return dir;
    }();
    return root;
}

ServiceConfig service_config(const std::string& store_name) {
    ServiceConfig cfg;
    cfg.dataset_root = corpus_root();
    cfg.store_path = fs::temp_directory_path() / store_name;
    fs::remove(cfg.store_path);
    return cfg;
}

AnnotationStore::Clock counting_clock(int start) {
    auto n = std::make_shared<int>(start);
    return [n] { return "2024-01-01T00:00:0" + std::to_string((*n)++) + ".000Z"; };
}

VideoAnnotation sample_annotation(const std::string& video) {
    VideoAnnotation a;
    a.video_id = video;
    a.start_frame = 8;
    a.tau = 0.5;
    a.category = 3;
    a.note = "lid \"open\", left";
    return a;
}

}  // namespace

TEST_CASE("list videos") {
    AnnotationService svc(service_config("egosal_list.jsonl"));
    const auto videos = svc.list_videos();
    REQUIRE(videos.size() == 3);
    for (const auto& v : videos) {
        CHECK(v.frame_count == 45);
        CHECK_FALSE(v.annotated);
    }

    const auto empty = fs::temp_directory_path() / "egosal_empty_root";
    fs::remove_all(empty);
    fs::create_directories(empty);
    write_text_file_atomic(empty / "split.csv", "video_id,split\n");
    ServiceConfig cfg;
    cfg.dataset_root = empty;
    CHECK(AnnotationService(cfg).list_videos().empty());

    fs::remove(empty / "split.csv");
    try {
        AnnotationService{cfg};
        FAIL("expected DatasetRootMissing");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::DatasetRootMissing);
    }
    fs::remove_all(empty);
}

TEST_CASE("store round trip and history") {
    const auto path = fs::temp_directory_path() / "egosal_store.jsonl";
    fs::remove(path);
    std::string first_line;
    {
        AnnotationStore store(path, counting_clock(0));
        const auto id = store.append(sample_annotation("vid_0000"));
        CHECK(id == "vid_0000#1");
        first_line = read_text_file(path);
        REQUIRE(store.current("vid_0000"));
        CHECK(first_line == to_json_line(*store.current("vid_0000")) + "\n");
    }
    {
        AnnotationStore reopened(path, counting_clock(5));
        const auto a = reopened.current("vid_0000");
        REQUIRE(a);
        CHECK(a->start_frame == 8);
        CHECK(a->tau == 0.5);
        CHECK(a->category == 3);
        CHECK(a->note == "lid \"open\", left");
        CHECK(to_json_line(*a) + "\n" == first_line);
        CHECK(from_json_text(to_json_line(*a)) == *a);

        auto again = sample_annotation("vid_0000");
        again.tau = 0.3;
        again.start_frame = 10;
        CHECK(reopened.append(again) == "vid_0000#2");
        const auto history = reopened.history("vid_0000");
        REQUIRE(history.size() == 2);
        CHECK(history[0].tau == 0.5);
        CHECK(history[1].tau == 0.3);
        CHECK(history[1].created == history[0].created);
        CHECK(history[1].updated != history[0].updated);
        CHECK(reopened.current("vid_0000")->start_frame == 10);
    }
    CHECK(read_text_file(path).rfind(first_line, 0) == 0);
    CHECK(AnnotationStore(path).history("vid_0000").size() == 2);

    write_text_file_atomic(path, "{not json\n");
    CHECK_THROWS_AS(AnnotationStore{path}, Error);
    fs::remove(path);
}

TEST_CASE("annotation validation") {
    AnnotationService svc(service_config("egosal_validate.jsonl"));
    const auto id = svc.list_videos().front().id;
    auto expect = [&](VideoAnnotation a, Errc code) {
        try {
            svc.save_annotation(std::move(a));
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.code() == code);
        }
    };
    auto a = sample_annotation(id);
    a.tau = 0.0;
    expect(a, Errc::ValidationFailed);
    a.tau = 1.0;
    expect(a, Errc::ValidationFailed);
    a = sample_annotation(id);
    a.start_frame = 45;
    expect(a, Errc::ValidationFailed);
    a.start_frame = -1;
    expect(a, Errc::ValidationFailed);
    a = sample_annotation(id);
    a.category = 9;
    expect(a, Errc::ValidationFailed);
    expect(sample_annotation("nope"), Errc::UnknownVideo);
    CHECK_FALSE(svc.annotation(id));

    CHECK_THROWS_AS(from_json_text("[1,2]"), Error);
    CHECK_THROWS_AS(from_json_text(R"({"start_frame":1,"category":2})"), Error);
    CHECK_THROWS_AS(from_json_text(R"({"start_frame":1.5,"category":2,"tau":0.5})"), Error);

    CHECK(svc.save_annotation(sample_annotation(id)) == id + "#1");
    CHECK(svc.list_videos().front().annotated);
}

TEST_CASE("overlays") {
    AnnotationService svc(service_config("egosal_overlay.jsonl"));
    const dataset::Dataset ds(corpus_root());
    bool saw_blink = false;
    for (const auto& v : svc.list_videos()) {
        const auto fixes = svc.fixations(v.id);
        for (const auto& f : fixes) {
            INFO(v.id << " frame " << f.frame_index);
            if (f.interpolated) {
                saw_blink = true;
                try {
                    svc.get_overlay(v.id, f.frame_index, 0.5, OverlayMode::Heatmap);
                    FAIL("expected NoGazeForFrame");
                } catch (const Error& e) {
                    CHECK(e.code() == Errc::NoGazeForFrame);
                }
                continue;
            }
            double prev_area = -1;
            for (double tau : {0.95, 0.9, 0.7, 0.5, 0.3, 0.1}) {
                const auto ov = svc.get_overlay(v.id, f.frame_index, tau, OverlayMode::None);
                CHECK(ov.bbox.area() >= prev_area);
                prev_area = ov.bbox.area();
                CHECK(ov.bbox == saliency::saliency_bbox(192, 108, f.x, f.y, f.d, tau, svc.config().wooding,
                                                          svc.config().map));
            }
        }
    }
    CHECK(saw_blink);

    const auto id = svc.list_videos().front().id;
    const auto fixes = svc.fixations(id);
    const int frame = fixes.front().frame_index;
    const auto a = svc.get_overlay(id, frame, 0.4, OverlayMode::Heatmap);
    const auto b = svc.get_overlay(id, frame, 0.4, OverlayMode::Heatmap);
    CHECK(a.bbox == b.bbox);
    CHECK(a.image == b.image);
    CHECK(svc.get_overlay(id, frame, 0.4, OverlayMode::None).image == ds.frame(id, frame));
    for (auto mode : {OverlayMode::Mask, OverlayMode::Weighted}) {
        const auto ov = svc.get_overlay(id, frame, 0.4, mode);
        CHECK(ov.image.width == 192);
        CHECK(ov.image != ds.frame(id, frame));
    }
    CHECK_THROWS_AS(svc.get_overlay(id, 45, 0.5, OverlayMode::None), Error);
    CHECK_THROWS_AS(svc.get_overlay(id, frame, 1.0, OverlayMode::None), Error);
    CHECK_THROWS_AS(parse_overlay_mode("sepia"), Error);
}

TEST_CASE("http endpoints") {
    AnnotationService svc(service_config("egosal_http.jsonl"));
    HttpServer server(svc);
    const int port = server.bind("127.0.0.1", 0);
    std::thread worker([&] { server.serve(); });
    httplib::Client client("127.0.0.1", port);

    auto res = client.Get("/videos");
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto list = nlohmann::json::parse(res->body);
    REQUIRE(list.size() == 3);
    const std::string id = list[0]["id"];
    CHECK(list[0]["frames"] == 45);
    CHECK(list[0]["annotated"] == false);

    res = client.Get("/videos/" + id + "/gaze");
    REQUIRE(res);
    const auto gaze = nlohmann::json::parse(res->body);
    int good = -1, blink = -1;
    for (const auto& f : gaze["fixations"]) {
        if (f["interpolated"] == true && blink < 0) blink = f["frame"];
        if (f["interpolated"] == false && good < 0) good = f["frame"];
    }
    REQUIRE(good >= 0);
    res = client.Get("/videos/" + id + "/gaze?format=csv");
    REQUIRE(res);
    CHECK(res->body == svc.raw_gaze(id));

    auto box_area = [&](double tau) {
        auto r = client.Get("/videos/" + id + "/frames/" + std::to_string(good) + "?overlay=mask&tau=" +
                            std::to_string(tau));
        REQUIRE(r);
        REQUIRE(r->status == 200);
        CHECK(r->get_header_value("Content-Type") == "image/png");
        CHECK(r->body.substr(1, 3) == "PNG");
        const auto f = split_csv(r->get_header_value("X-Saliency-Box"));
        REQUIRE(f.size() == 4);
        return (std::stoi(f[2]) - std::stoi(f[0])) * (std::stoi(f[3]) - std::stoi(f[1]));
    };
    CHECK(box_area(0.3) >= box_area(0.9));

    res = client.Get("/videos/" + id + "/frames/999");
    REQUIRE(res);
    CHECK(res->status == 404);
    CHECK(nlohmann::json::parse(res->body)["error"] == "FrameOutOfRange");
    if (blink >= 0) {
        res = client.Get("/videos/" + id + "/frames/" + std::to_string(blink) + "?overlay=heatmap");
        REQUIRE(res);
        CHECK(res->status == 409);
    }
    res = client.Get("/videos/" + id + "/frames/0?tau=abc");
    REQUIRE(res);
    CHECK(res->status == 400);
    res = client.Get("/videos/nope/frames/0");
    REQUIRE(res);
    CHECK(res->status == 404);

    res = client.Get("/videos/" + id + "/annotation");
    REQUIRE(res);
    CHECK(res->status == 404);

    res = client.Post("/videos/" + id + "/annotation", R"({"start_frame":8,"tau":0.5,"category":3,"note":"x"})",
                      "application/json");
    REQUIRE(res);
    CHECK(res->status == 201);
    CHECK(nlohmann::json::parse(res->body)["id"] == id + "#1");
    res = client.Post("/videos/" + id + "/annotation", R"({"start_frame":8,"tau":0,"category":3})",
                      "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
    CHECK(nlohmann::json::parse(res->body)["error"] == "ValidationFailed");
    res = client.Post("/videos/" + id + "/annotation", R"({"start_frame":12,"tau":0.25,"category":3})",
                      "application/json");
    REQUIRE(res);
    CHECK(res->status == 201);

    res = client.Get("/videos/" + id + "/annotation");
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto body = nlohmann::json::parse(res->body);
    CHECK(body["current"]["start_frame"] == 12);
    CHECK(body["current"]["tau"] == 0.25);
    REQUIRE(body["history"].size() == 2);
    CHECK(body["history"][0]["start_frame"] == 8);
    CHECK(from_json_text(body["current"].dump()) == *svc.annotation(id));

    server.stop();
    worker.join();
}
