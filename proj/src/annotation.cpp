#include "egosal/annotation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>

#include "egosal/dataset.hpp"
#include "egosal/error.hpp"
#include "json.hpp"

namespace egosal::annotation {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_json_line(const VideoAnnotation& a) {
    json j;
    j["video_id"] = a.video_id;
    j["start_frame"] = a.start_frame;
    j["tau"] = a.tau;
    j["category"] = a.category;
    j["note"] = a.note;
    j["id"] = a.id;
    j["created"] = a.created;
    j["updated"] = a.updated;
    return j.dump();
}

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(Errc::ValidationFailed, what); }

int required_int(const json& j, const char* key) {
    if (!j.contains(key)) invalid(std::string("missing field '") + key + "'");
    if (!j[key].is_number_integer()) invalid(std::string("field '") + key + "' must be an integer");
    return j[key].get<int>();
}

std::string optional_string(const json& j, const char* key) {
    if (!j.contains(key)) return {};
    if (!j[key].is_string()) invalid(std::string("field '") + key + "' must be a string");
    return j[key].get<std::string>();
}

}  // namespace

VideoAnnotation from_json_text(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        invalid(std::string("annotation is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) invalid("annotation must be a JSON object");
    VideoAnnotation a;
    a.start_frame = required_int(j, "start_frame");
    a.category = required_int(j, "category");
    if (!j.contains("tau")) invalid("missing field 'tau'");
    if (!j["tau"].is_number()) invalid("field 'tau' must be a number");
    a.tau = j["tau"].get<double>();
    a.video_id = optional_string(j, "video_id");
    a.note = optional_string(j, "note");
    a.id = optional_string(j, "id");
    a.created = optional_string(j, "created");
    a.updated = optional_string(j, "updated");
    return a;
}

void validate_fields(const VideoAnnotation& a, int class_count) {
    if (a.video_id.empty()) invalid("video_id is empty");
    if (!(a.tau > 0.0 && a.tau < 1.0)) invalid("tau must lie in (0,1), got " + std::to_string(a.tau));
    if (a.start_frame < 0) invalid("start_frame must be non-negative");
    if (a.category < 0 || a.category >= class_count) {
        invalid("category " + std::to_string(a.category) + " outside [0," + std::to_string(class_count) +
                ")");
    }
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[40];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[48];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
    return out;
}

AnnotationStore::AnnotationStore(fs::path path, Clock clock) : path_(std::move(path)), clock_(std::move(clock)) {
    if (!fs::exists(path_)) return;
    std::ifstream in(path_);
    if (!in) throw Error(Errc::IoError, "cannot read " + path_.string());
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            auto a = from_json_text(line);
            records_[a.video_id].push_back(std::move(a));
        } catch (const Error& e) {
            throw Error(Errc::MalformedRow, path_.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

std::string AnnotationStore::append(VideoAnnotation ann) {
    std::unique_lock lock(mutex_);
    auto& versions = records_[ann.video_id];
    const std::string now = clock_();
    ann.id = ann.video_id + "#" + std::to_string(versions.size() + 1);
    ann.created = versions.empty() ? now : versions.front().created;
    ann.updated = now;
    if (!path_.parent_path().empty()) fs::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    out << to_json_line(ann) << '\n';
    out.flush();
    if (!out) throw Error(Errc::IoError, "cannot append to " + path_.string());
    versions.push_back(ann);
    return ann.id;
}

std::optional<VideoAnnotation> AnnotationStore::current(const std::string& video_id) const {
    std::shared_lock lock(mutex_);
    const auto it = records_.find(video_id);
    if (it == records_.end() || it->second.empty()) return std::nullopt;
    return it->second.back();
}

std::vector<VideoAnnotation> AnnotationStore::history(const std::string& video_id) const {
    std::shared_lock lock(mutex_);
    const auto it = records_.find(video_id);
    return it == records_.end() ? std::vector<VideoAnnotation>{} : it->second;
}

std::map<std::string, VideoAnnotation> AnnotationStore::all_current() const {
    std::shared_lock lock(mutex_);
    std::map<std::string, VideoAnnotation> out;
    for (const auto& [id, versions] : records_) {
        if (!versions.empty()) out[id] = versions.back();
    }
    return out;
}

std::string_view overlay_mode_name(OverlayMode m) {
    switch (m) {
        case OverlayMode::None: return "none";
        case OverlayMode::Heatmap: return "heatmap";
        case OverlayMode::Mask: return "mask";
        case OverlayMode::Weighted: return "weighted";
    }
    return "none";
}

OverlayMode parse_overlay_mode(std::string_view name) {
    if (name == "none") return OverlayMode::None;
    if (name == "heatmap") return OverlayMode::Heatmap;
    if (name == "mask") return OverlayMode::Mask;
    if (name == "weighted") return OverlayMode::Weighted;
    invalid("unknown overlay mode '" + std::string(name) + "'");
}

namespace {

ServiceConfig with_defaults(ServiceConfig cfg) {
    if (cfg.store_path.empty()) cfg.store_path = cfg.dataset_root / "annotations.jsonl";
    cfg.wooding.validate();
    return cfg;
}

/// Opens the dataset once so a missing root fails at construction.
fs::path checked_store_path(const ServiceConfig& cfg) {
    dataset::Dataset{cfg.dataset_root};
    return cfg.store_path;
}

}  // namespace

AnnotationService::AnnotationService(ServiceConfig cfg)
    : cfg_(with_defaults(std::move(cfg))), store_(checked_store_path(cfg_)) {}

std::vector<VideoEntry> AnnotationService::list_videos() const {
    const dataset::Dataset ds(cfg_.dataset_root);
    const auto annotated = store_.all_current();
    std::vector<VideoEntry> out;
    for (const auto& id : ds.video_ids()) {
        out.push_back({id, ds.info(id).frame_count, annotated.count(id) > 0,
                       std::string(dataset::split_name(ds.split_of(id)))});
    }
    return out;
}

std::vector<gaze::SyncedFixation> AnnotationService::fixations(const std::string& video_id) const {
    {
        std::lock_guard lock(cache_mutex_);
        const auto it = cache_.find(video_id);
        if (it != cache_.end()) return it->second;
    }
    const dataset::Dataset ds(cfg_.dataset_root);
    const auto info = ds.info(video_id);
    gaze::InterpolationOptions opts;
    opts.frame_width = info.width;
    opts.frame_height = info.height;
    auto fixes = gaze::interpolate_track(ds.gaze(video_id), ds.clock(video_id), opts);
    std::lock_guard lock(cache_mutex_);
    return cache_.emplace(video_id, std::move(fixes)).first->second;
}

std::string AnnotationService::raw_gaze(const std::string& video_id) const {
    return dataset::Dataset(cfg_.dataset_root).gaze_text(video_id);
}

Overlay AnnotationService::get_overlay(const std::string& video_id, int frame, double tau,
                                       OverlayMode mode) const {
    if (!(tau > 0.0 && tau < 1.0)) {
        throw Error(Errc::TauOutOfRange, "tau must lie in (0,1), got " + std::to_string(tau));
    }
    const dataset::Dataset ds(cfg_.dataset_root);
    Image image = ds.frame(video_id, frame);

    const auto fixes = fixations(video_id);
    const auto it = std::find_if(fixes.begin(), fixes.end(),
                                 [&](const gaze::SyncedFixation& f) { return f.frame_index == frame; });
    if (it == fixes.end() || it->interpolated) {
        throw Error(Errc::NoGazeForFrame,
                    "no gaze for frame " + std::to_string(frame) + " of " + video_id);
    }

    const auto map = saliency::wooding_map(image.width, image.height, it->x, it->y, it->d, cfg_.wooding, cfg_.map);
    const auto mask = saliency::threshold_mask(map, tau);
    const int fx = std::min(image.width - 1, static_cast<int>(std::lround(it->x)));
    const int fy = std::min(image.height - 1, static_cast<int>(std::lround(it->y)));
    Overlay out;
    out.bbox = saliency::peak_component_bbox(mask, fx, fy);
    out.fixation = *it;

    switch (mode) {
        case OverlayMode::None: out.image = std::move(image); return out;
        case OverlayMode::Heatmap: out.image = saliency::heatmap_overlay(image, map); break;
        case OverlayMode::Mask: out.image = std::move(image); break;
        case OverlayMode::Weighted: out.image = saliency::weighted_overlay(image, map); break;
    }
    if (mode != OverlayMode::Weighted) saliency::draw_mask_outline(out.image, mask, 255, 255, 255);
    saliency::draw_box(out.image, out.bbox, 0, 255, 0);
    return out;
}

std::string AnnotationService::save_annotation(VideoAnnotation ann) {
    std::lock_guard lock(write_mutex_);
    const dataset::Dataset ds(cfg_.dataset_root);
    if (!ds.has_video(ann.video_id)) throw Error(Errc::UnknownVideo, "unknown video '" + ann.video_id + "'");
    validate_fields(ann, cfg_.class_count);
    const int frames = ds.info(ann.video_id).frame_count;
    if (ann.start_frame >= frames) {
        invalid("start_frame " + std::to_string(ann.start_frame) + " outside [0," + std::to_string(frames) + ")");
    }
    return store_.append(std::move(ann));
}

std::optional<VideoAnnotation> AnnotationService::annotation(const std::string& video_id) const {
    return store_.current(video_id);
}

std::vector<VideoAnnotation> AnnotationService::history(const std::string& video_id) const {
    return store_.history(video_id);
}

}  // namespace egosal::annotation
