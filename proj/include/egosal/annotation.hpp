#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "egosal/gaze.hpp"
#include "egosal/image.hpp"
#include "egosal/saliency.hpp"

namespace egosal::annotation {

/// One annotator decision for a whole video.
struct VideoAnnotation {
    std::string video_id;
    int start_frame = 0;  ///< first frame after scene exploration
    double tau = 0.5;
    int category = 0;
    std::string note;
    std::string id;  ///< "<video_id>#<version>", assigned by the store
    std::string created;
    std::string updated;

    friend bool operator==(const VideoAnnotation&, const VideoAnnotation&) = default;
};

/// One-line JSON record. Keys are emitted in sorted order so the text is canonical.
std::string to_json_line(const VideoAnnotation& ann);
/// Raises ValidationFailed on malformed JSON or missing / mistyped fields.
VideoAnnotation from_json_text(std::string_view text);

/// Field checks that need no dataset: tau in (0,1), start_frame >= 0, category in [0, class_count).
void validate_fields(const VideoAnnotation& ann, int class_count);

std::string utc_timestamp();

/// Append-only line-delimited store. The last record per video is current.
class AnnotationStore {
public:
    using Clock = std::function<std::string()>;

    /// Loads `path` when it exists; raises MalformedRow on an unreadable line.
    explicit AnnotationStore(std::filesystem::path path, Clock clock = utc_timestamp);

    /// Stamps id and timestamps, appends one line, returns the id.
    std::string append(VideoAnnotation ann);

    std::optional<VideoAnnotation> current(const std::string& video_id) const;
    std::vector<VideoAnnotation> history(const std::string& video_id) const;
    std::map<std::string, VideoAnnotation> all_current() const;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    Clock clock_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, std::vector<VideoAnnotation>> records_;
};

enum class OverlayMode { None, Heatmap, Mask, Weighted };

std::string_view overlay_mode_name(OverlayMode m);
/// Raises ValidationFailed for an unknown name.
OverlayMode parse_overlay_mode(std::string_view name);

struct ServiceConfig {
    std::filesystem::path dataset_root;
    /// Defaults to <dataset_root>/annotations.jsonl.
    std::filesystem::path store_path;
    saliency::WoodingParams wooding;
    saliency::MapOptions map;
    int class_count = 9;
};

struct VideoEntry {
    std::string id;
    int frame_count = 0;
    bool annotated = false;
    std::string split;
};

struct Overlay {
    Image image;
    BoundingBox bbox;
    gaze::SyncedFixation fixation;
};

class AnnotationService {
public:
    /// Raises DatasetRootMissing when the dataset cannot be opened.
    explicit AnnotationService(ServiceConfig cfg);

    std::vector<VideoEntry> list_videos() const;

    /// Frame composite plus the peak-component box at `tau`. Raises FrameOutOfRange,
    /// NoGazeForFrame (blink gap or outside the gaze span), TauOutOfRange, UnknownVideo.
    Overlay get_overlay(const std::string& video_id, int frame, double tau, OverlayMode mode) const;

    /// Gaze resampled on the frame clock; cached per video.
    std::vector<gaze::SyncedFixation> fixations(const std::string& video_id) const;
    std::string raw_gaze(const std::string& video_id) const;

    /// Raises ValidationFailed or UnknownVideo. Writes are serialized.
    std::string save_annotation(VideoAnnotation ann);
    std::optional<VideoAnnotation> annotation(const std::string& video_id) const;
    std::vector<VideoAnnotation> history(const std::string& video_id) const;

    const ServiceConfig& config() const { return cfg_; }

private:
    ServiceConfig cfg_;
    AnnotationStore store_;
    std::mutex write_mutex_;
    mutable std::mutex cache_mutex_;
    mutable std::map<std::string, std::vector<gaze::SyncedFixation>> cache_;
};

}  // namespace egosal::annotation
