#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "egosal/gaze.hpp"
#include "egosal/image.hpp"

namespace egosal::dataset {

// Layout under a dataset root:
//   split.csv                      video_id,split
//   videos/<id>/video.cfg          key = value metadata (frames, fps, size, ...)
//   videos/<id>/frames/%06d.png
//   videos/<id>/gaze.csv           t_ms,x_px,y_px,d_mm,valid
//   videos/<id>/truth.csv          frame,x0,y0,x1,y1,label,phase

struct VideoInfo {
    std::string id;
    int frame_count = 0;
    double fps = 25.0;
    double gaze_rate_hz = 50.0;
    int width = 0;
    int height = 0;
    int category = 0;  ///< generator ground truth; 0 when unknown
};

struct TruthRow {
    int frame = 0;
    BoundingBox box;
    int label = 0;
    std::string phase;

    friend bool operator==(const TruthRow&, const TruthRow&) = default;
};

enum class Split { Train, Validation, Test };

std::string_view split_name(Split s);
Split parse_split(std::string_view name);

class Dataset {
public:
    /// Raises DatasetRootMissing when the root or its split manifest is absent.
    explicit Dataset(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }
    const std::vector<std::string>& video_ids() const { return ids_; }
    std::vector<std::string> videos_in(Split s) const;
    Split split_of(const std::string& id) const;
    bool has_video(const std::string& id) const { return splits_.count(id) > 0; }

    std::filesystem::path video_dir(const std::string& id) const;
    std::filesystem::path frame_path(const std::string& id, int frame) const;

    VideoInfo info(const std::string& id) const;
    Image frame(const std::string& id, int frame) const;
    gaze::GazeTrack gaze(const std::string& id) const;
    std::string gaze_text(const std::string& id) const;
    std::vector<TruthRow> truth(const std::string& id) const;
    gaze::FrameClock clock(const std::string& id) const;

private:
    void require_video(const std::string& id) const;

    std::filesystem::path root_;
    std::vector<std::string> ids_;
    std::map<std::string, Split> splits_;
};

inline constexpr const char* kTruthHeader = "frame,x0,y0,x1,y1,label,phase";
inline constexpr const char* kSplitHeader = "video_id,split";

std::string format_truth_row(const TruthRow& row);
std::vector<TruthRow> parse_truth_csv(std::string_view text);

}  // namespace egosal::dataset
