#include "egosal/dataset.hpp"

#include <cstdio>
#include <sstream>

#include "egosal/error.hpp"
#include "egosal/text_io.hpp"

namespace egosal::dataset {

namespace fs = std::filesystem;

std::string_view split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Validation: return "val";
        case Split::Test: return "test";
    }
    return "train";
}

Split parse_split(std::string_view name) {
    if (name == "train") return Split::Train;
    if (name == "val" || name == "validation") return Split::Validation;
    if (name == "test") return Split::Test;
    throw Error(Errc::InvalidConfig, "unknown split '" + std::string(name) + "'");
}

Dataset::Dataset(fs::path root) : root_(std::move(root)) {
    if (!fs::is_directory(root_)) {
        throw Error(Errc::DatasetRootMissing, "dataset root " + root_.string() + " does not exist");
    }
    const auto manifest = root_ / "split.csv";
    if (!fs::is_regular_file(manifest)) {
        throw Error(Errc::DatasetRootMissing, "no split.csv under " + root_.string());
    }
    const auto table = read_csv(manifest);
    const auto id_col = table.column("video_id");
    const auto split_col = table.column("split");
    for (const auto& row : table.rows) {
        if (row.size() <= std::max(id_col, split_col)) {
            throw Error(Errc::MalformedRow, "short row in " + manifest.string());
        }
        if (splits_.count(row[id_col])) {
            throw Error(Errc::MalformedRow, "video " + row[id_col] + " listed twice in split.csv");
        }
        ids_.push_back(row[id_col]);
        splits_[row[id_col]] = parse_split(row[split_col]);
    }
}

std::vector<std::string> Dataset::videos_in(Split s) const {
    std::vector<std::string> out;
    for (const auto& id : ids_) {
        if (splits_.at(id) == s) out.push_back(id);
    }
    return out;
}

void Dataset::require_video(const std::string& id) const {
    if (!has_video(id)) throw Error(Errc::UnknownVideo, "unknown video '" + id + "'");
}

Split Dataset::split_of(const std::string& id) const {
    require_video(id);
    return splits_.at(id);
}

fs::path Dataset::video_dir(const std::string& id) const {
    require_video(id);
    return root_ / "videos" / id;
}

fs::path Dataset::frame_path(const std::string& id, int frame) const {
    char name[32];
    std::snprintf(name, sizeof name, "%06d.png", frame);
    return video_dir(id) / "frames" / name;
}

VideoInfo Dataset::info(const std::string& id) const {
    const auto cfg = KeyValueConfig::load(video_dir(id) / "video.cfg");
    VideoInfo v;
    v.id = id;
    v.frame_count = static_cast<int>(cfg.get_int("frames", 0));
    v.fps = cfg.get_double("fps", 25.0);
    v.gaze_rate_hz = cfg.get_double("gaze_rate_hz", 50.0);
    v.width = static_cast<int>(cfg.get_int("width", 0));
    v.height = static_cast<int>(cfg.get_int("height", 0));
    v.category = static_cast<int>(cfg.get_int("category", 0));
    return v;
}

Image Dataset::frame(const std::string& id, int frame) const {
    const auto v = info(id);
    if (frame < 0 || frame >= v.frame_count) {
        throw Error(Errc::FrameOutOfRange, "frame " + std::to_string(frame) + " outside [0," +
                                               std::to_string(v.frame_count) + ") of " + id);
    }
    return read_png(frame_path(id, frame));
}

gaze::GazeTrack Dataset::gaze(const std::string& id) const {
    auto track = gaze::parse_gaze_csv(gaze_text(id), (video_dir(id) / "gaze.csv").string());
    track.nominal_rate_hz = info(id).gaze_rate_hz;
    return track;
}

std::string Dataset::gaze_text(const std::string& id) const {
    return read_text_file(video_dir(id) / "gaze.csv");
}

std::vector<TruthRow> Dataset::truth(const std::string& id) const {
    return parse_truth_csv(read_text_file(video_dir(id) / "truth.csv"));
}

gaze::FrameClock Dataset::clock(const std::string& id) const {
    const auto v = info(id);
    return gaze::FrameClock::uniform(static_cast<std::size_t>(v.frame_count), v.fps);
}

std::string format_truth_row(const TruthRow& r) {
    std::ostringstream out;
    out << r.frame << ',' << r.box.x0 << ',' << r.box.y0 << ',' << r.box.x1 << ',' << r.box.y1 << ','
        << r.label << ',' << r.phase;
    return out.str();
}

std::vector<TruthRow> parse_truth_csv(std::string_view text) {
    std::vector<TruthRow> rows;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 || trim(line).empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != 7) {
            throw Error(Errc::MalformedRow, "truth.csv:" + std::to_string(line_no) + ": expected 7 fields");
        }
        try {
            rows.push_back({std::stoi(f[0]),
                            {std::stoi(f[1]), std::stoi(f[2]), std::stoi(f[3]), std::stoi(f[4])},
                            std::stoi(f[5]),
                            f[6]});
        } catch (const std::logic_error&) {
            throw Error(Errc::MalformedRow, "truth.csv:" + std::to_string(line_no) + ": bad number");
        }
    }
    return rows;
}

}  // namespace egosal::dataset
