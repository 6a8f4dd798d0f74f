#include "egosal/annotation_http.hpp"

#include "httplib.h"
#include "json.hpp"

namespace egosal::annotation {

using nlohmann::json;

int http_status(Errc code) {
    switch (code) {
        case Errc::UnknownVideo:
        case Errc::FrameOutOfRange:
        case Errc::DatasetRootMissing: return 404;
        case Errc::NoGazeForFrame: return 409;
        case Errc::ValidationFailed:
        case Errc::TauOutOfRange:
        case Errc::InvalidConfig: return 400;
        default: return 500;
    }
}

namespace {

json annotation_json(const VideoAnnotation& a) { return json::parse(to_json_line(a)); }

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
    send_json(res, status, json{{"error", code}, {"message", message}});
}

/// Runs a handler, mapping library errors onto status codes.
template <typename F>
httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const Error& e) {
            send_error(res, http_status(e.code()), errc_name(e.code()), e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "Internal", e.what());
        }
    };
}

int parse_int_param(const std::string& text, const char* what) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(text, &used);
        if (used == text.size()) return v;
    } catch (const std::logic_error&) {
    }
    throw Error(Errc::ValidationFailed, std::string("bad ") + what + " '" + text + "'");
}

double parse_double_param(const std::string& text, const char* what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used == text.size()) return v;
    } catch (const std::logic_error&) {
    }
    throw Error(Errc::ValidationFailed, std::string("bad ") + what + " '" + text + "'");
}

}  // namespace

struct HttpServer::Impl {
    AnnotationService& service;
    httplib::Server server;

    explicit Impl(AnnotationService& s) : service(s) { routes(); }

    void routes() {
        server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                    {"Access-Control-Allow-Headers", "Content-Type"},
                                    {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                    {"Access-Control-Expose-Headers", "X-Saliency-Box, X-Fixation"}});
        server.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

        server.Get("/videos", guarded([this](const httplib::Request&, httplib::Response& res) {
                       json list = json::array();
                       for (const auto& v : service.list_videos()) {
                           list.push_back({{"id", v.id},
                                           {"frames", v.frame_count},
                                           {"annotated", v.annotated},
                                           {"split", v.split}});
                       }
                       send_json(res, 200, list);
                   }));

        server.Get(R"(/videos/([^/]+)/frames/(-?\d+))",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       const std::string id = req.matches[1];
                       const int frame = parse_int_param(req.matches[2], "frame");
                       const auto mode = parse_overlay_mode(
                           req.has_param("overlay") ? req.get_param_value("overlay") : "none");
                       const double tau =
                           req.has_param("tau") ? parse_double_param(req.get_param_value("tau"), "tau") : 0.5;
                       const auto ov = service.get_overlay(id, frame, tau, mode);
                       const auto& b = ov.bbox;
                       res.set_header("X-Saliency-Box", std::to_string(b.x0) + "," + std::to_string(b.y0) + "," +
                                                            std::to_string(b.x1) + "," + std::to_string(b.y1));
                       res.set_header("X-Fixation", std::to_string(ov.fixation.x) + "," +
                                                        std::to_string(ov.fixation.y) + "," +
                                                        std::to_string(ov.fixation.d));
                       res.set_content(encode_png(ov.image), "image/png");
                   }));

        server.Get(R"(/videos/([^/]+)/gaze)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                       const std::string id = req.matches[1];
                       if (req.has_param("format") && req.get_param_value("format") == "csv") {
                           res.set_content(service.raw_gaze(id), "text/csv");
                           return;
                       }
                       json fixes = json::array();
                       for (const auto& f : service.fixations(id)) {
                           fixes.push_back({{"frame", f.frame_index},
                                            {"x", f.x},
                                            {"y", f.y},
                                            {"d", f.d},
                                            {"interpolated", f.interpolated},
                                            {"low_confidence", f.low_confidence}});
                       }
                       send_json(res, 200, json{{"video_id", id}, {"fixations", fixes}});
                   }));

        server.Post(R"(/videos/([^/]+)/annotation)",
                    guarded([this](const httplib::Request& req, httplib::Response& res) {
                        const std::string id = req.matches[1];
                        auto ann = from_json_text(req.body);
                        if (!ann.video_id.empty() && ann.video_id != id) {
                            throw Error(Errc::ValidationFailed, "body video_id does not match the path");
                        }
                        ann.video_id = id;
                        ann.id.clear();
                        const auto saved_id = service.save_annotation(std::move(ann));
                        send_json(res, 201, json{{"id", saved_id}, {"annotation", annotation_json(*service.annotation(id))}});
                    }));

        server.Get(R"(/videos/([^/]+)/annotation)",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       const std::string id = req.matches[1];
                       const auto current = service.annotation(id);
                       if (!current) {
                           send_error(res, 404, "NotAnnotated", "video '" + id + "' has no annotation");
                           return;
                       }
                       json history = json::array();
                       for (const auto& a : service.history(id)) history.push_back(annotation_json(a));
                       send_json(res, 200, json{{"current", annotation_json(*current)}, {"history", history}});
                   }));
    }
};

HttpServer::HttpServer(AnnotationService& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error(Errc::IoError, "cannot bind " + host + ":" + std::to_string(port));
    return bound;
}

void HttpServer::serve() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_) impl_->server.stop();
}

}  // namespace egosal::annotation
