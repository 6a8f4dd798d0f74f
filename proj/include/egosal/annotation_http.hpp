#pragma once

#include <memory>
#include <string>

#include "egosal/annotation.hpp"
#include "egosal/error.hpp"

namespace egosal::annotation {

// Routes (JSON bodies unless noted):
//   GET  /videos                                   [{"id","frames","annotated","split"}]
//   GET  /videos/{id}/frames/{n}?overlay=&tau=     image/png; X-Saliency-Box: x0,y0,x1,y1
//   GET  /videos/{id}/gaze[?format=csv]            {"video_id","fixations":[...]} or raw CSV
//   POST /videos/{id}/annotation                   {"start_frame","tau","category","note"}
//   GET  /videos/{id}/annotation                   {"current":{...},"history":[...]}
// Errors answer {"error": <code name>, "message": <text>}.

int http_status(Errc code);

class HttpServer {
public:
    explicit HttpServer(AnnotationService& service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds without serving. Port 0 picks a free port; returns the bound port.
    int bind(const std::string& host, int port);
    /// Serves until stop(); call after bind().
    void serve();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace egosal::annotation
