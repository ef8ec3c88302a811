#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>

#include "spotid/matching.hpp"

namespace spotid::service {

struct ServiceOptions {
    // Gallery directory; created (with an empty manifest) when missing.
    std::filesystem::path gallery_dir;
    // Request bodies above this are rejected with 413.
    std::size_t max_upload_bytes = 32u << 20;
    // Matching worker threads per identify; 0 = hardware concurrency.
    unsigned match_threads = 0;
    matching::MatchOptions match;
};

// HTTP facade over the segment / identify / confirm / enroll loop.
//
//   POST /segment                  multipart: image, params (JSON object or key = value lines)
//   POST /identify                 multipart: mask, method, top_n, async
//   GET  /sessions/{id}
//   POST /sessions/{id}/confirm    JSON: {"match": id} or {"new_individual": id}
//   GET  /gallery
//   POST /gallery/individuals      multipart: mask, individual_id, scale_id, light_condition, provenance
//
// Sessions are kept under <gallery>/sessions so pending reviews survive a
// restart. When <gallery>/evaluation.json exists its EER threshold is
// attached to identify sessions as advisory metadata.
class Server {
public:
    explicit Server(ServiceOptions options);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    // Binds to host:port; port 0 picks a free port. Returns the bound port.
    int bind(const std::string& host, int port);
    // Serves until stop(); call after bind().
    bool run();
    void stop();
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace spotid::service
