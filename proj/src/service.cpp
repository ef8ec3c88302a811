#include "spotid/service.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <future>
#include <map>
#include <numbers>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "spotid/errors.hpp"
#include "spotid/gallery.hpp"
#include "spotid/image_io.hpp"
#include "spotid/report.hpp"
#include "spotid/segmentation.hpp"

namespace spotid::service {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Status carried out of a handler; anything else maps through to_status.
struct HttpError : std::runtime_error {
    int status;
    std::string code;
    HttpError(int s, std::string c, const std::string& what) : std::runtime_error(what), status(s), code(std::move(c)) {}
};

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
    send_json(res, status, {{"error", {{"code", code}, {"message", message}}}});
}

std::string base64(const imaging::Bytes& bytes) {
    return httplib::detail::base64_encode(std::string(bytes.begin(), bytes.end()));
}

std::string random_id() {
    static std::mutex mu;
    static std::random_device rd;
    std::lock_guard lock(mu);
    std::uniform_int_distribution<unsigned> hex(0, 15);
    std::string id;
    for (int i = 0; i < 24; ++i) id.push_back("0123456789abcdef"[hex(rd)]);
    return id;
}

bool valid_session_id(const std::string& id) {
    if (id.empty() || id.size() > 64) return false;
    for (char c : id) {
        if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
    }
    return true;
}

void write_atomic(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << text;
        if (!out) throw Error("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

const httplib::MultipartFormData* part(const httplib::Request& req, const std::string& name) {
    const auto it = req.files.find(name);
    return it == req.files.end() ? nullptr : &it->second;
}

std::optional<std::string> field(const httplib::Request& req, const std::string& name) {
    if (const auto* p = part(req, name)) return p->content;
    if (req.has_param(name)) return req.get_param_value(name);
    return std::nullopt;
}

const std::string& required_file(const httplib::Request& req, const std::string& name) {
    const auto* p = part(req, name);
    if (!p) throw HttpError(400, "missing_field", "multipart field '" + name + "' is required");
    return p->content;
}

std::span<const std::uint8_t> as_bytes(const std::string& s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

bool truthy(const std::optional<std::string>& v) {
    return v && (*v == "1" || *v == "true" || *v == "yes");
}

json record_json(const gallery::GalleryRecord& r) {
    return {
        {"individual_id", r.individual_id},
        {"scale_id", r.scale_id},
        {"width", r.width},
        {"height", r.height},
        {"spots", r.cloud.size()},
        {"light_condition", gallery::to_string(r.light_condition)},
        {"provenance", gallery::to_string(r.provenance)},
        {"cloud", report::cloud_json(r.cloud)},
    };
}

json transform_json(const registration::RigidTransform& t) {
    return {
        {"rotation", {{t.rotation(0, 0), t.rotation(0, 1)}, {t.rotation(1, 0), t.rotation(1, 1)}}},
        {"translation", {t.translation.x(), t.translation.y()}},
        {"angle_degrees", t.angle() * 180.0 / std::numbers::pi},
    };
}

}  // namespace

struct Server::Impl {
    ServiceOptions options;
    httplib::Server http;

    std::mutex gallery_mu;
    std::shared_ptr<const gallery::Gallery> gallery;
    // Serializes confirm and enroll; the on-disk manifest CAS guards
    // against other processes.
    std::mutex write_mu;

    std::mutex sessions_mu;
    std::map<std::string, json> sessions;

    std::mutex jobs_mu;
    std::vector<std::future<void>> jobs;
    std::atomic<bool> closing{false};

    explicit Impl(ServiceOptions o) : options(std::move(o)) {
        if (options.gallery_dir.empty()) throw InvalidParameter("service requires a gallery directory");
        fs::create_directories(options.gallery_dir);
        if (!fs::exists(options.gallery_dir / gallery::kManifestName)) {
            gallery::save_gallery(gallery::Gallery{}, options.gallery_dir);
        }
        gallery = std::make_shared<const gallery::Gallery>(gallery::load_gallery(options.gallery_dir));
        fs::create_directories(sessions_dir());
        restore_sessions();
        routes();
    }

    ~Impl() {
        closing = true;
        http.stop();
        std::lock_guard lock(jobs_mu);
        for (auto& j : jobs) j.wait();
    }

    fs::path sessions_dir() const { return options.gallery_dir / "sessions"; }

    std::shared_ptr<const gallery::Gallery> snapshot() {
        std::lock_guard lock(gallery_mu);
        return gallery;
    }

    void publish(gallery::Gallery g) {
        auto next = std::make_shared<const gallery::Gallery>(std::move(g));
        std::lock_guard lock(gallery_mu);
        gallery = std::move(next);
    }

    // ---- sessions -------------------------------------------------------

    void persist(const json& session) {
        write_atomic(sessions_dir() / (session.at("session_id").get<std::string>() + ".json"), session.dump(2));
    }

    void store(const json& session) {
        persist(session);
        std::lock_guard lock(sessions_mu);
        sessions[session.at("session_id").get<std::string>()] = session;
    }

    std::optional<json> lookup(const std::string& id) {
        if (!valid_session_id(id)) return std::nullopt;
        {
            std::lock_guard lock(sessions_mu);
            if (auto it = sessions.find(id); it != sessions.end()) return it->second;
        }
        const fs::path path = sessions_dir() / (id + ".json");
        if (!fs::exists(path)) return std::nullopt;
        std::ifstream in(path);
        json s = json::parse(in);
        std::lock_guard lock(sessions_mu);
        sessions[id] = s;
        return s;
    }

    imaging::BinaryMask session_mask(const std::string& id) {
        return imaging::read_mask(sessions_dir() / (id + ".png"));
    }

    void restore_sessions() {
        for (const auto& entry : fs::directory_iterator(sessions_dir())) {
            if (entry.path().extension() != ".json") continue;
            const std::string id = entry.path().stem().string();
            if (!valid_session_id(id)) continue;
            json s;
            try {
                std::ifstream in(entry.path());
                s = json::parse(in);
            } catch (const std::exception&) {
                continue;
            }
            sessions[id] = s;
            // Interrupted by a shutdown: the query mask is on disk, redo it.
            if (s.value("state", "") == "running") launch(id);
        }
    }

    // ---- identify -------------------------------------------------------

    std::optional<json> advisory(matching::Method method, double best) {
        const fs::path path = options.gallery_dir / "evaluation.json";
        if (!fs::exists(path)) return std::nullopt;
        json eval;
        try {
            std::ifstream in(path);
            eval = json::parse(in);
        } catch (const std::exception&) {
            return std::nullopt;
        }
        if (!eval.contains("eer") || !eval["eer"].is_number()) return std::nullopt;
        if (!eval.contains("eer_threshold") || !eval["eer_threshold"].is_number()) return std::nullopt;
        if (eval.contains("method") && eval["method"].is_string() &&
            matching::parse_method(eval["method"].get<std::string>()) != method) {
            return std::nullopt;
        }
        const double eer = eval["eer"].get<double>();
        const double threshold = eval["eer_threshold"].get<double>();
        return json{
            {"eer", eer},
            {"threshold", threshold},
            {"best_dissimilarity", best},
            {"likely_new_individual", best > threshold},
            // A best score above the threshold means a new individual with
            // probability 1 - EER.
            {"new_individual_probability", best > threshold ? 1.0 - eer : eer},
        };
    }

    void compute(json& session, const imaging::BinaryMask& query) {
        const auto g = snapshot();
        const auto method = matching::parse_method(session.at("method").get<std::string>());
        const auto top_n = session.at("top_n").get<std::size_t>();

        matching::IdentifyOptions opts;
        opts.match = options.match;
        opts.threads = options.match_threads;
        opts.query_id = session.at("session_id").get<std::string>();
        const auto ranked = matching::identify(query, *g, method, opts);

        json candidates = json::array();
        const std::size_t n = std::min(top_n, ranked.scores.size());
        for (std::size_t i = 0; i < n; ++i) {
            const auto& score = ranked.scores[i];
            const auto* record = g->find(score.key());
            const auto detail = matching::match(query, *record, method, options.match);
            json c = report::score_json(score, i + 1);
            c["overlay"] = {
                {"width", record->width},
                {"height", record->height},
                {"query_cloud", report::cloud_json(detail.query_cloud)},
                {"aligned_query", report::cloud_json(detail.aligned_query)},
                {"record_cloud", report::cloud_json(detail.record_cloud)},
                {"transform", transform_json(detail.transform)},
                {"icp_iterations", detail.icp_iterations},
                {"pairs", detail.pairs},
            };
            candidates.push_back(std::move(c));
        }
        json skipped = json::array();
        for (const auto& k : ranked.unmatchable) skipped.push_back(k.label());

        session["candidates"] = std::move(candidates);
        session["compared"] = ranked.scores.size();
        session["unmatchable"] = std::move(skipped);
        session["gallery_version"] = g->manifest_version;
        session["advisory"] = nullptr;
        if (!ranked.scores.empty()) {
            if (auto a = advisory(method, ranked.scores.front().dissimilarity)) session["advisory"] = *a;
        }
        session["state"] = "ready";
    }

    void run_job(const std::string& id) {
        auto s = lookup(id);
        if (!s) return;
        json session = *s;
        try {
            compute(session, session_mask(id));
        } catch (const std::exception& e) {
            session["state"] = "failed";
            session["error"] = e.what();
        }
        store(session);
    }

    void launch(const std::string& id) {
        std::lock_guard lock(jobs_mu);
        // Drop finished futures so the list stays short.
        std::erase_if(jobs, [](std::future<void>& f) {
            return f.wait_for(std::chrono::seconds(0)) == std::future_status::ready;
        });
        jobs.push_back(std::async(std::launch::async, [this, id] { run_job(id); }));
    }

    json identify(const httplib::Request& req, int& status) {
        const auto mask = imaging::decode_mask(as_bytes(required_file(req, "mask")));
        const auto method = matching::parse_method(field(req, "method").value_or("icp-procrustes"));
        std::size_t top_n = 5;
        if (const auto t = field(req, "top_n")) {
            try {
                const long v = std::stol(*t);
                if (v < 1) throw std::out_of_range("top_n");
                top_n = static_cast<std::size_t>(v);
            } catch (const std::exception&) {
                throw HttpError(400, "invalid_parameter", "top_n must be a positive integer");
            }
        }
        if (snapshot()->empty()) throw HttpError(409, "empty_gallery", "the gallery has no enrolled scales");

        const std::string id = random_id();
        imaging::write_mask_png(mask, sessions_dir() / (id + ".png"));
        json session = {
            {"session_id", id},
            {"status", "pending_review"},
            {"decided_individual", nullptr},
            {"method", matching::to_string(method)},
            {"top_n", top_n},
            {"query", {{"width", mask.width()}, {"height", mask.height()},
                       {"spots", matching::extract_centroids(mask).size()}}},
            {"state", "running"},
            {"candidates", json::array()},
        };
        if (truthy(field(req, "async"))) {
            store(session);
            launch(id);
            status = 202;
            return session;
        }
        compute(session, mask);
        store(session);
        status = 200;
        return session;
    }

    // ---- confirm / enroll ------------------------------------------------

    gallery::Gallery enroll_locked(const std::string& individual, const imaging::BinaryMask& mask,
                                   const gallery::EnrollMetadata& meta) {
        const auto current = snapshot();
        try {
            auto next = gallery::enroll(*current, individual, mask, meta);
            publish(next);
            return next;
        } catch (const ConflictError&) {
            // Another writer got there first; pick up its manifest so a
            // retry sees the current state.
            publish(gallery::load_gallery(options.gallery_dir));
            throw;
        }
    }

    json confirm(const std::string& id, const httplib::Request& req) {
        json body;
        try {
            body = json::parse(req.body);
        } catch (const std::exception&) {
            throw HttpError(400, "invalid_json", "confirm body must be a JSON object");
        }
        if (!body.is_object()) throw HttpError(400, "invalid_json", "confirm body must be a JSON object");
        const bool has_match = body.contains("match");
        const bool has_new = body.contains("new_individual");
        if (has_match == has_new) {
            throw HttpError(400, "invalid_decision", "give exactly one of 'match' or 'new_individual'");
        }
        const json& target = has_match ? body["match"] : body["new_individual"];
        if (!target.is_string()) throw HttpError(400, "invalid_decision", "decision id must be a string");
        const std::string individual = target.get<std::string>();

        std::lock_guard lock(write_mu);
        auto found = lookup(id);
        if (!found) throw HttpError(404, "unknown_session", "no session " + id);
        json session = *found;
        if (session.value("state", "") != "ready") {
            throw HttpError(409, "not_ready", "session " + id + " has no candidates yet");
        }
        if (session.at("status") != "pending_review") {
            throw HttpError(409, "already_decided", "session " + id + " was already decided");
        }

        const auto g = snapshot();
        if (has_match) {
            const auto ids = g->individuals();
            if (!std::binary_search(ids.begin(), ids.end(), individual)) {
                throw HttpError(400, "unknown_individual", "individual '" + individual + "' is not enrolled");
            }
            session["status"] = "confirmed";
        } else {
            if (!gallery::valid_id(individual)) {
                throw HttpError(400, "invalid_id", "individual ids are limited to [A-Za-z0-9.-]");
            }
            const auto ids = g->individuals();
            if (std::binary_search(ids.begin(), ids.end(), individual)) {
                throw HttpError(409, "individual_exists", "individual '" + individual + "' is already enrolled");
            }
            gallery::EnrollMetadata meta;
            meta.provenance = gallery::parse_provenance(body.value("provenance", "automatic"));
            meta.light_condition = gallery::parse_light_condition(body.value("light_condition", "normal"));
            const auto next = enroll_locked(individual, session_mask(id), meta);
            const auto& added = next.records.back();
            session["status"] = "enrolled_new";
            session["enrolled"] = {{"individual_id", added.individual_id}, {"scale_id", added.scale_id}};
        }
        session["decided_individual"] = individual;
        store(session);
        return session;
    }

    json enroll_upload(const httplib::Request& req) {
        const auto mask = imaging::decode_mask(as_bytes(required_file(req, "mask")));
        const auto individual = field(req, "individual_id");
        if (!individual) throw HttpError(400, "missing_field", "multipart field 'individual_id' is required");
        gallery::EnrollMetadata meta;
        if (auto s = field(req, "scale_id"); s && !s->empty()) meta.scale_id = *s;
        if (auto l = field(req, "light_condition")) meta.light_condition = gallery::parse_light_condition(*l);
        if (auto p = field(req, "provenance")) meta.provenance = gallery::parse_provenance(*p);

        std::lock_guard lock(write_mu);
        const auto next = enroll_locked(*individual, mask, meta);
        json out = record_json(next.records.back());
        out["manifest_version"] = next.manifest_version;
        return out;
    }

    json gallery_json() {
        const auto g = snapshot();
        json individuals = json::array();
        for (const auto& id : g->individuals()) {
            json scales = json::array();
            for (const auto& r : g->records) {
                if (r.individual_id == id) scales.push_back(record_json(r));
            }
            individuals.push_back({{"individual_id", id}, {"scales", scales}});
        }
        return {{"manifest_version", g->manifest_version}, {"records", g->size()}, {"individuals", individuals}};
    }

    // ---- segment ----------------------------------------------------------

    json segment(const httplib::Request& req) {
        const auto image = imaging::decode_rgb(as_bytes(required_file(req, "image")));
        segmentation::SegmentationParams params;
        if (const auto text = field(req, "params"); text && !text->empty()) {
            const auto first = text->find_first_not_of(" \t\r\n");
            if (first != std::string::npos && (*text)[first] == '{') {
                json j;
                try {
                    j = json::parse(*text);
                } catch (const std::exception&) {
                    throw HttpError(400, "invalid_parameter", "params is not valid JSON");
                }
                params = report::params_from_json(j);
            } else {
                params = segmentation::parse_params(*text);
            }
        }
        const auto result = segmentation::segment_scale(image, params);
        json out = {
            {"width", image.width()},
            {"height", image.height()},
            {"spots", matching::extract_centroids(result.mask).size()},
            {"foreground_pixels", result.mask.count()},
            {"params", report::params_json(result.params_used)},
            {"mask_png", base64(imaging::encode_mask_png(result.mask))},
        };
        if (!field(req, "emit_threads") || truthy(field(req, "emit_threads"))) {
            out["dark_thread_png"] = base64(imaging::encode_mask_png(result.dark_thread_mask));
            out["bright_thread_png"] = base64(imaging::encode_mask_png(result.bright_thread_mask));
        }
        return out;
    }

    // ---- routing ------------------------------------------------------------

    template <typename Fn>
    httplib::Server::Handler guarded(Fn fn) {
        return [fn](const httplib::Request& req, httplib::Response& res) {
            try {
                fn(req, res);
            } catch (const HttpError& e) {
                send_error(res, e.status, e.code, e.what());
            } catch (const DecodeError& e) {
                send_error(res, 422, "decode_error", e.what());
            } catch (const InvalidParameter& e) {
                send_error(res, 400, "invalid_parameter", e.what());
            } catch (const InvalidInput& e) {
                send_error(res, 400, "invalid_input", e.what());
            } catch (const ConflictError& e) {
                send_error(res, 409, "conflict", e.what());
            } catch (const GalleryError& e) {
                send_error(res, 409, "gallery_error", e.what());
            } catch (const std::exception& e) {
                send_error(res, 500, "internal", e.what());
            }
        };
    }

    void routes() {
        http.set_payload_max_length(options.max_upload_bytes);

        http.Post("/segment", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, segment(req));
        }));
        http.Post("/identify", guarded([this](const httplib::Request& req, httplib::Response& res) {
            int status = 200;
            json body = identify(req, status);
            send_json(res, status, body);
        }));
        http.Get(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto s = lookup(req.matches[1]);
            if (!s) throw HttpError(404, "unknown_session", "no session " + std::string(req.matches[1]));
            send_json(res, 200, *s);
        }));
        http.Post(R"(/sessions/([^/]+)/confirm)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, confirm(req.matches[1], req));
        }));
        http.Get("/gallery", guarded([this](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, gallery_json());
        }));
        http.Post("/gallery/individuals", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 201, enroll_upload(req));
        }));

        http.set_error_handler([this](const httplib::Request&, httplib::Response& res) {
            // Only fill in bodies httplib produced itself (404 routes, 413).
            if (!res.body.empty()) return;
            if (res.status == 413) {
                send_error(res, 413, "payload_too_large",
                           "request body exceeds the upload limit of " + std::to_string(options.max_upload_bytes) +
                               " bytes");
            } else if (res.status == 404) {
                send_error(res, 404, "not_found", "no such endpoint");
            }
        });
    }
};

Server::Server(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Server::~Server() = default;

int Server::bind(const std::string& host, int port) {
    if (port == 0) return impl_->http.bind_to_any_port(host);
    if (!impl_->http.bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
    return port;
}

bool Server::run() { return impl_->http.listen_after_bind(); }

void Server::stop() { impl_->http.stop(); }

void Server::wait_until_ready() const { impl_->http.wait_until_ready(); }

}  // namespace spotid::service
