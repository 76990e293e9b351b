#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <unordered_map>

#include "hse/serialize.hpp"

namespace hse {

struct ServiceOptions {
    // Datasets resolve to <dataset_dir>/<name>.csv with an optional
    // <name>.json sidecar next to it.
    std::string dataset_dir = ".";
    // When set, every session is written to <snapshot_dir>/<id>.json after
    // each change and reloaded by restore().
    std::optional<std::string> snapshot_dir;
};

struct Response {
    int status = 200;
    Json body;
};

// Transport-free request handlers. Safe to call from many threads; requests
// against one session are serialized by that session's mutex.
class LabelingService {
public:
    explicit LabelingService(ServiceOptions options);

    // {"dataset": name} or {"csv": text, "name"?: label}, plus optional
    // "config" overrides.
    Response create_session(const Json& request);
    Response get_next(const std::string& id);
    Response post_label(const std::string& id, const Json& body);
    Response get_state(const std::string& id);
    Response export_session(const std::string& id);

    // Routes "METHOD /api/..." requests; body is raw JSON text.
    Response handle(const std::string& method, const std::string& path, const std::string& body);

    // Reloads every snapshot found in snapshot_dir; returns how many.
    std::size_t restore();
    std::size_t session_count() const;

private:
    struct Source {
        std::string dataset;  // name under dataset_dir, empty for inline
        std::string csv;      // inline text, empty for named datasets
        std::string name;
    };
    struct Entry {
        std::string id;
        double created_at = 0.0;
        Source source;
        std::mutex mutex;
        std::optional<ActiveSession> session;
    };

    std::shared_ptr<const Dataset> resolve(const Source& source) const;
    std::shared_ptr<Entry> find(const std::string& id) const;
    std::string fresh_id();
    void snapshot(const Entry& entry) const;
    Json handle_json(const Entry& entry) const;

    ServiceOptions options_;
    mutable std::shared_mutex map_mutex_;
    std::unordered_map<std::string, std::shared_ptr<Entry>> sessions_;
    std::atomic<std::uint64_t> counter_{0};
};

// Minimal HTTP front end over LabelingService.
class HttpServer {
public:
    explicit HttpServer(LabelingService& service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    // Binds (port 0 picks a free one) and serves on a background thread.
    // Throws Error when the port cannot be bound.
    int start(const std::string& host, int port);
    // Binds and serves on the calling thread until stop().
    void run(const std::string& host, int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::thread thread_;
};

}  // namespace hse
