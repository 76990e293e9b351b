#include "hse/service.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "hse/error.hpp"

namespace hse {

namespace fs = std::filesystem;

namespace {

class NotFound : public Error {
public:
    using Error::Error;
};

class Gone : public Error {
public:
    using Error::Error;
};

Response error_response(int status, std::string_view code, const std::string& message) {
    return {status, Json{{"code", code}, {"message", message}}};
}

// Maps the library's exception types onto HTTP statuses.
template <typename F>
Response guarded(F&& f) {
    try {
        return f();
    } catch (const NotFound& e) {
        return error_response(404, "not_found", e.what());
    } catch (const Gone& e) {
        return error_response(410, "gone", e.what());
    } catch (const SessionComplete& e) {
        return error_response(410, "session_complete", e.what());
    } catch (const PoolExhausted& e) {
        return error_response(410, "pool_exhausted", e.what());
    } catch (const ConflictError& e) {
        return error_response(409, "conflict", e.what());
    } catch (const OutOfOrderError& e) {
        return error_response(409, "out_of_order", e.what());
    } catch (const ParseError& e) {
        return error_response(400, "parse_error", e.what());
    } catch (const ValidationError& e) {
        return error_response(400, "invalid", e.what());
    } catch (const ConfigError& e) {
        return error_response(400, "bad_config", e.what());
    } catch (const UsageError& e) {
        return error_response(400, "bad_request", e.what());
    } catch (const nlohmann::json::exception& e) {
        return error_response(400, "bad_json", e.what());
    } catch (const std::exception& e) {
        return error_response(500, "internal", e.what());
    }
}

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
}

bool valid_dataset_name(const std::string& name) {
    if (name.empty() || name.front() == '.') return false;
    for (char ch : name)
        if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.')) return false;
    return true;
}

Json parse_body(const std::string& body) {
    if (body.empty()) return Json::object();
    try {
        return Json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
        throw UsageError(std::string("request body is not JSON: ") + e.what());
    }
}

Json progress_json(const ActiveSession& s) {
    return Json{{"labeled", s.query_log().size()}, {"budget", s.label_budget()}};
}

Json row_json(const Posterior& f, PointId p) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < f.cols(); ++c) row.push_back(f(p, c));
    return row;
}

Json log_json(const ActiveSession& s) {
    Json log = Json::array();
    for (const QueryRecord& r : s.query_log())
        log.push_back({{"point", r.point},
                       {"class", r.label},
                       {"timestamp", r.timestamp},
                       {"subqueries_used", r.subqueries_used}});
    return log;
}

std::string_view status_name(const ActiveSession& s) {
    return s.status() == SessionStatus::complete ? "complete" : "awaiting_label";
}

}  // namespace

LabelingService::LabelingService(ServiceOptions options) : options_(std::move(options)) {
    if (options_.snapshot_dir) fs::create_directories(*options_.snapshot_dir);
}

std::size_t LabelingService::session_count() const {
    std::shared_lock lock(map_mutex_);
    return sessions_.size();
}

std::shared_ptr<const Dataset> LabelingService::resolve(const Source& source) const {
    if (!source.csv.empty()) return std::make_shared<const Dataset>(parse_csv(source.csv, {}, source.name));
    if (!valid_dataset_name(source.dataset)) throw UsageError("invalid dataset name '" + source.dataset + "'");
    const fs::path csv = fs::path(options_.dataset_dir) / (source.dataset + ".csv");
    if (!fs::is_regular_file(csv)) throw NotFound("unknown dataset '" + source.dataset + "'");
    Dataset ds = load_csv(csv.string());
    const fs::path sidecar = fs::path(options_.dataset_dir) / (source.dataset + ".json");
    if (fs::is_regular_file(sidecar)) load_sidecar(ds, sidecar.string());
    return std::make_shared<const Dataset>(std::move(ds));
}

std::shared_ptr<LabelingService::Entry> LabelingService::find(const std::string& id) const {
    std::shared_lock lock(map_mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFound("unknown session '" + id + "'");
    return it->second;
}

std::string LabelingService::fresh_id() {
    static thread_local std::mt19937_64 gen{std::random_device{}()};
    char buf[40];
    std::snprintf(buf, sizeof buf, "s%llu-%08llx", static_cast<unsigned long long>(++counter_),
                  static_cast<unsigned long long>(gen() & 0xffffffffULL));
    return buf;
}

Json LabelingService::handle_json(const Entry& entry) const {
    const ActiveSession& s = *entry.session;
    return Json{{"id", entry.id}, {"created_at", entry.created_at}, {"config", to_json(s.config())}};
}

void LabelingService::snapshot(const Entry& entry) const {
    if (!options_.snapshot_dir) return;
    const ActiveSession& s = *entry.session;
    Json doc = handle_json(entry);
    doc["source"] = {{"dataset", entry.source.dataset}, {"csv", entry.source.csv}, {"name", entry.source.name}};
    doc["log"] = log_json(s);
    const fs::path dir(*options_.snapshot_dir);
    const fs::path tmp = dir / (entry.id + ".json.tmp");
    {
        std::ofstream out(tmp);
        out << doc.dump();
        if (!out) throw Error("cannot write snapshot " + tmp.string());
    }
    fs::rename(tmp, dir / (entry.id + ".json"));
}

Response LabelingService::create_session(const Json& request) {
    return guarded([&] {
        if (!request.is_object()) throw UsageError("request must be a JSON object");
        Source source;
        if (request.contains("csv")) {
            source.csv = request.at("csv").get<std::string>();
            source.name = request.value("name", std::string("inline"));
            if (source.csv.empty()) throw UsageError("inline csv is empty");
        } else if (request.contains("dataset")) {
            source.dataset = request.at("dataset").get<std::string>();
            source.name = source.dataset;
        } else {
            throw UsageError("request needs \"dataset\" or \"csv\"");
        }
        const SessionConfig config = config_from_json(request.value("config", Json::object()));
        auto dataset = resolve(source);

        auto entry = std::make_shared<Entry>();
        entry->source = std::move(source);
        entry->created_at = now_seconds();
        entry->session.emplace(ActiveSession::start(dataset, config));
        {
            std::unique_lock lock(map_mutex_);
            do entry->id = fresh_id();
            while (sessions_.count(entry->id));
            sessions_.emplace(entry->id, entry);
        }
        std::lock_guard guard(entry->mutex);
        snapshot(*entry);
        return Response{201, handle_json(*entry)};
    });
}

Response LabelingService::get_next(const std::string& id) {
    return guarded([&] {
        auto entry = find(id);
        std::lock_guard guard(entry->mutex);
        ActiveSession& s = *entry->session;
        const PointId p = s.next_query();
        Json body{{"point", p},
                  {"posterior_row", row_json(s.model().posterior(), p)},
                  {"subqueries_used", s.pending_trace().subqueries_used},
                  {"progress", progress_json(s)},
                  {"evaluated", to_json(s.pending_trace())["evaluated"]}};
        if (s.dataset().assets) body["asset"] = (*s.dataset().assets)[static_cast<std::size_t>(p)];
        return Response{200, std::move(body)};
    });
}

Response LabelingService::post_label(const std::string& id, const Json& body) {
    return guarded([&] {
        auto entry = find(id);
        if (!body.is_object() || !body.contains("point") || !body.contains("class"))
            throw UsageError("label body needs \"point\" and \"class\"");
        if (!body["point"].is_number_integer() || !body["class"].is_number_integer())
            throw UsageError("\"point\" and \"class\" must be integers");
        const auto point = body["point"].get<std::int64_t>();
        const auto cls = body["class"].get<std::int64_t>();
        std::lock_guard guard(entry->mutex);
        ActiveSession& s = *entry->session;
        if (point < 0 || point >= static_cast<std::int64_t>(s.dataset().size()))
            throw ValidationError("point " + std::to_string(point) + " is outside the pool");
        if (cls < 0 || cls >= s.dataset().class_count)
            throw ValidationError("class " + std::to_string(cls) + " is outside [0, " +
                                  std::to_string(s.dataset().class_count) + ")");
        s.submit_label(static_cast<PointId>(point), static_cast<ClassId>(cls));
        snapshot(*entry);
        Json out{{"labeled_count", s.query_log().size()}, {"status", status_name(s)}};
        if (s.dataset().has_labels()) out["curve_so_far"] = s.curve().accuracies;
        return Response{200, std::move(out)};
    });
}

Response LabelingService::get_state(const std::string& id) {
    return guarded([&] {
        auto entry = find(id);
        std::lock_guard guard(entry->mutex);
        const ActiveSession& s = *entry->session;
        const Posterior& f = s.model().posterior();
        Json points = Json::array();
        for (Eigen::Index i = 0; i < f.rows(); ++i) {
            Eigen::Index best;
            const double conf = f.row(i).maxCoeff(&best);
            points.push_back({{"map", best}, {"confidence", conf}, {"posterior", row_json(f, static_cast<PointId>(i))}});
        }
        Json labels = Json::array();
        for (const QueryRecord& r : s.query_log()) labels.push_back({{"point", r.point}, {"class", r.label}});
        Json body = handle_json(*entry);
        body["dataset"] = {{"name", s.dataset().name},
                           {"size", s.dataset().size()},
                           {"dims", s.dataset().dims()},
                           {"class_count", s.dataset().class_count},
                           {"class_names", s.dataset().class_names}};
        body["status"] = status_name(s);
        body["pending"] = s.pending() ? Json(*s.pending()) : Json(nullptr);
        body["labels"] = std::move(labels);
        body["query_log"] = log_json(s);
        body["points"] = std::move(points);
        body["curve"] = s.curve().accuracies;
        body["subquery_budget"] = s.subquery_budget();
        body["progress"] = progress_json(s);
        body["tree"] = s.tree() ? tree_json(*s.tree()) : Json(nullptr);
        return Response{200, std::move(body)};
    });
}

Response LabelingService::export_session(const std::string& id) {
    return guarded([&] {
        auto entry = find(id);
        std::lock_guard guard(entry->mutex);
        const ActiveSession& s = *entry->session;
        Json body = handle_json(*entry);
        body["dataset"] = s.dataset().name;
        body["status"] = status_name(s);
        body["query_log"] = log_json(s);
        body["accuracies"] = s.curve().accuracies;
        body["auc"] = s.curve().accuracies.empty() ? Json(nullptr) : Json(auc(s.curve()));
        return Response{200, std::move(body)};
    });
}

Response LabelingService::handle(const std::string& method, const std::string& path, const std::string& body) {
    return guarded([&]() -> Response {
        const std::string prefix = "/api/sessions";
        if (path.rfind(prefix, 0) != 0) throw NotFound("no route for " + path);
        std::string rest = path.substr(prefix.size());
        if (rest.empty() || rest == "/") {
            if (method != "POST") return error_response(405, "method_not_allowed", "use POST");
            return create_session(parse_body(body));
        }
        if (rest.front() != '/') throw NotFound("no route for " + path);
        rest.erase(0, 1);
        const auto slash = rest.find('/');
        if (slash == std::string::npos) throw NotFound("no route for " + path);
        const std::string id = rest.substr(0, slash);
        const std::string action = rest.substr(slash + 1);
        const bool get = method == "GET";
        if (action == "next" && get) return get_next(id);
        if (action == "labels" && method == "POST") return post_label(id, parse_body(body));
        if (action == "state" && get) return get_state(id);
        if (action == "export" && get) return export_session(id);
        if (action == "next" || action == "labels" || action == "state" || action == "export")
            return error_response(405, "method_not_allowed", method + " not allowed on " + action);
        throw NotFound("no route for " + path);
    });
}

std::size_t LabelingService::restore() {
    if (!options_.snapshot_dir) return 0;
    std::size_t restored = 0;
    for (const auto& file : fs::directory_iterator(*options_.snapshot_dir)) {
        if (file.path().extension() != ".json") continue;
        try {
            std::ifstream in(file.path());
            const Json doc = Json::parse(in);
            auto entry = std::make_shared<Entry>();
            entry->id = doc.at("id").get<std::string>();
            entry->created_at = doc.at("created_at").get<double>();
            const Json& src = doc.at("source");
            entry->source = {src.at("dataset").get<std::string>(), src.at("csv").get<std::string>(),
                             src.at("name").get<std::string>()};
            entry->session.emplace(ActiveSession::start(resolve(entry->source), config_from_json(doc.at("config"))));
            for (const Json& r : doc.at("log")) {
                entry->session->next_query();
                entry->session->submit_label(r.at("point").get<PointId>(), r.at("class").get<ClassId>(),
                                             r.at("timestamp").get<double>());
            }
            std::unique_lock lock(map_mutex_);
            sessions_[entry->id] = entry;
            ++restored;
        } catch (const std::exception& e) {
            std::cerr << "skipping snapshot " << file.path() << ": " << e.what() << "\n";
        }
    }
    return restored;
}

}  // namespace hse
