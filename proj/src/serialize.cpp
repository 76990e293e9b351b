#include "hse/serialize.hpp"

#include "hse/error.hpp"

namespace hse {

namespace {

std::string_view scope_name(CalibrationScope scope) {
    return scope == CalibrationScope::all_points ? "all_points" : "neighbors_only";
}

CalibrationScope scope_from(std::string_view name) {
    if (name == "all_points") return CalibrationScope::all_points;
    if (name == "neighbors_only") return CalibrationScope::neighbors_only;
    throw ConfigError("unknown calibration scope '" + std::string(name) + "'");
}

template <typename T>
T field(const Json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("config field '") + key + "' has the wrong type");
    }
}

}  // namespace

Json to_json(const SessionConfig& c) {
    return Json{{"k", c.k},
                {"perplexity", c.perplexity},
                {"queries", c.query_budget},
                {"subquery_factor", c.subquery_factor},
                {"log_base", c.log_base},
                {"initial_queries", c.initial_queries},
                {"initial_counts_toward_budget", c.initial_counts_toward_budget},
                {"strategy", std::string(to_string(c.strategy))},
                {"graph", std::string(to_string(c.graph_kind))},
                {"calibration", std::string(scope_name(c.calibration))},
                {"seed", c.seed}};
}

SessionConfig config_from_json(const Json& j, SessionConfig c) {
    if (j.is_null()) return c;
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key == "k") {
            c.k = field<int>(j, "k");
        } else if (key == "perplexity") {
            c.perplexity = field<double>(j, "perplexity");
        } else if (key == "queries" || key == "query_budget") {
            c.query_budget = field<int>(j, key.c_str());
        } else if (key == "subquery_factor") {
            c.subquery_factor = field<double>(j, "subquery_factor");
        } else if (key == "log_base") {
            c.log_base = field<double>(j, "log_base");
        } else if (key == "initial_queries") {
            c.initial_queries = field<int>(j, "initial_queries");
        } else if (key == "initial_counts_toward_budget") {
            c.initial_counts_toward_budget = field<bool>(j, "initial_counts_toward_budget");
        } else if (key == "strategy") {
            c.strategy = strategy_from_string(field<std::string>(j, "strategy"));
        } else if (key == "graph" || key == "graph_kind") {
            const auto name = field<std::string>(j, key.c_str());
            try {
                c.graph_kind = graph_kind_from_string(name);
            } catch (const Error&) {
                throw ConfigError("unknown graph kind '" + name + "'");
            }
        } else if (key == "calibration") {
            c.calibration = scope_from(field<std::string>(j, "calibration"));
        } else if (key == "seed") {
            c.seed = field<std::uint64_t>(j, "seed");
        } else {
            throw ConfigError("unknown config field '" + key + "'");
        }
    }
    c.validate();
    return c;
}

Json to_json(const SelectionTrace& trace) {
    Json evaluated = Json::array();
    for (const Evaluation& e : trace.evaluated) evaluated.push_back({{"point", e.point}, {"risk", e.risk}});
    return Json{{"chosen", trace.chosen}, {"evaluated", evaluated}, {"subqueries_used", trace.subqueries_used}};
}

Json curve_json(StrategyKind strategy, std::uint64_t seed, const SimulationResult& result, bool with_timings) {
    Json out{{"strategy", std::string(to_string(strategy))},
             {"seed", seed},
             {"accuracies", result.curve.accuracies},
             {"auc", result.curve.accuracies.empty() ? Json(nullptr) : Json(auc(result.curve))}};
    if (with_timings) out["per_query_seconds"] = result.per_query_seconds;
    return out;
}

Json tree_json(const ClusterTree& tree) { return Json::parse(tree.to_json()); }

}  // namespace hse
