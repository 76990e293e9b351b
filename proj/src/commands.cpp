#include "hse/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "hse/error.hpp"

namespace hse {

std::pair<double, double> mean_std(const std::vector<double>& values) {
    if (values.empty()) throw UsageError("no values");
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() == 1) return {mean, 0.0};
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0))};
}

namespace {

// Runs task(i) for i in [0, count) on up to `jobs` threads. The first
// exception is rethrown after every worker has stopped.
template <typename F>
void parallel_for(std::size_t count, int jobs, F&& task) {
    const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), 1, count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next++) < count;) {
                try {
                    task(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    next = count;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

Json summary_row(const std::vector<double>& aucs) {
    const auto [mean, sd] = mean_std(aucs);
    return Json{{"seeds", aucs.size()}, {"aucs", aucs}, {"mean_auc", mean}, {"std_auc", sd}};
}

}  // namespace

Json cmd_run(std::shared_ptr<const Dataset> dataset, const RunOptions& options) {
    if (options.seeds < 1) throw ConfigError("need at least one seed");
    if (options.strategies.empty()) throw ConfigError("need at least one strategy");
    options.config.validate();
    const bool any_tree = std::any_of(options.strategies.begin(), options.strategies.end(), uses_tree);
    const SessionResources shared = build_resources(*dataset, options.config, any_tree);

    const std::size_t seeds = static_cast<std::size_t>(options.seeds);
    const std::size_t total = options.strategies.size() * seeds;
    std::vector<Json> runs(total);
    std::vector<double> aucs(total);
    parallel_for(total, options.jobs, [&](std::size_t i) {
        SessionConfig c = options.config;
        c.strategy = options.strategies[i / seeds];
        c.seed = options.first_seed + i % seeds;
        const SimulationResult r = run_simulated(dataset, c, shared);
        runs[i] = curve_json(c.strategy, c.seed, r, options.with_timings);
        aucs[i] = auc(r.curve);
    });

    Json summary = Json::array();
    for (std::size_t s = 0; s < options.strategies.size(); ++s) {
        Json row = summary_row({aucs.begin() + static_cast<std::ptrdiff_t>(s * seeds),
                                aucs.begin() + static_cast<std::ptrdiff_t>((s + 1) * seeds)});
        row.erase("aucs");
        row["strategy"] = std::string(to_string(options.strategies[s]));
        summary.push_back(std::move(row));
    }
    Json config = to_json(options.config);
    config.erase("strategy");
    config.erase("seed");
    return Json{{"dataset", dataset->name}, {"config", config}, {"runs", runs}, {"summary", summary}};
}

Json cmd_graph_eval(std::shared_ptr<const Dataset> dataset, const GraphEvalOptions& options) {
    if (options.seeds < 1) throw ConfigError("need at least one seed");
    if (options.graphs.empty()) throw ConfigError("need at least one graph kind");
    SessionConfig base = options.config;
    base.strategy = StrategyKind::eer_full;
    base.validate();

    std::vector<SessionResources> graphs;
    for (GraphKind kind : options.graphs) {
        SessionConfig c = base;
        c.graph_kind = kind;
        graphs.push_back(build_resources(*dataset, c, false));
    }
    const std::size_t seeds = static_cast<std::size_t>(options.seeds);
    std::vector<double> aucs(options.graphs.size() * seeds);
    parallel_for(aucs.size(), options.jobs, [&](std::size_t i) {
        SessionConfig c = base;
        c.graph_kind = options.graphs[i / seeds];
        c.seed = options.first_seed + i % seeds;
        aucs[i] = auc(run_simulated(dataset, c, graphs[i / seeds]).curve);
    });

    Json rows = Json::array();
    for (std::size_t g = 0; g < options.graphs.size(); ++g) {
        Json row = summary_row({aucs.begin() + static_cast<std::ptrdiff_t>(g * seeds),
                                aucs.begin() + static_cast<std::ptrdiff_t>((g + 1) * seeds)});
        row["graph"] = std::string(to_string(options.graphs[g]));
        rows.push_back(std::move(row));
    }
    Json config = to_json(base);
    config.erase("graph");
    config.erase("seed");
    return Json{{"dataset", dataset->name}, {"config", config}, {"rows", rows}};
}

Json cmd_timing(std::shared_ptr<const Dataset> dataset, const TimingOptions& options) {
    if (options.strategies.empty()) throw ConfigError("need at least one strategy");
    options.config.validate();
    const bool any_tree = std::any_of(options.strategies.begin(), options.strategies.end(), uses_tree);
    const SessionResources shared = build_resources(*dataset, options.config, any_tree);

    Json rows = Json::array();
    for (StrategyKind kind : options.strategies) {
        SessionConfig c = options.config;
        c.strategy = kind;
        const SimulationResult r = run_simulated(dataset, c, shared);
        const std::size_t skip = std::min<std::size_t>(static_cast<std::size_t>(c.initial_queries), r.queries.size());
        std::vector<double> secs(r.per_query_seconds.begin() + static_cast<std::ptrdiff_t>(skip),
                                 r.per_query_seconds.end());
        double mean = 0.0, max = 0.0, subq = 0.0;
        for (std::size_t i = skip; i < r.queries.size(); ++i) subq += r.subqueries[i];
        if (!secs.empty()) {
            mean = std::accumulate(secs.begin(), secs.end(), 0.0) / static_cast<double>(secs.size());
            max = *std::max_element(secs.begin(), secs.end());
            subq /= static_cast<double>(secs.size());
        }
        rows.push_back({{"strategy", std::string(to_string(kind))},
                        {"selections", secs.size()},
                        {"mean_seconds", mean},
                        {"max_seconds", max},
                        {"mean_subqueries", subq}});
    }
    Json config = to_json(options.config);
    config.erase("strategy");
    return Json{{"dataset", dataset->name}, {"size", dataset->size()}, {"config", config}, {"rows", rows}};
}

}  // namespace hse
