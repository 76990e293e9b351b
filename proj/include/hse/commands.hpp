#pragma once

#include <string>
#include <vector>

#include "hse/serialize.hpp"

namespace hse {

struct RunOptions {
    SessionConfig config;  // strategy and seed inside are overridden per run
    std::vector<StrategyKind> strategies{StrategyKind::hse};
    int seeds = 1;
    std::uint64_t first_seed = 0;
    bool with_timings = false;
    int jobs = 1;
};

// One simulated session per (strategy, seed). Runs are computed in parallel
// and reported in (strategy, seed) order.
// {dataset, config, runs: [curve...], summary: [{strategy, seeds, mean_auc, std_auc}]}
Json cmd_run(std::shared_ptr<const Dataset> dataset, const RunOptions& options);

struct GraphEvalOptions {
    SessionConfig config;  // strategy forced to eer_full
    std::vector<GraphKind> graphs{GraphKind::mean, GraphKind::binary, GraphKind::knn, GraphKind::perplexity};
    int seeds = 10;
    std::uint64_t first_seed = 0;
    int jobs = 1;
};

// {dataset, config, rows: [{graph, seeds, aucs, mean_auc, std_auc}]}
Json cmd_graph_eval(std::shared_ptr<const Dataset> dataset, const GraphEvalOptions& options);

struct TimingOptions {
    SessionConfig config;
    std::vector<StrategyKind> strategies{StrategyKind::hse, StrategyKind::eer_full};
};

// Mean wall time of strategy-driven selections (initial queries excluded).
// {dataset, size, config, rows: [{strategy, selections, mean_seconds, max_seconds, mean_subqueries}]}
Json cmd_timing(std::shared_ptr<const Dataset> dataset, const TimingOptions& options);

// Sample mean and standard deviation (n - 1 denominator; 0 for one value).
std::pair<double, double> mean_std(const std::vector<double>& values);

}  // namespace hse
