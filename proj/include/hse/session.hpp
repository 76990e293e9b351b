#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "hse/dataset.hpp"
#include "hse/graph.hpp"
#include "hse/grf.hpp"
#include "hse/hierarchy.hpp"
#include "hse/strategies.hpp"

namespace hse {

struct SessionConfig {
    int k = 10;
    double perplexity = 30.0;
    int query_budget = 50;
    double subquery_factor = 25.0;
    double log_base = 0.0;  // 0 selects the natural log
    int initial_queries = 3;
    // When false the initial queries come on top of query_budget and are
    // left out of the learning curve.
    bool initial_counts_toward_budget = true;
    StrategyKind strategy = StrategyKind::hse;
    GraphKind graph_kind = GraphKind::perplexity;
    CalibrationScope calibration = CalibrationScope::all_points;
    std::uint64_t seed = 0;

    // Throws ConfigError.
    void validate() const;
    GraphOptions graph_options() const { return {graph_kind, k, perplexity, calibration}; }
};

struct LearningCurve {
    std::vector<double> accuracies;
};

// Mean of the per-query accuracies; UsageError on an empty curve.
double auc(const LearningCurve& curve);

struct QueryRecord {
    PointId point;
    ClassId label;
    double timestamp;  // seconds since the Unix epoch
    int subqueries_used;
    double selection_seconds;
};

enum class SessionStatus { awaiting_label, complete };

// Graph and tree shared between sessions over the same pool.
struct SessionResources {
    std::shared_ptr<const SimilarityGraph> graph;
    std::shared_ptr<const ClusterTree> tree;
};

SessionResources build_resources(const Dataset& dataset, const SessionConfig& config, bool with_tree);

class ActiveSession {
public:
    // Builds the graph (and the tree when the strategy walks one) unless
    // `resources` already holds them.
    static ActiveSession start(std::shared_ptr<const Dataset> dataset, const SessionConfig& config,
                               SessionResources resources = {});

    // Pending query; computed once and then returned unchanged until the
    // matching submit_label. Throws SessionComplete once the budget is spent
    // and PoolExhausted when every point is labeled.
    PointId next_query();

    // OutOfOrderError unless `point` is the pending query, ConflictError when
    // it is already labeled, ValidationError for a bad class.
    void submit_label(PointId point, ClassId label, std::optional<double> timestamp = std::nullopt);

    SessionStatus status() const { return status_; }
    bool pool_exhausted() const;
    std::optional<PointId> pending() const { return pending_; }
    // Trace behind the pending query (empty for initial and non-EER picks).
    const SelectionTrace& pending_trace() const { return trace_; }

    const Dataset& dataset() const { return *dataset_; }
    std::shared_ptr<const Dataset> dataset_ptr() const { return dataset_; }
    const SessionConfig& config() const { return config_; }
    const HarmonicModel& model() const { return *model_; }
    const SimilarityGraph& graph() const { return *resources_.graph; }
    const ClusterTree* tree() const { return resources_.tree.get(); }
    const std::vector<PointId>& initial_queries() const { return initial_; }
    const std::vector<QueryRecord>& query_log() const { return log_; }
    const LearningCurve& curve() const { return curve_; }
    int subquery_budget() const { return budget_; }
    // Total labels the session will ask for.
    int label_budget() const;

private:
    ActiveSession() = default;

    void update_status();
    double remaining_accuracy() const;

    std::shared_ptr<const Dataset> dataset_;
    SessionConfig config_;
    SessionResources resources_;
    std::optional<HarmonicModel> model_;
    std::vector<PointId> initial_;
    std::size_t next_initial_ = 0;
    std::vector<QueryRecord> log_;
    LearningCurve curve_;
    SessionStatus status_ = SessionStatus::awaiting_label;
    std::optional<PointId> pending_;
    SelectionTrace trace_;
    double pending_seconds_ = 0.0;
    int budget_ = 1;
    Rng rng_;
};

struct SimulationResult {
    LearningCurve curve;
    std::vector<double> per_query_seconds;
    std::vector<PointId> queries;
    std::vector<int> subqueries;
};

// Runs the loop against the dataset's ground truth until the session
// completes or the pool runs out.
SimulationResult run_simulated(std::shared_ptr<const Dataset> dataset, const SessionConfig& config,
                               SessionResources resources = {});

}  // namespace hse
