#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "hse/eer.hpp"
#include "hse/grf.hpp"
#include "hse/hierarchy.hpp"

namespace hse {

enum class StrategyKind { random, margin, entropy, eer_full, eer_random_subsample, eer_breadth_first, hse };

std::string_view to_string(StrategyKind kind);
// Accepts the canonical names plus the short benchmark aliases
// (rand, randS, bFirst, zhu).
StrategyKind strategy_from_string(std::string_view name);

bool uses_tree(StrategyKind kind);
bool uses_subquery_budget(StrategyKind kind);
bool is_eer(StrategyKind kind);

struct StrategyConfig {
    StrategyKind kind = StrategyKind::hse;
    int subquery_budget = 1;
    std::uint64_t seed = 0;
};

using Rng = std::mt19937_64;

struct Evaluation {
    PointId point;
    double risk;
};

struct SelectionTrace {
    PointId chosen = -1;
    std::vector<Evaluation> evaluated;  // in evaluation order
    int subqueries_used = 0;
};

// ceil(factor * log_base(n)); natural log unless a base is given.
int subquery_budget(std::size_t n, double factor, double log_base = 0.0);

PointId select_random(std::span<const PointId> unlabeled, Rng& rng);
PointId select_margin(const HarmonicModel& model);
PointId select_entropy(const HarmonicModel& model);

SelectionTrace select_eer_full(const HarmonicModel& model);
SelectionTrace select_eer_random_subsample(const HarmonicModel& model, int budget, Rng& rng);
SelectionTrace select_eer_breadth_first(const HarmonicModel& model, const ClusterTree& tree, int budget);

// Hierarchical subquery evaluation. With no labels yet the root's
// representative is returned without any subquery. Otherwise the active set
// starts as the children of every node led by a labeled point (plus the root
// when its representative is unlabeled) and grows greedily below the
// cheapest evaluated member until the budget is spent.
SelectionTrace select_hse(const HarmonicModel& model, const ClusterTree& tree, int budget);

// Dispatches on config.kind; `tree` may be null for tree-free kinds.
SelectionTrace select_query(const StrategyConfig& config, const HarmonicModel& model, const ClusterTree* tree,
                            Rng& rng);

}  // namespace hse
