#include "hse/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>

#include "hse/error.hpp"

namespace hse {

std::string_view to_string(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::random: return "random";
        case StrategyKind::margin: return "margin";
        case StrategyKind::entropy: return "entropy";
        case StrategyKind::eer_full: return "eer_full";
        case StrategyKind::eer_random_subsample: return "eer_random_subsample";
        case StrategyKind::eer_breadth_first: return "eer_breadth_first";
        case StrategyKind::hse: return "hse";
    }
    return "unknown";
}

StrategyKind strategy_from_string(std::string_view name) {
    if (name == "random" || name == "rand") return StrategyKind::random;
    if (name == "margin") return StrategyKind::margin;
    if (name == "entropy") return StrategyKind::entropy;
    if (name == "eer_full" || name == "zhu" || name == "eer") return StrategyKind::eer_full;
    if (name == "eer_random_subsample" || name == "randS") return StrategyKind::eer_random_subsample;
    if (name == "eer_breadth_first" || name == "bFirst") return StrategyKind::eer_breadth_first;
    if (name == "hse") return StrategyKind::hse;
    throw ConfigError("unknown strategy '" + std::string(name) + "'");
}

bool uses_tree(StrategyKind kind) { return kind == StrategyKind::hse || kind == StrategyKind::eer_breadth_first; }

bool uses_subquery_budget(StrategyKind kind) {
    return kind == StrategyKind::hse || kind == StrategyKind::eer_breadth_first ||
           kind == StrategyKind::eer_random_subsample;
}

bool is_eer(StrategyKind kind) { return kind == StrategyKind::eer_full || uses_subquery_budget(kind); }

int subquery_budget(std::size_t n, double factor, double log_base) {
    if (n < 1) throw ConfigError("empty pool");
    double logn = std::log(static_cast<double>(n));
    if (log_base > 0.0) logn /= std::log(log_base);
    return std::max(1, static_cast<int>(std::ceil(factor * logn)));
}

namespace {

std::vector<PointId> unlabeled_points(const HarmonicModel& model) {
    std::vector<PointId> out;
    for (std::size_t i = 0; i < model.size(); ++i)
        if (!model.labels().is_labeled(static_cast<PointId>(i))) out.push_back(static_cast<PointId>(i));
    if (out.empty()) throw PoolExhausted("every point is labeled");
    return out;
}

void check_budget(int budget) {
    if (budget < 1) throw ConfigError("subquery budget must be at least 1");
}

// Chosen = minimal risk, ties to the earliest evaluation.
void finish(SelectionTrace& trace) {
    if (trace.evaluated.empty()) throw PoolExhausted("no candidate could be evaluated");
    const Evaluation* best = &trace.evaluated.front();
    for (const Evaluation& e : trace.evaluated)
        if (e.risk < best->risk) best = &e;
    trace.chosen = best->point;
    trace.subqueries_used = static_cast<int>(trace.evaluated.size());
}

SelectionTrace evaluate_all(const HarmonicModel& model, std::span<const PointId> candidates) {
    SelectionTrace trace;
    trace.evaluated.reserve(candidates.size());
    for (PointId p : candidates) trace.evaluated.push_back({p, expected_risk(model, p).expected_risk});
    finish(trace);
    return trace;
}

}  // namespace

PointId select_random(std::span<const PointId> unlabeled, Rng& rng) {
    if (unlabeled.empty()) throw UsageError("empty pool");
    std::uniform_int_distribution<std::size_t> pick(0, unlabeled.size() - 1);
    return unlabeled[pick(rng)];
}

PointId select_margin(const HarmonicModel& model) {
    const auto pool = unlabeled_points(model);
    const Posterior& f = model.posterior();
    PointId best = -1;
    double best_margin = std::numeric_limits<double>::infinity();
    for (PointId p : pool) {
        double top1 = -1.0, top2 = -1.0;
        for (Eigen::Index c = 0; c < f.cols(); ++c) {
            const double v = f(p, c);
            if (v > top1) {
                top2 = top1;
                top1 = v;
            } else if (v > top2) {
                top2 = v;
            }
        }
        if (top1 - top2 < best_margin) {
            best_margin = top1 - top2;
            best = p;
        }
    }
    return best;
}

PointId select_entropy(const HarmonicModel& model) {
    const auto pool = unlabeled_points(model);
    const Posterior& f = model.posterior();
    PointId best = -1;
    double best_h = -1.0;
    for (PointId p : pool) {
        double h = 0.0;
        for (Eigen::Index c = 0; c < f.cols(); ++c)
            if (f(p, c) > 0.0) h -= f(p, c) * std::log(f(p, c));
        if (h > best_h) {
            best_h = h;
            best = p;
        }
    }
    return best;
}

SelectionTrace select_eer_full(const HarmonicModel& model) {
    const auto pool = unlabeled_points(model);
    return evaluate_all(model, pool);
}

SelectionTrace select_eer_random_subsample(const HarmonicModel& model, int budget, Rng& rng) {
    check_budget(budget);
    auto pool = unlabeled_points(model);
    const std::size_t take = std::min(pool.size(), static_cast<std::size_t>(budget));
    // Partial Fisher-Yates: the first `take` slots become a uniform sample.
    for (std::size_t i = 0; i < take; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(take);
    std::sort(pool.begin(), pool.end());
    return evaluate_all(model, pool);
}

SelectionTrace select_eer_breadth_first(const HarmonicModel& model, const ClusterTree& tree, int budget) {
    check_budget(budget);
    if (tree.point_count() != model.size()) throw ValidationError("tree and model cover different pools");
    (void)unlabeled_points(model);
    const LabelState& labels = model.labels();
    std::vector<char> seen(model.size(), 0);
    SelectionTrace trace;
    for (NodeId id : tree_linearization(tree)) {
        if (static_cast<int>(trace.evaluated.size()) >= budget) break;
        const PointId rep = tree.node(id).representative;
        if (labels.is_labeled(rep) || seen[static_cast<std::size_t>(rep)]) continue;
        seen[static_cast<std::size_t>(rep)] = 1;
        trace.evaluated.push_back({rep, expected_risk(model, rep).expected_risk});
    }
    finish(trace);
    return trace;
}

SelectionTrace select_hse(const HarmonicModel& model, const ClusterTree& tree, int budget) {
    check_budget(budget);
    if (tree.point_count() != model.size()) throw ValidationError("tree and model cover different pools");
    const LabelState& labels = model.labels();
    SelectionTrace trace;
    if (labels.labeled_count() == 0) {
        trace.chosen = tree.node(tree.root()).representative;
        return trace;
    }
    if (labels.labeled_count() == model.size()) throw PoolExhausted("every point is labeled");

    // Node ids are already in priority order (level from the top, then size).
    const std::size_t nodes = tree.size();
    std::vector<char> active(nodes, 0), opened(nodes, 0);
    std::vector<double> risk(model.size(), std::numeric_limits<double>::quiet_NaN());
    auto known = [&](PointId p) { return !std::isnan(risk[static_cast<std::size_t>(p)]); };
    auto exhausted = [&] { return static_cast<int>(trace.evaluated.size()) >= budget; };

    // Expandable members keyed by (risk, node id); the smallest is on top.
    using Key = std::pair<double, NodeId>;
    std::priority_queue<Key, std::vector<Key>, std::greater<Key>> frontier;

    // Evaluates the given nodes in priority order, sharing risks between
    // nodes led by the same datapoint.
    auto evaluate = [&](std::vector<NodeId> batch) {
        std::sort(batch.begin(), batch.end());
        for (NodeId id : batch) {
            const PointId rep = tree.node(id).representative;
            if (labels.is_labeled(rep)) continue;
            if (!known(rep)) {
                if (exhausted()) return;
                const double r = expected_risk(model, rep).expected_risk;
                risk[static_cast<std::size_t>(rep)] = r;
                trace.evaluated.push_back({rep, r});
            }
            if (!tree.node(id).children.empty()) frontier.emplace(risk[static_cast<std::size_t>(rep)], id);
        }
    };
    auto open = [&](NodeId id, std::vector<NodeId>& added) {
        if (opened[static_cast<std::size_t>(id)]) return;
        opened[static_cast<std::size_t>(id)] = 1;
        for (NodeId c : tree.node(id).children)
            if (!active[static_cast<std::size_t>(c)]) {
                active[static_cast<std::size_t>(c)] = 1;
                added.push_back(c);
            }
    };

    std::vector<NodeId> initial;
    if (!labels.is_labeled(tree.node(tree.root()).representative)) {
        active[static_cast<std::size_t>(tree.root())] = 1;
        initial.push_back(tree.root());
    }
    for (PointId p : labels.labeled_points())
        for (NodeId id : tree.nodes_of(p)) open(id, initial);
    evaluate(std::move(initial));

    while (!exhausted() && !frontier.empty()) {
        const NodeId expand = frontier.top().second;
        frontier.pop();
        if (opened[static_cast<std::size_t>(expand)]) continue;
        std::vector<NodeId> added;
        open(expand, added);
        evaluate(std::move(added));
    }
    finish(trace);
    return trace;
}

SelectionTrace select_query(const StrategyConfig& config, const HarmonicModel& model, const ClusterTree* tree,
                            Rng& rng) {
    if (uses_tree(config.kind) && tree == nullptr) throw ConfigError("strategy needs a cluster tree");
    SelectionTrace trace;
    switch (config.kind) {
        case StrategyKind::random: trace.chosen = select_random(unlabeled_points(model), rng); break;
        case StrategyKind::margin: trace.chosen = select_margin(model); break;
        case StrategyKind::entropy: trace.chosen = select_entropy(model); break;
        case StrategyKind::eer_full: trace = select_eer_full(model); break;
        case StrategyKind::eer_random_subsample:
            trace = select_eer_random_subsample(model, config.subquery_budget, rng);
            break;
        case StrategyKind::eer_breadth_first:
            trace = select_eer_breadth_first(model, *tree, config.subquery_budget);
            break;
        case StrategyKind::hse: trace = select_hse(model, *tree, config.subquery_budget); break;
    }
    return trace;
}

}  // namespace hse
