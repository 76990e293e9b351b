#include "hse/session.hpp"

#include <algorithm>
#include <numeric>

#include "hse/error.hpp"

namespace hse {

void SessionConfig::validate() const {
    if (k < 1) throw ConfigError("k must be at least 1");
    if (!(perplexity >= 1.0)) throw ConfigError("perplexity must be at least 1");
    if (query_budget < 1) throw ConfigError("query budget must be at least 1");
    if (!(subquery_factor > 0.0)) throw ConfigError("subquery factor must be positive");
    if (log_base < 0.0 || log_base == 1.0) throw ConfigError("log base must be 0 (natural) or a positive value other than 1");
    if (initial_queries < 1) throw ConfigError("initial queries must be at least 1");
    if (initial_counts_toward_budget && initial_queries > query_budget)
        throw ConfigError("initial queries exceed the query budget");
}

double auc(const LearningCurve& curve) {
    if (curve.accuracies.empty()) throw UsageError("empty learning curve");
    return std::accumulate(curve.accuracies.begin(), curve.accuracies.end(), 0.0) /
           static_cast<double>(curve.accuracies.size());
}

SessionResources build_resources(const Dataset& dataset, const SessionConfig& config, bool with_tree) {
    SessionResources r;
    r.graph = std::make_shared<const SimilarityGraph>(build_graph(dataset, config.graph_options()));
    if (with_tree) r.tree = std::make_shared<const ClusterTree>(build_hierarchy(*r.graph));
    return r;
}

namespace {

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
}

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return Rng(seq);
}

}  // namespace

ActiveSession ActiveSession::start(std::shared_ptr<const Dataset> dataset, const SessionConfig& config,
                                   SessionResources resources) {
    if (!dataset) throw UsageError("no dataset");
    config.validate();
    dataset->validate();
    const std::size_t n = dataset->size();
    if (static_cast<std::size_t>(config.k) >= n)
        throw ConfigError("k = " + std::to_string(config.k) + " needs more than " + std::to_string(n) + " points");

    ActiveSession s;
    s.dataset_ = std::move(dataset);
    s.config_ = config;
    const bool needs_tree = uses_tree(config.strategy);
    if (!resources.graph) resources.graph = build_resources(*s.dataset_, config, false).graph;
    if (resources.graph->size() != n) throw ValidationError("graph does not match the dataset");
    if (needs_tree && !resources.tree)
        resources.tree = std::make_shared<const ClusterTree>(build_hierarchy(*resources.graph));
    s.resources_ = std::move(resources);
    s.model_.emplace(HarmonicModel::solve(s.resources_.graph, LabelState(n, s.dataset_->class_count)));
    s.budget_ = hse::subquery_budget(n, config.subquery_factor, config.log_base);
    s.rng_ = make_rng(config.seed, 1);

    const std::size_t want = std::min<std::size_t>(static_cast<std::size_t>(config.initial_queries), n);
    if (config.strategy == StrategyKind::hse) {
        std::vector<char> taken(n, 0);
        for (NodeId id : tree_linearization(*s.resources_.tree)) {
            if (s.initial_.size() == want) break;
            const PointId rep = s.resources_.tree->node(id).representative;
            if (taken[static_cast<std::size_t>(rep)]) continue;
            taken[static_cast<std::size_t>(rep)] = 1;
            s.initial_.push_back(rep);
        }
    } else {
        // Depends on the seed only, so every baseline starts from the same points.
        Rng init = make_rng(config.seed, 0);
        std::uniform_int_distribution<PointId> pick(0, static_cast<PointId>(n - 1));
        std::vector<char> taken(n, 0);
        while (s.initial_.size() < want) {
            const PointId p = pick(init);
            if (taken[static_cast<std::size_t>(p)]) continue;
            taken[static_cast<std::size_t>(p)] = 1;
            s.initial_.push_back(p);
        }
    }
    return s;
}

int ActiveSession::label_budget() const {
    const int extra = config_.initial_counts_toward_budget ? 0 : static_cast<int>(initial_.size());
    return config_.query_budget + extra;
}

bool ActiveSession::pool_exhausted() const { return model_->labels().labeled_count() == dataset_->size(); }

void ActiveSession::update_status() {
    if (pool_exhausted() || static_cast<int>(log_.size()) >= label_budget()) status_ = SessionStatus::complete;
}

PointId ActiveSession::next_query() {
    if (pending_) return *pending_;
    if (pool_exhausted()) throw PoolExhausted("every point is labeled");
    if (status_ == SessionStatus::complete) throw SessionComplete("query budget spent");

    const auto t0 = std::chrono::steady_clock::now();
    if (next_initial_ < initial_.size()) {
        trace_ = {};
        trace_.chosen = initial_[next_initial_];
    } else {
        const StrategyConfig sc{config_.strategy, budget_, config_.seed};
        trace_ = select_query(sc, *model_, resources_.tree.get(), rng_);
    }
    pending_seconds_ = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    pending_ = trace_.chosen;
    return *pending_;
}

double ActiveSession::remaining_accuracy() const {
    const auto& truth = *dataset_->labels;
    const LabelState& labels = model_->labels();
    const Posterior& f = model_->posterior();
    std::size_t total = 0, correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (labels.is_labeled(static_cast<PointId>(i))) continue;
        ++total;
        Eigen::Index best;
        f.row(static_cast<Eigen::Index>(i)).maxCoeff(&best);
        if (best == truth[i]) ++correct;
    }
    return total == 0 ? 1.0 : static_cast<double>(correct) / static_cast<double>(total);
}

void ActiveSession::submit_label(PointId point, ClassId label, std::optional<double> timestamp) {
    if (status_ == SessionStatus::complete) throw SessionComplete("query budget spent");
    const PointId expected = next_query();
    if (point < 0 || static_cast<std::size_t>(point) >= dataset_->size())
        throw ValidationError("point " + std::to_string(point) + " is outside the pool");
    if (model_->labels().is_labeled(point)) throw ConflictError("point " + std::to_string(point) + " is already labeled");
    if (point != expected)
        throw OutOfOrderError("point " + std::to_string(point) + " was not issued; pending query is " +
                              std::to_string(expected));
    if (label < 0 || label >= dataset_->class_count)
        throw ValidationError("class " + std::to_string(label) + " is outside [0, " +
                              std::to_string(dataset_->class_count) + ")");

    model_->add_label(point, label);
    const bool initial = next_initial_ < initial_.size();
    if (initial) ++next_initial_;
    log_.push_back({point, label, timestamp.value_or(now_seconds()), trace_.subqueries_used, pending_seconds_});
    if (dataset_->has_labels() && (config_.initial_counts_toward_budget || !initial))
        curve_.accuracies.push_back(remaining_accuracy());
    pending_.reset();
    trace_ = {};
    update_status();
}

SimulationResult run_simulated(std::shared_ptr<const Dataset> dataset, const SessionConfig& config,
                               SessionResources resources) {
    if (!dataset || !dataset->has_labels()) throw UsageError("simulation needs ground-truth labels");
    const auto& truth = *dataset->labels;
    ActiveSession s = ActiveSession::start(dataset, config, std::move(resources));
    SimulationResult out;
    while (s.status() != SessionStatus::complete) {
        const PointId q = s.next_query();
        s.submit_label(q, truth[static_cast<std::size_t>(q)], 0.0);
    }
    out.curve = s.curve();
    for (const QueryRecord& r : s.query_log()) {
        out.per_query_seconds.push_back(r.selection_seconds);
        out.queries.push_back(r.point);
        out.subqueries.push_back(r.subqueries_used);
    }
    return out;
}

}  // namespace hse
