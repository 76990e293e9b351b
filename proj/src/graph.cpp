#include "hse/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "hse/error.hpp"

namespace hse {

std::string_view to_string(GraphKind kind) {
    switch (kind) {
        case GraphKind::perplexity: return "perplexity";
        case GraphKind::mean: return "mean";
        case GraphKind::binary: return "binary";
        case GraphKind::knn: return "knn";
    }
    return "unknown";
}

GraphKind graph_kind_from_string(std::string_view name) {
    if (name == "perplexity" || name == "per") return GraphKind::perplexity;
    if (name == "mean") return GraphKind::mean;
    if (name == "binary") return GraphKind::binary;
    if (name == "knn") return GraphKind::knn;
    throw ConfigError("unknown graph kind '" + std::string(name) + "'");
}

class GraphBuilder {
public:
    // `adjacency[i]` must be sorted and symmetric; `weight(i, j)` is called
    // once per undirected pair with i < j.
    template <typename WeightFn>
    static SimilarityGraph assemble(const std::vector<std::vector<PointId>>& adjacency, WeightFn&& weight) {
        SimilarityGraph g;
        g.n_ = adjacency.size();
        g.offsets_.assign(g.n_ + 1, 0);
        for (std::size_t i = 0; i < g.n_; ++i) g.offsets_[i + 1] = g.offsets_[i] + adjacency[i].size();
        g.neighbors_.resize(g.offsets_.back());
        g.weights_.resize(g.offsets_.back());
        std::vector<std::size_t> cursor(g.offsets_.begin(), g.offsets_.end() - 1);
        for (std::size_t i = 0; i < g.n_; ++i) {
            for (PointId j : adjacency[i]) {
                if (static_cast<std::size_t>(j) <= i) continue;
                const double w = weight(static_cast<PointId>(i), j);
                g.neighbors_[cursor[i]] = j;
                g.weights_[cursor[i]++] = w;
                g.neighbors_[cursor[j]] = static_cast<PointId>(i);
                g.weights_[cursor[j]++] = w;
            }
        }
        // Slots fill in increasing partner order: lower partners arrive first
        // (from their own rows), then higher ones, so rows end up sorted.
        g.degrees_.assign(g.n_, 0.0);
        for (std::size_t i = 0; i < g.n_; ++i)
            for (std::size_t e = g.offsets_[i]; e < g.offsets_[i + 1]; ++e) g.degrees_[i] += g.weights_[e];
        return g;
    }

    static void set_meta(SimilarityGraph& g, GraphKind kind, int k, double perplexity, std::vector<double> gammas,
                         std::vector<PointId> flagged) {
        g.kind_ = kind;
        g.k_ = k;
        g.perplexity_ = perplexity;
        g.gammas_ = std::move(gammas);
        g.flagged_ = std::move(flagged);
    }
};

SimilarityGraph SimilarityGraph::from_edges(std::size_t n, std::span<const Edge> edges) {
    std::vector<std::vector<std::pair<PointId, double>>> rows(n);
    for (const Edge& e : edges) {
        if (e.i < 0 || e.j < 0 || static_cast<std::size_t>(e.i) >= n || static_cast<std::size_t>(e.j) >= n)
            throw ValidationError("edge endpoint out of range");
        if (e.i == e.j) throw ValidationError("self loop on node " + std::to_string(e.i));
        if (!std::isfinite(e.weight) || e.weight < 0.0) throw ValidationError("edge weight must be finite and >= 0");
        auto [a, b] = std::minmax(e.i, e.j);
        rows[static_cast<std::size_t>(a)].emplace_back(b, e.weight);
    }
    std::vector<std::vector<PointId>> adjacency(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::sort(rows[i].begin(), rows[i].end());
        for (std::size_t m = 1; m < rows[i].size(); ++m)
            if (rows[i][m].first == rows[i][m - 1].first) throw ValidationError("duplicate edge");
        for (auto& [j, w] : rows[i]) {
            adjacency[i].push_back(j);
            adjacency[static_cast<std::size_t>(j)].push_back(static_cast<PointId>(i));
        }
    }
    for (auto& adj : adjacency) std::sort(adj.begin(), adj.end());
    auto g = GraphBuilder::assemble(adjacency, [&](PointId i, PointId j) {
        auto& row = rows[static_cast<std::size_t>(i)];
        auto it = std::lower_bound(row.begin(), row.end(), std::make_pair(j, -1.0));
        return it->second;
    });
    GraphBuilder::set_meta(g, GraphKind::binary, 0, 0.0, {}, {});
    return g;
}

double SimilarityGraph::weight(PointId i, PointId j) const {
    auto nb = neighbors(i);
    auto it = std::lower_bound(nb.begin(), nb.end(), j);
    if (it == nb.end() || *it != j) return 0.0;
    return weights(i)[static_cast<std::size_t>(it - nb.begin())];
}

double SimilarityGraph::mean_degree() const {
    if (n_ == 0) return 0.0;
    return std::accumulate(degrees_.begin(), degrees_.end(), 0.0) / static_cast<double>(n_);
}

std::vector<Edge> SimilarityGraph::edges() const {
    std::vector<Edge> out;
    out.reserve(edge_count());
    for (std::size_t i = 0; i < n_; ++i) {
        auto nb = neighbors(static_cast<PointId>(i));
        auto w = weights(static_cast<PointId>(i));
        for (std::size_t m = 0; m < nb.size(); ++m)
            if (static_cast<std::size_t>(nb[m]) > i) out.push_back({static_cast<PointId>(i), nb[m], w[m]});
    }
    return out;
}

void SimilarityGraph::validate() const {
    for (std::size_t i = 0; i < n_; ++i) {
        auto nb = neighbors(static_cast<PointId>(i));
        auto w = weights(static_cast<PointId>(i));
        for (std::size_t m = 0; m < nb.size(); ++m) {
            if (static_cast<std::size_t>(nb[m]) == i) throw ValidationError("self loop");
            if (m > 0 && nb[m] <= nb[m - 1]) throw ValidationError("unsorted adjacency");
            if (!std::isfinite(w[m]) || w[m] < 0.0) throw ValidationError("invalid weight");
            if (weight(nb[m], static_cast<PointId>(i)) != w[m]) throw ValidationError("asymmetric weight");
        }
    }
}

namespace {

// Squared L2 distances from point i to every point (entry i is zero).
Eigen::VectorXd squared_distances_from(const FeatureMatrix& x, Eigen::Index i) {
    return (x.rowwise() - x.row(i)).rowwise().squaredNorm();
}

std::vector<PointId> nearest(const Eigen::VectorXd& dist, PointId self, int k) {
    std::vector<PointId> idx;
    idx.reserve(static_cast<std::size_t>(dist.size()) - 1);
    for (Eigen::Index j = 0; j < dist.size(); ++j)
        if (j != self) idx.push_back(static_cast<PointId>(j));
    auto closer = [&](PointId a, PointId b) { return dist[a] < dist[b] || (dist[a] == dist[b] && a < b); };
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), closer);
    idx.resize(static_cast<std::size_t>(k));
    return idx;
}

void check_k(std::size_t n, int k) {
    if (k < 1) throw ConfigError("k must be at least 1");
    if (static_cast<std::size_t>(k) >= n)
        throw ConfigError("k = " + std::to_string(k) + " requires more than " + std::to_string(k) +
                          " points, dataset has " + std::to_string(n));
}

std::vector<std::vector<PointId>> union_adjacency(const std::vector<std::vector<PointId>>& knn) {
    std::vector<std::vector<PointId>> adj(knn.size());
    for (std::size_t i = 0; i < knn.size(); ++i)
        for (PointId j : knn[i]) {
            adj[i].push_back(j);
            adj[static_cast<std::size_t>(j)].push_back(static_cast<PointId>(i));
        }
    for (auto& a : adj) {
        std::sort(a.begin(), a.end());
        a.erase(std::unique(a.begin(), a.end()), a.end());
    }
    return adj;
}

double squared_distance(const FeatureMatrix& x, PointId i, PointId j) {
    return (x.row(i) - x.row(j)).squaredNorm();
}

struct Entropy {
    double log2_perplexity;
    double log_normalizer;  // ln sum_j exp(-gamma d_j)
};

Entropy entropy_at(std::span<const double> d, double dmin, double gamma) {
    double z = 0.0, weighted = 0.0;
    for (double dj : d) {
        const double shifted = dj - dmin;
        const double e = std::exp(-gamma * shifted);
        z += e;
        weighted += e * shifted;
    }
    const double h_nats = std::log(z) + gamma * weighted / z;
    return {h_nats / std::numbers::ln2, std::log(z) - gamma * dmin};
}

}  // namespace

std::vector<std::vector<PointId>> knn_neighbors(const FeatureMatrix& features, int k) {
    const auto n = static_cast<std::size_t>(features.rows());
    check_k(n, k);
    std::vector<std::vector<PointId>> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = nearest(squared_distances_from(features, static_cast<Eigen::Index>(i)), static_cast<PointId>(i), k);
    return out;
}

Calibration calibrate_gamma(std::span<const double> d, double target_perplexity) {
    if (d.size() < 2) throw ConfigError("perplexity calibration needs at least two candidates");
    if (!(target_perplexity >= 1.0) || target_perplexity > static_cast<double>(d.size()))
        throw ConfigError("target perplexity " + std::to_string(target_perplexity) + " outside [1, " +
                          std::to_string(d.size()) + "]");
    const double target = std::log2(target_perplexity);
    const double dmin = *std::min_element(d.begin(), d.end());

    Calibration out;
    double gamma = 1.0;
    double lo = 0.0, hi = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= kCalibrationMaxIterations; ++it) {
        const double h = entropy_at(d, dmin, gamma).log2_perplexity;
        out.iterations = it;
        out.gamma = gamma;
        out.log2_perplexity = h;
        const double diff = h - target;
        if (std::abs(diff) <= kCalibrationTolerance) {
            out.converged = true;
            return out;
        }
        if (diff > 0.0) {  // too many effective neighbours: sharpen
            lo = gamma;
            gamma = std::isinf(hi) ? gamma * 2.0 : 0.5 * (lo + hi);
        } else {
            hi = gamma;
            gamma = lo == 0.0 ? gamma * 0.5 : 0.5 * (lo + hi);
        }
    }
    if (lo > 0.0 && std::isfinite(hi)) {
        out.gamma = 0.5 * (lo + hi);
        out.log2_perplexity = entropy_at(d, dmin, out.gamma).log2_perplexity;
    }
    out.converged = false;
    return out;
}

SimilarityGraph build_perplexity_graph(const Dataset& dataset, int k, double target_perplexity,
                                       CalibrationScope scope) {
    const std::size_t n = dataset.size();
    if (n < 3) throw ConfigError("perplexity graph needs at least 3 points");
    check_k(n, k);
    if (scope == CalibrationScope::all_points && target_perplexity > static_cast<double>(n - 1))
        throw ConfigError("perplexity " + std::to_string(target_perplexity) + " exceeds the " +
                          std::to_string(n - 1) + " candidates per point");
    if (scope == CalibrationScope::neighbors_only && target_perplexity > static_cast<double>(k))
        throw ConfigError("perplexity exceeds k when calibrating over neighbours only");

    const FeatureMatrix& x = dataset.features;
    std::vector<std::vector<PointId>> knn(n);
    std::vector<double> gammas(n), log_z(n);
    std::vector<PointId> flagged;
    std::vector<double> cand;

    auto finish = [&](std::size_t i, const Calibration& cal, double dmin) {
        gammas[i] = cal.gamma;
        // ln Z at the final gamma, over the same candidate set
        log_z[i] = entropy_at(cand, dmin, cal.gamma).log_normalizer;
        if (!cal.converged) flagged.push_back(static_cast<PointId>(i));
    };

    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::VectorXd dist = squared_distances_from(x, static_cast<Eigen::Index>(i));
        knn[i] = nearest(dist, static_cast<PointId>(i), k);
        if (scope == CalibrationScope::all_points) {
            cand.clear();
            for (Eigen::Index j = 0; j < dist.size(); ++j)
                if (static_cast<std::size_t>(j) != i) cand.push_back(dist[j]);
            const auto cal = calibrate_gamma(cand, target_perplexity);
            finish(i, cal, *std::min_element(cand.begin(), cand.end()));
        }
    }
    auto adjacency = union_adjacency(knn);
    if (scope == CalibrationScope::neighbors_only) {
        for (std::size_t i = 0; i < n; ++i) {
            cand.clear();
            for (PointId j : adjacency[i]) cand.push_back(squared_distance(x, static_cast<PointId>(i), j));
            const auto cal = calibrate_gamma(cand, target_perplexity);
            finish(i, cal, *std::min_element(cand.begin(), cand.end()));
        }
    }

    auto g = GraphBuilder::assemble(adjacency, [&](PointId i, PointId j) {
        const double d = squared_distance(x, i, j);
        const double p_j_given_i = std::exp(-gammas[i] * d - log_z[i]);
        const double p_i_given_j = std::exp(-gammas[j] * d - log_z[j]);
        return 0.5 * (p_j_given_i + p_i_given_j);
    });
    GraphBuilder::set_meta(g, GraphKind::perplexity, k, target_perplexity, std::move(gammas), std::move(flagged));
    return g;
}

SimilarityGraph build_baseline_graph(const Dataset& dataset, int k, GraphKind kind) {
    if (kind == GraphKind::perplexity) throw ConfigError("perplexity is not a baseline graph kind");
    const std::size_t n = dataset.size();
    check_k(n, k);
    const FeatureMatrix& x = dataset.features;
    const auto knn = knn_neighbors(x, k);
    const auto adjacency = union_adjacency(knn);
    auto bandwidth = [](double sigma) { return sigma > 0.0 ? 1.0 / (2.0 * sigma * sigma) : 1.0; };

    std::vector<double> gammas;
    SimilarityGraph g;
    switch (kind) {
        case GraphKind::binary:
            g = GraphBuilder::assemble(adjacency, [](PointId, PointId) { return 1.0; });
            break;
        case GraphKind::mean: {
            double total = 0.0;
            std::size_t edges = 0;
            for (std::size_t i = 0; i < n; ++i)
                for (PointId j : adjacency[i])
                    if (static_cast<std::size_t>(j) > i) {
                        total += std::sqrt(squared_distance(x, static_cast<PointId>(i), j));
                        ++edges;
                    }
            const double gamma = bandwidth(total / static_cast<double>(edges));
            gammas.assign(n, gamma);
            g = GraphBuilder::assemble(adjacency,
                                       [&](PointId i, PointId j) { return std::exp(-gamma * squared_distance(x, i, j)); });
            break;
        }
        case GraphKind::knn: {
            gammas.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                double total = 0.0;
                for (PointId j : knn[i]) total += std::sqrt(squared_distance(x, static_cast<PointId>(i), j));
                gammas[i] = bandwidth(total / static_cast<double>(k));
            }
            g = GraphBuilder::assemble(adjacency, [&](PointId i, PointId j) {
                const double d = squared_distance(x, i, j);
                return 0.5 * (std::exp(-gammas[i] * d) + std::exp(-gammas[j] * d));
            });
            break;
        }
        case GraphKind::perplexity: break;
    }
    GraphBuilder::set_meta(g, kind, k, 0.0, std::move(gammas), {});
    return g;
}

SimilarityGraph build_graph(const Dataset& dataset, const GraphOptions& options) {
    if (options.kind == GraphKind::perplexity)
        return build_perplexity_graph(dataset, options.k, options.perplexity, options.scope);
    return build_baseline_graph(dataset, options.k, options.kind);
}

std::string graph_to_json(const SimilarityGraph& graph) {
    std::string out = "{\"n\":" + std::to_string(graph.size()) + ",\"edges\":[";
    char buf[64];
    bool first = true;
    for (const Edge& e : graph.edges()) {
        std::snprintf(buf, sizeof buf, "%.17g", e.weight);
        out += (first ? "[" : ",[") + std::to_string(e.i) + "," + std::to_string(e.j) + "," + buf + "]";
        first = false;
    }
    out += "],\"gammas\":[";
    first = true;
    for (double gm : graph.gammas()) {
        std::snprintf(buf, sizeof buf, "%.17g", gm);
        out += (first ? "" : ",") + std::string(buf);
        first = false;
    }
    out += "]}";
    return out;
}

}  // namespace hse
