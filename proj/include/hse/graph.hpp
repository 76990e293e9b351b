#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hse/dataset.hpp"

namespace hse {

enum class GraphKind { perplexity, mean, binary, knn };

std::string_view to_string(GraphKind kind);
GraphKind graph_kind_from_string(std::string_view name);

// Where per-node bandwidths are calibrated: over every other point, or only
// over the node's (union) kNN neighbourhood.
enum class CalibrationScope { all_points, neighbors_only };

struct Edge {
    PointId i;
    PointId j;
    double weight;
};

// Sparse symmetric similarity graph. Adjacency is stored in CSR form in both
// directions; every undirected weight is computed once and copied into both
// slots, so w_ij == w_ji bit-for-bit.
class SimilarityGraph {
public:
    SimilarityGraph() = default;

    // Builds from an undirected edge list; each pair may appear once in either
    // orientation. Self loops and negative or non-finite weights are rejected.
    static SimilarityGraph from_edges(std::size_t n, std::span<const Edge> edges);

    std::size_t size() const { return n_; }
    std::size_t edge_count() const { return neighbors_.size() / 2; }

    std::span<const PointId> neighbors(PointId i) const {
        return {neighbors_.data() + offsets_[i], neighbors_.data() + offsets_[i + 1]};
    }
    std::span<const double> weights(PointId i) const {
        return {weights_.data() + offsets_[i], weights_.data() + offsets_[i + 1]};
    }
    double weight(PointId i, PointId j) const;
    double degree(PointId i) const { return degrees_[static_cast<std::size_t>(i)]; }
    double mean_degree() const;

    // Undirected edges with i < j, sorted by (i, j).
    std::vector<Edge> edges() const;

    // Per-node RBF bandwidths; empty for the binary graph.
    const std::vector<double>& gammas() const { return gammas_; }
    // Nodes whose bandwidth search did not reach tolerance.
    const std::vector<PointId>& flagged() const { return flagged_; }

    GraphKind kind() const { return kind_; }
    int k() const { return k_; }
    double perplexity_target() const { return perplexity_; }

    // Throws ValidationError unless the graph is symmetric, loop free and has
    // finite nonnegative weights.
    void validate() const;

private:
    friend class GraphBuilder;

    std::size_t n_ = 0;
    std::vector<std::size_t> offsets_{0};
    std::vector<PointId> neighbors_;
    std::vector<double> weights_;
    std::vector<double> degrees_;
    std::vector<double> gammas_;
    std::vector<PointId> flagged_;
    GraphKind kind_ = GraphKind::binary;
    int k_ = 0;
    double perplexity_ = 0.0;
};

// k nearest other points per node under L2, ties broken by lower id.
std::vector<std::vector<PointId>> knn_neighbors(const FeatureMatrix& features, int k);

struct Calibration {
    double gamma = 1.0;
    double log2_perplexity = 0.0;  // achieved
    int iterations = 0;
    bool converged = false;
};

inline constexpr int kCalibrationMaxIterations = 64;
inline constexpr double kCalibrationTolerance = 1e-5;  // on log2 perplexity

// Finds gamma so that the Gaussian conditionals over `squared_distances`
// reach the requested perplexity. Doubling/halving from gamma = 1 until the
// target is bracketed, then bisection.
Calibration calibrate_gamma(std::span<const double> squared_distances, double target_perplexity);

SimilarityGraph build_perplexity_graph(const Dataset& dataset, int k, double target_perplexity,
                                       CalibrationScope scope = CalibrationScope::all_points);
SimilarityGraph build_baseline_graph(const Dataset& dataset, int k, GraphKind kind);

struct GraphOptions {
    GraphKind kind = GraphKind::perplexity;
    int k = 10;
    double perplexity = 30.0;
    CalibrationScope scope = CalibrationScope::all_points;
};

SimilarityGraph build_graph(const Dataset& dataset, const GraphOptions& options);

// {n, edges: [[i, j, w], ...], gammas: [...]}, 17 significant digits.
std::string graph_to_json(const SimilarityGraph& graph);

}  // namespace hse
