#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hse/dataset.hpp"
#include "hse/graph.hpp"

namespace hse {

// N x C class distributions, one row per datapoint.
using Posterior = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr ClassId kUnlabeled = -1;

class LabelState {
public:
    LabelState() = default;
    LabelState(std::size_t n, int class_count);

    std::size_t size() const { return assignment_.size(); }
    int class_count() const { return class_count_; }
    std::size_t labeled_count() const { return labeled_; }

    bool is_labeled(PointId p) const { return assignment_[static_cast<std::size_t>(p)] != kUnlabeled; }
    ClassId at(PointId p) const { return assignment_[static_cast<std::size_t>(p)]; }

    // Throws ValidationError on a bad id or class, ConflictError when p is
    // already labeled.
    void assign(PointId p, ClassId c);

    std::vector<PointId> labeled_points() const;
    // One-hot rows for labeled points, zero rows otherwise.
    Posterior y_matrix() const;

private:
    std::vector<ClassId> assignment_;
    int class_count_ = 2;
    std::size_t labeled_ = 0;
};

// Harmonic (Gaussian random field) solution on a similarity graph.
//
// Besides the posterior F the model keeps G = (D_uu - W_uu)^-1 over the
// unlabeled points whose component holds at least one label. Points in
// label-free components carry the uniform distribution and are not part of
// G; the first label in such a component factors that component's block.
class HarmonicModel {
public:
    static HarmonicModel solve(std::shared_ptr<const SimilarityGraph> graph, const LabelState& labels);

    // Moves `p` to the labeled set, updating F and downdating G in O(U^2).
    void add_label(PointId p, ClassId c);

    // Posterior that add_label(q, c) would produce. Leaves the model as is.
    Posterior lookahead(PointId q, ClassId c) const;

    // sum_i (1 - max_c F+_ic) for every hypothesised class of q, computed in a
    // single pass without materialising F+.
    std::vector<double> lookahead_errors(PointId q) const;

    const Posterior& posterior() const { return f_; }
    const LabelState& labels() const { return labels_; }
    const SimilarityGraph& graph() const { return *graph_; }
    std::shared_ptr<const SimilarityGraph> graph_ptr() const { return graph_; }

    std::size_t size() const { return labels_.size(); }
    int class_count() const { return labels_.class_count(); }
    double regularization() const { return epsilon_; }
    // Bumped by every add_label.
    std::uint64_t version() const { return version_; }

    // Rows of G in point order are not guaranteed; these expose the mapping.
    const Eigen::MatrixXd& g_inverse() const { return g_; }
    std::span<const PointId> g_points() const { return g_points_; }
    int g_row(PointId p) const { return g_row_[static_cast<std::size_t>(p)]; }

    int component(PointId p) const { return component_[static_cast<std::size_t>(p)]; }
    bool component_labeled(int comp) const { return comp_labeled_[static_cast<std::size_t>(comp)] != 0; }

private:
    HarmonicModel() = default;

    void check_unlabeled(PointId q) const;
    // Factor (D - W + eps I) over `points` and return its inverse.
    Eigen::MatrixXd invert_block(std::span<const PointId> points);
    void rebuild();
    void clamp_row(Eigen::Index r);
    void refresh_free_error();

    std::shared_ptr<const SimilarityGraph> graph_;
    LabelState labels_;
    Posterior f_;
    Eigen::MatrixXd g_;
    std::vector<PointId> g_points_;
    std::vector<int> g_row_;
    std::vector<int> component_;
    std::vector<std::vector<PointId>> component_members_;
    std::vector<char> comp_labeled_;
    // Error mass of label-free components, total and per component.
    double free_error_ = 0.0;
    std::vector<double> comp_free_error_;
    double epsilon_ = 0.0;
    std::uint64_t version_ = 0;
};

inline HarmonicModel solve_harmonic(std::shared_ptr<const SimilarityGraph> graph, const LabelState& labels) {
    return HarmonicModel::solve(std::move(graph), labels);
}

// Per-row argmax, ties to the lowest class id.
std::vector<ClassId> predict(const Posterior& posterior);
inline std::vector<ClassId> predict(const HarmonicModel& model) { return predict(model.posterior()); }

}  // namespace hse
