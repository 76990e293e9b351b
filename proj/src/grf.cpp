#include "hse/grf.hpp"

#include <algorithm>
#include <optional>
#include <queue>

#include "hse/error.hpp"

namespace hse {

namespace {

constexpr double kRegularizationScale = 1e-9;
constexpr double kMinPivot = 1e-14;

}  // namespace

LabelState::LabelState(std::size_t n, int class_count)
    : assignment_(n, kUnlabeled), class_count_(class_count) {
    if (class_count < 2) throw ValidationError("class count must be at least 2");
}

void LabelState::assign(PointId p, ClassId c) {
    if (p < 0 || static_cast<std::size_t>(p) >= assignment_.size())
        throw ValidationError("point id " + std::to_string(p) + " out of range");
    if (c < 0 || c >= class_count_)
        throw ValidationError("class " + std::to_string(c) + " outside [0," + std::to_string(class_count_) + ")");
    if (is_labeled(p)) throw ConflictError("point " + std::to_string(p) + " is already labeled");
    assignment_[static_cast<std::size_t>(p)] = c;
    ++labeled_;
}

std::vector<PointId> LabelState::labeled_points() const {
    std::vector<PointId> out;
    out.reserve(labeled_);
    for (std::size_t i = 0; i < assignment_.size(); ++i)
        if (assignment_[i] != kUnlabeled) out.push_back(static_cast<PointId>(i));
    return out;
}

Posterior LabelState::y_matrix() const {
    Posterior y = Posterior::Zero(static_cast<Eigen::Index>(size()), class_count_);
    for (std::size_t i = 0; i < assignment_.size(); ++i)
        if (assignment_[i] != kUnlabeled) y(static_cast<Eigen::Index>(i), assignment_[i]) = 1.0;
    return y;
}

HarmonicModel HarmonicModel::solve(std::shared_ptr<const SimilarityGraph> graph, const LabelState& labels) {
    if (!graph) throw UsageError("null graph");
    if (graph->size() != labels.size())
        throw ValidationError("label state covers " + std::to_string(labels.size()) + " points, graph has " +
                              std::to_string(graph->size()));
    HarmonicModel m;
    m.graph_ = std::move(graph);
    m.labels_ = labels;
    const std::size_t n = m.graph_->size();

    // Connected components over strictly positive weights.
    m.component_.assign(n, -1);
    int comps = 0;
    for (std::size_t s = 0; s < n; ++s) {
        if (m.component_[s] >= 0) continue;
        std::vector<PointId> members;
        std::queue<PointId> frontier;
        frontier.push(static_cast<PointId>(s));
        m.component_[s] = comps;
        while (!frontier.empty()) {
            PointId u = frontier.front();
            frontier.pop();
            members.push_back(u);
            auto nb = m.graph_->neighbors(u);
            auto w = m.graph_->weights(u);
            for (std::size_t e = 0; e < nb.size(); ++e) {
                if (w[e] > 0.0 && m.component_[static_cast<std::size_t>(nb[e])] < 0) {
                    m.component_[static_cast<std::size_t>(nb[e])] = comps;
                    frontier.push(nb[e]);
                }
            }
        }
        std::sort(members.begin(), members.end());
        m.component_members_.push_back(std::move(members));
        ++comps;
    }
    m.comp_labeled_.assign(static_cast<std::size_t>(comps), 0);
    for (PointId p : labels.labeled_points()) m.comp_labeled_[static_cast<std::size_t>(m.component_[p])] = 1;
    m.rebuild();
    return m;
}

Eigen::MatrixXd HarmonicModel::invert_block(std::span<const PointId> points) {
    const auto m = static_cast<Eigen::Index>(points.size());
    std::vector<int> local(graph_->size(), -1);
    for (Eigen::Index r = 0; r < m; ++r) local[static_cast<std::size_t>(points[r])] = static_cast<int>(r);

    auto factor = [&](double eps) -> std::optional<Eigen::MatrixXd> {
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
        for (Eigen::Index r = 0; r < m; ++r) {
            const PointId u = points[static_cast<std::size_t>(r)];
            a(r, r) = graph_->degree(u) + eps;
            auto nb = graph_->neighbors(u);
            auto w = graph_->weights(u);
            for (std::size_t e = 0; e < nb.size(); ++e) {
                const int c = local[static_cast<std::size_t>(nb[e])];
                if (c >= 0) a(r, c) -= w[e];
            }
        }
        Eigen::LLT<Eigen::MatrixXd> llt(a);
        if (llt.info() != Eigen::Success) return std::nullopt;
        Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(m, m));
        if (!inv.allFinite()) return std::nullopt;
        return inv;
    };

    if (auto inv = factor(epsilon_)) return *std::move(inv);
    if (epsilon_ == 0.0) {
        epsilon_ = kRegularizationScale * graph_->mean_degree();
        if (auto inv = factor(epsilon_)) return *std::move(inv);
    }
    int comp = points.empty() ? -1 : component_[static_cast<std::size_t>(points.front())];
    throw NumericalError("unlabeled block of component " + std::to_string(comp) +
                         " is singular despite regularization");
}

void HarmonicModel::rebuild() {
    const std::size_t n = graph_->size();
    const int classes = labels_.class_count();
    g_points_.clear();
    for (std::size_t i = 0; i < n; ++i)
        if (!labels_.is_labeled(static_cast<PointId>(i)) && comp_labeled_[static_cast<std::size_t>(component_[i])])
            g_points_.push_back(static_cast<PointId>(i));
    g_row_.assign(n, -1);
    for (std::size_t r = 0; r < g_points_.size(); ++r) g_row_[static_cast<std::size_t>(g_points_[r])] = static_cast<int>(r);

    g_ = invert_block(g_points_);

    const auto m = static_cast<Eigen::Index>(g_points_.size());
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m, classes);
    for (Eigen::Index r = 0; r < m; ++r) {
        const PointId u = g_points_[static_cast<std::size_t>(r)];
        auto nb = graph_->neighbors(u);
        auto w = graph_->weights(u);
        for (std::size_t e = 0; e < nb.size(); ++e)
            if (labels_.is_labeled(nb[e])) b(r, labels_.at(nb[e])) += w[e];
    }
    const Eigen::MatrixXd fu = g_ * b;

    f_.setConstant(static_cast<Eigen::Index>(n), classes, 1.0 / classes);
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = static_cast<PointId>(i);
        if (labels_.is_labeled(p)) {
            f_.row(static_cast<Eigen::Index>(i)).setZero();
            f_(static_cast<Eigen::Index>(i), labels_.at(p)) = 1.0;
        }
    }
    for (Eigen::Index r = 0; r < m; ++r) {
        f_.row(g_points_[static_cast<std::size_t>(r)]) = fu.row(r);
        clamp_row(g_points_[static_cast<std::size_t>(r)]);
    }
    refresh_free_error();
}

void HarmonicModel::clamp_row(Eigen::Index r) {
    f_.row(r) = f_.row(r).cwiseMax(0.0).cwiseMin(1.0);
}

void HarmonicModel::refresh_free_error() {
    comp_free_error_.assign(component_members_.size(), 0.0);
    free_error_ = 0.0;
    for (std::size_t k = 0; k < component_members_.size(); ++k) {
        if (comp_labeled_[k]) continue;
        double e = 0.0;
        for (PointId u : component_members_[k]) e += 1.0 - f_.row(u).maxCoeff();
        comp_free_error_[k] = e;
        free_error_ += e;
    }
}

void HarmonicModel::check_unlabeled(PointId q) const {
    if (q < 0 || static_cast<std::size_t>(q) >= size())
        throw ValidationError("point id " + std::to_string(q) + " out of range");
    if (labels_.is_labeled(q)) throw ConflictError("point " + std::to_string(q) + " is already labeled");
}

void HarmonicModel::add_label(PointId p, ClassId c) {
    check_unlabeled(p);
    if (c < 0 || c >= class_count())
        throw ValidationError("class " + std::to_string(c) + " outside [0," + std::to_string(class_count()) + ")");
    const int classes = class_count();
    const auto comp = static_cast<std::size_t>(component_[static_cast<std::size_t>(p)]);
    Eigen::RowVectorXd target = Eigen::RowVectorXd::Zero(classes);
    target[c] = 1.0;

    if (!comp_labeled_[comp]) {
        labels_.assign(p, c);
        comp_labeled_[comp] = 1;
        std::vector<PointId> members;
        for (PointId u : component_members_[comp])
            if (u != p) members.push_back(u);

        const double eps_before = epsilon_;
        Eigen::MatrixXd block = invert_block(members);
        if (epsilon_ != eps_before) {
            // Regularization switched on; the existing G must use it too.
            rebuild();
            ++version_;
            return;
        }
        const auto m_old = g_.rows();
        const auto mc = static_cast<Eigen::Index>(members.size());
        Eigen::MatrixXd grown = Eigen::MatrixXd::Zero(m_old + mc, m_old + mc);
        grown.topLeftCorner(m_old, m_old) = g_;
        grown.bottomRightCorner(mc, mc) = block;
        g_ = std::move(grown);

        Eigen::MatrixXd b = Eigen::MatrixXd::Zero(mc, classes);
        for (Eigen::Index r = 0; r < mc; ++r) {
            const PointId u = members[static_cast<std::size_t>(r)];
            g_points_.push_back(u);
            g_row_[static_cast<std::size_t>(u)] = static_cast<int>(m_old + r);
            b(r, c) = graph_->weight(u, p);
        }
        const Eigen::MatrixXd fu = block * b;
        for (Eigen::Index r = 0; r < mc; ++r) {
            f_.row(members[static_cast<std::size_t>(r)]) = fu.row(r);
            clamp_row(members[static_cast<std::size_t>(r)]);
        }
        f_.row(p) = target;
        refresh_free_error();
        ++version_;
        return;
    }

    const int q = g_row_[static_cast<std::size_t>(p)];
    const double gqq = g_(q, q);
    if (!(gqq > kMinPivot)) throw NumericalError("degenerate pivot for point " + std::to_string(p));
    labels_.assign(p, c);

    const Eigen::RowVectorXd delta = target - f_.row(p);
    const Eigen::VectorXd gq = g_.col(q);
    const auto m = g_.rows();
    for (Eigen::Index r = 0; r < m; ++r) {
        if (r == q || gq[r] == 0.0) continue;
        const PointId u = g_points_[static_cast<std::size_t>(r)];
        f_.row(u) += (gq[r] / gqq) * delta;
        clamp_row(u);
    }
    f_.row(p) = target;

    // Schur complement: G' = G - G_.q G_q. / G_qq, then drop row/column q.
    const Eigen::RowVectorXd gq_row = g_.row(q);
    g_.noalias() -= (gq / gqq) * gq_row;
    const Eigen::Index last = m - 1;
    if (q != last) {
        g_.row(q).swap(g_.row(last));
        g_.col(q).swap(g_.col(last));
        const PointId moved = g_points_[static_cast<std::size_t>(last)];
        g_points_[static_cast<std::size_t>(q)] = moved;
        g_row_[static_cast<std::size_t>(moved)] = q;
    }
    g_points_.pop_back();
    g_row_[static_cast<std::size_t>(p)] = -1;
    g_.conservativeResize(last, last);
    ++version_;
}

Posterior HarmonicModel::lookahead(PointId q, ClassId c) const {
    check_unlabeled(q);
    if (c < 0 || c >= class_count()) throw ValidationError("class " + std::to_string(c) + " out of range");
    Posterior out = f_;
    Eigen::RowVectorXd target = Eigen::RowVectorXd::Zero(class_count());
    target[c] = 1.0;
    const auto comp = static_cast<std::size_t>(component_[static_cast<std::size_t>(q)]);
    if (!comp_labeled_[comp]) {
        for (PointId u : component_members_[comp]) out.row(u) = target;
        return out;
    }
    const int rq = g_row_[static_cast<std::size_t>(q)];
    const double gqq = g_(rq, rq);
    if (!(gqq > kMinPivot)) throw NumericalError("degenerate pivot for point " + std::to_string(q));
    const Eigen::RowVectorXd delta = target - f_.row(q);
    for (Eigen::Index r = 0; r < g_.rows(); ++r) {
        const double a = g_(r, rq);
        if (r == rq || a == 0.0) continue;
        const PointId u = g_points_[static_cast<std::size_t>(r)];
        out.row(u) = (out.row(u) + (a / gqq) * delta).cwiseMax(0.0).cwiseMin(1.0);
    }
    out.row(q) = target;
    return out;
}

std::vector<double> HarmonicModel::lookahead_errors(PointId q) const {
    check_unlabeled(q);
    const int classes = class_count();
    const auto comp = static_cast<std::size_t>(component_[static_cast<std::size_t>(q)]);
    std::vector<double> errs(static_cast<std::size_t>(classes), 0.0);

    if (!comp_labeled_[comp]) {
        // The whole component collapses onto the hypothesised class.
        double labeled_part = 0.0;
        for (PointId u : g_points_) labeled_part += 1.0 - f_.row(u).maxCoeff();
        std::fill(errs.begin(), errs.end(), free_error_ - comp_free_error_[comp] + labeled_part);
        return errs;
    }

    const int rq = g_row_[static_cast<std::size_t>(q)];
    const double gqq = g_(rq, rq);
    if (!(gqq > kMinPivot)) throw NumericalError("degenerate pivot for point " + std::to_string(q));
    const double* gcol = g_.col(rq).data();
    const double* fq = f_.row(q).data();
    std::vector<double> base(static_cast<std::size_t>(classes));
    const auto m = g_.rows();
    for (Eigen::Index r = 0; r < m; ++r) {
        if (r == rq) continue;
        const double a = gcol[r] / gqq;
        const double* fu = f_.row(g_points_[static_cast<std::size_t>(r)]).data();
        // Row after the update is base + a * e_c for hypothesis c.
        double top1 = -1.0, top2 = -1.0;
        int arg1 = 0;
        for (int k = 0; k < classes; ++k) {
            const double v = fu[k] - a * fq[k];
            base[static_cast<std::size_t>(k)] = v;
            if (v > top1) {
                top2 = top1;
                top1 = v;
                arg1 = k;
            } else if (v > top2) {
                top2 = v;
            }
        }
        for (int k = 0; k < classes; ++k) {
            const double other = k == arg1 ? top2 : top1;
            const double mx = std::min(1.0, std::max(base[static_cast<std::size_t>(k)] + a, other));
            errs[static_cast<std::size_t>(k)] += 1.0 - mx;
        }
    }
    for (double& e : errs) e += free_error_;
    return errs;
}

std::vector<ClassId> predict(const Posterior& posterior) {
    std::vector<ClassId> out(static_cast<std::size_t>(posterior.rows()));
    for (Eigen::Index i = 0; i < posterior.rows(); ++i) {
        ClassId best = 0;
        for (Eigen::Index c = 1; c < posterior.cols(); ++c)
            if (posterior(i, c) > posterior(i, best)) best = static_cast<ClassId>(c);
        out[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

}  // namespace hse
