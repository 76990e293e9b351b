#include "hse/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "hse/error.hpp"

namespace hse {

ClusterTree ClusterTree::from_levels(std::size_t point_count, const std::vector<std::vector<Cluster>>& upper_levels) {
    if (point_count == 0) throw ValidationError("tree over zero points");
    if (upper_levels.empty() && point_count != 1) throw ValidationError("tree needs a single root");
    if (!upper_levels.empty() && upper_levels.back().size() != 1) throw ValidationError("top level must hold one root");

    struct Temp {
        PointId rep;
        int level;
        std::size_t count;
        std::vector<std::size_t> children;  // indices into temp
    };
    std::vector<Temp> temp;
    std::vector<std::size_t> prev(point_count);
    for (std::size_t i = 0; i < point_count; ++i) {
        prev[i] = temp.size();
        temp.push_back({static_cast<PointId>(i), 0, 1, {}});
    }
    for (std::size_t l = 0; l < upper_levels.size(); ++l) {
        std::vector<std::size_t> cur;
        std::vector<char> used(prev.size(), 0);
        for (const Cluster& c : upper_levels[l]) {
            Temp t{c.representative, static_cast<int>(l + 1), 0, {}};
            bool rep_found = false;
            for (int m : c.members) {
                if (m < 0 || static_cast<std::size_t>(m) >= prev.size() || used[static_cast<std::size_t>(m)])
                    throw ValidationError("level " + std::to_string(l + 1) + " does not partition level " +
                                          std::to_string(l));
                used[static_cast<std::size_t>(m)] = 1;
                const std::size_t child = prev[static_cast<std::size_t>(m)];
                t.children.push_back(child);
                t.count += temp[child].count;
                rep_found |= temp[child].rep == c.representative;
            }
            if (!rep_found)
                throw ValidationError("representative " + std::to_string(c.representative) +
                                      " does not lead any of its members");
            cur.push_back(temp.size());
            temp.push_back(std::move(t));
        }
        if (std::find(used.begin(), used.end(), 0) != used.end())
            throw ValidationError("level " + std::to_string(l + 1) + " leaves clusters without a parent");
        prev = std::move(cur);
    }

    std::vector<std::size_t> order(temp.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (temp[a].level != temp[b].level) return temp[a].level > temp[b].level;
        if (temp[a].count != temp[b].count) return temp[a].count > temp[b].count;
        return temp[a].rep < temp[b].rep;
    });
    std::vector<NodeId> id_of(temp.size());
    for (std::size_t k = 0; k < order.size(); ++k) id_of[order[k]] = static_cast<NodeId>(k);

    ClusterTree tree;
    tree.point_count_ = point_count;
    tree.levels_ = static_cast<int>(upper_levels.size()) + 1;
    tree.nodes_.resize(temp.size());
    tree.rep_nodes_.assign(point_count, {});
    for (std::size_t k = 0; k < order.size(); ++k) {
        const Temp& t = temp[order[k]];
        TreeNode& node = tree.nodes_[k];
        node.representative = t.rep;
        node.level = t.level;
        node.member_count = t.count;
        for (std::size_t c : t.children) node.children.push_back(id_of[c]);
        std::sort(node.children.begin(), node.children.end());
        tree.rep_nodes_[static_cast<std::size_t>(t.rep)].push_back(static_cast<NodeId>(k));
    }
    for (std::size_t k = 0; k < tree.nodes_.size(); ++k)
        for (NodeId c : tree.nodes_[k].children) tree.nodes_[static_cast<std::size_t>(c)].parent = static_cast<NodeId>(k);
    return tree;
}

ClusterTree ClusterTree::flat(std::size_t point_count, PointId root_rep) {
    if (point_count == 1) return from_levels(1, {});
    Cluster root{root_rep, std::vector<int>(point_count)};
    std::iota(root.members.begin(), root.members.end(), 0);
    return from_levels(point_count, {{root}});
}

void ClusterTree::validate() const {
    if (nodes_.empty()) throw ValidationError("empty tree");
    int roots = 0;
    std::vector<std::size_t> per_level(static_cast<std::size_t>(levels_), 0);
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
        const TreeNode& n = nodes_[k];
        if (n.parent < 0) ++roots;
        if (n.level < 0 || n.level >= levels_) throw ValidationError("node level out of range");
        per_level[static_cast<std::size_t>(n.level)] += n.member_count;
        if (n.children.empty()) {
            if (n.level != 0 || n.member_count != 1) throw ValidationError("leaf above level 0");
            continue;
        }
        std::size_t sum = 0;
        int leads = 0;
        for (std::size_t c = 0; c < n.children.size(); ++c) {
            const TreeNode& ch = node(n.children[c]);
            if (ch.parent != static_cast<NodeId>(k)) throw ValidationError("parent link mismatch");
            if (ch.level != n.level - 1) throw ValidationError("child not one level below parent");
            sum += ch.member_count;
            leads += ch.representative == n.representative;
            if (c > 0) {
                const TreeNode& prev = node(n.children[c - 1]);
                if (prev.member_count < ch.member_count ||
                    (prev.member_count == ch.member_count && prev.representative >= ch.representative))
                    throw ValidationError("children out of order");
            }
        }
        if (sum != n.member_count) throw ValidationError("member_count mismatch");
        if (leads != 1) throw ValidationError("representative must lead exactly one child");
    }
    if (roots != 1 || nodes_[0].parent != -1) throw ValidationError("tree must have exactly one root at id 0");
    for (std::size_t count : per_level)
        if (count != point_count_) throw ValidationError("level does not partition the points");
}

std::string ClusterTree::to_json() const {
    std::ostringstream out;
    out << "{\"root\":0,\"levels\":" << levels_ << ",\"nodes\":[";
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
        const TreeNode& n = nodes_[k];
        out << (k ? "," : "") << "{\"id\":" << k << ",\"representative\":" << n.representative
            << ",\"level\":" << n.level << ",\"parent\":";
        if (n.parent < 0)
            out << "null";
        else
            out << n.parent;
        out << ",\"member_count\":" << n.member_count << "}";
    }
    out << "]}";
    return out.str();
}

namespace {

constexpr int kMaxSquarings = 64;
constexpr double kConvergedDelta = 1e-15;
// Scores closer than this (relative) count as ties, so that exact symmetries
// resolve by index rather than by rounding noise.
constexpr double kTieTolerance = 1e-9;

bool clearly_greater(double a, double b) { return a > b + kTieTolerance * std::max(std::abs(a), std::abs(b)); }

// V * V with rows renormalised, which repeated squaring would otherwise let
// drift away from stochastic.
Eigen::MatrixXd square_walk(const Eigen::MatrixXd& v) {
    Eigen::MatrixXd out = v * v;
    for (Eigen::Index i = 0; i < out.rows(); ++i) out.row(i) /= out.row(i).sum();
    return out;
}

struct Shift {
    std::vector<int> authority;  // fixed point reached from each node
    int fixed_points = 0;
};

// One authority-seeking pass over the reduced graph with visit matrix V and
// column masses s. Nodes are ordered by representative id, so index order is
// the tie-break order.
Shift shift_to_authorities(const Eigen::MatrixXd& w, const Eigen::MatrixXd& v, const Eigen::RowVectorXd& s) {
    const auto m = static_cast<int>(w.rows());
    std::vector<int> next(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        int best = -1;
        double best_score = 0.0;
        for (int j = 0; j < m; ++j) {
            if (j != i && !(w(i, j) > 0.0)) continue;
            const double score = v(i, j) * s[j];
            if (best < 0 || clearly_greater(score, best_score)) {
                best = j;
                best_score = score;
            }
        }
        next[static_cast<std::size_t>(i)] = best;
    }

    Shift out;
    out.authority.assign(static_cast<std::size_t>(m), -1);
    std::vector<int> on_path(static_cast<std::size_t>(m), -1);
    for (int start = 0; start < m; ++start) {
        if (out.authority[static_cast<std::size_t>(start)] >= 0) continue;
        std::vector<int> path;
        int u = start;
        while (out.authority[static_cast<std::size_t>(u)] < 0 && on_path[static_cast<std::size_t>(u)] < 0) {
            on_path[static_cast<std::size_t>(u)] = static_cast<int>(path.size());
            path.push_back(u);
            u = next[static_cast<std::size_t>(u)];
        }
        int target;
        if (out.authority[static_cast<std::size_t>(u)] >= 0) {
            target = out.authority[static_cast<std::size_t>(u)];
        } else {
            // Cycle (a self loop is the usual fixed point): the member with the
            // largest column mass, lowest index on ties, becomes the authority.
            target = u;
            for (std::size_t k = static_cast<std::size_t>(on_path[static_cast<std::size_t>(u)]); k < path.size(); ++k)
                if (clearly_greater(s[path[k]], s[target]) || (!clearly_greater(s[target], s[path[k]]) && path[k] < target))
                    target = path[k];
            ++out.fixed_points;
        }
        for (int p : path) {
            out.authority[static_cast<std::size_t>(p)] = target;
            on_path[static_cast<std::size_t>(p)] = -1;
        }
    }
    return out;
}

}  // namespace

ClusterTree build_hierarchy(const SimilarityGraph& graph) {
    const std::size_t n = graph.size();
    if (n == 0) throw ValidationError("hierarchy over an empty graph");

    std::vector<PointId> reps(n);
    std::iota(reps.begin(), reps.end(), 0);
    std::vector<int> cluster_of(n);
    std::iota(cluster_of.begin(), cluster_of.end(), 0);
    std::vector<std::vector<ClusterTree::Cluster>> levels;

    const auto edges = graph.edges();
    for (int level = 0; reps.size() > 1; ++level) {
        const auto m = static_cast<Eigen::Index>(reps.size());
        // Lumped walk on the current clusters: inter-cluster weight sums, and
        // intra-cluster weight as a self loop.
        Eigen::MatrixXd w = Eigen::MatrixXd::Zero(m, m);
        for (const Edge& e : edges) {
            const int a = cluster_of[static_cast<std::size_t>(e.i)];
            const int b = cluster_of[static_cast<std::size_t>(e.j)];
            w(a, b) += e.weight;
            w(b, a) += e.weight;
        }
        Eigen::MatrixXd p = w;
        for (Eigen::Index i = 0; i < m; ++i) {
            const double d = w.row(i).sum();
            if (d > 0.0)
                p.row(i) /= d;
            else
                p(i, i) = 1.0;
        }

        // t = 2^(level+1) to start; doubled while no cluster merges, until
        // the walk stops changing.
        Eigen::MatrixXd v = p;
        for (int k = 0; k <= level; ++k) v = square_walk(v);
        Shift shift;
        Eigen::RowVectorXd s;
        bool forced = false;
        for (int squarings = level + 1;; ++squarings) {
            s = v.colwise().sum();
            shift = shift_to_authorities(w, v, s);
            if (shift.fixed_points < m) break;
            if (squarings >= kMaxSquarings) {
                forced = true;
                break;
            }
            Eigen::MatrixXd next = square_walk(v);
            const double delta = (next - v).cwiseAbs().maxCoeff();
            v = std::move(next);
            if (delta <= kConvergedDelta) {
                s = v.colwise().sum();
                shift = shift_to_authorities(w, v, s);
                forced = shift.fixed_points == m;
                break;
            }
        }

        std::vector<ClusterTree::Cluster> next_level;
        std::vector<int> new_index(static_cast<std::size_t>(m), -1);
        if (forced) {
            Eigen::Index top = 0;
            for (Eigen::Index j = 1; j < m; ++j)
                if (clearly_greater(s[j], s[top])) top = j;
            ClusterTree::Cluster root{reps[static_cast<std::size_t>(top)], {}};
            for (Eigen::Index j = 0; j < m; ++j) root.members.push_back(static_cast<int>(j));
            next_level.push_back(std::move(root));
            std::fill(new_index.begin(), new_index.end(), 0);
        } else {
            // Authorities in index order keep the new level sorted by representative.
            for (Eigen::Index j = 0; j < m; ++j) {
                if (shift.authority[static_cast<std::size_t>(j)] != j) continue;
                new_index[static_cast<std::size_t>(j)] = static_cast<int>(next_level.size());
                next_level.push_back({reps[static_cast<std::size_t>(j)], {}});
            }
            for (Eigen::Index j = 0; j < m; ++j) {
                const int a = new_index[static_cast<std::size_t>(shift.authority[static_cast<std::size_t>(j)])];
                next_level[static_cast<std::size_t>(a)].members.push_back(static_cast<int>(j));
            }
            for (Eigen::Index j = 0; j < m; ++j)
                new_index[static_cast<std::size_t>(j)] =
                    new_index[static_cast<std::size_t>(shift.authority[static_cast<std::size_t>(j)])];
        }
        for (auto& c : cluster_of) c = new_index[static_cast<std::size_t>(c)];
        reps.clear();
        for (const auto& c : next_level) reps.push_back(c.representative);
        levels.push_back(std::move(next_level));
    }
    return ClusterTree::from_levels(n, levels);
}

std::vector<NodeId> tree_linearization(const ClusterTree& tree) {
    std::vector<NodeId> order(tree.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
        const TreeNode& x = tree.node(a);
        const TreeNode& y = tree.node(b);
        if (x.level != y.level) return x.level > y.level;
        if (x.member_count != y.member_count) return x.member_count > y.member_count;
        return x.representative < y.representative;
    });
    return order;
}

}  // namespace hse
