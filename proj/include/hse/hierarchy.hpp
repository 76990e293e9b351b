#pragma once

#include <span>
#include <string>
#include <vector>

#include "hse/graph.hpp"

namespace hse {

using NodeId = int;

struct TreeNode {
    PointId representative = -1;
    int level = 0;  // 0 = datapoints; the root sits on the highest level
    NodeId parent = -1;
    std::vector<NodeId> children;  // member_count desc, representative asc
    std::size_t member_count = 1;
};

// Leveled cluster tree over N datapoints. Every level partitions the points
// and every cluster is represented by one of its own datapoints, which also
// represents exactly one of its children.
//
// Node ids follow the priority order: level from the root down, then
// member_count descending, then representative ascending. Node 0 is the root.
class ClusterTree {
public:
    // Cluster at level l >= 1: its representative and member clusters,
    // given as indices into level l - 1. Level 0 is implicitly the N points.
    struct Cluster {
        PointId representative;
        std::vector<int> members;
    };

    static ClusterTree from_levels(std::size_t point_count, const std::vector<std::vector<Cluster>>& upper_levels);

    // Root (representative `root_rep`) directly above N leaves.
    static ClusterTree flat(std::size_t point_count, PointId root_rep);

    const std::vector<TreeNode>& nodes() const { return nodes_; }
    const TreeNode& node(NodeId id) const { return nodes_[static_cast<std::size_t>(id)]; }
    std::size_t size() const { return nodes_.size(); }
    NodeId root() const { return 0; }
    int levels() const { return levels_; }
    std::size_t point_count() const { return point_count_; }

    // Nodes represented by datapoint p (its leaf plus every cluster it leads).
    std::span<const NodeId> nodes_of(PointId p) const { return rep_nodes_[static_cast<std::size_t>(p)]; }

    // Throws ValidationError when a structural invariant is broken.
    void validate() const;

    // {"root":0,"levels":L,"nodes":[{id, representative, level, parent, member_count}]}
    std::string to_json() const;

private:
    std::vector<TreeNode> nodes_;
    std::vector<std::vector<NodeId>> rep_nodes_;
    std::size_t point_count_ = 0;
    int levels_ = 0;
};

ClusterTree build_hierarchy(const SimilarityGraph& graph);

// Node ids sorted by (level desc, member_count desc, representative asc).
std::vector<NodeId> tree_linearization(const ClusterTree& tree);

}  // namespace hse
