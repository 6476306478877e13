#pragma once

#include <vector>

#include "hmx/tree.hpp"

namespace hmx {

/// Per-node bounding-ball geometry. diam is taken as 2*radius around the
/// centroid, a conservative overestimate of the exact point-set diameter, and
/// dist as the centroid distance (the cheapest symmetric choice; a gap
/// distance would be an alternative).
struct NodeGeometry {
  std::size_t d = 0;
  std::vector<double> centroid;  // num_nodes x d
  std::vector<double> radius;    // num_nodes

  std::span<const double> node_centroid(index_t i) const { return {centroid.data() + i * d, d}; }
};

enum class InteractionMode { Tau, Hss };

/// ClusterTree plus near/far interaction lists.
///   near[i]: leaf ids interacting densely with leaf i (includes i itself)
///   far[i]:  node ids whose interaction with i is low-rank approximated
/// Both relations are symmetric, lists sorted by node id.
struct HTree {
  ClusterTree tree;
  std::vector<std::vector<index_t>> near;
  std::vector<std::vector<index_t>> far;
  InteractionMode mode = InteractionMode::Hss;
  double tau = 0.0;

  std::size_t near_pair_count() const;
  std::size_t far_pair_count() const;
};

NodeGeometry compute_geometry(const PointSet& points, const ClusterTree& tree);

/// tau * dist(i,j) > diam(i) + diam(j)
bool is_admissible(const NodeGeometry& geom, index_t i, index_t j, double tau);

/// mode Tau: dual-tree traversal from (root, root) under the admissibility
/// condition. mode Hss: near = leaf self-pairs, far = all sibling pairs.
HTree compute_interactions(const PointSet& points, const ClusterTree& tree, InteractionMode mode,
                           double tau);

/// Nodes taking part in the up/down passes: members of far pairs plus all of
/// their descendants. The root is excluded unless it has far pairs (it never
/// does for trees built here).
std::vector<bool> participation(const HTree& ht);

}  // namespace hmx
