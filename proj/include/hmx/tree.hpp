#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "hmx/points.hpp"

namespace hmx {

constexpr index_t kNoNode = std::numeric_limits<index_t>::max();

enum class SplitMethod { Auto, KdTree, TwoMeans };

/// Binary spatial partition tree. Node ids are assigned breadth-first so the
/// root is 0, children always have larger ids than parents, and a level can be
/// iterated as a contiguous id range on perfect trees.
///
/// Node i owns the half-open range perm[start[i], end[i]).
struct ClusterTree {
  index_t num_nodes = 0;
  std::vector<index_t> parent;
  std::vector<index_t> lchild;
  std::vector<index_t> rchild;
  std::vector<index_t> start;
  std::vector<index_t> end;
  std::vector<index_t> level;  // depth from root
  std::vector<index_t> perm;   // permutation of point indices
  index_t height = 0;          // max depth
  index_t leaf_size = 0;       // split-termination constant m

  bool is_leaf(index_t i) const { return lchild[i] == kNoNode; }
  index_t node_size(index_t i) const { return end[i] - start[i]; }
  std::span<const index_t> node_points(index_t i) const {
    return {perm.data() + start[i], static_cast<std::size_t>(node_size(i))};
  }
  std::size_t num_points() const { return perm.size(); }
  std::vector<index_t> leaves() const;

  /// Longest downward path from each node to a descendant leaf. This is the
  /// "level counted from the leaves" used by coarsening.
  std::vector<index_t> subtree_heights() const;

  void validate() const;  // checks the structural invariants, throws on violation
};

ClusterTree build_cluster_tree(const PointSet& points, index_t leaf_size,
                               SplitMethod method = SplitMethod::Auto,
                               std::uint64_t seed = 0);

/// Reorders idx in place around the median of the max-spread coordinate.
/// Returns the left size, ceil(len/2); ties broken by original point index.
std::size_t kd_split(const PointSet& points, std::span<index_t> idx);

/// 2-means partition of idx, reordered in place (left cluster first). Falls
/// back to a median split along the centroid-difference direction when one
/// side would be empty or the imbalance exceeds 90/10. Returns the left size.
std::size_t two_means_split(const PointSet& points, std::span<index_t> idx, std::uint64_t seed);

}  // namespace hmx
