#pragma once

#include <cstdint>
#include <vector>

#include "hmx/tree.hpp"

namespace hmx {

/// Approximate k-nearest-neighbour lists, self excluded.
struct NeighborLists {
  index_t k = 0;
  std::vector<index_t> nbr;  // n x k, row-major per point

  std::span<const index_t> of(index_t point) const {
    return {nbr.data() + static_cast<std::size_t>(point) * k, k};
  }
};

struct KnnParams {
  index_t k = 32;
  index_t num_trees = 4;
  index_t leaf_cap = 0;  // 0 -> 4*k
  std::uint64_t seed = 0;
};

/// Candidate neighbours co-located in random-projection-tree leaves across
/// num_trees trees, deduplicated, kept by smallest distance.
NeighborLists build_knn(const PointSet& points, const KnnParams& params);

/// Per-node neighbour candidates with importance weights. weight = number of
/// member points listing the candidate in their k-NN row.
struct NodeCandidates {
  std::vector<index_t> idx;      // sorted ascending
  std::vector<index_t> weight;   // parallel to idx
};

/// Bottom-up merge of member k-NN lists per tree node, own members removed.
std::vector<NodeCandidates> merge_node_neighbors(const ClusterTree& tree,
                                                 const NeighborLists& nbrs);

enum class SampleMode { Neighbor, Exact };

/// Per-node sample row indices, disjoint from the node's own point range.
struct SampleInfo {
  SampleMode mode = SampleMode::Neighbor;
  index_t budget = 0;
  std::vector<std::vector<index_t>> rows;  // per node
};

/// Neighbor mode: up to `budget` candidates by descending weight (ties by
/// index), topped up with uniform-random non-members when short. Exact mode:
/// every non-member index (debug oracle; O(n) per node).
std::vector<index_t> importance_sample(const ClusterTree& tree, index_t node,
                                       const NodeCandidates& candidates, index_t budget,
                                       std::uint64_t seed, SampleMode mode);

/// Full sampling pipeline: k-NN, per-node merge, importance sampling for every
/// node. |samples| = min(budget, n - node size) in neighbor mode.
SampleInfo build_samples(const PointSet& points, const ClusterTree& tree, const KnnParams& knn,
                         index_t budget, SampleMode mode, std::uint64_t seed);

}  // namespace hmx
