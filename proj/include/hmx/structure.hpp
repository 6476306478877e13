#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "hmx/compress.hpp"
#include "hmx/interaction.hpp"

namespace hmx {

enum class BlockKind { Near, Far };

using InteractionPair = std::pair<index_t, index_t>;

struct InteractionBlock {
  std::vector<InteractionPair> pairs;
};

/// All blocks whose target row-group is `row_group`. Distinct top-level
/// groups never share a row-group index, which is what makes the blocked
/// evaluation loop free of write conflicts.
struct BlockRowGroup {
  index_t row_group = 0;
  std::vector<InteractionBlock> blocks;
};

struct BlockSet {
  BlockKind kind = BlockKind::Near;
  index_t blocksize = 1;
  std::vector<BlockRowGroup> groups;

  std::size_t pair_count() const;
  /// Pairs flattened in storage/iteration order.
  std::vector<InteractionPair> flat_pairs() const;
};

/// Maps interaction (i,j) to grid cell ((i-1)/blocksize, (j-1)/blocksize) and
/// gathers non-empty cells row-group-major. Throws if the root takes part in
/// any interaction.
BlockSet blocking(const HTree& htree, index_t blocksize, BlockKind kind);

struct SubTree {
  std::vector<index_t> nodes;  // post-order: children precede parents
  double cost = 0.0;
};

struct CoarsenLevel {
  std::vector<SubTree> subtrees;
};

/// Coarsen levels ordered leaves -> root. Level i holds nodes whose
/// subtree height falls in [i*agg, (i+1)*agg) (the last level absorbs the
/// remainder up to the root).
struct CoarsenSet {
  index_t agg = 1;
  index_t p = 1;
  std::vector<CoarsenLevel> levels;
};

/// Flops proxy for one node of the upward pass; Q scales uniformly and
/// cancels in balancing, so callers normally pass Q = 1.
double node_cost(const ClusterTree& tree, index_t node, std::span<const index_t> sranks,
                 double q = 1.0);

/// Disjoint sub-trees of the height band [lo, hi), restricted to
/// participating nodes, each in post-order. Band membership is by subtree
/// height (longest downward path), i.e. levels counted from the leaves.
std::vector<SubTree> disjoint_subtrees(const ClusterTree& tree,
                                       const std::vector<bool>& participating, index_t lo,
                                       index_t hi);

/// First-fit-decreasing packing of `costs` into at most n_bins bins with
/// capacity max(largest cost, ceil(total / n_bins)). Returns the bin index
/// per item. All-zero costs degenerate to round-robin over the sorted order.
std::vector<index_t> bin_pack(std::span<const double> costs, index_t n_bins);

CoarsenSet coarsening(const ClusterTree& tree, std::span<const index_t> sranks,
                      const std::vector<bool>& participating, index_t p, index_t agg,
                      double q = 1.0);

/// Computation-ordered flat storage of all generators.
///
/// D generators follow the near blockset, B the far blockset, V (= U under
/// symmetry) the coarsenset traversal. ptr arrays hold one offset per
/// submatrix plus a final total-length entry.
struct CDS {
  ClusterTree tree;
  index_t dim = 0;  // point dimensionality, informational header field
  std::vector<index_t> sranks;
  std::vector<std::uint8_t> participating;
  double bacc = 0.0;
  index_t max_rank = 0;

  BlockSet near_bs;
  BlockSet far_bs;
  CoarsenSet coarsenset;

  std::vector<std::uint64_t> dptr, bptr, vptr;
  std::vector<double> dgen, bgen, vgen;

  // U aliases V: symmetric kernels store one copy
  const std::vector<std::uint64_t>& uptr() const { return vptr; }
  const std::vector<double>& ugen() const { return vgen; }

  /// Basis input width: point count for leaves, children srank sum otherwise.
  index_t v_width(index_t node) const {
    return tree.is_leaf(node) ? tree.node_size(node)
                              : sranks[tree.lchild[node]] + sranks[tree.rchild[node]];
  }

  /// Storage-order pair lists and slot lookups, derived from the structure
  /// sets; rebuilt after deserialization.
  std::vector<InteractionPair> near_order;
  std::vector<InteractionPair> far_order;
  std::vector<index_t> v_order;  // node ids in V storage order
  std::map<InteractionPair, std::uint64_t> near_index;
  std::map<InteractionPair, std::uint64_t> far_index;
  std::vector<std::uint64_t> v_index;  // per node id; npos when absent
  void rebuild_order();

  std::uint64_t d_slot(index_t i, index_t j) const;
  std::uint64_t b_slot(index_t i, index_t j) const;
  std::uint64_t v_slot(index_t node) const;

  DenseMatrix extract_d(index_t i, index_t j) const;
  DenseMatrix extract_b(index_t i, index_t j) const;
  DenseMatrix extract_v(index_t node) const;
};

CDS build_cds(const CompressedMatrix& cm, const BlockSet& near_bs, const BlockSet& far_bs,
              const CoarsenSet& coarsenset);

}  // namespace hmx
