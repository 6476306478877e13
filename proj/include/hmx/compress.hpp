#pragma once

#include <vector>

#include "hmx/dense.hpp"
#include "hmx/interaction.hpp"
#include "hmx/kernel.hpp"
#include "hmx/sampling.hpp"

namespace hmx {

struct IdResult {
  std::vector<index_t> skeleton;  // column indices into the input matrix
  DenseMatrix v;                  // cols x srank, identity rows at skeleton positions
  index_t srank = 0;
};

/// Interpolative decomposition via column-pivoted Householder QR:
/// M ~ M[:, skeleton] * V^T with relative Frobenius error <= tol whenever the
/// rank cap was not hit. The pivot loop stops once the Frobenius norm of the
/// trailing residual falls to tol * |M|_F (tol = 0 keeps going to full
/// numerical rank), so the factorization rank adapts to the requested
/// accuracy.
IdResult interpolative_decomposition(const DenseMatrix& m, double tol, index_t max_rank);

/// Per-node generator of the nested basis. Input width is the node's point
/// count for leaves and the sum of the children's sranks for internal nodes;
/// U = V throughout (symmetric kernels only).
struct NodeBasis {
  index_t srank = 0;
  std::vector<index_t> skeleton;  // point indices
  DenseMatrix v;                  // input width x srank
};

struct FarBlock {
  index_t i = 0, j = 0;
  DenseMatrix b;  // srank_i x srank_j, kernel on (skeleton_i, skeleton_j)
};

struct NearBlock {
  index_t i = 0, j = 0;
  DenseMatrix d;  // full kernel block on the leaf pair's point sets
};

struct CompressedMatrix {
  HTree htree;
  std::vector<bool> participating;
  std::vector<NodeBasis> bases;  // per node; empty for non-participants
  std::vector<FarBlock> far_blocks;
  std::vector<NearBlock> near_blocks;
  double bacc = 0.0;
  index_t max_rank = 0;

  std::size_t n() const { return htree.tree.num_points(); }
};

/// Bottom-up adaptive compression. Leaf bases come from an ID of the sampled
/// rows against the leaf's own points; internal bases from an ID against the
/// concatenated children skeletons (nestedness). Requires a non-empty sample
/// row list for every participating node.
CompressedMatrix compress(const HTree& htree, const Kernel& kernel, const PointSet& points,
                          const SampleInfo& samples, double bacc, index_t max_rank);

/// Per-node sranks; 0 for non-participating nodes.
std::vector<index_t> srank_vector(const CompressedMatrix& cm);

}  // namespace hmx
