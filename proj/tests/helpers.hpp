#pragma once

#include <string>

#include "hmx/executor.hpp"
#include "hmx/pipeline.hpp"
#include "hmx/rng.hpp"
#include "hmx/serial.hpp"

namespace tst {

using namespace hmx;

/// The 11-node worked-example tree: root 0 with children 1, 2; node 1 has
/// leaf children 3, 4; node 2 has children 5, 6; node 5 has leaves 7, 8 and
/// node 6 has leaves 9, 10. Two points per leaf.
inline ClusterTree worked_tree() {
  constexpr index_t X = kNoNode;
  ClusterTree t;
  t.num_nodes = 11;
  t.parent = {X, 0, 0, 1, 1, 2, 2, 5, 5, 6, 6};
  t.lchild = {1, 3, 5, X, X, 7, 9, X, X, X, X};
  t.rchild = {2, 4, 6, X, X, 8, 10, X, X, X, X};
  t.start = {0, 0, 4, 0, 2, 4, 8, 4, 6, 8, 10};
  t.end = {12, 4, 12, 2, 4, 8, 12, 6, 8, 10, 12};
  t.level = {0, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3};
  t.perm.resize(12);
  for (index_t i = 0; i < 12; ++i) t.perm[i] = i;
  t.height = 3;
  t.leaf_size = 2;
  t.validate();
  return t;
}

/// HTree over worked_tree with the hand-traced interaction lists:
/// far {(1,2),(2,1),(5,6),(6,5)}, near {(9,9),(9,10),(10,9),(10,10)}.
inline HTree worked_htree() {
  HTree ht;
  ht.tree = worked_tree();
  ht.mode = InteractionMode::Tau;
  ht.tau = 0.7;
  ht.near.assign(11, {});
  ht.far.assign(11, {});
  ht.far[1] = {2};
  ht.far[2] = {1};
  ht.far[5] = {6};
  ht.far[6] = {5};
  ht.near[9] = {9, 10};
  ht.near[10] = {9, 10};
  return ht;
}

inline DenseMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  DenseMatrix m(rows, cols);
  Rng rng(mix64(seed ^ 0x9e3779b97f4a7c15ULL));
  for (auto& v : m.data) v = rng.uniform() * 2.0 - 1.0;
  return m;
}

inline double rel_frob(const DenseMatrix& a, const DenseMatrix& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double diff = a.data[i] - b.data[i];
    num += diff * diff;
    den += b.data[i] * b.data[i];
  }
  return den == 0.0 ? std::sqrt(num) : std::sqrt(num / den);
}

struct Instance {
  PointSet pts;
  Kernel kernel;
  HTree ht;
  SampleInfo si;
  CompressedMatrix cm;
  BlockSet nbs, fbs;
  CoarsenSet cs;
  CDS cds;
};

struct InstanceSpec {
  std::size_t n = 512;
  std::size_t d = 2;
  InteractionMode mode = InteractionMode::Hss;
  double tau = 0.0;
  index_t leaf = 64;
  Kernel kernel = Kernel::gaussian(1.0);
  double bacc = 1e-5;
  index_t max_rank = 64;
  SampleMode sample_mode = SampleMode::Neighbor;
  index_t budget = 128;
  index_t knn_k = 16;
  index_t p = 4;
  index_t agg = 2;
  index_t near_blocksize = 2;
  index_t far_blocksize = 4;
  std::uint64_t seed = 1;
  SynthShape shape = SynthShape::UniformRandom;
};

inline Instance make_instance(const InstanceSpec& s) {
  Instance in;
  in.pts = synth_points(s.shape, s.n, s.d, s.seed);
  in.kernel = s.kernel;
  ClusterTree tree = build_cluster_tree(in.pts, s.leaf, SplitMethod::Auto, s.seed);
  in.ht = compute_interactions(in.pts, tree, s.mode, s.tau);
  KnnParams knn;
  knn.k = s.knn_k;
  knn.seed = s.seed;
  in.si = build_samples(in.pts, in.ht.tree, knn, s.budget, s.sample_mode, s.seed);
  in.cm = compress(in.ht, s.kernel, in.pts, in.si, s.bacc, s.max_rank);
  in.nbs = blocking(in.ht, s.near_blocksize, BlockKind::Near);
  in.fbs = blocking(in.ht, s.far_blocksize, BlockKind::Far);
  in.cs = coarsening(in.ht.tree, srank_vector(in.cm), in.cm.participating, s.p, s.agg);
  in.cds = build_cds(in.cm, in.nbs, in.fbs, in.cs);
  in.cds.dim = static_cast<index_t>(s.d);
  return in;
}

}  // namespace tst
