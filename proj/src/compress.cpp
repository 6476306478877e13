#include "hmx/compress.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hmx {

namespace {

// Floor applied under tol to stop at numerical rank instead of grinding into
// noise; keeps the interpolation coefficients from a near-singular solve.
constexpr double kRankFloor = 1e-14;

}  // namespace

IdResult interpolative_decomposition(const DenseMatrix& m, double tol, index_t max_rank) {
  if (m.rows == 0 || m.cols == 0) throw std::invalid_argument("interpolative_decomposition: empty matrix");
  if (tol < 0.0) throw std::invalid_argument("interpolative_decomposition: tol must be >= 0");
  const std::size_t r = m.rows, c = m.cols;
  const std::size_t cap = std::min({r, c, static_cast<std::size_t>(max_rank)});

  DenseMatrix a = m;
  std::vector<index_t> piv(c);
  for (std::size_t j = 0; j < c; ++j) piv[j] = static_cast<index_t>(j);

  double total2 = 0.0;
  for (double v : a.data) total2 += v * v;
  const double tol_eff = std::max(tol, kRankFloor);
  const double stop2 = tol_eff * tol_eff * total2;

  std::size_t k = 0;
  std::vector<double> norms2(c, 0.0);
  for (; k < cap; ++k) {
    // exact trailing column norms every step; cheap next to the reflector
    // updates and immune to downdating cancellation
    double remaining2 = 0.0;
    std::size_t pivot = k;
    double pivot2 = -1.0;
    for (std::size_t j = k; j < c; ++j) {
      double s = 0.0;
      const double* col = a.col(j);
      for (std::size_t i = k; i < r; ++i) s += col[i] * col[i];
      norms2[j] = s;
      remaining2 += s;
      if (s > pivot2) {
        pivot2 = s;
        pivot = j;
      }
    }
    if (remaining2 <= stop2 || pivot2 <= 0.0) break;

    if (pivot != k) {
      for (std::size_t i = 0; i < r; ++i) std::swap(a(i, k), a(i, pivot));
      std::swap(piv[k], piv[pivot]);
    }

    // Householder reflector zeroing column k below the diagonal
    double* ck = a.col(k);
    double xnorm = std::sqrt(norms2[pivot]);
    if (ck[k] > 0) xnorm = -xnorm;
    std::vector<double> v(r - k);
    v[0] = ck[k] - xnorm;
    for (std::size_t i = k + 1; i < r; ++i) v[i - k] = ck[i];
    double v2 = 0.0;
    for (double x : v) v2 += x * x;
    ck[k] = xnorm;
    for (std::size_t i = k + 1; i < r; ++i) ck[i] = 0.0;
    if (v2 > 0.0) {
      for (std::size_t j = k + 1; j < c; ++j) {
        double* cj = a.col(j);
        double dot = 0.0;
        for (std::size_t i = k; i < r; ++i) dot += v[i - k] * cj[i];
        const double f = 2.0 * dot / v2;
        for (std::size_t i = k; i < r; ++i) cj[i] -= f * v[i - k];
      }
    }
  }

  IdResult out;
  out.srank = static_cast<index_t>(k);
  out.skeleton.assign(piv.begin(), piv.begin() + static_cast<std::ptrdiff_t>(k));
  out.v = DenseMatrix(c, k);
  for (std::size_t j = 0; j < k; ++j) out.v(piv[j], j) = 1.0;
  // T = R11^{-1} R12, one triangular solve per non-skeleton column
  for (std::size_t t = k; t < c; ++t) {
    std::vector<double> x(k);
    for (std::size_t i = k; i-- > 0;) {
      double s = a(i, t);
      for (std::size_t j = i + 1; j < k; ++j) s -= a(i, j) * x[j];
      x[i] = s / a(i, i);
    }
    for (std::size_t j = 0; j < k; ++j) out.v(piv[t], j) = x[j];
  }
  return out;
}

CompressedMatrix compress(const HTree& htree, const Kernel& kernel, const PointSet& points,
                          const SampleInfo& samples, double bacc, index_t max_rank) {
  kernel.validate();
  if (bacc < 0.0) throw std::invalid_argument("compress: bacc must be >= 0");
  const auto& tree = htree.tree;
  if (samples.rows.size() != tree.num_nodes)
    throw std::invalid_argument("compress: sampling info does not match tree");

  CompressedMatrix cm;
  cm.htree = htree;
  cm.participating = participation(htree);
  cm.bases.resize(tree.num_nodes);
  cm.bacc = bacc;
  cm.max_rank = max_rank;

  // nodes grouped by depth, compressed deepest level first (children before parents)
  std::vector<std::vector<index_t>> by_level(tree.height + 1);
  for (index_t i = 0; i < tree.num_nodes; ++i)
    if (cm.participating[i]) by_level[tree.level[i]].push_back(i);

  for (auto lvl = by_level.size(); lvl-- > 0;) {
    for (index_t node : by_level[lvl]) {
      const auto& sample_rows = samples.rows[node];
      if (sample_rows.empty())
        throw std::runtime_error("compress: participating node " + std::to_string(node) +
                                 " has no sample rows (sampling contract violation)");
      NodeBasis& basis = cm.bases[node];
      std::vector<index_t> cols;
      if (tree.is_leaf(node)) {
        const auto members = tree.node_points(node);
        cols.assign(members.begin(), members.end());
      } else {
        const auto& ls = cm.bases[tree.lchild[node]].skeleton;
        const auto& rs = cm.bases[tree.rchild[node]].skeleton;
        cols.reserve(ls.size() + rs.size());
        cols.insert(cols.end(), ls.begin(), ls.end());
        cols.insert(cols.end(), rs.begin(), rs.end());
      }
      if (cols.empty()) {
        // both children collapsed to srank 0; nothing to project
        basis = NodeBasis{};
        continue;
      }
      const DenseMatrix block = dense_block(kernel, points, sample_rows, cols);
      IdResult id = interpolative_decomposition(block, bacc, max_rank);
      basis.srank = id.srank;
      basis.v = std::move(id.v);
      basis.skeleton.reserve(id.srank);
      for (index_t local : id.skeleton) basis.skeleton.push_back(cols[local]);
    }
  }

  for (index_t i = 0; i < tree.num_nodes; ++i)
    for (index_t j : htree.far[i])
      cm.far_blocks.push_back(
          {i, j, dense_block(kernel, points, cm.bases[i].skeleton, cm.bases[j].skeleton)});
  for (index_t i = 0; i < tree.num_nodes; ++i)
    for (index_t j : htree.near[i])
      cm.near_blocks.push_back(
          {i, j, dense_block(kernel, points, tree.node_points(i), tree.node_points(j))});
  return cm;
}

std::vector<index_t> srank_vector(const CompressedMatrix& cm) {
  std::vector<index_t> sr(cm.htree.tree.num_nodes, 0);
  for (index_t i = 0; i < cm.htree.tree.num_nodes; ++i) sr[i] = cm.bases[i].srank;
  return sr;
}

}  // namespace hmx
