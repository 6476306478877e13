#include "hmx/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "hmx/rng.hpp"

namespace hmx {

namespace {

double dist2(const PointSet& pts, index_t a, index_t b) {
  const auto pa = pts.point(a);
  const auto pb = pts.point(b);
  double s = 0.0;
  for (std::size_t k = 0; k < pts.d; ++k) {
    const double diff = pa[k] - pb[k];
    s += diff * diff;
  }
  return s;
}

/// Recursive random-projection split; appends the final leaf ranges.
void rp_partition(const PointSet& pts, std::span<index_t> idx, index_t leaf_cap, Rng& rng,
                  std::vector<std::pair<std::size_t, std::size_t>>& leaves, std::size_t offset) {
  if (idx.size() <= leaf_cap) {
    leaves.emplace_back(offset, idx.size());
    return;
  }
  std::vector<double> dir(pts.d);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& v : dir) {
      v = rng.normal();
      norm += v * v;
    }
  } while (norm < 1e-24);
  norm = std::sqrt(norm);
  for (auto& v : dir) v /= norm;

  std::sort(idx.begin(), idx.end(), [&](index_t a, index_t b) {
    double pa = 0.0, pb = 0.0;
    const auto xa = pts.point(a), xb = pts.point(b);
    for (std::size_t k = 0; k < pts.d; ++k) {
      pa += xa[k] * dir[k];
      pb += xb[k] * dir[k];
    }
    return pa < pb || (pa == pb && a < b);
  });
  const std::size_t left = (idx.size() + 1) / 2;
  rp_partition(pts, idx.subspan(0, left), leaf_cap, rng, leaves, offset);
  rp_partition(pts, idx.subspan(left), leaf_cap, rng, leaves, offset + left);
}

}  // namespace

NeighborLists build_knn(const PointSet& points, const KnnParams& params) {
  const std::size_t n = points.n;
  const index_t k = params.k;
  if (k < 1 || k >= n) throw std::invalid_argument("build_knn: need 1 <= k < n");
  // leaf_cap floor guarantees at least k co-members in every rp-tree leaf
  index_t leaf_cap = params.leaf_cap == 0 ? 4 * k : params.leaf_cap;
  leaf_cap = std::max<index_t>(leaf_cap, 2 * k + 2);

  std::vector<std::vector<index_t>> cand(n);
  std::vector<index_t> order(n);
  for (index_t t = 0; t < params.num_trees; ++t) {
    std::iota(order.begin(), order.end(), index_t{0});
    Rng rng(mix64(params.seed ^ mix64(0x5eedULL + t)));
    std::vector<std::pair<std::size_t, std::size_t>> leaves;
    rp_partition(points, order, leaf_cap, rng, leaves, 0);
    for (const auto& [off, len] : leaves)
      for (std::size_t a = 0; a < len; ++a) {
        auto& ca = cand[order[off + a]];
        for (std::size_t b = 0; b < len; ++b)
          if (a != b) ca.push_back(order[off + b]);
      }
  }

  NeighborLists out;
  out.k = k;
  out.nbr.resize(n * k);
  std::vector<std::pair<double, index_t>> scored;
  for (std::size_t p = 0; p < n; ++p) {
    auto& c = cand[p];
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
    scored.clear();
    for (index_t q : c)
      if (q != p) scored.emplace_back(dist2(points, static_cast<index_t>(p), q), q);
    std::sort(scored.begin(), scored.end());
    std::size_t have = std::min<std::size_t>(k, scored.size());
    for (std::size_t i = 0; i < have; ++i)
      out.nbr[p * k + i] = scored[i].second;
    // shortfall cannot happen with the leaf_cap floor, but fill deterministically
    for (index_t q = 0; have < k; ++q) {
      if (q == p || std::binary_search(c.begin(), c.end(), q)) continue;
      out.nbr[p * k + have++] = q;
    }
  }
  return out;
}

std::vector<NodeCandidates> merge_node_neighbors(const ClusterTree& tree,
                                                 const NeighborLists& nbrs) {
  const std::size_t n = tree.num_points();
  std::vector<index_t> inv_perm(n);
  for (std::size_t i = 0; i < n; ++i) inv_perm[tree.perm[i]] = static_cast<index_t>(i);
  const auto is_member = [&](index_t node, index_t point) {
    const index_t pos = inv_perm[point];
    return pos >= tree.start[node] && pos < tree.end[node];
  };

  std::vector<NodeCandidates> out(tree.num_nodes);
  // children have larger ids: reverse sweep is bottom-up
  for (index_t node = tree.num_nodes; node-- > 0;) {
    std::vector<std::pair<index_t, index_t>> acc;  // (candidate, weight)
    if (tree.is_leaf(node)) {
      std::vector<index_t> raw;
      for (index_t p : tree.node_points(node)) {
        const auto row = nbrs.of(p);
        raw.insert(raw.end(), row.begin(), row.end());
      }
      std::sort(raw.begin(), raw.end());
      for (std::size_t i = 0; i < raw.size();) {
        std::size_t j = i;
        while (j < raw.size() && raw[j] == raw[i]) ++j;
        acc.emplace_back(raw[i], static_cast<index_t>(j - i));
        i = j;
      }
    } else {
      const auto& a = out[tree.lchild[node]];
      const auto& b = out[tree.rchild[node]];
      std::size_t i = 0, j = 0;
      while (i < a.idx.size() || j < b.idx.size()) {
        if (j == b.idx.size() || (i < a.idx.size() && a.idx[i] < b.idx[j])) {
          acc.emplace_back(a.idx[i], a.weight[i]);
          ++i;
        } else if (i == a.idx.size() || b.idx[j] < a.idx[i]) {
          acc.emplace_back(b.idx[j], b.weight[j]);
          ++j;
        } else {
          acc.emplace_back(a.idx[i], a.weight[i] + b.weight[j]);
          ++i;
          ++j;
        }
      }
    }
    auto& nc = out[node];
    nc.idx.reserve(acc.size());
    nc.weight.reserve(acc.size());
    for (const auto& [idx, w] : acc)
      if (!is_member(node, idx)) {
        nc.idx.push_back(idx);
        nc.weight.push_back(w);
      }
  }
  return out;
}

std::vector<index_t> importance_sample(const ClusterTree& tree, index_t node,
                                       const NodeCandidates& candidates, index_t budget,
                                       std::uint64_t seed, SampleMode mode) {
  if (budget < 1 && mode == SampleMode::Neighbor)
    throw std::invalid_argument("importance_sample: budget must be >= 1");
  const std::size_t n = tree.num_points();
  std::vector<index_t> inv_perm(n);
  for (std::size_t i = 0; i < n; ++i) inv_perm[tree.perm[i]] = static_cast<index_t>(i);
  const auto is_member = [&](index_t point) {
    const index_t pos = inv_perm[point];
    return pos >= tree.start[node] && pos < tree.end[node];
  };

  const std::size_t non_members = n - tree.node_size(node);
  if (mode == SampleMode::Exact) {
    std::vector<index_t> rows;
    rows.reserve(non_members);
    for (index_t p = 0; p < n; ++p)
      if (!is_member(p)) rows.push_back(p);
    return rows;
  }

  const std::size_t target = std::min<std::size_t>(budget, non_members);
  std::vector<std::size_t> order(candidates.idx.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (candidates.weight[a] != candidates.weight[b])
      return candidates.weight[a] > candidates.weight[b];
    return candidates.idx[a] < candidates.idx[b];
  });

  std::vector<index_t> rows;
  std::vector<bool> taken(n, false);
  for (std::size_t oi = 0; oi < order.size() && rows.size() < target; ++oi) {
    const index_t p = candidates.idx[order[oi]];
    if (is_member(p) || taken[p]) continue;
    taken[p] = true;
    rows.push_back(p);
  }
  if (rows.size() < target) {
    Rng rng(mix64(seed ^ mix64(0xba5eULL + node)));
    std::size_t attempts = 16 * n + 64;
    while (rows.size() < target && attempts-- > 0) {
      const auto p = static_cast<index_t>(rng.below(n));
      if (is_member(p) || taken[p]) continue;
      taken[p] = true;
      rows.push_back(p);
    }
    for (index_t p = 0; rows.size() < target; ++p)
      if (!is_member(p) && !taken[p]) {
        taken[p] = true;
        rows.push_back(p);
      }
  }
  return rows;
}

SampleInfo build_samples(const PointSet& points, const ClusterTree& tree, const KnnParams& knn,
                         index_t budget, SampleMode mode, std::uint64_t seed) {
  SampleInfo info;
  info.mode = mode;
  info.budget = budget;
  info.rows.resize(tree.num_nodes);
  if (mode == SampleMode::Exact) {
    for (index_t i = 0; i < tree.num_nodes; ++i)
      info.rows[i] = importance_sample(tree, i, {}, budget, seed, SampleMode::Exact);
    return info;
  }
  const NeighborLists nbrs = build_knn(points, knn);
  const auto cands = merge_node_neighbors(tree, nbrs);
  for (index_t i = 0; i < tree.num_nodes; ++i)
    info.rows[i] = importance_sample(tree, i, cands[i], budget, seed, mode);
  return info;
}

}  // namespace hmx
