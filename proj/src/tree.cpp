#include "hmx/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "hmx/rng.hpp"

namespace hmx {

std::vector<index_t> ClusterTree::leaves() const {
  std::vector<index_t> out;
  for (index_t i = 0; i < num_nodes; ++i)
    if (is_leaf(i)) out.push_back(i);
  return out;
}

std::vector<index_t> ClusterTree::subtree_heights() const {
  std::vector<index_t> h(num_nodes, 0);
  // children have larger ids, so a reverse sweep sees children first
  for (index_t i = num_nodes; i-- > 0;)
    if (!is_leaf(i)) h[i] = 1 + std::max(h[lchild[i]], h[rchild[i]]);
  return h;
}

void ClusterTree::validate() const {
  if (num_nodes == 0 || start[0] != 0 || end[0] != perm.size())
    throw std::logic_error("ClusterTree: root must cover [0, n)");
  std::vector<bool> seen(perm.size(), false);
  for (index_t p : perm) {
    if (p >= perm.size() || seen[p]) throw std::logic_error("ClusterTree: perm not a bijection");
    seen[p] = true;
  }
  for (index_t i = 0; i < num_nodes; ++i) {
    const bool leaf = is_leaf(i);
    if (leaf != (node_size(i) <= leaf_size))
      throw std::logic_error("ClusterTree: leaf predicate inconsistent with leaf size");
    if (!leaf) {
      const index_t l = lchild[i], r = rchild[i];
      if (l <= i || r <= i) throw std::logic_error("ClusterTree: child id not larger than parent");
      if (start[l] != start[i] || end[l] != start[r] || end[r] != end[i])
        throw std::logic_error("ClusterTree: children do not partition parent range");
      if (parent[l] != i || parent[r] != i) throw std::logic_error("ClusterTree: bad parent link");
    }
  }
}

namespace {

std::size_t max_spread_dim(const PointSet& points, std::span<const index_t> idx) {
  std::size_t best = 0;
  double best_spread = -1.0;
  for (std::size_t dim = 0; dim < points.d; ++dim) {
    double lo = points.coords[idx[0] * points.d + dim];
    double hi = lo;
    for (index_t p : idx) {
      const double c = points.coords[p * points.d + dim];
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    }
    if (hi - lo > best_spread) {
      best_spread = hi - lo;
      best = dim;
    }
  }
  return best;
}

/// Median split of idx by key(p); ties broken by point index for determinism.
template <class KeyFn>
std::size_t median_split(std::span<index_t> idx, KeyFn key) {
  std::sort(idx.begin(), idx.end(), [&](index_t a, index_t b) {
    const double ka = key(a), kb = key(b);
    return ka < kb || (ka == kb && a < b);
  });
  return (idx.size() + 1) / 2;
}

}  // namespace

std::size_t kd_split(const PointSet& points, std::span<index_t> idx) {
  if (idx.size() < 2) throw std::invalid_argument("kd_split: need at least 2 points");
  const std::size_t dim = max_spread_dim(points, idx);
  return median_split(idx, [&](index_t p) { return points.coords[p * points.d + dim]; });
}

std::size_t two_means_split(const PointSet& points, std::span<index_t> idx, std::uint64_t seed) {
  if (idx.size() < 2) throw std::invalid_argument("two_means_split: need at least 2 points");
  const std::size_t d = points.d;
  const std::size_t len = idx.size();

  const auto dist2 = [&](std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = a[k] - b[k];
      s += diff * diff;
    }
    return s;
  };

  // Initialize centroids with the farthest pair among 64 random candidates.
  Rng rng(seed);
  std::vector<double> c0(points.point(idx[0]).begin(), points.point(idx[0]).end());
  std::vector<double> c1(points.point(idx[len - 1]).begin(), points.point(idx[len - 1]).end());
  double best = dist2(c0, c1);
  for (int t = 0; t < 64; ++t) {
    const index_t a = idx[rng.below(len)];
    const index_t b = idx[rng.below(len)];
    const double dd = dist2(points.point(a), points.point(b));
    if (dd > best) {
      best = dd;
      c0.assign(points.point(a).begin(), points.point(a).end());
      c1.assign(points.point(b).begin(), points.point(b).end());
    }
  }

  std::vector<std::uint8_t> side(len, 0);
  std::size_t n0 = 0, n1 = 0;
  for (int iter = 0; iter < 16; ++iter) {
    bool changed = false;
    n0 = n1 = 0;
    for (std::size_t i = 0; i < len; ++i) {
      const auto p = points.point(idx[i]);
      const std::uint8_t s = dist2(p, c1) < dist2(p, c0) ? 1 : 0;
      if (s != side[i]) changed = true;
      side[i] = s;
      (s ? n1 : n0)++;
    }
    if (n0 == 0 || n1 == 0) break;
    std::fill(c0.begin(), c0.end(), 0.0);
    std::fill(c1.begin(), c1.end(), 0.0);
    for (std::size_t i = 0; i < len; ++i) {
      auto& c = side[i] ? c1 : c0;
      const auto p = points.point(idx[i]);
      for (std::size_t k = 0; k < d; ++k) c[k] += p[k];
    }
    for (std::size_t k = 0; k < d; ++k) {
      c0[k] /= static_cast<double>(n0);
      c1[k] /= static_cast<double>(n1);
    }
    if (!changed) break;
  }

  const std::size_t smaller = std::min(n0, n1);
  if (smaller == 0 || smaller * 10 < len) {
    // degenerate or too imbalanced: median split along the centroid direction
    std::vector<double> dir(d);
    double norm = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      dir[k] = c1[k] - c0[k];
      norm += dir[k] * dir[k];
    }
    if (norm == 0.0) {
      // identical centroids (e.g. all-duplicate points): split by index order
      std::sort(idx.begin(), idx.end());
      return (len + 1) / 2;
    }
    return median_split(idx, [&](index_t p) {
      const auto pt = points.point(p);
      double proj = 0.0;
      for (std::size_t k = 0; k < d; ++k) proj += pt[k] * dir[k];
      return proj;
    });
  }

  // stable partition keeps relative order deterministic
  std::vector<index_t> left, right;
  left.reserve(n0);
  right.reserve(n1);
  for (std::size_t i = 0; i < len; ++i) (side[i] ? right : left).push_back(idx[i]);
  std::copy(left.begin(), left.end(), idx.begin());
  std::copy(right.begin(), right.end(), idx.begin() + static_cast<std::ptrdiff_t>(n0));
  return n0;
}

ClusterTree build_cluster_tree(const PointSet& points, index_t leaf_size, SplitMethod method,
                               std::uint64_t seed) {
  points.validate();
  if (leaf_size < 1) throw std::invalid_argument("build_cluster_tree: leaf size must be >= 1");
  if (method == SplitMethod::Auto)
    method = points.d <= 3 ? SplitMethod::KdTree : SplitMethod::TwoMeans;

  ClusterTree t;
  t.leaf_size = leaf_size;
  t.perm.resize(points.n);
  std::iota(t.perm.begin(), t.perm.end(), index_t{0});

  struct Pending {
    index_t node, begin, finish;
  };
  std::vector<Pending> queue;
  const auto add_node = [&](index_t par, index_t b, index_t e, index_t lvl) {
    const index_t id = t.num_nodes++;
    t.parent.push_back(par);
    t.lchild.push_back(kNoNode);
    t.rchild.push_back(kNoNode);
    t.start.push_back(b);
    t.end.push_back(e);
    t.level.push_back(lvl);
    t.height = std::max(t.height, lvl);
    if (e - b > leaf_size) queue.push_back({id, b, e});
    return id;
  };

  add_node(kNoNode, 0, static_cast<index_t>(points.n), 0);
  // process in id order: BFS ids, deterministic regardless of worker count
  for (std::size_t qi = 0; qi < queue.size(); ++qi) {
    const auto [node, b, e] = queue[qi];
    std::span<index_t> range(t.perm.data() + b, e - b);
    const std::size_t left =
        method == SplitMethod::KdTree
            ? kd_split(points, range)
            : two_means_split(points, range, mix64(seed ^ mix64(node + 1)));
    const index_t mid = b + static_cast<index_t>(left);
    t.lchild[node] = add_node(node, b, mid, t.level[node] + 1);
    t.rchild[node] = add_node(node, mid, e, t.level[node] + 1);
  }
  return t;
}

}  // namespace hmx
