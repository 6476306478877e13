#include "hmx/interaction.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hmx {

std::size_t HTree::near_pair_count() const {
  std::size_t c = 0;
  for (const auto& l : near) c += l.size();
  return c;
}

std::size_t HTree::far_pair_count() const {
  std::size_t c = 0;
  for (const auto& l : far) c += l.size();
  return c;
}

NodeGeometry compute_geometry(const PointSet& points, const ClusterTree& tree) {
  NodeGeometry g;
  g.d = points.d;
  g.centroid.assign(static_cast<std::size_t>(tree.num_nodes) * points.d, 0.0);
  g.radius.assign(tree.num_nodes, 0.0);
  for (index_t i = 0; i < tree.num_nodes; ++i) {
    double* c = g.centroid.data() + static_cast<std::size_t>(i) * points.d;
    const auto members = tree.node_points(i);
    for (index_t p : members) {
      const auto pt = points.point(p);
      for (std::size_t k = 0; k < points.d; ++k) c[k] += pt[k];
    }
    for (std::size_t k = 0; k < points.d; ++k) c[k] /= static_cast<double>(members.size());
    double r2 = 0.0;
    for (index_t p : members) {
      const auto pt = points.point(p);
      double s = 0.0;
      for (std::size_t k = 0; k < points.d; ++k) {
        const double diff = pt[k] - c[k];
        s += diff * diff;
      }
      r2 = std::max(r2, s);
    }
    g.radius[i] = std::sqrt(r2);
  }
  return g;
}

bool is_admissible(const NodeGeometry& geom, index_t i, index_t j, double tau) {
  const auto ci = geom.node_centroid(i);
  const auto cj = geom.node_centroid(j);
  double d2 = 0.0;
  for (std::size_t k = 0; k < geom.d; ++k) {
    const double diff = ci[k] - cj[k];
    d2 += diff * diff;
  }
  return tau * std::sqrt(d2) > 2.0 * (geom.radius[i] + geom.radius[j]);
}

namespace {

struct DualTraversal {
  const ClusterTree& tree;
  const NodeGeometry& geom;
  double tau;
  HTree& out;

  void visit(index_t i, index_t j) {
    if (i == j) {
      if (tree.is_leaf(i)) {
        out.near[i].push_back(i);
      } else {
        const index_t l = tree.lchild[i], r = tree.rchild[i];
        visit(l, l);
        visit(l, r);
        visit(r, l);
        visit(r, r);
      }
      return;
    }
    if (is_admissible(geom, i, j, tau)) {
      out.far[i].push_back(j);
      return;
    }
    const bool li = tree.is_leaf(i), lj = tree.is_leaf(j);
    if (li && lj) {
      out.near[i].push_back(j);
      return;
    }
    // split the node with the larger radius; ties by point count, then lower id
    bool split_i;
    if (li) {
      split_i = false;
    } else if (lj) {
      split_i = true;
    } else if (geom.radius[i] != geom.radius[j]) {
      split_i = geom.radius[i] > geom.radius[j];
    } else if (tree.node_size(i) != tree.node_size(j)) {
      split_i = tree.node_size(i) > tree.node_size(j);
    } else {
      split_i = i < j;
    }
    if (split_i) {
      visit(tree.lchild[i], j);
      visit(tree.rchild[i], j);
    } else {
      visit(i, tree.lchild[j]);
      visit(i, tree.rchild[j]);
    }
  }
};

}  // namespace

HTree compute_interactions(const PointSet& points, const ClusterTree& tree, InteractionMode mode,
                           double tau) {
  if (mode == InteractionMode::Tau && tau < 0.0)
    throw std::invalid_argument("compute_interactions: tau must be >= 0");
  HTree ht;
  ht.tree = tree;
  ht.mode = mode;
  ht.tau = mode == InteractionMode::Tau ? tau : 0.0;
  ht.near.assign(tree.num_nodes, {});
  ht.far.assign(tree.num_nodes, {});

  if (mode == InteractionMode::Hss) {
    for (index_t i = 0; i < tree.num_nodes; ++i) {
      if (tree.is_leaf(i)) {
        ht.near[i].push_back(i);
      } else {
        ht.far[tree.lchild[i]].push_back(tree.rchild[i]);
        ht.far[tree.rchild[i]].push_back(tree.lchild[i]);
      }
    }
  } else {
    const NodeGeometry geom = compute_geometry(points, tree);
    DualTraversal dt{tree, geom, tau, ht};
    dt.visit(0, 0);
  }
  for (auto& l : ht.near) std::sort(l.begin(), l.end());
  for (auto& l : ht.far) std::sort(l.begin(), l.end());
  return ht;
}

std::vector<bool> participation(const HTree& ht) {
  const auto& t = ht.tree;
  std::vector<bool> part(t.num_nodes, false);
  for (index_t i = 0; i < t.num_nodes; ++i)
    if (!ht.far[i].empty()) part[i] = true;
  // close downward: every descendant of a far node feeds the upward pass
  for (index_t i = 0; i < t.num_nodes; ++i)
    if (part[i] && !t.is_leaf(i)) {
      part[t.lchild[i]] = true;
      part[t.rchild[i]] = true;
    }
  return part;
}

}  // namespace hmx
