#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "helpers.hpp"

using namespace tst;

namespace {

std::vector<index_t> brute_knn(const PointSet& pts, index_t p, index_t k) {
  std::vector<std::pair<double, index_t>> scored;
  for (index_t q = 0; q < pts.n; ++q) {
    if (q == p) continue;
    double s = 0.0;
    for (std::size_t i = 0; i < pts.d; ++i) {
      const double diff = pts.point(p)[i] - pts.point(q)[i];
      s += diff * diff;
    }
    scored.emplace_back(s, q);
  }
  std::sort(scored.begin(), scored.end());
  std::vector<index_t> out;
  for (index_t i = 0; i < k; ++i) out.push_back(scored[i].second);
  return out;
}

}  // namespace

TEST_CASE("approximate k-NN recall beats 60% against brute force") {
  const PointSet pts = synth_points(SynthShape::UniformRandom, 512, 2, 13);
  KnnParams params;
  params.k = 8;
  params.seed = 13;
  const NeighborLists nbrs = build_knn(pts, params);
  std::size_t hits = 0, total = 0;
  for (index_t p = 0; p < pts.n; ++p) {
    const auto exact = brute_knn(pts, p, params.k);
    const std::set<index_t> approx(nbrs.of(p).begin(), nbrs.of(p).end());
    CHECK(approx.size() == params.k);
    CHECK(approx.count(p) == 0);
    for (index_t e : exact) hits += approx.count(e);
    total += params.k;
  }
  CHECK(static_cast<double>(hits) / static_cast<double>(total) >= 0.6);
}

TEST_CASE("k-NN is deterministic and validates its arguments") {
  const PointSet pts = synth_points(SynthShape::UniformRandom, 100, 3, 5);
  KnnParams params;
  params.k = 4;
  params.seed = 99;
  CHECK(build_knn(pts, params).nbr == build_knn(pts, params).nbr);
  params.k = 0;
  CHECK_THROWS_AS(build_knn(pts, params), std::invalid_argument);
  params.k = 100;
  CHECK_THROWS_AS(build_knn(pts, params), std::invalid_argument);
}

TEST_CASE("node candidate weights count member votes") {
  const PointSet pts = synth_points(SynthShape::UniformRandom, 64, 2, 3);
  const ClusterTree tree = build_cluster_tree(pts, 8, SplitMethod::KdTree, 3);
  KnnParams params;
  params.k = 5;
  params.seed = 3;
  const NeighborLists nbrs = build_knn(pts, params);
  const auto cands = merge_node_neighbors(tree, nbrs);

  for (index_t node = 0; node < tree.num_nodes; ++node) {
    const auto members = tree.node_points(node);
    const std::set<index_t> member_set(members.begin(), members.end());
    // brute-force recount
    std::map<index_t, index_t> expect;
    for (index_t m : members)
      for (index_t q : nbrs.of(m))
        if (!member_set.count(q)) ++expect[q];
    REQUIRE(cands[node].idx.size() == expect.size());
    for (std::size_t i = 0; i < cands[node].idx.size(); ++i) {
      CHECK(expect.at(cands[node].idx[i]) == cands[node].weight[i]);
      if (i > 0) CHECK(cands[node].idx[i - 1] < cands[node].idx[i]);
    }
  }
}

TEST_CASE("importance sampling returns non-members up to the budget") {
  const PointSet pts = synth_points(SynthShape::UniformRandom, 200, 2, 17);
  const ClusterTree tree = build_cluster_tree(pts, 16, SplitMethod::KdTree, 17);
  KnnParams params;
  params.k = 6;
  params.seed = 17;
  const auto cands = merge_node_neighbors(tree, build_knn(pts, params));

  for (index_t node = 0; node < tree.num_nodes; ++node) {
    const auto members = tree.node_points(node);
    const std::set<index_t> member_set(members.begin(), members.end());
    const index_t budget = 24;
    const auto rows = importance_sample(tree, node, cands[node], budget, 17, SampleMode::Neighbor);
    const std::size_t expect = std::min<std::size_t>(budget, pts.n - members.size());
    CHECK(rows.size() == expect);
    std::set<index_t> uniq(rows.begin(), rows.end());
    CHECK(uniq.size() == rows.size());
    for (index_t r : rows) CHECK(member_set.count(r) == 0);
  }
}

TEST_CASE("exact mode lists every non-member in ascending order") {
  const PointSet pts = synth_points(SynthShape::UniformRandom, 50, 2, 2);
  const ClusterTree tree = build_cluster_tree(pts, 8, SplitMethod::KdTree, 2);
  const SampleInfo si = build_samples(pts, tree, {}, 10, SampleMode::Exact, 2);
  for (index_t node = 0; node < tree.num_nodes; ++node) {
    const auto members = tree.node_points(node);
    const std::set<index_t> member_set(members.begin(), members.end());
    CHECK(si.rows[node].size() == pts.n - members.size());
    CHECK(std::is_sorted(si.rows[node].begin(), si.rows[node].end()));
    for (index_t r : si.rows[node]) CHECK(member_set.count(r) == 0);
  }
}

TEST_CASE("high-weight candidates are taken before low-weight ones") {
  const ClusterTree tree = worked_tree();
  NodeCandidates cands;
  // node 3 owns points 0,1; candidates outside with synthetic weights
  cands.idx = {2, 5, 7, 9};
  cands.weight = {1, 9, 9, 2};
  const auto rows = importance_sample(tree, 3, cands, 3, 0, SampleMode::Neighbor);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == 5);  // weight 9, lower index wins the tie
  CHECK(rows[1] == 7);
  CHECK(rows[2] == 9);
}

TEST_CASE("sampling pipeline is deterministic") {
  const PointSet pts = synth_points(SynthShape::UniformRandom, 300, 4, 23);
  const ClusterTree tree = build_cluster_tree(pts, 32, SplitMethod::TwoMeans, 23);
  KnnParams knn;
  knn.k = 8;
  knn.seed = 23;
  const SampleInfo a = build_samples(pts, tree, knn, 40, SampleMode::Neighbor, 23);
  const SampleInfo b = build_samples(pts, tree, knn, 40, SampleMode::Neighbor, 23);
  CHECK(a.rows == b.rows);
}
