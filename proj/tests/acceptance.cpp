// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
// the process exits nonzero when any criterion fails.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "helpers.hpp"

using namespace tst;
namespace fs = std::filesystem;

namespace {

using clock_t_ = std::chrono::steady_clock;

double seconds_since(clock_t_::time_point t0) {
  return std::chrono::duration<double>(clock_t_::now() - t0).count();
}

int g_failures = 0;

void report(int criterion, bool ok, const std::string& what) {
  std::printf("criterion %d: %s - %s\n", criterion, ok ? "PASS" : "FAIL", what.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

fs::path work_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "hmx_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::uint8_t> file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw io_error("cannot read " + path.string());
  std::vector<std::uint8_t> b(static_cast<std::size_t>(in.tellg()));
  in.seekg(0);
  in.read(reinterpret_cast<char*>(b.data()), static_cast<std::streamsize>(b.size()));
  return b;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::vector<EvalPlan> all_plans(index_t p) {
  std::vector<EvalPlan> plans;
  for (bool blk : {false, true})
    for (bool cl : {false, true})
      for (bool peel : {false, true}) {
        EvalPlan plan;
        plan.block_lowering_near = blk;
        plan.block_lowering_far = blk;
        plan.coarsen_lowering = cl;
        plan.peel_top = peel;
        plan.p = p;
        plans.push_back(plan);
      }
  return plans;
}

// ---------------------------------------------------------------- criterion 1

void criterion_1() {
  const auto t0 = clock_t_::now();
  InstanceSpec spec;
  spec.n = 512;
  spec.d = 2;
  spec.kernel = Kernel::gaussian(5.0);
  spec.sample_mode = SampleMode::Exact;
  spec.bacc = 0.0;
  spec.leaf = 64;
  spec.max_rank = 64;
  spec.mode = InteractionMode::Hss;
  const Instance in = make_instance(spec);
  const DenseMatrix w = random_matrix(spec.n, 8, 1);
  const double eps = relative_error(in.cds, in.kernel, in.pts, w, ErrorMode::Dense);
  const double secs = seconds_since(t0);
  report(1, eps <= 1e-10 && secs < 10.0,
         "exactness oracle: eps_f=" + fmt(eps) + " (<=1e-10), " + fmt(secs) + "s (<10s)");
}

// ---------------------------------------------------------------- criterion 2

void criterion_2() {
  const auto t0 = clock_t_::now();
  InstanceSpec spec;
  spec.n = 2048;
  spec.leaf = 256;
  spec.max_rank = 256;
  spec.knn_k = 32;
  spec.budget = 512;  // 2 * max_rank
  spec.sample_mode = SampleMode::Neighbor;
  const PointSet pts = synth_points(spec.shape, spec.n, spec.d, spec.seed);
  const DenseMatrix w = random_matrix(spec.n, 4, 2);

  std::vector<double> eps;
  bool bounds_ok = true;
  for (double bacc : {1e-2, 1e-3, 1e-5}) {
    spec.bacc = bacc;
    const Instance in = make_instance(spec);
    const double e = relative_error(in.cds, in.kernel, in.pts, w, ErrorMode::Dense);
    eps.push_back(e);
    bounds_ok = bounds_ok && e <= 100.0 * bacc;
  }
  const double secs = seconds_since(t0);
  const bool ordered = eps[2] < eps[0];
  report(2, bounds_ok && ordered && secs < 60.0,
         "accuracy tracking: eps_f={" + fmt(eps[0]) + "," + fmt(eps[1]) + "," + fmt(eps[2]) +
             "} vs bacc {1e-2,1e-3,1e-5}, " + fmt(secs) + "s (<60s)");
}

// ---------------------------------------------------------------- criterion 3

void criterion_3() {
  Rng rng(33);
  double worst = 0.0;
  bool ok = true;
  for (int inst = 0; inst < 50 && ok; ++inst) {
    InstanceSpec spec;
    spec.d = std::vector<std::size_t>{2, 8, 32}[inst % 3];
    const std::size_t n_max = spec.d == 32 ? 2048 : 4096;
    spec.n = 256 + rng.below(n_max - 255);
    spec.leaf = 64;
    spec.max_rank = 32;
    spec.budget = 64;
    spec.knn_k = 8;
    spec.bacc = 1e-3;
    spec.seed = 100 + inst;
    if (inst % 2) {
      spec.mode = InteractionMode::Tau;
      spec.tau = 0.65;
    }
    const Instance in = make_instance(spec);
    const DenseMatrix w = random_matrix(spec.n, 3, spec.seed);
    const DenseMatrix ref = evaluate_reference(in.cm, w);
    for (const auto& plan : all_plans(4)) {
      const double err = rel_frob(evaluate(in.cds, plan, w), ref);
      worst = std::max(worst, err);
      if (err > 1e-13) ok = false;
    }
  }
  report(3, ok, "schedule equivalence over 50 instances x 8 plans: worst rel err " + fmt(worst) +
                    " (<=1e-13)");
}

// ---------------------------------------------------------------- criterion 4

bool blockset_invariants(const HTree& ht, const BlockSet& bs, BlockKind kind) {
  const auto& lists = kind == BlockKind::Near ? ht.near : ht.far;
  std::multiset<InteractionPair> expect;
  for (index_t i = 0; i < ht.tree.num_nodes; ++i)
    for (index_t j : lists[i]) expect.insert({i, j});
  std::multiset<InteractionPair> got;
  std::set<index_t> row_groups_seen;
  for (const auto& g : bs.groups) {
    if (!row_groups_seen.insert(g.row_group).second) return false;  // conflict freedom
    std::set<index_t> col_cells;
    for (const auto& b : g.blocks) {
      if (b.pairs.empty()) return false;
      const index_t cell_j = (b.pairs.front().second - 1) / bs.blocksize;
      if (!col_cells.insert(cell_j).second) return false;
      for (const auto& [i, j] : b.pairs) {
        if ((i - 1) / bs.blocksize != g.row_group) return false;
        if ((j - 1) / bs.blocksize != cell_j) return false;
        got.insert({i, j});
      }
    }
  }
  return got == expect;  // exact partition
}

void criterion_4() {
  bool ok = true;

  // the worked example: far groups {(1,2),(2,1)} and {(5,6),(6,5)}, all four
  // near pairs of leaves 9,10 in a single block
  const HTree ht = worked_htree();
  const BlockSet fbs = blocking(ht, 4, BlockKind::Far);
  ok = ok && fbs.groups.size() == 2;
  ok = ok && fbs.groups[0].blocks.size() == 1 &&
       fbs.groups[0].blocks[0].pairs == std::vector<InteractionPair>{{1, 2}, {2, 1}};
  ok = ok && fbs.groups[1].blocks.size() == 1 &&
       fbs.groups[1].blocks[0].pairs == std::vector<InteractionPair>{{5, 6}, {6, 5}};
  const BlockSet nbs = blocking(ht, 2, BlockKind::Near);
  ok = ok && nbs.groups.size() == 1 && nbs.groups[0].blocks.size() == 1 &&
       nbs.groups[0].blocks[0].pairs ==
           std::vector<InteractionPair>{{9, 9}, {9, 10}, {10, 9}, {10, 10}};

  // invariants on random interaction lists
  Rng rng(44);
  for (int iter = 0; iter < 1000 && ok; ++iter) {
    const std::size_t n = 20 + rng.below(180);
    const PointSet pts = synth_points(SynthShape::UniformRandom, n, 2, 1000 + iter);
    HTree rt;
    rt.tree = build_cluster_tree(pts, 4, SplitMethod::KdTree, iter);
    rt.near.assign(rt.tree.num_nodes, {});
    rt.far.assign(rt.tree.num_nodes, {});
    const std::size_t pairs = 1 + rng.below(60);
    for (std::size_t k = 0; k < pairs; ++k) {
      const auto i = static_cast<index_t>(1 + rng.below(rt.tree.num_nodes - 1));
      const auto j = static_cast<index_t>(1 + rng.below(rt.tree.num_nodes - 1));
      (rng.below(2) ? rt.near : rt.far)[i].push_back(j);
    }
    for (index_t bs : {index_t{1}, index_t{2}, index_t{3}, index_t{5}}) {
      ok = ok && blockset_invariants(rt, blocking(rt, bs, BlockKind::Near), BlockKind::Near);
      ok = ok && blockset_invariants(rt, blocking(rt, bs, BlockKind::Far), BlockKind::Far);
    }
  }
  report(4, ok, "blocking fidelity on the worked example and 1000 random interaction lists");
}

// ---------------------------------------------------------------- criterion 5

bool coarsenset_invariants(const ClusterTree& tree, const std::vector<bool>& part,
                           const CoarsenSet& cs) {
  std::set<index_t> covered;
  for (const auto& lvl : cs.levels)
    for (const auto& st : lvl.subtrees) {
      std::set<index_t> seen;
      for (index_t node : st.nodes) {
        if (!part[node]) return false;
        if (!covered.insert(node).second) return false;  // disjointness
        // schedulability: a child listed in the same sub-tree precedes its
        // parent, so sequential sub-tree execution satisfies dependencies
        if (!tree.is_leaf(node))
          for (index_t c : {tree.lchild[node], tree.rchild[node]})
            if (std::find(st.nodes.begin(), st.nodes.end(), c) != st.nodes.end() &&
                !seen.count(c))
              return false;
        seen.insert(node);
      }
    }
  for (index_t i = 0; i < tree.num_nodes; ++i)
    if (part[i] != (covered.count(i) > 0)) return false;  // coverage
  return true;
}

void criterion_5() {
  bool ok = true;

  // worked example, agg = 2: level-0 sub-trees rooted at 1, 5, 6; level 1 = {2}
  const ClusterTree tree = worked_tree();
  std::vector<bool> part(11, true);
  part[0] = false;
  const auto level0 = disjoint_subtrees(tree, part, 0, 2);
  ok = ok && level0.size() == 3;
  ok = ok && level0[0].nodes == std::vector<index_t>{3, 4, 1};
  ok = ok && level0[1].nodes == std::vector<index_t>{7, 8, 5};
  ok = ok && level0[2].nodes == std::vector<index_t>{9, 10, 6};
  const auto level1 = disjoint_subtrees(tree, part, 2, 4);
  ok = ok && level1.size() == 1 && level1[0].nodes == std::vector<index_t>{2};
  const std::vector<index_t> ones(11, 1);
  const CoarsenSet cs = coarsening(tree, ones, part, 3, 2);
  ok = ok && cs.levels.size() == 2;
  ok = ok && cs.levels[1].subtrees.size() == 1 &&
       cs.levels[1].subtrees[0].nodes == std::vector<index_t>{2};
  ok = ok && coarsenset_invariants(tree, part, cs);

  // random trees: schedulability + coverage
  Rng rng(55);
  for (int iter = 0; iter < 200 && ok; ++iter) {
    const std::size_t n = 30 + rng.below(400);
    const PointSet pts = synth_points(SynthShape::UniformRandom, n, 2, 2000 + iter);
    const ClusterTree t = build_cluster_tree(pts, 4, SplitMethod::KdTree, iter);
    std::vector<index_t> sranks(t.num_nodes);
    std::vector<bool> p(t.num_nodes, true);
    p[0] = false;
    for (auto& s : sranks) s = static_cast<index_t>(rng.below(9));
    const CoarsenSet rcs = coarsening(t, sranks, p, static_cast<index_t>(1 + rng.below(6)),
                                      static_cast<index_t>(1 + rng.below(3)));
    ok = ok && coarsenset_invariants(t, p, rcs);
  }

  // FFD balance: max load <= 2x mean when item count >= 2 * bin count
  for (int iter = 0; iter < 200 && ok; ++iter) {
    const auto bins = static_cast<index_t>(2 + rng.below(7));
    const std::size_t items = 2 * bins + rng.below(40);
    std::vector<double> costs(items);
    double total = 0.0;
    for (auto& c : costs) total += c = 1.0 + 9.0 * rng.uniform();
    const auto assign = bin_pack(costs, bins);
    std::vector<double> load(bins, 0.0);
    for (std::size_t i = 0; i < items; ++i) load[assign[i]] += costs[i];
    const double mean = total / bins;
    for (double l : load) ok = ok && l <= 2.0 * mean;
  }
  report(5, ok, "coarsening fidelity on the worked example, 200 random trees, FFD balance");
}

// ---------------------------------------------------------------- criterion 6

void criterion_6() {
  const auto dir = work_dir("roundtrip");
  Rng rng(66);
  bool ok = true;
  for (int inst = 0; inst < 100 && ok; ++inst) {
    InstanceSpec spec;
    spec.n = 128 + rng.below(385);
    spec.d = inst % 2 ? 2 : 4;
    spec.leaf = 16;
    spec.max_rank = 16;
    spec.budget = 32;
    spec.knn_k = 8;
    spec.seed = 3000 + inst;
    if (inst % 3 == 0) {
      spec.mode = InteractionMode::Tau;
      spec.tau = 0.7;
    }
    const Instance in = make_instance(spec);

    const auto check_stable = [&](const std::string& name, auto&& save) {
      const auto path = (dir / name).string();
      save(path);
      const auto first = file_bytes(path);
      save(path);  // save(load(x)) must produce the same bytes
      return file_bytes(path) == first;
    };
    ok = ok && check_stable("t.bin", [&](const std::string& p) {
           save_tree(p, fs::exists(p) ? load_tree(p) : in.ht.tree);
         });
    ok = ok && check_stable("ht.bin", [&](const std::string& p) {
           save_htree(p, fs::exists(p) ? load_htree(p) : in.ht);
         });
    ok = ok && check_stable("si.bin", [&](const std::string& p) {
           save_samples(p, fs::exists(p) ? load_samples(p) : in.si);
         });
    ok = ok && check_stable("bs.bin", [&](const std::string& p) {
           if (fs::exists(p)) {
             const auto [nb, fb] = load_blocksets(p);
             save_blocksets(p, nb, fb);
           } else {
             save_blocksets(p, in.nbs, in.fbs);
           }
         });
    ok = ok && check_stable("cs.bin", [&](const std::string& p) {
           save_coarsenset(p, fs::exists(p) ? load_coarsenset(p) : in.cs);
         });
    ok = ok && check_stable("m.cds", [&](const std::string& p) {
           save_cds(p, fs::exists(p) ? load_cds(p) : in.cds);
         });

    const CDS back = load_cds((dir / "m.cds").string());
    for (const auto& nb : in.cm.near_blocks)
      ok = ok && back.extract_d(nb.i, nb.j).data == nb.d.data;
    for (const auto& fb : in.cm.far_blocks)
      ok = ok && back.extract_b(fb.i, fb.j).data == fb.b.data;
    for (index_t node = 0; node < in.ht.tree.num_nodes; ++node)
      if (in.cm.participating[node])
        ok = ok && back.extract_v(node).data == in.cm.bases[node].v.data;
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  report(6, ok, "bit-identical serialization round-trips and block extraction, 100 instances");
}

// ---------------------------------------------------------------- criterion 7

void criterion_7() {
  const std::vector<double> baccs = {1e-1, 1e-2, 1e-3, 1e-4, 1e-5};
  const PointSet pts = synth_points(SynthShape::UniformRandom, 2048, 2, 7);
  P1Params p1p;
  p1p.leaf_size = 64;
  p1p.knn_k = 16;
  p1p.sample_budget = 128;
  P2Params p2p;
  p2p.max_rank = 64;
  p2p.p = 2;

  const auto reuse_dir = work_dir("reuse");
  const InspectorP1Artifacts p1 = inspector_p1(pts, p1p, reuse_dir.string());
  double reuse_total = p1.seconds;
  std::vector<std::vector<std::uint8_t>> reuse_cds, reuse_plan;
  for (double bacc : baccs) {
    p2p.bacc = bacc;
    const auto p2 = inspector_p2(p1, p2p, reuse_dir.string());
    reuse_total += p2.seconds;
    reuse_cds.push_back(file_bytes(reuse_dir / "hmat.cds"));
    reuse_plan.push_back(file_bytes(reuse_dir / "plan.json"));
  }

  bool bitwise = true;
  double scratch_total = 0.0, p1_total = 0.0;
  for (std::size_t i = 0; i < baccs.size(); ++i) {
    const auto dir = work_dir("scratch" + std::to_string(i));
    const auto sp1 = inspector_p1(pts, p1p, dir.string());
    p2p.bacc = baccs[i];
    const auto sp2 = inspector_p2(sp1, p2p, dir.string());
    scratch_total += sp1.seconds + sp2.seconds;
    p1_total += sp1.seconds;
    bitwise = bitwise && file_bytes(dir / "hmat.cds") == reuse_cds[i];
    bitwise = bitwise && file_bytes(dir / "plan.json") == reuse_plan[i];
  }

  // the reuse saving only has to show when p1 is a measurable slice of the run
  const bool timing_ok = p1_total <= 0.05 * scratch_total || reuse_total < scratch_total;
  report(7, bitwise && timing_ok,
         "inspector reuse: outputs bitwise equal; reuse " + fmt(reuse_total) + "s vs scratch " +
             fmt(scratch_total) + "s");
}

// ---------------------------------------------------------------- criterion 8

void criterion_8() {
  const auto dir = work_dir("perf");
  const PointSet pts = synth_points(SynthShape::Grid2d, 16384, 2, 8);
  P1Params p1p;
  p1p.mode = InteractionMode::Tau;
  p1p.tau = 0.65;
  p1p.leaf_size = 256;
  p1p.knn_k = 32;
  p1p.sample_budget = 512;
  const auto p1 = inspector_p1(pts, p1p, dir.string());
  P2Params p2p;
  p2p.kernel = Kernel::gaussian(2.0);
  p2p.bacc = 1e-3;
  p2p.max_rank = 256;
  p2p.p = 4;
  const auto p2 = inspector_p2(p1, p2p, dir.string());
  const DenseMatrix w = random_matrix(16384, 256, 8);

  const auto timed_eval = [&](index_t p) {
    EvalPlan plan = p2.plan;
    plan.p = p;
    double best = 1e300;
    for (int rep = 0; rep < 2; ++rep) {
      EvalStats stats;
      evaluate(p2.cds, plan, w, &stats);
      best = std::min(best, stats.seconds);
    }
    return best;
  };
  const double t4 = timed_eval(4);
  const double t1 = timed_eval(1);
  double gemm_seconds = 0.0;
  dense_apply(p2p.kernel, pts, w, &gemm_seconds);

  const bool beats_dense = t4 < gemm_seconds;
  const double speedup = t1 / t4;
  const bool parallel_ok = speedup >= 1.8;
  report(8, beats_dense && parallel_ok,
         "weak performance: eval p=4 " + fmt(t4) + "s vs dense GEMM " + fmt(gemm_seconds) +
             "s; p=1/p=4 speedup " + fmt(speedup) + " (need >=1.8, cores available: " +
             std::to_string(default_worker_count()) + ")");
}

// ---------------------------------------------------------------- criterion 9

void criterion_9() {
  InstanceSpec spec;
  spec.n = 512;
  spec.d = 2;
  spec.kernel = Kernel::gaussian(5.0);
  spec.sample_mode = SampleMode::Exact;
  spec.bacc = 0.0;
  spec.leaf = 64;
  spec.max_rank = 64;
  spec.mode = InteractionMode::Hss;
  const Instance in = make_instance(spec);
  const EvalPlan plan = generate_plan(in.ht.tree, in.nbs, in.fbs, in.cs);
  const std::size_t leaves = in.ht.tree.leaves().size();
  report(9, !plan.block_lowering_near && in.nbs.pair_count() == leaves,
         "near block lowering stays off when the near count equals the leaf count (" +
             std::to_string(in.nbs.pair_count()) + " pairs, " + std::to_string(leaves) +
             " leaves)");
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<void()>>> criteria = {
      {1, criterion_1}, {2, criterion_2}, {3, criterion_3}, {4, criterion_4}, {5, criterion_5},
      {6, criterion_6}, {7, criterion_7}, {8, criterion_8}, {9, criterion_9}};
  for (const auto& [num, fn] : criteria) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(num, false, std::string("exception: ") + e.what());
    }
  }
  std::printf("%d of 9 criteria passed\n", 9 - g_failures);
  return g_failures ? 1 : 0;
}
