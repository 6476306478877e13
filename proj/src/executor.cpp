#include "hmx/executor.hpp"

#include <chrono>
#include <cstring>
#include <iostream>
#include <numeric>
#include <sstream>

#include "hmx/rng.hpp"

namespace hmx {

namespace {

using clock_t_ = std::chrono::steady_clock;

double seconds_since(clock_t_::time_point t0) {
  return std::chrono::duration<double>(clock_t_::now() - t0).count();
}

/// One evaluation run: permuted operands, per-node T/S accumulators, and the
/// four pass bodies. Each body writes only regions owned by its task index.
struct EvalRun {
  const CDS& cds;
  const EvalPlan& plan;
  WorkerPool& pool;
  std::size_t n;
  std::size_t q;
  DenseMatrix wp, yp;
  std::vector<DenseMatrix> t, s;

  EvalRun(const CDS& c, const EvalPlan& pl, WorkerPool& po, const DenseMatrix& w)
      : cds(c), plan(pl), pool(po), n(c.tree.num_points()), q(w.cols), wp(n, q), yp(n, q) {
    const auto& tree = cds.tree;
    for (std::size_t c2 = 0; c2 < q; ++c2) {
      const double* src = w.col(c2);
      double* dst = wp.col(c2);
      for (std::size_t pos = 0; pos < n; ++pos) dst[pos] = src[tree.perm[pos]];
    }
    t.resize(tree.num_nodes);
    s.resize(tree.num_nodes);
    for (index_t i = 0; i < tree.num_nodes; ++i)
      if (cds.participating[i] && cds.sranks[i] > 0) {
        t[i] = DenseMatrix(cds.sranks[i], q);
        s[i] = DenseMatrix(cds.sranks[i], q);
      }
  }

  const double* vgen_of(index_t node) const { return cds.vgen.data() + cds.vptr[cds.v_slot(node)]; }

  void upward_node(index_t i, std::size_t col0, std::size_t nc) {
    const index_t sr = cds.sranks[i];
    if (!cds.participating[i] || sr == 0 || nc == 0) return;
    const double* v = vgen_of(i);
    const auto& tree = cds.tree;
    if (tree.is_leaf(i)) {
      const std::size_t sz = tree.node_size(i);
      gemm_trans_acc(sr, nc, sz, v, sz, wp.data.data() + col0 * n + tree.start[i], n,
                     t[i].data.data() + col0 * sr, sr);
      return;
    }
    const index_t lc = tree.lchild[i], rc = tree.rchild[i];
    const index_t srl = cds.sranks[lc], srr = cds.sranks[rc];
    const std::size_t width = srl + srr;
    DenseMatrix scratch(width, nc);
    for (std::size_t c = 0; c < nc; ++c) {
      if (srl) std::memcpy(scratch.col(c), t[lc].col(col0 + c), srl * sizeof(double));
      if (srr) std::memcpy(scratch.col(c) + srl, t[rc].col(col0 + c), srr * sizeof(double));
    }
    gemm_trans_acc(sr, nc, width, v, width, scratch.data.data(), width,
                   t[i].data.data() + col0 * sr, sr);
  }

  void downward_node(index_t i, std::size_t col0, std::size_t nc) {
    const index_t sr = cds.sranks[i];
    if (!cds.participating[i] || sr == 0 || nc == 0) return;
    const double* v = vgen_of(i);
    const auto& tree = cds.tree;
    if (tree.is_leaf(i)) {
      const std::size_t sz = tree.node_size(i);
      gemm_acc(sz, nc, sr, v, sz, s[i].data.data() + col0 * sr, sr,
               yp.data.data() + col0 * n + tree.start[i], n);
      return;
    }
    const index_t lc = tree.lchild[i], rc = tree.rchild[i];
    const index_t srl = cds.sranks[lc], srr = cds.sranks[rc];
    const std::size_t width = srl + srr;
    if (width == 0) return;
    DenseMatrix scratch(width, nc);
    gemm_acc(width, nc, sr, v, width, s[i].data.data() + col0 * sr, sr, scratch.data.data(),
             width);
    for (std::size_t c = 0; c < nc; ++c) {
      const double* src = scratch.col(c);
      if (srl) {
        double* dst = s[lc].col(col0 + c);
        for (index_t r = 0; r < srl; ++r) dst[r] += src[r];
      }
      if (srr) {
        double* dst = s[rc].col(col0 + c);
        for (index_t r = 0; r < srr; ++r) dst[r] += src[srl + r];
      }
    }
  }

  void far_pair(index_t i, index_t j, std::uint64_t slot) {
    const index_t sri = cds.sranks[i], srj = cds.sranks[j];
    if (sri == 0 || srj == 0) return;
    gemm_acc(sri, q, srj, cds.bgen.data() + cds.bptr[slot], sri, t[j].data.data(), srj,
             s[i].data.data(), sri);
  }

  void near_pair(index_t i, index_t j, std::uint64_t slot) {
    const auto& tree = cds.tree;
    gemm_acc(tree.node_size(i), q, tree.node_size(j), cds.dgen.data() + cds.dptr[slot],
             tree.node_size(i), wp.data.data() + tree.start[j], n,
             yp.data.data() + tree.start[i], n);
  }

  /// Column-stripe parallelism for the peeled top level; stripe boundaries do
  /// not change any bit because the GEMM kernels accumulate per column.
  template <class Fn>
  void run_striped(index_t node, Fn&& fn) {
    const std::size_t stripes = std::max<std::size_t>(1, std::min<std::size_t>(q, pool.workers() * 4));
    pool.run(stripes, [&](std::size_t si) {
      const std::size_t c0 = si * q / stripes;
      const std::size_t c1 = (si + 1) * q / stripes;
      fn(node, c0, c1 - c0);
    });
  }

  std::vector<std::vector<index_t>> participating_by_depth() const {
    const auto& tree = cds.tree;
    std::vector<std::vector<index_t>> by_depth(tree.height + 1);
    for (index_t i = 0; i < tree.num_nodes; ++i)
      if (cds.participating[i] && cds.sranks[i] > 0) by_depth[tree.level[i]].push_back(i);
    return by_depth;
  }

  void upward_pass() {
    if (plan.coarsen_lowering && !cds.coarsenset.levels.empty()) {
      const auto& levels = cds.coarsenset.levels;
      for (std::size_t lvl = 0; lvl < levels.size(); ++lvl) {
        const auto& subs = levels[lvl].subtrees;
        if (plan.peel_top && lvl + 1 == levels.size()) {
          for (const auto& st : subs)
            for (index_t node : st.nodes)
              run_striped(node, [&](index_t nd, std::size_t c0, std::size_t nc) {
                upward_node(nd, c0, nc);
              });
        } else {
          pool.run(subs.size(), [&](std::size_t si) {
            for (index_t node : subs[si].nodes) upward_node(node, 0, q);
          });
        }
      }
      return;
    }
    const auto by_depth = participating_by_depth();
    for (auto d = by_depth.size(); d-- > 0;) {
      const auto& nodes = by_depth[d];
      pool.run(nodes.size(), [&](std::size_t ni) { upward_node(nodes[ni], 0, q); });
    }
  }

  void downward_pass() {
    if (plan.coarsen_lowering && !cds.coarsenset.levels.empty()) {
      const auto& levels = cds.coarsenset.levels;
      for (auto lvl = levels.size(); lvl-- > 0;) {
        const auto& subs = levels[lvl];
        if (plan.peel_top && lvl + 1 == levels.size()) {
          for (const auto& st : subs.subtrees)
            for (auto it = st.nodes.rbegin(); it != st.nodes.rend(); ++it)
              run_striped(*it, [&](index_t nd, std::size_t c0, std::size_t nc) {
                downward_node(nd, c0, nc);
              });
        } else {
          pool.run(subs.subtrees.size(), [&](std::size_t si) {
            const auto& nodes = subs.subtrees[si].nodes;
            for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) downward_node(*it, 0, q);
          });
        }
      }
      return;
    }
    const auto by_depth = participating_by_depth();
    for (std::size_t d = 0; d < by_depth.size(); ++d) {
      const auto& nodes = by_depth[d];
      pool.run(nodes.size(), [&](std::size_t ni) { downward_node(nodes[ni], 0, q); });
    }
  }

  template <class PairFn>
  void blocked_pass(const BlockSet& bs, PairFn&& fn) {
    std::vector<std::uint64_t> group_start(bs.groups.size());
    std::uint64_t running = 0;
    for (std::size_t g = 0; g < bs.groups.size(); ++g) {
      group_start[g] = running;
      for (const auto& b : bs.groups[g].blocks) running += b.pairs.size();
    }
    pool.run(bs.groups.size(), [&](std::size_t g) {
      std::uint64_t slot = group_start[g];
      for (const auto& b : bs.groups[g].blocks)
        for (const auto& [i, j] : b.pairs) fn(i, j, slot++);
    });
  }

  /// Fallback when block lowering is off: one task per target node, which is
  /// still single-writer and independent of worker count.
  template <class PairFn>
  void flat_pass(const std::vector<InteractionPair>& order, PairFn&& fn) {
    std::vector<index_t> targets;
    std::vector<std::vector<std::uint64_t>> slots_of;
    std::vector<std::uint64_t> target_slot(cds.tree.num_nodes, std::uint64_t(-1));
    for (std::uint64_t slot = 0; slot < order.size(); ++slot) {
      const index_t i = order[slot].first;
      if (target_slot[i] == std::uint64_t(-1)) {
        target_slot[i] = targets.size();
        targets.push_back(i);
        slots_of.emplace_back();
      }
      slots_of[target_slot[i]].push_back(slot);
    }
    pool.run(targets.size(), [&](std::size_t ti) {
      for (std::uint64_t slot : slots_of[ti])
        fn(order[slot].first, order[slot].second, slot);
    });
  }

  void far_pass() {
    const auto fn = [this](index_t i, index_t j, std::uint64_t slot) { far_pair(i, j, slot); };
    if (plan.block_lowering_far)
      blocked_pass(cds.far_bs, fn);
    else
      flat_pass(cds.far_order, fn);
  }

  void near_pass() {
    const auto fn = [this](index_t i, index_t j, std::uint64_t slot) { near_pair(i, j, slot); };
    if (plan.block_lowering_near)
      blocked_pass(cds.near_bs, fn);
    else
      flat_pass(cds.near_order, fn);
  }

  DenseMatrix scatter() const {
    DenseMatrix y(n, q);
    const auto& perm = cds.tree.perm;
    for (std::size_t c = 0; c < q; ++c) {
      const double* src = yp.col(c);
      double* dst = y.col(c);
      for (std::size_t pos = 0; pos < n; ++pos) dst[perm[pos]] = src[pos];
    }
    return y;
  }
};

}  // namespace

EvalPlan generate_plan(const ClusterTree& tree, const BlockSet& near_bs, const BlockSet& far_bs,
                       const CoarsenSet& cs, const PlanDefaults& defaults) {
  EvalPlan plan;
  const auto num_leaves = static_cast<index_t>(tree.leaves().size());
  plan.block_threshold = defaults.block_threshold ? defaults.block_threshold : num_leaves;
  plan.coarsen_threshold = defaults.coarsen_threshold;
  plan.p = defaults.p ? defaults.p : static_cast<index_t>(default_worker_count());
  plan.block_lowering_near = near_bs.pair_count() > plan.block_threshold;
  plan.block_lowering_far = far_bs.pair_count() > plan.block_threshold;
  plan.coarsen_lowering = tree.height + 1 > plan.coarsen_threshold;
  plan.peel_top = plan.coarsen_lowering && !cs.levels.empty() &&
                  cs.levels.back().subtrees.size() < plan.p;
  return plan;
}

DenseMatrix evaluate(const CDS& cds, const EvalPlan& plan, const DenseMatrix& w, WorkerPool& pool,
                     EvalStats* stats) {
  const auto t0 = clock_t_::now();
  if (w.rows != cds.tree.num_points())
    throw std::invalid_argument("evaluate: W row count does not match the point count");
  if (w.cols == 0) {
    if (stats) *stats = {0, seconds_since(t0)};
    return DenseMatrix(w.rows, 0);
  }
  EvalRun run(cds, plan, pool, w);
  run.upward_pass();
  run.far_pass();
  run.downward_pass();
  run.near_pass();
  DenseMatrix y = run.scatter();
  if (stats) {
    // row-group keying gives every S_i a single writer; the lock fallback
    // never engages
    stats->locked_pairs = 0;
    stats->seconds = seconds_since(t0);
  }
  return y;
}

DenseMatrix evaluate(const CDS& cds, const EvalPlan& plan, const DenseMatrix& w,
                     EvalStats* stats) {
  WorkerPool pool(plan.p);
  return evaluate(cds, plan, w, pool, stats);
}

DenseMatrix evaluate_reference(const CompressedMatrix& cm, const DenseMatrix& w) {
  const auto& tree = cm.htree.tree;
  const std::size_t n = tree.num_points();
  if (w.rows != n) throw std::invalid_argument("evaluate_reference: W row count mismatch");
  const std::size_t q = w.cols;
  DenseMatrix y(n, q);
  if (q == 0) return y;

  DenseMatrix wp(n, q), yp(n, q);
  for (std::size_t c = 0; c < q; ++c)
    for (std::size_t pos = 0; pos < n; ++pos) wp(pos, c) = w(tree.perm[pos], c);

  std::vector<DenseMatrix> t(tree.num_nodes), s(tree.num_nodes);
  for (index_t i = 0; i < tree.num_nodes; ++i)
    if (cm.participating[i] && cm.bases[i].srank > 0) {
      t[i] = DenseMatrix(cm.bases[i].srank, q);
      s[i] = DenseMatrix(cm.bases[i].srank, q);
    }

  // children have larger ids: descending order is upward
  for (index_t i = tree.num_nodes; i-- > 0;) {
    if (!cm.participating[i] || cm.bases[i].srank == 0) continue;
    const auto& v = cm.bases[i].v;
    const index_t sr = cm.bases[i].srank;
    if (tree.is_leaf(i)) {
      const index_t st0 = tree.start[i], sz = tree.node_size(i);
      for (std::size_t c = 0; c < q; ++c)
        for (index_t r = 0; r < sr; ++r) {
          double acc = 0.0;
          for (index_t k = 0; k < sz; ++k) acc += v(k, r) * wp(st0 + k, c);
          t[i](r, c) = acc;
        }
    } else {
      const index_t lc = tree.lchild[i], rc = tree.rchild[i];
      const index_t srl = cm.bases[lc].srank, srr = cm.bases[rc].srank;
      for (std::size_t c = 0; c < q; ++c)
        for (index_t r = 0; r < sr; ++r) {
          double acc = 0.0;
          for (index_t k = 0; k < srl; ++k) acc += v(k, r) * t[lc](k, c);
          for (index_t k = 0; k < srr; ++k) acc += v(srl + k, r) * t[rc](k, c);
          t[i](r, c) = acc;
        }
    }
  }

  for (const auto& fb : cm.far_blocks) {
    const index_t sri = cm.bases[fb.i].srank, srj = cm.bases[fb.j].srank;
    for (std::size_t c = 0; c < q; ++c)
      for (index_t r = 0; r < sri; ++r) {
        double acc = 0.0;
        for (index_t k = 0; k < srj; ++k) acc += fb.b(r, k) * t[fb.j](k, c);
        s[fb.i](r, c) += acc;
      }
  }

  for (index_t i = 0; i < tree.num_nodes; ++i) {
    if (!cm.participating[i] || cm.bases[i].srank == 0) continue;
    const auto& v = cm.bases[i].v;
    const index_t sr = cm.bases[i].srank;
    if (tree.is_leaf(i)) {
      const index_t st0 = tree.start[i], sz = tree.node_size(i);
      for (std::size_t c = 0; c < q; ++c)
        for (index_t r = 0; r < sz; ++r) {
          double acc = 0.0;
          for (index_t k = 0; k < sr; ++k) acc += v(r, k) * s[i](k, c);
          yp(st0 + r, c) += acc;
        }
    } else {
      const index_t lc = tree.lchild[i], rc = tree.rchild[i];
      const index_t srl = cm.bases[lc].srank, srr = cm.bases[rc].srank;
      for (std::size_t c = 0; c < q; ++c) {
        for (index_t r = 0; r < srl; ++r) {
          double acc = 0.0;
          for (index_t k = 0; k < sr; ++k) acc += v(r, k) * s[i](k, c);
          s[lc](r, c) += acc;
        }
        for (index_t r = 0; r < srr; ++r) {
          double acc = 0.0;
          for (index_t k = 0; k < sr; ++k) acc += v(srl + r, k) * s[i](k, c);
          s[rc](r, c) += acc;
        }
      }
    }
  }

  for (const auto& nb : cm.near_blocks) {
    const index_t sti = tree.start[nb.i], szi = tree.node_size(nb.i);
    const index_t stj = tree.start[nb.j], szj = tree.node_size(nb.j);
    for (std::size_t c = 0; c < q; ++c)
      for (index_t r = 0; r < szi; ++r) {
        double acc = 0.0;
        for (index_t k = 0; k < szj; ++k) acc += nb.d(r, k) * wp(stj + k, c);
        yp(sti + r, c) += acc;
      }
  }

  for (std::size_t c = 0; c < q; ++c)
    for (std::size_t pos = 0; pos < n; ++pos) y(tree.perm[pos], c) = yp(pos, c);
  return y;
}

DenseMatrix dense_apply(const Kernel& kernel, const PointSet& points, const DenseMatrix& w,
                        double* gemm_seconds) {
  const std::size_t n = points.n;
  if (w.rows != n) throw std::invalid_argument("dense_apply: W row count mismatch");
  const std::size_t q = w.cols;
  DenseMatrix y(n, q);
  if (q == 0) return y;
  constexpr std::size_t kRowBlock = 256;
  DenseMatrix kblk(kRowBlock, n);
  double gemm_total = 0.0;
  for (std::size_t r0 = 0; r0 < n; r0 += kRowBlock) {
    const std::size_t bn = std::min(kRowBlock, n - r0);
    for (std::size_t j = 0; j < n; ++j) {
      const auto pj = points.point(j);
      double* col = kblk.col(j);
      for (std::size_t bi = 0; bi < bn; ++bi)
        col[bi] = kernel_eval(kernel, points.point(r0 + bi), pj);
    }
    const auto t0 = clock_t_::now();
    gemm_acc(bn, q, n, kblk.data.data(), kRowBlock, w.data.data(), n, y.data.data() + r0, n);
    gemm_total += seconds_since(t0);
  }
  if (gemm_seconds) *gemm_seconds = gemm_total;
  return y;
}

double relative_error_vs(const DenseMatrix& y_approx, const Kernel& kernel,
                         const PointSet& points, const DenseMatrix& w, ErrorMode mode,
                         std::uint64_t seed) {
  const std::size_t n = points.n, q = w.cols;
  if (y_approx.rows != n || w.rows != n)
    throw std::invalid_argument("relative_error: shape mismatch");
  if (q == 0) {
    std::cerr << "warning: relative_error with Q = 0 is 0 by convention\n";
    return 0.0;
  }

  double num2 = 0.0, den2 = 0.0;
  if (mode == ErrorMode::Dense) {
    if (n > 16384)
      throw numeric_guard_error("dense error oracle limited to n <= 16384; use sampled mode");
    const DenseMatrix yk = dense_apply(kernel, points, w);
    for (std::size_t idx = 0; idx < yk.data.size(); ++idx) {
      const double diff = y_approx.data[idx] - yk.data[idx];
      num2 += diff * diff;
      den2 += yk.data[idx] * yk.data[idx];
    }
  } else {
    const std::size_t nr = std::min<std::size_t>(n, 256);
    std::vector<index_t> rows(n);
    std::iota(rows.begin(), rows.end(), index_t{0});
    Rng rng(mix64(seed ^ mix64(0xe44a11ULL)));
    for (std::size_t i = 0; i < nr; ++i)
      std::swap(rows[i], rows[i + rng.below(n - i)]);
    std::vector<double> acc(q);
    for (std::size_t ri = 0; ri < nr; ++ri) {
      const index_t r = rows[ri];
      std::fill(acc.begin(), acc.end(), 0.0);
      const auto pr = points.point(r);
      for (std::size_t j = 0; j < n; ++j) {
        const double kv = kernel_eval(kernel, pr, points.point(j));
        for (std::size_t c = 0; c < q; ++c) acc[c] += kv * w(j, c);
      }
      for (std::size_t c = 0; c < q; ++c) {
        const double diff = y_approx(r, c) - acc[c];
        num2 += diff * diff;
        den2 += acc[c] * acc[c];
      }
    }
  }
  return den2 == 0.0 ? 0.0 : std::sqrt(num2 / den2);
}

double relative_error(const CDS& cds, const Kernel& kernel, const PointSet& points,
                      const DenseMatrix& w, ErrorMode mode, std::uint64_t seed) {
  const EvalPlan plan = generate_plan(cds.tree, cds.near_bs, cds.far_bs, cds.coarsenset);
  const DenseMatrix y = evaluate(cds, plan, w);
  return relative_error_vs(y, kernel, points, w, mode, seed);
}

std::string plan_pseudocode(const EvalPlan& plan) {
  std::ostringstream os;
  os << "plan(p=" << plan.p << ", block_threshold=" << plan.block_threshold
     << ", coarsen_threshold=" << plan.coarsen_threshold << ")\n";
  os << "pass upward:\n";
  if (plan.coarsen_lowering) {
    os << "  for level in coarsenset (leaves -> root):\n"
       << "    parallel for sub-tree in level: for node in post-order: T[i] = V[i]^T * "
          "(leaf ? W[i] : [T[lc]; T[rc]])\n";
    if (plan.peel_top)
      os << "  top level peeled: sequential over nodes, parallel over column stripes\n";
  } else {
    os << "  for depth = height .. 0: parallel for node at depth: T[i] = V[i]^T * ...\n";
  }
  os << "pass far:\n";
  os << (plan.block_lowering_far
             ? "  parallel for row-group in far blockset: for (i,j): S[i] += B[i,j] * T[j]\n"
             : "  parallel for target node i: for (i,j) in far list: S[i] += B[i,j] * T[j]\n");
  os << "pass downward:\n";
  if (plan.coarsen_lowering)
    os << "  for level in coarsenset (root -> leaves): parallel for sub-tree: reverse "
          "post-order: scatter U[i] * S[i]\n";
  else
    os << "  for depth = 0 .. height: parallel for node at depth: scatter U[i] * S[i]\n";
  os << "pass near:\n";
  os << (plan.block_lowering_near
             ? "  parallel for row-group in near blockset: for (i,j): Y[i] += D[i,j] * W[j]\n"
             : "  parallel for target leaf i: for (i,j) in near list: Y[i] += D[i,j] * W[j]\n");
  return os.str();
}

}  // namespace hmx
