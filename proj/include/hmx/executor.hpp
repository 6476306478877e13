#pragma once

#include <string>

#include "hmx/compress.hpp"
#include "hmx/parallel.hpp"
#include "hmx/structure.hpp"

namespace hmx {

/// Raised when a computation would exceed a documented size guard (for
/// example the dense error oracle beyond n = 16384).
class numeric_guard_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Lowering switches selecting the evaluation schedule. Semantics are
/// identical for every combination; only the parallel decomposition changes.
struct EvalPlan {
  bool block_lowering_near = false;
  bool block_lowering_far = false;
  bool coarsen_lowering = false;
  bool peel_top = false;
  index_t p = 1;
  index_t block_threshold = 0;
  index_t coarsen_threshold = 4;
};

struct PlanDefaults {
  index_t block_threshold = 0;  // 0 -> number of leaf nodes
  index_t coarsen_threshold = 4;
  index_t p = 0;  // 0 -> detected cores
};

/// Deterministic plan selection: block lowering per kind when that kind has
/// more interaction blocks than block_threshold, coarsen lowering when the
/// tree has more levels than coarsen_threshold, peeling when the top coarsen
/// level alone cannot feed all p workers.
EvalPlan generate_plan(const ClusterTree& tree, const BlockSet& near_bs, const BlockSet& far_bs,
                       const CoarsenSet& cs, const PlanDefaults& defaults = {});

struct EvalStats {
  std::size_t locked_pairs = 0;  // far pairs needing an accumulation lock
  double seconds = 0.0;
};

/// Y = K~ * W over CDS in four passes (upward, far, downward, near), each a
/// barrier-separated parallel phase. Every output region has a single writer,
/// so repeated calls are bit-identical for any worker count.
DenseMatrix evaluate(const CDS& cds, const EvalPlan& plan, const DenseMatrix& w, WorkerPool& pool,
                     EvalStats* stats = nullptr);
DenseMatrix evaluate(const CDS& cds, const EvalPlan& plan, const DenseMatrix& w,
                     EvalStats* stats = nullptr);

/// Sequential set-free evaluator over the uncompacted representation; the
/// scheduling oracle the plan paths are tested against.
DenseMatrix evaluate_reference(const CompressedMatrix& cm, const DenseMatrix& w);

/// K * W computed in row blocks without materializing all of K. When
/// gemm_seconds is given it accumulates time spent in the multiply only,
/// excluding kernel evaluations.
DenseMatrix dense_apply(const Kernel& kernel, const PointSet& points, const DenseMatrix& w,
                        double* gemm_seconds = nullptr);

enum class ErrorMode { Dense, Sampled };

/// Relative Frobenius error of y_approx against K*W. Dense mode materializes
/// K row blocks (guarded to n <= 16384); sampled mode estimates the ratio on
/// a uniform random subset of at least 256 rows. Q = 0 returns 0 with a
/// warning on stderr.
double relative_error_vs(const DenseMatrix& y_approx, const Kernel& kernel,
                         const PointSet& points, const DenseMatrix& w, ErrorMode mode,
                         std::uint64_t seed = 0);
double relative_error(const CDS& cds, const Kernel& kernel, const PointSet& points,
                      const DenseMatrix& w, ErrorMode mode, std::uint64_t seed = 0);

/// Human-readable dump of the loop structure the plan selects.
std::string plan_pseudocode(const EvalPlan& plan);

}  // namespace hmx
