#pragma once

#include <string>
#include <vector>

#include "hmx/executor.hpp"
#include "hmx/sampling.hpp"
#include "hmx/serial.hpp"

namespace hmx {

/// On-disk artifacts no longer match what the recorded hash was taken over;
/// the fix is rerunning the phase that produced them.
class stale_artifact_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Structure-only parameters: changing any of these invalidates phase-1
/// artifacts. Kernel and accuracy live in P2Params instead, so they can
/// change without redoing this work.
struct P1Params {
  InteractionMode mode = InteractionMode::Hss;
  double tau = 0.0;
  index_t leaf_size = 256;
  SplitMethod split = SplitMethod::Auto;
  std::uint64_t tree_seed = 0;
  SampleMode sample_mode = SampleMode::Neighbor;
  index_t knn_k = 32;
  index_t sample_budget = 512;
  std::uint64_t sample_seed = 0;
  index_t near_blocksize = 2;
  index_t far_blocksize = 4;
};

struct InspectorP1Artifacts {
  PointSet points;
  HTree htree;  // embeds the cluster tree
  SampleInfo samples;
  BlockSet near_bs, far_bs;
  P1Params params;
  std::uint64_t input_hash = 0;     // over (points, params)
  std::uint64_t artifact_hash = 0;  // over the persisted files
  double seconds = 0.0;
};

/// Phase 1: tree, interactions, sampling, blocksets. Persists points.bin,
/// ctree.bin, htree.bin, sampling.bin, blockset.bin and p1.meta under
/// out_dir; reruns with identical inputs rewrite nothing.
InspectorP1Artifacts inspector_p1(const PointSet& points, const P1Params& params,
                                  const std::string& out_dir);

/// Loads and verifies persisted phase-1 artifacts (hash check).
InspectorP1Artifacts load_p1(const std::string& dir);

struct P2Params {
  Kernel kernel = Kernel::gaussian(1.0);
  double bacc = 1e-5;
  index_t max_rank = 256;
  index_t p = 0;  // 0 -> detected cores
  index_t agg = 2;
  index_t block_threshold = 0;  // 0 -> number of leaves
  index_t coarsen_threshold = 4;
};

struct InspectorP2Artifacts {
  CompressedMatrix cm;
  CDS cds;
  EvalPlan plan;
  std::uint64_t hash = 0;  // over (p1 input hash, kernel, bacc, max_rank, p, agg)
  double seconds = 0.0;
};

/// Phase 2: compression, coarsening, data layout, plan. Refuses to run when
/// the on-disk phase-1 artifacts no longer match p1's recorded hash. Persists
/// hmat.cds, coarsenset.bin and plan.json under out_dir.
InspectorP2Artifacts inspector_p2(const InspectorP1Artifacts& p1, const P2Params& params,
                                  const std::string& out_dir);

std::string plan_to_json(const EvalPlan& plan);
EvalPlan plan_from_json(const std::string& text);
void save_plan(const std::string& path, const EvalPlan& plan);
EvalPlan load_plan(const std::string& path);

struct SweepRow {
  double bacc = 0.0;
  double eps_f = 0.0;
  double eval_seconds = 0.0;
  double p2_seconds = 0.0;
};

struct SweepResult {
  double p1_seconds = 0.0;
  double oracle_seconds = 0.0;  // error-estimation work, reported separately
  double total_seconds = 0.0;
  std::vector<SweepRow> rows;
  std::string csv;
};

/// Phase 1 once, then phase 2 + evaluate + error per bacc value.
SweepResult accuracy_sweep(const PointSet& points, const P1Params& p1_params, P2Params p2_params,
                           std::span<const double> bacc_list, const DenseMatrix& w,
                           const std::string& out_dir, ErrorMode err_mode,
                           std::uint64_t err_seed = 0);

}  // namespace hmx
