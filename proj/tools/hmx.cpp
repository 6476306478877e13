#include <CLI11.hpp>
#include <chrono>
#include <iostream>

#include "hmx/pipeline.hpp"
#include "hmx/rng.hpp"

namespace {

using namespace hmx;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitConsistency = 4;
constexpr int kExitNumericGuard = 5;

struct CommonOpts {
  std::string points_path;
  std::string format = "auto";  // csv|bin|auto
  std::string synth;            // grid2d|uniform|sphere3d, alternative to --points
  std::size_t n = 4096;
  std::size_t d = 2;
  std::string mode = "hss";  // hss | tau:VALUE
  index_t leaf = 256;
  std::string kernel = "gaussian:1.0";
  double bacc = 1e-5;
  index_t max_rank = 256;
  index_t agg = 2;
  index_t sampling_size = 32;  // k-NN k
  index_t workers = 0;
  std::uint64_t seed = 0;
  std::string out_dir = "hmx_out";
  bool exact_sampling = false;
  index_t near_blocksize = 2;
  index_t far_blocksize = 4;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--points", o.points_path, "point file (text or binary)");
  cmd->add_option("--format", o.format, "point file format: csv|bin|auto")
      ->check(CLI::IsMember({"csv", "bin", "auto"}));
  cmd->add_option("--synth", o.synth, "synthetic point set: grid2d|uniform|sphere3d");
  cmd->add_option("--n", o.n, "synthetic point count");
  cmd->add_option("--d", o.d, "synthetic dimension (uniform only)");
  cmd->add_option("--mode", o.mode, "interaction mode: hss or tau:VALUE");
  cmd->add_option("--leaf", o.leaf, "leaf size m");
  cmd->add_option("--kernel", o.kernel, "kernel: gaussian:H or invdist");
  cmd->add_option("--bacc", o.bacc, "blockwise accuracy tolerance");
  cmd->add_option("--max-rank", o.max_rank, "rank cap per node");
  cmd->add_option("--agg", o.agg, "coarsening aggregation factor");
  cmd->add_option("--sampling-size", o.sampling_size, "k-NN neighbourhood size");
  cmd->add_option("--workers", o.workers, "worker count (0 = detected cores)");
  cmd->add_option("--seed", o.seed, "seed for all randomized steps");
  cmd->add_option("--out", o.out_dir, "artifact directory");
  cmd->add_flag("--exact-sampling", o.exact_sampling, "debug mode: sample all non-member rows");
  cmd->add_option("--near-blocksize", o.near_blocksize, "near blockset blocksize");
  cmd->add_option("--far-blocksize", o.far_blocksize, "far blockset blocksize");
}

PointSet load_input_points(const CommonOpts& o) {
  if (!o.points_path.empty()) {
    PointFormat fmt = PointFormat::Auto;
    if (o.format == "csv") fmt = PointFormat::Text;
    if (o.format == "bin") fmt = PointFormat::Binary;
    return load_points(o.points_path, fmt);
  }
  std::string shape = o.synth.empty() ? "uniform" : o.synth;
  if (shape == "uniform") shape = "uniform_random";
  return synth_points(parse_synth_shape(shape), o.n, o.d, o.seed);
}

P1Params make_p1(const CommonOpts& o) {
  P1Params p1;
  if (o.mode == "hss") {
    p1.mode = InteractionMode::Hss;
  } else if (o.mode.rfind("tau:", 0) == 0) {
    p1.mode = InteractionMode::Tau;
    p1.tau = std::stod(o.mode.substr(4));
  } else {
    throw std::invalid_argument("bad --mode, expected hss or tau:VALUE");
  }
  p1.leaf_size = o.leaf;
  p1.tree_seed = o.seed;
  p1.sample_mode = o.exact_sampling ? SampleMode::Exact : SampleMode::Neighbor;
  p1.knn_k = o.sampling_size;
  p1.sample_budget = 2 * o.max_rank;
  p1.sample_seed = o.seed;
  p1.near_blocksize = o.near_blocksize;
  p1.far_blocksize = o.far_blocksize;
  return p1;
}

P2Params make_p2(const CommonOpts& o) {
  P2Params p2;
  p2.kernel = parse_kernel(o.kernel);
  p2.bacc = o.bacc;
  p2.max_rank = o.max_rank;
  p2.p = o.workers;
  p2.agg = o.agg;
  return p2;
}

void echo_config(const char* cmd, const CommonOpts& o, std::size_t n, std::size_t d) {
  std::cout << "config: cmd=" << cmd << " n=" << n << " d=" << d
            << (o.points_path.empty() ? " synth=" + (o.synth.empty() ? "uniform" : o.synth)
                                      : " points=" + o.points_path)
            << " mode=" << o.mode << " leaf=" << o.leaf << " kernel=" << o.kernel
            << " bacc=" << o.bacc << " max_rank=" << o.max_rank << " agg=" << o.agg
            << " sampling_size=" << o.sampling_size << " near_blocksize=" << o.near_blocksize
            << " far_blocksize=" << o.far_blocksize
            << " workers=" << (o.workers ? o.workers : default_worker_count())
            << " seed=" << o.seed << " exact_sampling=" << (o.exact_sampling ? 1 : 0)
            << " out=" << o.out_dir << "\n";
}

DenseMatrix random_w(std::size_t n, std::size_t q, std::uint64_t seed) {
  DenseMatrix w(n, q);
  Rng rng(mix64(seed ^ mix64(0x77a7ULL)));
  for (auto& v : w.data) v = rng.uniform() * 2.0 - 1.0;
  return w;
}

int cmd_inspect(const CommonOpts& o) {
  const PointSet pts = load_input_points(o);
  echo_config("inspect", o, pts.n, pts.d);
  const auto p1 = inspector_p1(pts, make_p1(o), o.out_dir);
  std::cout << "p1: nodes=" << p1.htree.tree.num_nodes
            << " height=" << p1.htree.tree.height << " near_pairs=" << p1.htree.near_pair_count()
            << " far_pairs=" << p1.htree.far_pair_count() << " time=" << p1.seconds << "s\n";
  const auto p2 = inspector_p2(p1, make_p2(o), o.out_dir);
  index_t max_sr = 0;
  for (index_t sr : p2.cds.sranks) max_sr = std::max(max_sr, sr);
  std::cout << "p2: max_srank=" << max_sr << " dgen=" << p2.cds.dgen.size()
            << " bgen=" << p2.cds.bgen.size() << " vgen=" << p2.cds.vgen.size()
            << " time=" << p2.seconds << "s\n";
  std::cout << plan_pseudocode(p2.plan);
  return kExitOk;
}

int cmd_eval(const CommonOpts& o, const std::string& w_path, std::size_t q,
             const std::string& y_path) {
  echo_config("eval", o, 0, 0);
  const CDS cds = load_cds(o.out_dir + "/hmat.cds");
  EvalPlan plan = load_plan(o.out_dir + "/plan.json");
  if (o.workers) plan.p = o.workers;
  const std::size_t n = cds.tree.num_points();
  const DenseMatrix w = w_path.empty() ? random_w(n, q, o.seed) : load_matrix(w_path);
  EvalStats stats;
  const DenseMatrix y = evaluate(cds, plan, w, &stats);
  std::cout << "eval: n=" << n << " q=" << w.cols << " workers=" << plan.p
            << " time=" << stats.seconds << "s locked_pairs=" << stats.locked_pairs << "\n";
  if (!y_path.empty()) save_matrix(y_path, y);
  return kExitOk;
}

int cmd_accuracy(const CommonOpts& o, const std::vector<double>& bacc_list, std::size_t q) {
  const PointSet pts = load_input_points(o);
  echo_config("accuracy", o, pts.n, pts.d);
  const DenseMatrix w = random_w(pts.n, q, o.seed);
  const ErrorMode mode = pts.n <= 16384 ? ErrorMode::Dense : ErrorMode::Sampled;
  const auto res = accuracy_sweep(pts, make_p1(o), make_p2(o), bacc_list, w, o.out_dir, mode,
                                  o.seed);
  std::cout << res.csv;
  std::cout << "# p1=" << res.p1_seconds << "s oracle=" << res.oracle_seconds
            << "s total=" << res.total_seconds << "s\n";
  return kExitOk;
}

int cmd_bench(const CommonOpts& o, const std::vector<std::size_t>& q_list,
              const std::vector<index_t>& workers_list) {
  const PointSet pts = load_input_points(o);
  echo_config("bench", o, pts.n, pts.d);
  const auto p1 = inspector_p1(pts, make_p1(o), o.out_dir);
  const auto p2 = inspector_p2(p1, make_p2(o), o.out_dir);
  const Kernel kernel = parse_kernel(o.kernel);

  std::cout << "q,workers,eval_seconds,dense_gemm_seconds\n";
  for (std::size_t q : q_list) {
    const DenseMatrix w = random_w(pts.n, q, o.seed);
    double dense_seconds = 0.0;
    dense_apply(kernel, pts, w, &dense_seconds);
    const auto workers =
        workers_list.empty() ? std::vector<index_t>{p2.plan.p} : workers_list;
    for (index_t p : workers) {
      EvalPlan plan = p2.plan;
      plan.p = p;
      WorkerPool pool(p);
      EvalStats stats;
      evaluate(p2.cds, plan, w, pool, &stats);
      std::cout << q << ',' << p << ',' << stats.seconds << ',' << dense_seconds << "\n";
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical kernel-matrix approximation toolkit"};
  app.require_subcommand(1);

  CommonOpts o;
  std::string w_path, y_path;
  std::size_t q = 16;
  std::vector<double> bacc_list = {1e-2, 1e-3, 1e-5};
  std::vector<std::size_t> q_list = {1, 256, 1024, 2048};
  std::vector<index_t> workers_list;

  auto* inspect = app.add_subcommand("inspect", "build structure + compression artifacts");
  add_common(inspect, o);

  auto* eval = app.add_subcommand("eval", "multiply a stored matrix by W");
  add_common(eval, o);
  eval->add_option("--w", w_path, "right-hand-side matrix file (random when omitted)");
  eval->add_option("--q", q, "random W column count");
  eval->add_option("--y", y_path, "output file for Y");

  auto* accuracy = app.add_subcommand("accuracy", "bacc sweep with error oracle, CSV output");
  add_common(accuracy, o);
  accuracy->add_option("--bacc-list", bacc_list, "bacc values to sweep");
  accuracy->add_option("--q", q, "random W column count");

  auto* bench = app.add_subcommand("bench", "evaluation time vs dense GEMM, CSV output");
  add_common(bench, o);
  bench->add_option("--q-list", q_list, "W column counts");
  bench->add_option("--workers-list", workers_list, "worker counts for scalability curves");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (inspect->parsed()) return cmd_inspect(o);
    if (eval->parsed()) return cmd_eval(o, w_path, q, y_path);
    if (accuracy->parsed()) return cmd_accuracy(o, bacc_list, q);
    if (bench->parsed()) return cmd_bench(o, q_list, workers_list);
    return kExitUsage;
  } catch (const numeric_guard_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumericGuard;
  } catch (const stale_artifact_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConsistency;
  } catch (const io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
