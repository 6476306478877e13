#include "hmx/pipeline.hpp"

#include <chrono>
#include <filesystem>
#include <json.hpp>

namespace hmx {

namespace {

namespace fs = std::filesystem;
using clock_t_ = std::chrono::steady_clock;

double seconds_since(clock_t_::time_point t0) {
  return std::chrono::duration<double>(clock_t_::now() - t0).count();
}

constexpr char kMetaMagic[8] = {'H', 'M', 'X', 'P', '1', '0', '0', '1'};

void write_params(ByteWriter& w, const P1Params& p) {
  w.u8(p.mode == InteractionMode::Hss ? 1 : 0);
  w.f64(p.tau);
  w.u32(p.leaf_size);
  w.u8(static_cast<std::uint8_t>(p.split));
  w.u64(p.tree_seed);
  w.u8(p.sample_mode == SampleMode::Exact ? 1 : 0);
  w.u32(p.knn_k);
  w.u32(p.sample_budget);
  w.u64(p.sample_seed);
  w.u32(p.near_blocksize);
  w.u32(p.far_blocksize);
}

P1Params read_params(ByteReader& r) {
  P1Params p;
  p.mode = r.u8() ? InteractionMode::Hss : InteractionMode::Tau;
  p.tau = r.f64();
  p.leaf_size = r.u32();
  p.split = static_cast<SplitMethod>(r.u8());
  p.tree_seed = r.u64();
  p.sample_mode = r.u8() ? SampleMode::Exact : SampleMode::Neighbor;
  p.knn_k = r.u32();
  p.sample_budget = r.u32();
  p.sample_seed = r.u64();
  p.near_blocksize = r.u32();
  p.far_blocksize = r.u32();
  return p;
}

void write_points_payload(ByteWriter& w, const PointSet& pts) {
  w.u64(pts.n);
  w.u64(pts.d);
  w.raw(pts.coords.data(), pts.coords.size() * sizeof(double));
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw io_error("cannot hash file: " + path);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::uint8_t> bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!in) throw io_error("cannot hash file: " + path);
  return fnv1a(bytes);
}

const char* kP1Files[] = {"points.bin", "ctree.bin", "htree.bin", "sampling.bin", "blockset.bin"};

std::uint64_t hash_p1_files(const std::string& dir) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char* name : kP1Files) {
    const std::uint64_t fh = hash_file(dir + "/" + name);
    ByteWriter w;
    w.u64(fh);
    h = fnv1a(w.bytes(), h);
  }
  return h;
}

std::uint64_t p1_input_hash(const PointSet& points, const P1Params& params) {
  ByteWriter w;
  write_points_payload(w, points);
  write_params(w, params);
  return fnv1a(w.bytes());
}

void save_meta(const std::string& dir, const P1Params& params, std::uint64_t input_hash,
               std::uint64_t artifact_hash) {
  ByteWriter w;
  w.magic(kMetaMagic);
  w.u64(input_hash);
  w.u64(artifact_hash);
  write_params(w, params);
  write_file_if_changed(dir + "/p1.meta", w);
}

struct Meta {
  std::uint64_t input_hash = 0;
  std::uint64_t artifact_hash = 0;
  P1Params params;
};

Meta load_meta(const std::string& dir) {
  ByteReader r = ByteReader::from_file(dir + "/p1.meta");
  r.expect_magic(kMetaMagic);
  Meta m;
  m.input_hash = r.u64();
  m.artifact_hash = r.u64();
  m.params = read_params(r);
  return m;
}

}  // namespace

InspectorP1Artifacts inspector_p1(const PointSet& points, const P1Params& params,
                                  const std::string& out_dir) {
  const auto t0 = clock_t_::now();
  points.validate();
  fs::create_directories(out_dir);

  InspectorP1Artifacts a;
  a.points = points;
  a.params = params;
  a.input_hash = p1_input_hash(points, params);

  ClusterTree tree = build_cluster_tree(points, params.leaf_size, params.split, params.tree_seed);
  a.htree = compute_interactions(points, tree, params.mode, params.tau);
  KnnParams knn;
  knn.k = params.knn_k;
  knn.seed = params.sample_seed;
  a.samples = build_samples(points, a.htree.tree, knn, params.sample_budget, params.sample_mode,
                            params.sample_seed);
  a.near_bs = blocking(a.htree, params.near_blocksize, BlockKind::Near);
  a.far_bs = blocking(a.htree, params.far_blocksize, BlockKind::Far);

  {
    ByteWriter w;
    write_points_payload(w, points);
    write_file_if_changed(out_dir + "/points.bin", w);
  }
  save_tree(out_dir + "/ctree.bin", a.htree.tree);
  save_htree(out_dir + "/htree.bin", a.htree);
  save_samples(out_dir + "/sampling.bin", a.samples);
  save_blocksets(out_dir + "/blockset.bin", a.near_bs, a.far_bs);
  a.artifact_hash = hash_p1_files(out_dir);
  save_meta(out_dir, params, a.input_hash, a.artifact_hash);

  a.seconds = seconds_since(t0);
  return a;
}

InspectorP1Artifacts load_p1(const std::string& dir) {
  const Meta meta = load_meta(dir);
  const std::uint64_t on_disk = hash_p1_files(dir);
  if (on_disk != meta.artifact_hash)
    throw stale_artifact_error("phase-1 artifacts in " + dir +
                               " do not match their recorded hash; rerun inspector-p1");

  InspectorP1Artifacts a;
  a.params = meta.params;
  a.input_hash = meta.input_hash;
  a.artifact_hash = meta.artifact_hash;
  {
    ByteReader r = ByteReader::from_file(dir + "/points.bin");
    a.points.n = r.u64();
    a.points.d = r.u64();
    a.points.coords.resize(a.points.n * a.points.d);
    r.raw(a.points.coords.data(), a.points.coords.size() * sizeof(double));
    a.points.validate();
  }
  a.htree = load_htree(dir + "/htree.bin");
  a.samples = load_samples(dir + "/sampling.bin");
  std::tie(a.near_bs, a.far_bs) = load_blocksets(dir + "/blockset.bin");
  return a;
}

InspectorP2Artifacts inspector_p2(const InspectorP1Artifacts& p1, const P2Params& params,
                                  const std::string& out_dir) {
  const auto t0 = clock_t_::now();
  const std::uint64_t on_disk = hash_p1_files(out_dir);
  if (on_disk != p1.artifact_hash)
    throw stale_artifact_error("phase-1 artifacts in " + out_dir +
                               " changed since phase 1 ran; rerun inspector-p1");

  InspectorP2Artifacts a;
  a.cm = compress(p1.htree, params.kernel, p1.points, p1.samples, params.bacc, params.max_rank);

  const index_t p = params.p ? params.p : static_cast<index_t>(default_worker_count());
  const auto sranks = srank_vector(a.cm);
  CoarsenSet cs = coarsening(p1.htree.tree, sranks, a.cm.participating, p, params.agg);
  a.cds = build_cds(a.cm, p1.near_bs, p1.far_bs, cs);
  a.cds.dim = static_cast<index_t>(p1.points.d);

  PlanDefaults defaults;
  defaults.block_threshold = params.block_threshold;
  defaults.coarsen_threshold = params.coarsen_threshold;
  defaults.p = p;
  a.plan = generate_plan(p1.htree.tree, p1.near_bs, p1.far_bs, cs, defaults);

  save_cds(out_dir + "/hmat.cds", a.cds);
  save_coarsenset(out_dir + "/coarsenset.bin", cs);
  save_plan(out_dir + "/plan.json", a.plan);

  ByteWriter hw;
  hw.u64(p1.input_hash);
  hw.u8(params.kernel.type == KernelType::Gaussian ? 0 : 1);
  hw.f64(params.kernel.bandwidth);
  hw.f64(params.bacc);
  hw.u32(params.max_rank);
  hw.u32(p);
  hw.u32(params.agg);
  a.hash = fnv1a(hw.bytes());
  a.seconds = seconds_since(t0);
  return a;
}

std::string plan_to_json(const EvalPlan& plan) {
  nlohmann::json j;
  j["block_lowering_near"] = plan.block_lowering_near;
  j["block_lowering_far"] = plan.block_lowering_far;
  j["coarsen_lowering"] = plan.coarsen_lowering;
  j["peel_top"] = plan.peel_top;
  j["p"] = plan.p;
  j["block_threshold"] = plan.block_threshold;
  j["coarsen_threshold"] = plan.coarsen_threshold;
  return j.dump(2) + "\n";
}

EvalPlan plan_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  EvalPlan plan;
  plan.block_lowering_near = j.at("block_lowering_near").get<bool>();
  plan.block_lowering_far = j.at("block_lowering_far").get<bool>();
  plan.coarsen_lowering = j.at("coarsen_lowering").get<bool>();
  plan.peel_top = j.at("peel_top").get<bool>();
  plan.p = j.at("p").get<index_t>();
  plan.block_threshold = j.at("block_threshold").get<index_t>();
  plan.coarsen_threshold = j.at("coarsen_threshold").get<index_t>();
  return plan;
}

void save_plan(const std::string& path, const EvalPlan& plan) {
  const std::string text = plan_to_json(plan);
  ByteWriter w;
  w.raw(text.data(), text.size());
  write_file_if_changed(path, w);
}

EvalPlan load_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open plan: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return plan_from_json(text);
}

SweepResult accuracy_sweep(const PointSet& points, const P1Params& p1_params, P2Params p2_params,
                           std::span<const double> bacc_list, const DenseMatrix& w,
                           const std::string& out_dir, ErrorMode err_mode,
                           std::uint64_t err_seed) {
  const auto t0 = clock_t_::now();
  SweepResult res;

  const InspectorP1Artifacts p1 = inspector_p1(points, p1_params, out_dir);
  res.p1_seconds = p1.seconds;

  std::ostringstream csv;
  csv << "bacc,eps_f,eval_seconds,p2_seconds\n";
  for (double bacc : bacc_list) {
    p2_params.bacc = bacc;
    const InspectorP2Artifacts p2 = inspector_p2(p1, p2_params, out_dir);

    EvalStats stats;
    const DenseMatrix y = evaluate(p2.cds, p2.plan, w, &stats);

    const auto t_oracle = clock_t_::now();
    const double eps = relative_error_vs(y, p2_params.kernel, points, w, err_mode, err_seed);
    res.oracle_seconds += seconds_since(t_oracle);

    SweepRow row{bacc, eps, stats.seconds, p2.seconds};
    res.rows.push_back(row);
    csv << row.bacc << ',' << row.eps_f << ',' << row.eval_seconds << ',' << row.p2_seconds
        << '\n';
  }
  res.csv = csv.str();
  res.total_seconds = seconds_since(t0);
  return res;
}

}  // namespace hmx
