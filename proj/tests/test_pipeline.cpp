#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "helpers.hpp"

using namespace tst;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "hmx_test_pipeline" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::uint8_t> file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  REQUIRE(in);
  std::vector<std::uint8_t> b(static_cast<std::size_t>(in.tellg()));
  in.seekg(0);
  in.read(reinterpret_cast<char*>(b.data()), static_cast<std::streamsize>(b.size()));
  return b;
}

P1Params small_p1() {
  P1Params p;
  p.leaf_size = 32;
  p.knn_k = 8;
  p.sample_budget = 64;
  p.tree_seed = 3;
  p.sample_seed = 3;
  return p;
}

P2Params small_p2() {
  P2Params p;
  p.kernel = Kernel::gaussian(1.0);
  p.bacc = 1e-4;
  p.max_rank = 32;
  p.p = 2;
  return p;
}

const char* kP1Names[] = {"points.bin", "ctree.bin", "htree.bin", "sampling.bin", "blockset.bin",
                          "p1.meta"};

}  // namespace

TEST_CASE("rerunning phase 1 on identical inputs rewrites nothing") {
  const auto dir = fresh_dir("idempotent");
  const PointSet pts = synth_points(SynthShape::UniformRandom, 300, 2, 3);
  const auto a1 = inspector_p1(pts, small_p1(), dir.string());

  std::vector<fs::file_time_type> mtimes;
  for (const char* name : kP1Names) mtimes.push_back(fs::last_write_time(dir / name));

  const auto a2 = inspector_p1(pts, small_p1(), dir.string());
  CHECK(a2.input_hash == a1.input_hash);
  CHECK(a2.artifact_hash == a1.artifact_hash);
  for (std::size_t i = 0; i < std::size(kP1Names); ++i)
    CHECK(fs::last_write_time(dir / kP1Names[i]) == mtimes[i]);
}

TEST_CASE("phase-1 artifacts reload to the structures that were saved") {
  const auto dir = fresh_dir("reload");
  const PointSet pts = synth_points(SynthShape::UniformRandom, 300, 2, 7);
  const auto built = inspector_p1(pts, small_p1(), dir.string());
  const auto loaded = load_p1(dir.string());
  CHECK(loaded.input_hash == built.input_hash);
  CHECK(loaded.artifact_hash == built.artifact_hash);
  CHECK(loaded.points.coords == built.points.coords);
  CHECK(loaded.htree.tree.perm == built.htree.tree.perm);
  CHECK(loaded.htree.near == built.htree.near);
  CHECK(loaded.htree.far == built.htree.far);
  CHECK(loaded.samples.rows == built.samples.rows);
  CHECK(loaded.near_bs.pair_count() == built.near_bs.pair_count());
  CHECK(loaded.far_bs.pair_count() == built.far_bs.pair_count());
  CHECK(loaded.params.leaf_size == built.params.leaf_size);
}

TEST_CASE("phase 2 from reloaded artifacts is bitwise equal to from-scratch") {
  const PointSet pts = synth_points(SynthShape::UniformRandom, 400, 2, 11);
  const auto dir_a = fresh_dir("reuse_a");
  const auto dir_b = fresh_dir("reuse_b");

  const auto p1a = inspector_p1(pts, small_p1(), dir_a.string());
  inspector_p2(p1a, small_p2(), dir_a.string());

  // second site: reuse persisted phase-1 work instead of redoing it
  inspector_p1(pts, small_p1(), dir_b.string());
  const auto p1b = load_p1(dir_b.string());
  inspector_p2(p1b, small_p2(), dir_b.string());

  CHECK(file_bytes(dir_a / "hmat.cds") == file_bytes(dir_b / "hmat.cds"));
  CHECK(file_bytes(dir_a / "coarsenset.bin") == file_bytes(dir_b / "coarsenset.bin"));
  CHECK(file_bytes(dir_a / "plan.json") == file_bytes(dir_b / "plan.json"));

  // rerunning phase 2 in place rewrites nothing either
  const auto mtime = fs::last_write_time(dir_a / "hmat.cds");
  inspector_p2(p1a, small_p2(), dir_a.string());
  CHECK(fs::last_write_time(dir_a / "hmat.cds") == mtime);
}

TEST_CASE("tampered phase-1 artifacts are refused") {
  const auto dir = fresh_dir("stale");
  const PointSet pts = synth_points(SynthShape::UniformRandom, 200, 2, 5);
  const auto p1 = inspector_p1(pts, small_p1(), dir.string());
  {
    std::ofstream out(dir / "sampling.bin", std::ios::binary | std::ios::app);
    out.put('\0');
  }
  CHECK_THROWS_AS(load_p1(dir.string()), stale_artifact_error);
  CHECK_THROWS_AS(inspector_p2(p1, small_p2(), dir.string()), stale_artifact_error);
}

TEST_CASE("plan json round-trips through text and file") {
  EvalPlan plan;
  plan.block_lowering_far = true;
  plan.coarsen_lowering = true;
  plan.peel_top = true;
  plan.p = 6;
  plan.block_threshold = 17;
  plan.coarsen_threshold = 5;
  const EvalPlan back = plan_from_json(plan_to_json(plan));
  CHECK(back.block_lowering_near == plan.block_lowering_near);
  CHECK(back.block_lowering_far == plan.block_lowering_far);
  CHECK(back.coarsen_lowering == plan.coarsen_lowering);
  CHECK(back.peel_top == plan.peel_top);
  CHECK(back.p == plan.p);
  CHECK(back.block_threshold == plan.block_threshold);
  CHECK(back.coarsen_threshold == plan.coarsen_threshold);

  const auto path = (fresh_dir("plan") / "plan.json").string();
  save_plan(path, plan);
  CHECK(load_plan(path).p == plan.p);
  CHECK_THROWS(plan_from_json("{\"p\": 1}"));
}

TEST_CASE("accuracy sweep tightens with bacc and accounts for its time") {
  const auto dir = fresh_dir("sweep");
  const PointSet pts = synth_points(SynthShape::UniformRandom, 600, 2, 17);
  const DenseMatrix w = random_matrix(600, 4, 17);
  const std::vector<double> baccs = {1e-1, 1e-3, 1e-5};

  const SweepResult res =
      accuracy_sweep(pts, small_p1(), small_p2(), baccs, w, dir.string(), ErrorMode::Dense);
  REQUIRE(res.rows.size() == baccs.size());
  for (std::size_t i = 0; i < baccs.size(); ++i) {
    CHECK(res.rows[i].bacc == baccs[i]);
    CHECK(res.rows[i].eps_f <= 100.0 * baccs[i]);
    if (i > 0) CHECK(res.rows[i].eps_f <= res.rows[i - 1].eps_f * (1.0 + 1e-9));
  }
  CHECK(res.csv.rfind("bacc,eps_f,eval_seconds,p2_seconds\n", 0) == 0);
  CHECK(static_cast<std::size_t>(std::count(res.csv.begin(), res.csv.end(), '\n')) ==
        1 + baccs.size());

  double accounted = res.p1_seconds + res.oracle_seconds;
  for (const auto& row : res.rows) accounted += row.eval_seconds + row.p2_seconds;
  CHECK(std::abs(res.total_seconds - accounted) <= 0.05 * res.total_seconds + 0.05);
}
