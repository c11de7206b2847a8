#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "lcl/pipeline.hpp"
#include "test_support.hpp"

using namespace lcl;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), {}};
}

struct TmpDir {
  fs::path path;
  explicit TmpDir(const std::string& name) : path(name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TmpDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("dataset round trip") {
  World w = make_square_world();
  const auto sim = generate_sequence(w, 6, 21);
  const auto ds = dataset_from_sim(w, sim);

  TmpDir tmp("pipeline_tmp_roundtrip");
  write_dataset(tmp.path.string(), ds);
  const auto back = read_dataset(tmp.path.string());

  CHECK(back.meta.k.fx == ds.meta.k.fx);
  CHECK(back.meta.image_width == ds.meta.image_width);
  CHECK(back.meta.lidar_max_range == ds.meta.lidar_max_range);
  REQUIRE(back.frames.size() == ds.frames.size());
  for (std::size_t f = 0; f < ds.frames.size(); ++f) {
    CHECK(back.frames[f].scan.points.size() ==
          ds.frames[f].scan.valid_count());
    REQUIRE(back.frames[f].tracks.size() == ds.frames[f].tracks.size());
    for (std::size_t i = 0; i < ds.frames[f].tracks.size(); ++i) {
      CHECK(back.frames[f].tracks[i].id == ds.frames[f].tracks[i].id);
      CHECK(back.frames[f].tracks[i].px == ds.frames[f].tracks[i].px);
    }
    CHECK(back.frames[f].lines.horizontal.size() ==
          ds.frames[f].lines.horizontal.size());
    CHECK(back.frames[f].vp.u == ds.frames[f].vp.u);
  }
  REQUIRE(back.gt.has_value());
  CHECK(back.gt->alignment.delta == ds.gt->alignment.delta);
  CHECK(back.gt->alignment.phi == ds.gt->alignment.phi);
  CHECK(back.gt->poses.size() == ds.gt->poses.size());
  CHECK(back.gt->track_on_ground.size() == ds.gt->track_on_ground.size());

  SUBCASE("missing directory raises an io error") {
    CHECK_THROWS_AS(read_dataset("does_not_exist_anywhere"), IoError);
  }
}

TEST_CASE("config parsing") {
  Config cfg;
  cfg = parse_config(
      "seed = 9\n"
      "[sim]\n"
      "world = corridor   # preset\n"
      "frames = 40\n"
      "pixel_sigma = 1.5\n"
      "[rransac]\n"
      "budget = 10\n"
      "mode = baseline\n",
      cfg);
  CHECK(cfg.seed == 9);
  CHECK(cfg.sim.world == "corridor");
  CHECK(cfg.sim.frames == 40);
  CHECK(cfg.sim.noise.pixel_sigma == 1.5);
  CHECK(cfg.rransac.budget == 10);
  CHECK(cfg.rransac.mode == GenerationMode::kBoundaryCorners);

  SUBCASE("unknown key is rejected") {
    CHECK_THROWS_AS(parse_config("[sim]\nnot_a_key = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("rransac.budget = soon\n"), ConfigError);
  }

  SUBCASE("dump/parse round trip is stable") {
    const std::string once = dump_config(cfg);
    const Config reparsed = parse_config(once);
    CHECK(dump_config(reparsed) == once);
  }
}

TEST_CASE("pipeline on a noise-free square run") {
  Config cfg;
  cfg.seed = 5;
  cfg.sim.frames = 14;
  cfg.sim.noise = {0.0, 0.0, 0.0};
  cfg.eval.seg_stride = 7;

  const auto res = run_pipeline(cfg);
  REQUIRE(res.exit_code == 0);
  REQUIRE(res.best.has_value());
  REQUIRE(res.gt.has_value());

  const auto& est = res.best->transform;
  const auto& gt = res.gt->alignment;
  CHECK(std::abs(est.delta / gt.delta - 1.0) < 1e-3);
  CHECK(std::abs(wrap_angle(est.phi - gt.phi)) < 1e-3);
  CHECK((est.origin - gt.origin).norm() < 5e-3);

  CHECK(res.telemetry.size() == 14);
  CHECK(res.metrics["plans"].contains("fused"));
  CHECK(res.metrics["segmentation"]["mean_accuracy"].get<double>() > 99.0);
}

TEST_CASE("pipeline artifacts are deterministic") {
  Config cfg;
  cfg.seed = 7;
  cfg.sim.frames = 10;
  cfg.eval.seg_stride = 5;

  TmpDir a("pipeline_tmp_a"), b("pipeline_tmp_b");
  PipelineOptions opt_a;
  opt_a.out_dir = a.path.string();
  PipelineOptions opt_b;
  opt_b.out_dir = b.path.string();
  const auto ra = run_pipeline(cfg, opt_a);
  const auto rb = run_pipeline(cfg, opt_b);
  CHECK(ra.exit_code == rb.exit_code);

  for (const char* name :
       {"trajectory.json", "floorplan.json", "floorplan.svg", "metrics.json",
        "hypotheses.jsonl"}) {
    CAPTURE(name);
    CHECK(slurp(a.path / name) == slurp(b.path / name));
  }
  // Rendered segmentation rasters too.
  int rasters = 0;
  for (const auto& e : fs::directory_iterator(a.path / "segmentation")) {
    CHECK(slurp(e.path()) == slurp(b.path / "segmentation" / e.path().filename()));
    ++rasters;
  }
  CHECK(rasters > 0);
}

TEST_CASE("pipeline reports recoverable failure without motion") {
  // Straight-line path: the motion-constrained subsets never materialize.
  World w = make_square_world();
  std::vector<Pose2d> traj;
  for (int i = 0; i < 10; ++i) traj.push_back({Vec2d(0.8 + 0.15 * i, 2.0), 0.0});
  const auto sim = generate_sequence(w, traj, 3);

  TmpDir tmp("pipeline_tmp_straight");
  write_dataset(tmp.path.string(), dataset_from_sim(w, sim));

  Config cfg;
  PipelineOptions opt;
  opt.dataset_dir = tmp.path.string();
  const auto res = run_pipeline(cfg, opt);
  CHECK(res.exit_code == 2);
  CHECK(!res.message.empty());
  CHECK(!res.best.has_value());
}

TEST_CASE("tracker reset mid-run still recovers") {
  Config cfg;
  cfg.seed = 11;
  cfg.sim.frames = 24;
  PipelineOptions opt;
  opt.reset_tracker_at = 12;
  const auto res = run_pipeline(cfg, opt);
  CHECK(res.exit_code == 0);
  REQUIRE(res.best.has_value());
  // The bank was emptied at the reset frame and repopulated afterwards.
  CHECK(res.telemetry[12]["hypotheses"].size() <=
        res.telemetry[11]["hypotheses"].size());
  REQUIRE(res.gt.has_value());
  CHECK(std::abs(res.best->transform.delta / res.gt->alignment.delta - 1.0) <
        0.05);
}
