#include "lcl/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "lcl/errors.hpp"

namespace lcl {

using nlohmann::json;
namespace fs = std::filesystem;

GroundTruth gt_to_gauge(const GroundTruth& gt) {
  GroundTruth out = gt;
  if (gt.poses.empty()) return out;
  const Pose2d inv = gt.poses[0].inverse();
  for (auto& p : out.poses) p = inv.compose(p);
  for (auto& w : out.plan.walls) {
    w.a = inv.apply(w.a);
    w.b = inv.apply(w.b);
  }
  for (auto& c : out.plan.corners) c = inv.apply(c);
  for (auto& v : out.floor_polygon) v = inv.apply(v);
  return out;
}

namespace {

json similarity_json(const SimilarityTransform2d& t) {
  return json{{"delta", t.delta},
              {"phi", t.phi},
              {"origin", json::array({t.origin.x(), t.origin.y()})}};
}

json trajectory_json(const Trajectory& t) {
  json out = json::array();
  for (const auto& p : t.poses) {
    out.push_back(json::array({p.xy.x(), p.xy.y(), p.theta}));
  }
  return out;
}

json plan_json(const FloorPlan& plan) {
  json walls = json::array();
  for (const auto& w : plan.walls) {
    walls.push_back(json::array({w.a.x(), w.a.y(), w.b.x(), w.b.y()}));
  }
  json corners = json::array();
  for (const auto& c : plan.corners) {
    corners.push_back(json::array({c.x(), c.y()}));
  }
  json polygon = json::array();
  for (const auto& v : plan_polygon(plan)) {
    polygon.push_back(json::array({v.x(), v.y()}));
  }
  return json{{"walls", std::move(walls)},
              {"corners", std::move(corners)},
              {"polygon", std::move(polygon)}};
}

json plan_metrics(const FloorPlan& plan, const GroundTruth& gt,
                  double match_radius) {
  json out;
  out["walls"] = plan.walls.size();
  out["corners"] = plan.corners.size();
  if (!plan.corners.empty() && !gt.plan.corners.empty()) {
    const auto match = corner_rmse(plan, gt.plan, match_radius);
    out["corner_rmse"] = match.rmse;
    out["corners_matched"] = match.matched;
    out["corners_unmatched_pred"] = match.unmatched_pred;
    out["corners_unmatched_truth"] = match.unmatched_truth;
  }
  const auto poly = plan_polygon(plan);
  if (poly.size() >= 3 && gt.floor_polygon.size() >= 3) {
    try {
      out["fscore"] = fscore(poly, gt.floor_polygon);
    } catch (const InvalidPolygon&) {
      out["fscore"] = nullptr;
    }
  }
  return out;
}

struct SegEval {
  double mean_accuracy = 0.0;
  json per_frame = json::array();
  std::vector<std::pair<int, LabelImage>> rendered;  // for export
};

SegEval evaluate_segmentation(const Sequence& seq, const GroundTruth& gt,
                              const SimilarityTransform2d& alignment,
                              const Trajectory& traj, const FloorPlan& plan,
                              const EvalConfig& cfg) {
  SegEval out;
  const int rw = std::max(8, int(std::lround(seq.image_width * cfg.seg_scale)));
  const int rh = std::max(8, int(std::lround(seq.image_height * cfg.seg_scale)));
  double sum = 0.0;
  int count = 0;
  for (int f = 0; f < seq.size(); f += std::max(1, cfg.seg_stride)) {
    if (!seq.topdown[f]) continue;
    Mat3d r_est, r_gt;
    Vec3d c_est, c_gt;
    camera_pose_from_alignment(traj.poses[f], alignment, *seq.topdown[f],
                               &r_est, &c_est);
    camera_pose_from_mount(gt.poses[f], gt.mount, &r_gt, &c_gt);
    const auto pred =
        render_segmentation(plan.walls, gt.wall_height, r_est, c_est, seq.k,
                            seq.image_width, seq.image_height, rw, rh);
    const auto truth =
        render_segmentation(gt.plan.walls, gt.wall_height, r_gt, c_gt, seq.k,
                            seq.image_width, seq.image_height, rw, rh);
    const double acc = segmentation_accuracy(pred, truth);
    out.per_frame.push_back({{"frame", f}, {"accuracy", acc}});
    out.rendered.emplace_back(f, pred);
    sum += acc;
    ++count;
  }
  out.mean_accuracy = count > 0 ? sum / count : 0.0;
  return out;
}

void write_svg(const std::string& path, const PipelineResult& res) {
  const FloorPlan& plan =
      res.fused.plan.walls.empty() ? res.lidar_plan : res.fused.plan;
  Vec2d lo(1e9, 1e9), hi(-1e9, -1e9);
  auto grow = [&](const Vec2d& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  };
  for (const auto& w : plan.walls) {
    grow(w.a);
    grow(w.b);
  }
  for (const auto& p : res.odometry.poses) grow(p.xy);
  if ((hi - lo).norm() < 1e-6) {
    lo = Vec2d(-1, -1);
    hi = Vec2d(1, 1);
  }
  const Vec2d margin = 0.1 * (hi - lo) + Vec2d(0.5, 0.5);
  lo -= margin;
  hi += margin;

  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"%.3f "
                "%.3f %.3f %.3f\">\n",
                lo.x(), lo.y(), hi.x() - lo.x(), hi.y() - lo.y());
  out << buf;

  auto polyline = [&](const std::vector<Pose2d>& poses, const char* color) {
    if (poses.empty()) return;
    out << "  <polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"0.03\" points=\"";
    for (const auto& p : poses) {
      std::snprintf(buf, sizeof(buf), "%.4f,%.4f ", p.xy.x(), p.xy.y());
      out << buf;
    }
    out << "\"/>\n";
  };
  polyline(res.odometry.poses, "#999999");
  if (!res.fused.trajectory.poses.empty()) {
    polyline(res.fused.trajectory.poses, "#2a7d2a");
  }
  for (const auto& w : plan.walls) {
    std::snprintf(buf, sizeof(buf),
                  "  <line x1=\"%.4f\" y1=\"%.4f\" x2=\"%.4f\" y2=\"%.4f\" "
                  "stroke=\"#111111\" stroke-width=\"0.05\"/>\n",
                  w.a.x(), w.a.y(), w.b.x(), w.b.y());
    out << buf;
  }
  for (const auto& c : plan.corners) {
    std::snprintf(buf, sizeof(buf),
                  "  <circle cx=\"%.4f\" cy=\"%.4f\" r=\"0.07\" "
                  "fill=\"#c03030\"/>\n",
                  c.x(), c.y());
    out << buf;
  }
  out << "</svg>\n";
}

}  // namespace

PipelineResult run_pipeline(const Config& cfg, const PipelineOptions& opt) {
  PipelineResult res;

  Dataset ds;
  if (!opt.dataset_dir.empty()) {
    ds = read_dataset(opt.dataset_dir);
  } else {
    const World world = world_from_config(cfg);
    ds = dataset_from_sim(world,
                          generate_sequence(world, cfg.sim.frames, cfg.seed));
  }
  if (ds.frames.empty()) {
    throw IoError("dataset has no frames");
  }
  if (ds.gt) res.gt = gt_to_gauge(*ds.gt);

  res.seq = build_sequence(std::move(ds.frames), ds.meta.k,
                           ds.meta.image_width, ds.meta.image_height,
                           cfg.frontend);
  const Sequence& seq = res.seq;

  TrackerState tracker(cfg.rransac, cfg.seed ^ 0xa5a5a5a5deadbeefull);
  for (int f = 0; f < seq.size(); ++f) {
    if (f == opt.reset_tracker_at) tracker.reset();
    rransac_step(tracker, seq, f);

    json hyps = json::array();
    for (const auto& h : tracker.hypotheses) {
      hyps.push_back({{"id", h.id},
                      {"score", h.score()},
                      {"inliers", h.inlier_count},
                      {"pairs", h.pairs_evaluated},
                      {"frames", h.frames_evaluated},
                      {"transform", similarity_json(h.transform)}});
    }
    const auto best_now = select_best(tracker);
    res.telemetry.push_back(
        {{"frame", f},
         {"hypotheses", std::move(hyps)},
         {"best", best_now ? json(best_now->id) : json(nullptr)}});
  }

  res.odometry.poses = seq.odom_poses;
  res.lidar_plan = integrate_scans(seq, res.odometry, cfg.mapping);

  res.best_raw = select_best(tracker);
  if (!res.best_raw) {
    res.exit_code = 2;
    res.message =
        "no mature alignment hypothesis after " + std::to_string(seq.size()) +
        " frames (insufficient rotation or features)";
  } else {
    std::vector<int> window;
    for (int f = std::max(0, seq.size() - cfg.rransac.window); f < seq.size();
         ++f) {
      window.push_back(f);
    }
    const auto polished =
        optimize_hypothesis(*res.best_raw, seq, window, cfg.rransac);
    res.best = polished.hypothesis;

    res.lidar_refined = fused_refine(seq, res.odometry, res.lidar_plan,
                                     res.best->transform, cfg.mapping, false);
    res.fused = fused_refine(seq, res.odometry, res.lidar_plan,
                             res.best->transform, cfg.mapping, true);
  }

  // Metrics.
  json m;
  m["frames"] = seq.size();
  m["status"] = res.exit_code;
  if (res.best) {
    m["alignment"]["estimate"] = similarity_json(res.best->transform);
    m["alignment"]["score"] = res.best_raw->score();
  }
  if (res.gt) {
    m["alignment"]["truth"] = similarity_json(res.gt->alignment);
    if (res.best) {
      const auto& e = res.best->transform;
      const auto& t = res.gt->alignment;
      m["alignment"]["error"] = {
          {"scale_pct", 100.0 * std::abs(e.delta / t.delta - 1.0)},
          {"rot_deg", std::abs(wrap_angle(e.phi - t.phi)) * 180.0 / EIGEN_PI},
          {"origin_m", (e.origin - t.origin).norm()}};
    }
    m["plans"]["integrated"] =
        plan_metrics(res.lidar_plan, *res.gt, cfg.eval.corner_match_radius);
    if (res.best) {
      m["plans"]["lidar_refined"] = plan_metrics(res.lidar_refined.plan,
                                                 *res.gt,
                                                 cfg.eval.corner_match_radius);
      m["plans"]["fused"] =
          plan_metrics(res.fused.plan, *res.gt, cfg.eval.corner_match_radius);
    }
  }

  std::vector<std::pair<int, LabelImage>> rendered;
  if (res.gt && res.best) {
    auto seg = evaluate_segmentation(seq, *res.gt, res.best->transform,
                                     res.fused.trajectory, res.fused.plan,
                                     cfg.eval);
    m["segmentation"] = {{"mean_accuracy", seg.mean_accuracy},
                         {"per_frame", std::move(seg.per_frame)}};
    rendered = std::move(seg.rendered);
  }
  res.metrics = std::move(m);

  if (!opt.out_dir.empty()) {
    write_artifacts(res, cfg, opt.out_dir);
    for (const auto& [f, img] : rendered) {
      char name[64];
      std::snprintf(name, sizeof(name), "frame_%04d.ppm", f);
      write_ppm((fs::path(opt.out_dir) / "segmentation" / name).string(), img);
    }
  }
  return res;
}

void write_artifacts(const PipelineResult& res, const Config& cfg,
                     const std::string& out_dir) {
  fs::create_directories(out_dir);
  fs::create_directories(fs::path(out_dir) / "segmentation");

  {
    json t;
    t["odometry"] = trajectory_json(res.odometry);
    if (!res.lidar_refined.trajectory.poses.empty()) {
      t["lidar_refined"] = trajectory_json(res.lidar_refined.trajectory);
    }
    if (!res.fused.trajectory.poses.empty()) {
      t["fused"] = trajectory_json(res.fused.trajectory);
    }
    std::ofstream out(fs::path(out_dir) / "trajectory.json");
    if (!out) throw IoError("cannot write trajectory.json");
    out << t.dump(2) << "\n";
  }
  {
    json p;
    p["integrated"] = plan_json(res.lidar_plan);
    if (res.best) {
      p["lidar_refined"] = plan_json(res.lidar_refined.plan);
      p["fused"] = plan_json(res.fused.plan);
      p["alignment"] = similarity_json(res.best->transform);
    }
    std::ofstream out(fs::path(out_dir) / "floorplan.json");
    if (!out) throw IoError("cannot write floorplan.json");
    out << p.dump(2) << "\n";
  }
  write_svg((fs::path(out_dir) / "floorplan.svg").string(), res);
  {
    std::ofstream out(fs::path(out_dir) / "metrics.json");
    if (!out) throw IoError("cannot write metrics.json");
    out << res.metrics.dump(2) << "\n";
  }
  {
    std::ofstream out(fs::path(out_dir) / "hypotheses.jsonl");
    if (!out) throw IoError("cannot write hypotheses.jsonl");
    for (const auto& rec : res.telemetry) out << rec.dump() << "\n";
  }
}

}  // namespace lcl
