#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "lcl/eval.hpp"
#include "lcl/mapping.hpp"
#include "test_support.hpp"

using namespace lcl;
using test::make_run;
using test::without_noise;

namespace {

const double kDeg = EIGEN_PI / 180.0;

Trajectory gauge_trajectory(const GroundTruth& gt) {
  Trajectory t;
  const Pose2d inv = gt.poses[0].inverse();
  for (const auto& p : gt.poses) t.poses.push_back(inv.compose(p));
  return t;
}

FloorPlan gauge_plan(const GroundTruth& gt) {
  FloorPlan plan = gt.plan;
  const Pose2d inv = gt.poses[0].inverse();
  for (auto& w : plan.walls) {
    w.a = inv.apply(w.a);
    w.b = inv.apply(w.b);
  }
  for (auto& c : plan.corners) c = inv.apply(c);
  return plan;
}

}  // namespace

TEST_CASE("scan integration") {
  SUBCASE("single scan of the square room recovers all four corners") {
    World w = without_noise(make_square_world());
    std::vector<Pose2d> traj{{Vec2d(1.6, 2.3), 0.7}};
    auto run = make_run(w, traj, 1);
    const auto plan = integrate_scans(run.seq, Trajectory{run.seq.odom_poses});
    CHECK(plan.walls.size() == 4);
    REQUIRE(plan.corners.size() >= 4);

    const auto gt_plan = gauge_plan(run.gt);
    const auto match = corner_rmse(plan, gt_plan, 0.5);
    CHECK(match.matched >= 4);
    CHECK(match.rmse < 0.01);
  }

  SUBCASE("overlapping scans of one wall merge") {
    World w = without_noise(make_square_world());
    std::vector<Pose2d> traj{{Vec2d(1.8, 2.0), 0.1}, {Vec2d(1.95, 2.05), 0.25}};
    auto run = make_run(w, traj, 2);
    const auto plan = integrate_scans(run.seq, Trajectory{run.seq.odom_poses});
    CHECK(plan.walls.size() == 4);  // not eight
  }

  SUBCASE("empty input gives an empty plan") {
    Sequence seq;
    const auto plan = integrate_scans(seq, Trajectory{});
    CHECK(plan.walls.empty());
    CHECK(plan.corners.empty());
  }
}

TEST_CASE("residual jacobians match finite differences") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double step = 1e-6;

  SUBCASE("point-to-wall") {
    for (int trial = 0; trial < 50; ++trial) {
      const Vec2d p(2.0 * u(rng), 2.0 * u(rng));
      Pose2d pose{Vec2d(u(rng), u(rng)), u(rng)};
      const double alpha = 2.0 * u(rng);
      const double d = u(rng);

      Eigen::Matrix<double, 1, 3> jp;
      Eigen::Matrix<double, 1, 2> jw;
      point_wall_residual(p, pose, alpha, d, &jp, &jw);

      for (int k = 0; k < 3; ++k) {
        Pose2d lo = pose, hi = pose;
        if (k < 2) {
          lo.xy[k] -= step;
          hi.xy[k] += step;
        } else {
          lo.theta -= step;
          hi.theta += step;
        }
        const double fd = (point_wall_residual(p, hi, alpha, d) -
                           point_wall_residual(p, lo, alpha, d)) /
                          (2 * step);
        CHECK(jp(0, k) == doctest::Approx(fd).epsilon(1e-5));
      }
      const double fd_a = (point_wall_residual(p, pose, alpha + step, d) -
                           point_wall_residual(p, pose, alpha - step, d)) /
                          (2 * step);
      const double fd_d = (point_wall_residual(p, pose, alpha, d + step) -
                           point_wall_residual(p, pose, alpha, d - step)) /
                          (2 * step);
      CHECK(jw(0, 0) == doctest::Approx(fd_a).epsilon(1e-5));
      CHECK(jw(0, 1) == doctest::Approx(fd_d).epsilon(1e-5));
    }
  }

  SUBCASE("epipolar") {
    CameraIntrinsicsd k{700.0, 680.0, 640.0, 360.0};
    for (int trial = 0; trial < 50; ++trial) {
      SimilarityTransform2d h{1.0 + 0.3 * std::abs(u(rng)), u(rng),
                              Vec2d(0.2 * u(rng), 0.2 * u(rng))};
      // Valid rectification frames from tilted cameras.
      World w = make_square_world();
      w.mount.pitch = (15.0 + 8.0 * u(rng)) * kDeg;
      w.mount.roll = (3.0 + 2.0 * u(rng)) * kDeg;
      Mat3d r_cw;
      Vec3d c_w;
      camera_pose_from_mount(Pose2d{}, w.mount, &r_cw, &c_w);
      const auto frame = topdown_frame(true_vanishing_point(r_cw, k, 1e-3), k);

      Pose2d pose_i{Vec2d(u(rng), u(rng)), 0.5 * u(rng)};
      Pose2d pose_j{pose_i.xy + Vec2d(0.3 + 0.2 * u(rng), 0.2 * u(rng)),
                    pose_i.theta + 0.4 * u(rng)};
      const Vec2d px_i(600 + 300 * u(rng), 500 + 250 * u(rng));
      const Vec2d px_j(620 + 300 * u(rng), 520 + 250 * u(rng));

      double r0;
      Eigen::Matrix<double, 1, 3> ji, jj;
      REQUIRE(epipolar_pose_residual(px_i, px_j, pose_i, pose_j, h, frame,
                                     frame, k, 1e-4, &r0, &ji, &jj));

      auto value = [&](const Pose2d& pi, const Pose2d& pj) {
        double r;
        REQUIRE(epipolar_pose_residual(px_i, px_j, pi, pj, h, frame, frame, k,
                                       1e-4, &r));
        return r;
      };
      const double scale = std::max(1.0, std::abs(r0));
      for (int kk = 0; kk < 3; ++kk) {
        Pose2d lo = pose_i, hi = pose_i;
        if (kk < 2) {
          lo.xy[kk] -= step;
          hi.xy[kk] += step;
        } else {
          lo.theta -= step;
          hi.theta += step;
        }
        const double fd = (value(hi, pose_j) - value(lo, pose_j)) / (2 * step);
        CHECK(std::abs(ji(0, kk) - fd) / scale < 1e-5);
      }
      for (int kk = 0; kk < 3; ++kk) {
        Pose2d lo = pose_j, hi = pose_j;
        if (kk < 2) {
          lo.xy[kk] -= step;
          hi.xy[kk] += step;
        } else {
          lo.theta -= step;
          hi.theta += step;
        }
        const double fd = (value(pose_i, hi) - value(pose_i, lo)) / (2 * step);
        CHECK(std::abs(jj(0, kk) - fd) / scale < 1e-5);
      }
    }
  }
}

TEST_CASE("fused refinement") {
  SUBCASE("noise-free ground truth is a fixed point") {
    World w = without_noise(make_square_world());
    auto run = make_run(w, 12, 3);
    const auto traj = gauge_trajectory(run.gt);
    const auto plan = integrate_scans(run.seq, traj);
    const auto out =
        fused_refine(run.seq, traj, plan, run.gt.alignment, {}, true);
    CHECK(out.converged);
    CHECK(out.final_cost <= out.initial_cost);
    CHECK(out.final_cost < 1e-12);
    for (std::size_t f = 0; f < traj.poses.size(); ++f) {
      CHECK((out.trajectory.poses[f].xy - traj.poses[f].xy).norm() < 1e-6);
      CHECK(std::abs(wrap_angle(out.trajectory.poses[f].theta -
                                traj.poses[f].theta)) < 1e-6);
    }
  }

  SUBCASE("single frame passes through") {
    World w = without_noise(make_square_world());
    auto run = make_run(w, 1, 4);
    Trajectory traj{run.seq.odom_poses};
    const auto plan = integrate_scans(run.seq, traj);
    const auto out =
        fused_refine(run.seq, traj, plan, run.gt.alignment, {}, true);
    CHECK(out.trajectory.poses.size() == 1);
    CHECK(out.trajectory.poses[0].xy.norm() == 0.0);
  }

  SUBCASE("cost never increases on noisy data") {
    auto run = make_run(make_square_world(), 15, 5);
    Trajectory traj{run.seq.odom_poses};
    const auto plan = integrate_scans(run.seq, traj);
    const auto out =
        fused_refine(run.seq, traj, plan, run.gt.alignment, {}, true);
    CHECK(out.final_cost <= out.initial_cost);
  }

  SUBCASE("gauge invariance under a rigid remap") {
    auto run = make_run(make_square_world(), 10, 6);
    Trajectory traj{run.seq.odom_poses};
    const auto plan = integrate_scans(run.seq, traj);
    const auto gt_plan = gauge_plan(run.gt);

    const auto base =
        fused_refine(run.seq, traj, plan, run.gt.alignment, {}, true);
    const auto rmse_base = corner_rmse(base.plan, gt_plan, 1.0).rmse;

    const Pose2d g{Vec2d(3.0, -2.0), 0.8};
    Trajectory traj_g;
    for (const auto& p : traj.poses) traj_g.poses.push_back(g.compose(p));
    FloorPlan plan_g = plan;
    for (auto& wl : plan_g.walls) {
      wl.a = g.apply(wl.a);
      wl.b = g.apply(wl.b);
    }
    for (auto& c : plan_g.corners) c = g.apply(c);
    FloorPlan gt_g = gt_plan;
    for (auto& wl : gt_g.walls) {
      wl.a = g.apply(wl.a);
      wl.b = g.apply(wl.b);
    }
    for (auto& c : gt_g.corners) c = g.apply(c);

    const auto moved =
        fused_refine(run.seq, traj_g, plan_g, run.gt.alignment, {}, true);
    const auto rmse_moved = corner_rmse(moved.plan, gt_g, 1.0).rmse;
    CHECK(std::abs(rmse_base - rmse_moved) < 1e-9);
  }

  SUBCASE("corridor fusion beats the LiDAR-only refinement") {
    World c = make_corridor_world();
    auto run = make_run(c, 60, 11);
    Trajectory traj{run.seq.odom_poses};
    const auto plan = integrate_scans(run.seq, traj);
    const auto gt_plan = gauge_plan(run.gt);

    const auto lidar_only =
        fused_refine(run.seq, traj, plan, run.gt.alignment, {}, false);
    const auto fused =
        fused_refine(run.seq, traj, plan, run.gt.alignment, {}, true);

    // Truth corners the plan misses count at the match radius, so dropping a
    // drifted corner cannot look like an improvement.
    auto capped = [&](const FloorPlan& p) {
      const auto m = corner_rmse(p, gt_plan, 1.0);
      const int n = m.matched + m.unmatched_truth;
      return std::sqrt((m.matched * m.rmse * m.rmse + m.unmatched_truth) / n);
    };
    const double rmse_lidar = capped(lidar_only.plan);
    const double rmse_fused = capped(fused.plan);
    MESSAGE("corridor corner RMSE lidar-only=", rmse_lidar,
            " fused=", rmse_fused);
    CHECK(rmse_fused < rmse_lidar);
  }
}

TEST_CASE("plan polygon chaining") {
  World w = without_noise(make_square_world());
  auto run = make_run(w, 10, 12);
  const auto plan = integrate_scans(run.seq, Trajectory{run.seq.odom_poses});
  const auto poly = plan_polygon(plan);
  REQUIRE(poly.size() == 4);
  CHECK(std::abs(std::abs(polygon_area(poly)) - 16.0) < 0.5);
}
