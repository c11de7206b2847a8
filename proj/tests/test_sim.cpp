#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "lcl/geometry.hpp"
#include "lcl/sim.hpp"

using namespace lcl;

namespace {

World noise_free(World w) {
  w.noise.range_sigma = 0.0;
  w.noise.pixel_sigma = 0.0;
  w.noise.dropout = 0.0;
  return w;
}

}  // namespace

TEST_CASE("ray-cast ranges in the square room") {
  World w = noise_free(make_square_world());
  w.lidar.beams = 8;  // bearings at multiples of 45 degrees
  std::mt19937_64 rng(1);
  const auto scan = simulate_scan(w, Pose2d{Vec2d(2, 2), 0.0}, rng);
  REQUIRE(scan.points.size() == 8);
  // Beam index 4 points along +x, index 5 at +45 degrees.
  CHECK(scan.point_valid(4));
  CHECK(scan.points[4].norm() == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(scan.point_valid(5));
  CHECK(scan.points[5].norm() ==
        doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-12));

  SUBCASE("pose outside throws") {
    CHECK_THROWS_AS(simulate_scan(w, Pose2d{Vec2d(9, 9), 0.0}, rng),
                    PoseOutsideWorld);
    CHECK_THROWS_AS(simulate_scan(w, Pose2d{Vec2d(-1, 2), 0.0}, rng),
                    PoseOutsideWorld);
  }

  SUBCASE("occlusion by clutter") {
    World c = noise_free(make_cluttered_world());
    c.lidar.beams = 360;
    std::mt19937_64 r2(2);
    const Pose2d pose{Vec2d(3, 2.5), 0.0};
    const auto s = simulate_scan(c, pose, r2);
    // Every return lies on some wall segment (within numeric slack).
    const auto walls = c.walls();
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      if (!s.point_valid(i)) continue;
      const Vec2d p = pose.apply(s.points[i]);
      double best = 1e9;
      for (const auto& wall : walls) {
        const Vec2d d = wall.direction();
        const double t = std::clamp(d.dot(p - wall.a), 0.0, wall.length());
        best = std::min(best, (wall.a + t * d - p).norm());
      }
      CHECK(best < 1e-9);
    }
  }
}

TEST_CASE("ground labels and vanishing point are exact") {
  World w = noise_free(make_square_world());
  std::mt19937_64 rng(3);
  const auto field = scatter_features(w, rng);
  for (const auto& f : field.points) {
    if (f.on_ground) CHECK(f.position.z() == 0.0);
    if (!f.on_ground) CHECK(f.position.z() < 0.0);
  }

  const Pose2d pose{Vec2d(2.0, 1.7), 0.4};
  const auto obs = simulate_camera(w, pose, field, rng);

  // Every vertical line's extension passes through the vanishing point.
  const Vec2d vp(obs.vp.u, obs.vp.v);
  for (const auto& seg : obs.lines.vertical) {
    const Vec2d d = (seg.b - seg.a).normalized();
    const Vec2d to = vp - seg.a;
    const double cross = d.x() * to.y() - d.y() * to.x();
    CHECK(std::abs(cross) / std::max(to.norm(), 1.0) < 1e-9);
  }

  SUBCASE("flat camera is flagged degenerate") {
    World flat = w;
    flat.mount.pitch = 0.0;
    flat.mount.roll = 0.0;
    CHECK_THROWS_AS(simulate_camera(flat, pose, field, rng),
                    DegenerateVanishingPoint);
  }
}

TEST_CASE("true alignment closes the projection loop") {
  // p_lidar = delta R_phi p_topdown + origin must hold exactly for floor
  // points seen by the camera, with the top-down frame built from the exact
  // vanishing point.
  World w = noise_free(make_square_world());
  std::mt19937_64 rng(5);
  const auto gt = true_alignment(w.mount, w.intrinsics);
  CHECK(gt.delta == doctest::Approx(w.mount.height).epsilon(1e-12));

  std::uniform_real_distribution<double> u(0.3, 3.7);
  std::uniform_real_distribution<double> ang(-3.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Pose2d pose{Vec2d(u(rng), u(rng)), ang(rng)};
    Mat3d r_cw;
    Vec3d c_w;
    camera_pose_from_mount(pose, w.mount, &r_cw, &c_w);
    const auto vp = true_vanishing_point(r_cw, w.intrinsics, 1e-3);
    const auto frame = topdown_frame(vp, w.intrinsics);

    const Vec3d p_world(u(rng), u(rng), 0.0);  // floor point
    const Vec3d p_cam = r_cw.transpose() * (p_world - c_w);
    if (p_cam.z() < 0.2) continue;
    const Vec2d px = w.intrinsics.project(p_cam);
    const Vec2d p_g = project_topdown(px, frame);
    const Vec2d p_l = pose.apply_inverse(Vec2d(p_world.x(), p_world.y()));
    CHECK((gt.apply(p_g) - p_l).norm() < 1e-9);
  }
}

TEST_CASE("noise-free boundary lines match the reprojected floor plan") {
  World w = noise_free(make_square_world());
  std::mt19937_64 rng(7);
  const auto field = scatter_features(w, rng);
  const auto gt = true_alignment(w.mount, w.intrinsics);
  const auto walls = w.walls();

  const Pose2d pose{Vec2d(2.3, 2.1), -0.7};
  const auto obs = simulate_camera(w, pose, field, rng);
  Mat3d r_cw;
  Vec3d c_w;
  camera_pose_from_mount(pose, w.mount, &r_cw, &c_w);
  const auto frame = topdown_frame(
      true_vanishing_point(r_cw, w.intrinsics, 1e-3), w.intrinsics);

  REQUIRE(!obs.lines.horizontal.empty());
  int boundary_lines = 0;
  for (std::size_t l = 0; l < obs.lines.horizontal.size(); ++l) {
    const int wall = obs.horizontal_wall[l];
    if (wall < 0) continue;  // texture distractor
    ++boundary_lines;
    const auto& seg = obs.lines.horizontal[l];
    const Vec2d dir = (seg.b - seg.a).normalized();
    const Vec2d n(-dir.y(), dir.x());
    // Wall base points must reproject onto the emitted line.
    for (double t : {0.25, 0.5, 0.75}) {
      const Vec2d base = walls[wall].a + t * (walls[wall].b - walls[wall].a);
      const Vec2d p_l = pose.apply_inverse(base);
      const Vec2d p_g = gt.apply_inverse(p_l);
      const Vec3d ray = topdown_to_image_ray(p_g, frame, w.intrinsics);
      if (ray.z() <= 0) continue;
      const Vec2d px(ray.x() / ray.z(), ray.y() / ray.z());
      CHECK(std::abs(n.dot(px - seg.a)) < 1e-9);
    }
  }
  CHECK(boundary_lines >= 2);
}

TEST_CASE("sequence generation") {
  World w = make_square_world();
  SUBCASE("preset spacing stays in 10-20 cm") {
    std::mt19937_64 rng(11);
    const auto traj = preset_trajectory(w, 30, rng);
    REQUIRE(traj.size() == 30);
    for (std::size_t i = 1; i < traj.size(); ++i) {
      const double d = (traj[i].xy - traj[i - 1].xy).norm();
      CHECK(d > 0.05);
      CHECK(d < 0.25);
    }
  }

  SUBCASE("seeded runs are identical") {
    const auto a = generate_sequence(w, 8, 42);
    const auto b = generate_sequence(w, 8, 42);
    REQUIRE(a.frames.size() == b.frames.size());
    for (std::size_t f = 0; f < a.frames.size(); ++f) {
      REQUIRE(a.frames[f].scan.points.size() == b.frames[f].scan.points.size());
      for (std::size_t i = 0; i < a.frames[f].scan.points.size(); ++i) {
        CHECK(a.frames[f].scan.points[i] == b.frames[f].scan.points[i]);
      }
      REQUIRE(a.frames[f].tracks.size() == b.frames[f].tracks.size());
      for (std::size_t i = 0; i < a.frames[f].tracks.size(); ++i) {
        CHECK(a.frames[f].tracks[i].id == b.frames[f].tracks[i].id);
        CHECK(a.frames[f].tracks[i].px == b.frames[f].tracks[i].px);
      }
    }
    CHECK(a.gt.alignment.delta == b.gt.alignment.delta);
  }

  SUBCASE("frames carry enough shared tracks") {
    const auto seq = generate_sequence(w, 10, 9);
    for (std::size_t f = 1; f < seq.frames.size(); ++f) {
      std::size_t shared = 0;
      for (const auto& t1 : seq.frames[f - 1].tracks) {
        for (const auto& t2 : seq.frames[f].tracks) {
          if (t1.id == t2.id) {
            ++shared;
            break;
          }
        }
      }
      CHECK(shared >= 8);
    }
  }

  SUBCASE("corridor preset is traversable") {
    World c = make_corridor_world();
    const auto seq = generate_sequence(c, 75, 3);
    CHECK(seq.frames.size() == 75);
    // Net travel spans most of the corridor.
    CHECK(seq.gt.poses.back().xy.x() - seq.gt.poses.front().xy.x() > 9.0);
  }
}
