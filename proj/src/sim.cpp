#include "lcl/sim.hpp"

#include <algorithm>
#include <cmath>

#include "lcl/errors.hpp"
#include "lcl/geometry.hpp"

namespace lcl {

namespace {

double cross2(const Vec2d& a, const Vec2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

/// Ray (o, d) against segment (a, b); returns the ray parameter t > eps and
/// the segment parameter s, or false when parallel or outside.
bool ray_segment(const Vec2d& o, const Vec2d& d, const Vec2d& a,
                 const Vec2d& b, double* t_out, double* s_out = nullptr) {
  const Vec2d e = b - a;
  const double denom = cross2(d, e);
  if (std::abs(denom) < 1e-14) return false;
  const Vec2d ao = a - o;
  const double t = cross2(ao, e) / denom;
  const double s = cross2(ao, d) / denom;
  if (t <= 1e-9 || s < -1e-12 || s > 1.0 + 1e-12) return false;
  *t_out = t;
  if (s_out) *s_out = s;
  return true;
}

bool point_in_polygon(const Vec2d& p, const std::vector<Vec2d>& poly) {
  bool in = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2d& a = poly[i];
    const Vec2d& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = a.x() + (p.y() - a.y()) / (b.y() - a.y()) * (b.x() - a.x());
      if (p.x() < x) in = !in;
    }
  }
  return in;
}

/// True when the open planar segment from `from` to `to` crosses any wall
/// strictly before reaching `to` (endpoint contact does not block).
bool segment_blocked(const std::vector<LineSegment2>& walls, const Vec2d& from,
                     const Vec2d& to) {
  const Vec2d d = to - from;
  const double len = d.norm();
  if (len < 1e-12) return false;
  for (const auto& w : walls) {
    double t;
    if (ray_segment(from, d, w.a, w.b, &t) && t < 1.0 - 1e-6) return true;
  }
  return false;
}

/// Clip a 3D segment (camera coords) to z >= znear, project, then clip to the
/// image rectangle. Returns false when nothing remains.
bool project_segment(const CameraIntrinsicsd& k, double w, double h,
                     Vec3d p, Vec3d q, Vec2d* a, Vec2d* b) {
  const double znear = 0.05;
  if (p.z() < znear && q.z() < znear) return false;
  if (p.z() < znear) p = q + (p - q) * ((q.z() - znear) / (q.z() - p.z()));
  if (q.z() < znear) q = p + (q - p) * ((p.z() - znear) / (p.z() - q.z()));
  Vec2d pa = k.project(p), pb = k.project(q);

  // Liang-Barsky against [0,w]x[0,h].
  double t0 = 0.0, t1 = 1.0;
  const Vec2d d = pb - pa;
  const double pcs[4] = {-d.x(), d.x(), -d.y(), d.y()};
  const double qcs[4] = {pa.x(), w - pa.x(), pa.y(), h - pa.y()};
  for (int i = 0; i < 4; ++i) {
    if (std::abs(pcs[i]) < 1e-12) {
      if (qcs[i] < 0) return false;
      continue;
    }
    const double r = qcs[i] / pcs[i];
    if (pcs[i] < 0) {
      t0 = std::max(t0, r);
    } else {
      t1 = std::min(t1, r);
    }
  }
  if (t0 >= t1) return false;
  *a = pa + t0 * d;
  *b = pa + t1 * d;
  return true;
}

Mat3d rotz3(double a) {
  Mat3d r = Mat3d::Identity();
  r.topLeftCorner<2, 2>() = rot2(a);
  return r;
}

Mat3d rotx3(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3d r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}

}  // namespace

std::vector<LineSegment2> World::walls() const {
  std::vector<LineSegment2> out;
  const auto push_ring = [&out](const std::vector<Vec2d>& ring) {
    for (std::size_t i = 0; i < ring.size(); ++i) {
      LineSegment2 seg;
      seg.a = ring[i];
      seg.b = ring[(i + 1) % ring.size()];
      out.push_back(seg);
    }
  };
  push_ring(floor);
  for (const auto& ring : clutter) push_ring(ring);
  return out;
}

bool World::inside(const Vec2d& p) const {
  if (!point_in_polygon(p, floor)) return false;
  for (const auto& ring : clutter) {
    if (point_in_polygon(p, ring)) return false;
  }
  return true;
}

World make_square_world() {
  World w;
  w.name = "square";
  w.floor = {{0, 0}, {4, 0}, {4, 4}, {0, 4}};
  return w;
}

World make_cluttered_world() {
  World w;
  w.name = "cluttered";
  w.floor = {{0, 0}, {6, 0}, {6, 5}, {0, 5}};
  // Furniture-sized boxes against the walls; wall-like from the LiDAR's view.
  w.clutter = {
      {{0.8, 0.0}, {1.6, 0.0}, {1.6, 0.45}, {0.8, 0.45}},
      {{5.45, 1.8}, {6.0, 1.8}, {6.0, 2.9}, {5.45, 2.9}},
      {{2.6, 4.55}, {3.8, 4.55}, {3.8, 5.0}, {2.6, 5.0}},
  };
  w.features.texture_lines = 2;
  return w;
}

World make_corridor_world() {
  World w;
  w.name = "corridor";
  w.floor = {{0, 0}, {12, 0}, {12, 2.2}, {0, 2.2}};
  w.lidar.max_range = 4.5;
  // Feature-rich endcaps, sparse side walls (low texture).
  w.features = {3, 2, 1};
  w.per_wall_features = {
      {3, 2, 1},   // y = 0 side wall
      {10, 8, 2},  // x = 14 endcap
      {3, 2, 1},   // y = 2.2 side wall
      {10, 8, 2},  // x = 0 endcap
  };
  w.floor_points = 40;
  return w;
}

World make_world(const std::string& name) {
  if (name == "square") return make_square_world();
  if (name == "cluttered") return make_cluttered_world();
  if (name == "corridor") return make_corridor_world();
  throw ConfigError("unknown world preset: " + name);
}

void camera_pose_from_mount(const Pose2d& lidar_pose, const CameraMount& mount,
                            Mat3d* r_cw, Vec3d* c_w) {
  // Nominal camera at heading 0: x right, y down(world z), z forward.
  Mat3d r_c0;
  r_c0 << 0, 0, 1, 1, 0, 0, 0, 1, 0;
  *r_cw = rotz3(lidar_pose.theta + mount.yaw) * r_c0 * rotx3(-mount.pitch) *
          rotz3(mount.roll);
  const Vec2d c = lidar_pose.apply(mount.offset);
  *c_w = Vec3d(c.x(), c.y(), -mount.height);
}

VanishingPointd true_vanishing_point(const Mat3d& r_cw,
                                     const CameraIntrinsicsd& k,
                                     double min_pitch) {
  const Vec3d down_cam = r_cw.transpose() * Vec3d(0, 0, 1);
  if (std::abs(down_cam.z()) < std::sin(min_pitch)) {
    throw DegenerateVanishingPoint("camera tilt below minimum pitch");
  }
  const Vec3d p = k.matrix() * down_cam;
  return {p.x() / p.z(), p.y() / p.z()};
}

SimilarityTransform2d true_alignment(const CameraMount& mount,
                                     const CameraIntrinsicsd& k) {
  Mat3d r_cw;
  Vec3d c_w;
  camera_pose_from_mount(Pose2d{}, mount, &r_cw, &c_w);
  const auto vp = true_vanishing_point(r_cw, k, 1e-4);
  const auto frame = topdown_frame(vp, k);
  // e_X expressed in the world; horizontal by construction.
  const Vec3d ex_w = r_cw * Vec3d(frame.e_x());
  SimilarityTransform2d gt;
  gt.delta = mount.height;
  gt.phi = std::atan2(ex_w.y(), ex_w.x());
  gt.origin = mount.offset;
  return gt;
}

LidarScan simulate_scan(const World& world, const Pose2d& pose,
                        std::mt19937_64& rng) {
  if (!world.inside(pose.xy)) {
    throw PoseOutsideWorld("scan pose outside free space");
  }
  const auto walls = world.walls();
  std::normal_distribution<double> noise(0.0, world.noise.range_sigma);

  LidarScan scan;
  const int n = world.lidar.beams;
  scan.points.reserve(n);
  scan.valid.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double bearing = -EIGEN_PI + i * (2.0 * EIGEN_PI / n);
    const double world_angle = pose.theta + bearing;
    const Vec2d dir(std::cos(world_angle), std::sin(world_angle));
    double best = std::numeric_limits<double>::infinity();
    for (const auto& w : walls) {
      double t;
      if (ray_segment(pose.xy, dir, w.a, w.b, &t)) best = std::min(best, t);
    }
    double range = best;
    if (std::isfinite(range) && world.noise.range_sigma > 0) {
      range += noise(rng);
    }
    const bool ok = std::isfinite(range) && range >= world.lidar.min_range &&
                    range <= world.lidar.max_range;
    scan.points.emplace_back(range * std::cos(bearing), range * std::sin(bearing));
    scan.valid.push_back(ok ? 1 : 0);
    if (!ok) scan.points.back().setZero();
  }
  return scan;
}

FeatureField scatter_features(const World& world, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  FeatureField field;
  const auto walls = world.walls();
  int next_id = 0;
  for (std::size_t w = 0; w < walls.size(); ++w) {
    const auto spec = w < world.per_wall_features.size()
                          ? world.per_wall_features[w]
                          : world.features;
    const Vec2d e = walls[w].b - walls[w].a;
    for (int i = 0; i < spec.base_points; ++i) {
      const double t =
          std::clamp((i + 0.5) / spec.base_points + (u01(rng) - 0.5) * 0.6 / spec.base_points,
                     0.02, 0.98);
      const Vec2d p = walls[w].a + t * e;
      field.points.push_back({next_id++, Vec3d(p.x(), p.y(), 0.0), true,
                              static_cast<int>(w)});
    }
    for (int i = 0; i < spec.interior_points; ++i) {
      const double t = 0.05 + 0.9 * u01(rng);
      const double h = 0.3 + (0.85 * world.wall_height - 0.3) * u01(rng);
      const Vec2d p = walls[w].a + t * e;
      field.points.push_back({next_id++, Vec3d(p.x(), p.y(), -h), false,
                              static_cast<int>(w)});
    }
    std::vector<double> heights;
    for (int i = 0; i < spec.texture_lines; ++i) {
      heights.push_back(0.3 + (0.75 * world.wall_height - 0.3) * u01(rng));
    }
    field.texture_heights.push_back(std::move(heights));
  }

  // Floor texture points, kept away from the walls.
  Vec2d lo = world.floor[0], hi = world.floor[0];
  for (const auto& v : world.floor) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  int placed = 0, attempts = 0;
  while (placed < world.floor_points && attempts++ < world.floor_points * 50) {
    const Vec2d p(lo.x() + (hi.x() - lo.x()) * u01(rng),
                  lo.y() + (hi.y() - lo.y()) * u01(rng));
    if (!world.inside(p)) continue;
    bool clear = true;
    for (const auto& w : walls) {
      if (w.point_distance(p) < 0.2) {
        const Vec2d d = w.direction();
        const double s = d.dot(p - w.a);
        if (s > -0.2 && s < w.length() + 0.2) {
          clear = false;
          break;
        }
      }
    }
    if (!clear) continue;
    field.points.push_back({next_id++, Vec3d(p.x(), p.y(), 0.0), true, -1});
    ++placed;
  }
  return field;
}

CameraObservation simulate_camera(const World& world, const Pose2d& pose,
                                  const FeatureField& features,
                                  std::mt19937_64& rng) {
  if (!world.inside(pose.xy)) {
    throw PoseOutsideWorld("camera pose outside free space");
  }
  Mat3d r_cw;
  Vec3d c_w;
  camera_pose_from_mount(pose, world.mount, &r_cw, &c_w);
  const auto& k = world.intrinsics;
  const double iw = world.image_width, ih = world.image_height;
  const auto walls = world.walls();
  const Vec2d cam_planar(c_w.x(), c_w.y());

  std::normal_distribution<double> px_noise(0.0, world.noise.pixel_sigma);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  CameraObservation obs;
  obs.vp = true_vanishing_point(r_cw, k, world.min_pitch);

  for (const auto& f : features.points) {
    const Vec2d planar(f.position.x(), f.position.y());
    if (segment_blocked(walls, cam_planar, planar)) continue;
    const Vec3d p_c = r_cw.transpose() * (f.position - c_w);
    if (p_c.z() < 0.1) continue;
    Vec2d px = k.project(p_c);
    if (px.x() < 0 || px.x() > iw || px.y() < 0 || px.y() > ih) continue;
    if (u01(rng) < world.noise.dropout) continue;
    if (world.noise.pixel_sigma > 0) {
      px += Vec2d(px_noise(rng), px_noise(rng));
    }
    obs.tracks.push_back({f.id, px});
  }

  // Visible intervals of each wall's base and texture lines.
  constexpr int kSteps = 128;
  for (std::size_t w = 0; w < walls.size(); ++w) {
    const Vec2d e = walls[w].b - walls[w].a;
    std::vector<std::pair<double, double>> intervals;
    int run_start = -1;
    for (int s = 0; s <= kSteps; ++s) {
      bool vis = false;
      if (s < kSteps) {
        const double t = (s + 0.5) / kSteps;
        vis = !segment_blocked(walls, cam_planar, walls[w].a + t * e);
      }
      if (vis && run_start < 0) run_start = s;
      if (!vis && run_start >= 0) {
        if (s - run_start >= 3) {
          intervals.emplace_back(double(run_start) / kSteps, double(s) / kSteps);
        }
        run_start = -1;
      }
    }

    auto emit = [&](double height, int label, bool vertical_bucket) {
      for (const auto& [t0, t1] : intervals) {
        const Vec2d e1 = walls[w].a + t0 * e;
        const Vec2d e2 = walls[w].a + t1 * e;
        const Vec3d p(e1.x(), e1.y(), -height);
        const Vec3d q(e2.x(), e2.y(), -height);
        Vec2d a, b;
        if (!project_segment(k, iw, ih, r_cw.transpose() * (p - c_w),
                             r_cw.transpose() * (q - c_w), &a, &b))
          continue;
        if ((b - a).norm() < 15.0) continue;
        if (world.noise.pixel_sigma > 0) {
          a += Vec2d(px_noise(rng), px_noise(rng));
          b += Vec2d(px_noise(rng), px_noise(rng));
        }
        if (vertical_bucket) {
          obs.lines.vertical.push_back({a, b});
        } else {
          obs.lines.horizontal.push_back({a, b});
          obs.horizontal_wall.push_back(label);
        }
      }
    };
    emit(0.0, static_cast<int>(w), false);
    if (w < features.texture_heights.size()) {
      for (double h : features.texture_heights[w]) emit(h, -1, false);
    }
  }

  // Vertical wall edges at the plan corners.
  std::vector<Vec2d> corners;
  for (const auto& v : world.floor) corners.push_back(v);
  for (const auto& ring : world.clutter)
    for (const auto& v : ring) corners.push_back(v);
  for (std::size_t c = 0; c < corners.size(); ++c) {
    if (segment_blocked(walls, cam_planar, corners[c])) continue;
    const Vec3d base(corners[c].x(), corners[c].y(), 0.0);
    const Vec3d top(corners[c].x(), corners[c].y(), -world.wall_height);
    Vec2d a, b;
    if (!project_segment(k, iw, ih, r_cw.transpose() * (base - c_w),
                         r_cw.transpose() * (top - c_w), &a, &b))
      continue;
    if ((b - a).norm() < 25.0) continue;
    if (world.noise.pixel_sigma > 0) {
      a += Vec2d(px_noise(rng), px_noise(rng));
      b += Vec2d(px_noise(rng), px_noise(rng));
    }
    obs.lines.vertical.push_back({a, b});
    obs.vertical_corner.push_back(static_cast<int>(c));
  }
  return obs;
}

std::vector<Pose2d> preset_trajectory(const World& world, int frame_count,
                                      std::mt19937_64& rng) {
  std::uniform_real_distribution<double> spacing(0.10, 0.20);
  std::vector<Pose2d> poses;
  poses.reserve(frame_count);

  if (world.name == "corridor") {
    const double amp = 0.22, wavelength = 5.0;
    const double x0 = 1.2, x1 = world.floor[1].x() - 1.2;
    const double yc = world.floor[2].y() / 2.0;
    double x = x0;
    for (int i = 0; i < frame_count; ++i) {
      const double phase = 2.0 * EIGEN_PI * x / wavelength;
      const double y = yc + amp * std::sin(phase);
      const double slope = amp * (2.0 * EIGEN_PI / wavelength) * std::cos(phase);
      poses.push_back({Vec2d(x, y), std::atan2(slope, 1.0)});
      const double ds = spacing(rng);
      x = std::min(x + ds / std::sqrt(1.0 + slope * slope), x1);
    }
    return poses;
  }

  // Room worlds: arc around the centroid, heading along the tangent.
  Vec2d c = Vec2d::Zero();
  for (const auto& v : world.floor) c += v;
  c /= double(world.floor.size());
  const double radius = (world.name == "cluttered") ? 1.1 : 0.8;
  double a = 0.0;
  for (int i = 0; i < frame_count; ++i) {
    const Vec2d p = c + radius * Vec2d(std::cos(a), std::sin(a));
    // Heading wobble on top of the tangent: pure circular motion would give
    // every scan pair the same rotation center, which degenerates the
    // motion-constrained minimal subsets.
    const double wobble = 0.25 * std::sin(2.7 * a);
    poses.push_back({p, wrap_angle(a + EIGEN_PI / 2.0 + wobble)});
    a += spacing(rng) / radius;
  }
  return poses;
}

SimSequence generate_sequence(const World& world,
                              const std::vector<Pose2d>& trajectory,
                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const FeatureField field = scatter_features(world, rng);

  SimSequence out;
  out.frames.reserve(trajectory.size());
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    SensorFrame frame;
    frame.index = static_cast<int>(i);
    frame.scan = simulate_scan(world, trajectory[i], rng);
    frame.scan.timestamp = 0.1 * double(i);
    auto obs = simulate_camera(world, trajectory[i], field, rng);
    frame.tracks = std::move(obs.tracks);
    frame.lines = std::move(obs.lines);
    frame.vp = obs.vp;
    out.frames.push_back(std::move(frame));
  }

  auto& gt = out.gt;
  gt.poses = trajectory;
  gt.alignment = true_alignment(world.mount, world.intrinsics);
  gt.mount = world.mount;
  gt.wall_height = world.wall_height;
  gt.plan.walls = world.walls();
  for (const auto& v : world.floor) gt.plan.corners.push_back(v);
  for (const auto& ring : world.clutter)
    for (const auto& v : ring) gt.plan.corners.push_back(v);
  gt.floor_polygon = world.floor;
  for (const auto& f : field.points) gt.track_on_ground[f.id] = f.on_ground;
  return out;
}

SimSequence generate_sequence(const World& world, int frame_count,
                              std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  const auto traj = preset_trajectory(world, frame_count, rng);
  return generate_sequence(world, traj, seed);
}

}  // namespace lcl
