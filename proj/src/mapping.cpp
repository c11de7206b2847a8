#include "lcl/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lcl/errors.hpp"

namespace lcl {

namespace {

const Mat2d kJ90 = (Mat2d() << 0, -1, 1, 0).finished();
const Mat3d kJ3 = (Mat3d() << 0, -1, 0, 1, 0, 0, 0, 0, 0).finished();

Mat3d planar3(const Mat2d& r) {
  Mat3d out = Mat3d::Identity();
  out.topLeftCorner<2, 2>() = r;
  return out;
}

/// Axial (mod pi) direction statistics via angle doubling.
struct AxialMean {
  double c = 0.0, s = 0.0;
  void add(double angle, double w) {
    c += w * std::cos(2.0 * angle);
    s += w * std::sin(2.0 * angle);
  }
  double get() const { return 0.5 * std::atan2(s, c); }
};

double axial_diff(double a, double b) {
  double d = std::fmod(a - b, EIGEN_PI);
  if (d > EIGEN_PI / 2) d -= EIGEN_PI;
  if (d < -EIGEN_PI / 2) d += EIGEN_PI;
  return d;
}

struct Cluster {
  AxialMean dir;
  double weight = 0.0;
  double angle = 0.0;          // current axial direction
  Vec2d anchor = Vec2d::Zero();
  double offset = 0.0;         // n(angle) . anchor-ish
  double lo = 0.0, hi = 0.0;   // extent along direction
  std::vector<std::pair<Vec2d, double>> endpoints;  // weighted
  int segments = 0;

  Vec2d normal() const { return {-std::sin(angle), std::cos(angle)}; }
  Vec2d direction() const { return {std::cos(angle), std::sin(angle)}; }
};

/// Wall intersections plus free endpoints.
std::vector<Vec2d> compute_corners(const std::vector<LineSegment2>& walls,
                                   const MappingConfig& cfg) {
  std::vector<Vec2d> corners;
  auto push_unique = [&corners](const Vec2d& p) {
    for (const auto& c : corners) {
      if ((c - p).norm() < 0.15) return;
    }
    corners.push_back(p);
  };

  for (std::size_t a = 0; a + 1 < walls.size(); ++a) {
    for (std::size_t b = a + 1; b < walls.size(); ++b) {
      const Vec2d d1 = walls[a].direction(), d2 = walls[b].direction();
      const double cross = d1.x() * d2.y() - d1.y() * d2.x();
      if (std::abs(cross) < std::sin(cfg.corner_min_angle)) continue;
      const Vec2d dp = walls[b].a - walls[a].a;
      const double t = (dp.x() * d2.y() - dp.y() * d2.x()) / cross;
      const Vec2d x = walls[a].a + t * d1;
      // Keep intersections near both wall extents.
      auto near_extent = [&](const LineSegment2& w) {
        const double s = w.direction().dot(x - w.a);
        return s > -cfg.corner_radius && s < w.length() + cfg.corner_radius;
      };
      if (near_extent(walls[a]) && near_extent(walls[b])) push_unique(x);
    }
  }

  for (const auto& w : walls) {
    for (const Vec2d& e : {w.a, w.b}) {
      bool tied = false;
      for (const auto& c : corners) {
        if ((c - e).norm() < cfg.endpoint_corner_gap) {
          tied = true;
          break;
        }
      }
      if (!tied) push_unique(e);
    }
  }
  return corners;
}

/// Corners, then wall extents stretched to meet their incident corners, so
/// adjacent walls close up instead of leaving scan-coverage gaps.
void finish_plan(FloorPlan* plan, const MappingConfig& cfg) {
  plan->corners = compute_corners(plan->walls, cfg);
  for (auto& w : plan->walls) {
    const Vec2d dir = w.direction();
    double lo = 0.0, hi = w.length();
    const Vec2d a = w.a;
    for (const auto& c : plan->corners) {
      if (std::abs(w.normal().dot(c - a)) > 0.1) continue;
      const double s = dir.dot(c - a);
      if (s > -cfg.corner_radius && s < w.length() + cfg.corner_radius) {
        lo = std::min(lo, s);
        hi = std::max(hi, s);
      }
    }
    w.a = a + lo * dir;
    w.b = a + hi * dir;
  }
}

}  // namespace

FloorPlan integrate_scans(const Sequence& seq, const Trajectory& trajectory,
                          const MappingConfig& cfg) {
  std::vector<Cluster> clusters;

  for (int f = 0; f < seq.size(); ++f) {
    const auto& pose = trajectory.poses[f];
    for (const auto& seg : seq.scan_lines[f]) {
      const Vec2d a = pose.apply(seg.a);
      const Vec2d b = pose.apply(seg.b);
      const Vec2d d = (b - a).normalized();
      double angle = std::atan2(d.y(), d.x());
      if (angle < 0) angle += EIGEN_PI;  // axial: direction mod pi
      if (angle >= EIGEN_PI) angle -= EIGEN_PI;
      const double w = std::max(seg.inlier_count, 1);
      const Vec2d mid = 0.5 * (a + b);

      Cluster* best = nullptr;
      double best_score = std::numeric_limits<double>::infinity();
      for (auto& c : clusters) {
        const double dang = std::abs(axial_diff(angle, c.angle));
        if (dang > cfg.cluster_angle) continue;
        const double doff = std::abs(c.normal().dot(mid - c.anchor));
        if (doff > cfg.cluster_offset) continue;
        const double sa = c.direction().dot(a - c.anchor);
        const double sb = c.direction().dot(b - c.anchor);
        const double lo = std::min(sa, sb), hi = std::max(sa, sb);
        const double gap = std::max({c.lo - hi, lo - c.hi, 0.0});
        if (gap > cfg.cluster_gap) continue;
        const double score = dang / cfg.cluster_angle + doff / cfg.cluster_offset;
        if (score < best_score) {
          best_score = score;
          best = &c;
        }
      }
      if (!best) {
        clusters.emplace_back();
        best = &clusters.back();
        best->anchor = mid;
        best->angle = angle;
        best->lo = best->hi = 0.0;
      }
      best->dir.add(angle, w);
      best->weight += w;
      best->angle = best->dir.get();
      best->endpoints.push_back({a, w * 0.5});
      best->endpoints.push_back({b, w * 0.5});
      const double sa = best->direction().dot(a - best->anchor);
      const double sb = best->direction().dot(b - best->anchor);
      best->lo = std::min({best->lo, sa, sb});
      best->hi = std::max({best->hi, sa, sb});
      ++best->segments;
    }
  }

  FloorPlan plan;
  for (const auto& c : clusters) {
    // Weighted total-least-squares over accumulated endpoints.
    double wsum = 0.0;
    Vec2d mean = Vec2d::Zero();
    for (const auto& [p, w] : c.endpoints) {
      mean += w * p;
      wsum += w;
    }
    mean /= wsum;
    Mat2d cov = Mat2d::Zero();
    for (const auto& [p, w] : c.endpoints) {
      const Vec2d d = p - mean;
      cov += w * d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat2d> es(cov);
    const Vec2d dir = es.eigenvectors().col(1);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    double ss = 0.0;
    const Vec2d n(-dir.y(), dir.x());
    for (const auto& [p, w] : c.endpoints) {
      const double s = dir.dot(p - mean);
      lo = std::min(lo, s);
      hi = std::max(hi, s);
      ss += w * std::pow(n.dot(p - mean), 2);
    }
    LineSegment2 wall;
    wall.a = mean + lo * dir;
    wall.b = mean + hi * dir;
    wall.inlier_count = static_cast<int>(c.weight);
    wall.rms = std::sqrt(ss / wsum);
    if (wall.length() < cfg.min_wall_length) continue;
    plan.walls.push_back(wall);
  }

  finish_plan(&plan, cfg);
  return plan;
}

// --- residuals ---

double point_wall_residual(const Vec2d& p_scan, const Pose2d& pose,
                           double alpha, double d,
                           Eigen::Matrix<double, 1, 3>* j_pose,
                           Eigen::Matrix<double, 1, 2>* j_wall) {
  const Vec2d n(std::cos(alpha), std::sin(alpha));
  const Vec2d q = pose.apply(p_scan);
  const double r = n.dot(q) - d;
  if (j_pose) {
    (*j_pose)(0, 0) = n.x();
    (*j_pose)(0, 1) = n.y();
    (*j_pose)(0, 2) = n.dot(kJ90 * (pose.rotation() * p_scan));
  }
  if (j_wall) {
    const Vec2d n_prime(-std::sin(alpha), std::cos(alpha));
    (*j_wall)(0, 0) = n_prime.dot(q);
    (*j_wall)(0, 1) = -1.0;
  }
  return r;
}

bool epipolar_pose_residual(const Vec2d& px_i, const Vec2d& px_j,
                            const Pose2d& pose_i, const Pose2d& pose_j,
                            const SimilarityTransform2d& alignment,
                            const TopDownFramed& frame_i,
                            const TopDownFramed& frame_j,
                            const CameraIntrinsicsd& k, double min_baseline,
                            double* residual,
                            Eigen::Matrix<double, 1, 3>* j_pose_i,
                            Eigen::Matrix<double, 1, 3>* j_pose_j) {
  const Mat2d rl = rot2(pose_i.theta - pose_j.theta);
  const Mat2d r_mj = rot2(-pose_j.theta);
  const Vec2d t_l = r_mj * (pose_i.xy - pose_j.xy);
  const Vec2d arm = rl * alignment.origin + t_l - alignment.origin;
  if (arm.norm() < min_baseline) return false;

  const Mat3d rphi_t = planar3(alignment.rotation()).transpose();
  const Mat3d rgj_t = frame_j.r_g.transpose();
  const Vec3d u_raw = rgj_t * (rphi_t * Vec3d(arm.x(), arm.y(), 0.0));
  const double u_norm = u_raw.norm();
  const Vec3d u = u_raw / u_norm;

  const Mat3d rl3 = planar3(rl);
  const Mat3d rc = rgj_t * rl3 * frame_i.r_g;

  const Vec3d a = k.inverse_matrix() * Vec3d(px_i.x(), px_i.y(), 1.0);
  const Vec3d b = k.inverse_matrix() * Vec3d(px_j.x(), px_j.y(), 1.0);
  const Vec3d w = rc * a;
  const Vec3d wxb = w.cross(b);
  *residual = u.dot(wxb);

  if (!j_pose_i && !j_pose_j) return true;

  const Mat3d p_perp = (Mat3d::Identity() - u * u.transpose()) / u_norm;
  const Mat3d du_darm = p_perp * rgj_t * rphi_t;  // times (darm, 0)

  // arm partials
  const Vec2d darm_dthi = kJ90 * (rl * alignment.origin);
  const Vec2d darm_dthj = -(kJ90 * (arm + alignment.origin));
  // R^c partial (theta_i positive, theta_j negative)
  const Mat3d drc_dth = rgj_t * kJ3 * rl3 * frame_i.r_g;
  const Vec3d dw_dth = drc_dth * a;
  const double dr_rc = u.dot(dw_dth.cross(b));

  auto du_term = [&](const Vec2d& darm) {
    const Vec3d du = du_darm * Vec3d(darm.x(), darm.y(), 0.0);
    return du.dot(wxb);
  };

  if (j_pose_i) {
    (*j_pose_i)(0, 0) = du_term(r_mj.col(0));
    (*j_pose_i)(0, 1) = du_term(r_mj.col(1));
    (*j_pose_i)(0, 2) = du_term(darm_dthi) + dr_rc;
  }
  if (j_pose_j) {
    (*j_pose_j)(0, 0) = du_term(-r_mj.col(0));
    (*j_pose_j)(0, 1) = du_term(-r_mj.col(1));
    (*j_pose_j)(0, 2) = du_term(darm_dthj) - dr_rc;
  }
  return true;
}

// --- fused refinement ---

namespace {

struct PointWallTerm {
  int frame;
  Vec2d point;
  int wall;
};

struct EpiPair {
  int fi, fj;
  std::vector<std::pair<Vec2d, Vec2d>> pixels;
};

double huber_cost(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

double huber_weight(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 1.0 : delta / a;
}

}  // namespace

FusedRefineResult fused_refine(const Sequence& seq,
                               const Trajectory& trajectory,
                               const FloorPlan& initial_plan,
                               const SimilarityTransform2d& alignment,
                               const MappingConfig& cfg, bool use_epipolar) {
  FusedRefineResult result;
  result.trajectory = trajectory;
  result.plan = initial_plan;

  const int n_frames = seq.size();
  const int n_walls = static_cast<int>(initial_plan.walls.size());
  if (n_frames < 2 || n_walls == 0) {
    result.message = "nothing to refine";
    result.converged = true;
    return result;
  }

  // Wall parameters (alpha, d).
  std::vector<double> alpha(n_walls), offset(n_walls);
  for (int w = 0; w < n_walls; ++w) {
    const Vec2d n = initial_plan.walls[w].normal();
    alpha[w] = std::atan2(n.y(), n.x());
    offset[w] = n.dot(initial_plan.walls[w].a);
  }

  // Fixed associations: subsampled scan points to nearby walls.
  std::vector<PointWallTerm> pw_terms;
  for (int f = 0; f < n_frames; ++f) {
    std::vector<Vec2d> pts;
    const auto& scan = seq.frames[f].scan;
    for (std::size_t i = 0; i < scan.points.size(); ++i) {
      if (scan.point_valid(i)) pts.push_back(scan.points[i]);
    }
    const int stride =
        std::max<int>(1, static_cast<int>(pts.size()) / cfg.max_points_per_frame);
    for (std::size_t i = 0; i < pts.size(); i += stride) {
      const Vec2d q = trajectory.poses[f].apply(pts[i]);
      int best = -1;
      double best_d = cfg.point_wall_assoc;
      for (int w = 0; w < n_walls; ++w) {
        const auto& wall = initial_plan.walls[w];
        const double s = wall.direction().dot(q - wall.a);
        if (s < -0.3 || s > wall.length() + 0.3) continue;
        const double d = wall.point_distance(q);
        if (d < best_d) {
          best_d = d;
          best = w;
        }
      }
      if (best >= 0) pw_terms.push_back({f, pts[i], best});
    }
  }

  std::vector<EpiPair> epi_pairs;
  if (use_epipolar) {
    for (int off : cfg.pair_offsets) {
      for (int f = 0; f + off < n_frames; ++f) {
        const int g = f + off;
        if (!seq.topdown[f] || !seq.topdown[g]) continue;
        auto px = seq.shared_pixels(f, g);
        if ((int)px.size() < cfg.min_shared_tracks) continue;
        epi_pairs.push_back({f, g, std::move(px)});
      }
    }
  }

  if (pw_terms.empty()) {
    result.message = "no point-wall associations";
    result.converged = true;
    return result;
  }

  // Parameter vector: poses 1..N-1 then walls.
  const int n_params = 3 * (n_frames - 1) + 2 * n_walls;
  auto pose_base = [](int f) { return 3 * (f - 1); };
  auto wall_base = [&](int w) { return 3 * (n_frames - 1) + 2 * w; };

  std::vector<Pose2d> poses = trajectory.poses;

  // Graduated robustness: a soft first stage keeps the epipolar terms
  // informative when the odometry starts meters off, the second stage runs
  // at the configured loss.
  double epi_delta = cfg.huber_epi;

  auto total_cost = [&](const std::vector<Pose2d>& ps,
                        const std::vector<double>& al,
                        const std::vector<double>& of) {
    double cost = 0.0;
    for (const auto& t : pw_terms) {
      const double r =
          point_wall_residual(t.point, ps[t.frame], al[t.wall], of[t.wall]);
      cost += huber_cost(r, cfg.huber_wall);
    }
    for (const auto& pair : epi_pairs) {
      for (const auto& [pi, pj] : pair.pixels) {
        double r;
        if (epipolar_pose_residual(pi, pj, ps[pair.fi], ps[pair.fj], alignment,
                                   *seq.topdown[pair.fi], *seq.topdown[pair.fj],
                                   seq.k, cfg.min_baseline, &r)) {
          cost += huber_cost(cfg.epi_weight * r, cfg.epi_weight * epi_delta);
        }
      }
    }
    return cost;
  };

  epi_delta = cfg.huber_epi;
  result.initial_cost = total_cost(poses, alpha, offset);

  Eigen::MatrixXd h(n_params, n_params);
  Eigen::VectorXd g(n_params);
  bool any_improvement = false;
  int iter = 0;

  const std::vector<double> stages =
      use_epipolar ? std::vector<double>{20.0, 1.0} : std::vector<double>{1.0};
  for (double stage : stages) {
  epi_delta = stage * cfg.huber_epi;
  double cost = total_cost(poses, alpha, offset);
  double lambda = 1e-4;
  for (iter = 0; iter < cfg.max_iterations; ++iter) {
    h.setZero();
    g.setZero();

    auto accumulate = [&](double r, double hub,
                          const std::vector<std::pair<int, double>>& row) {
      const double w = huber_weight(r, hub);
      for (std::size_t a = 0; a < row.size(); ++a) {
        g[row[a].first] += w * row[a].second * r;
        for (std::size_t b = 0; b < row.size(); ++b) {
          h(row[a].first, row[b].first) += w * row[a].second * row[b].second;
        }
      }
    };

    for (const auto& t : pw_terms) {
      Eigen::Matrix<double, 1, 3> jp;
      Eigen::Matrix<double, 1, 2> jw;
      const double r = point_wall_residual(t.point, poses[t.frame],
                                           alpha[t.wall], offset[t.wall], &jp,
                                           &jw);
      std::vector<std::pair<int, double>> row;
      if (t.frame > 0) {
        const int pb = pose_base(t.frame);
        row.push_back({pb, jp(0, 0)});
        row.push_back({pb + 1, jp(0, 1)});
        row.push_back({pb + 2, jp(0, 2)});
      }
      const int wb = wall_base(t.wall);
      row.push_back({wb, jw(0, 0)});
      row.push_back({wb + 1, jw(0, 1)});
      accumulate(r, cfg.huber_wall, row);
    }

    for (const auto& pair : epi_pairs) {
      for (const auto& [pi, pj] : pair.pixels) {
        double r;
        Eigen::Matrix<double, 1, 3> ji, jj;
        if (!epipolar_pose_residual(pi, pj, poses[pair.fi], poses[pair.fj],
                                    alignment, *seq.topdown[pair.fi],
                                    *seq.topdown[pair.fj], seq.k,
                                    cfg.min_baseline, &r, &ji, &jj))
          continue;
        std::vector<std::pair<int, double>> row;
        if (pair.fi > 0) {
          const int pb = pose_base(pair.fi);
          row.push_back({pb, cfg.epi_weight * ji(0, 0)});
          row.push_back({pb + 1, cfg.epi_weight * ji(0, 1)});
          row.push_back({pb + 2, cfg.epi_weight * ji(0, 2)});
        }
        if (pair.fj > 0) {
          const int pb = pose_base(pair.fj);
          row.push_back({pb, cfg.epi_weight * jj(0, 0)});
          row.push_back({pb + 1, cfg.epi_weight * jj(0, 1)});
          row.push_back({pb + 2, cfg.epi_weight * jj(0, 2)});
        }
        accumulate(cfg.epi_weight * r, cfg.epi_weight * epi_delta, row);
      }
    }

    bool stepped = false;
    for (int tries = 0; tries < 14; ++tries) {
      Eigen::MatrixXd damped = h;
      damped.diagonal().array() += lambda;
      const Eigen::VectorXd step = damped.ldlt().solve(-g);

      std::vector<Pose2d> trial_poses = poses;
      std::vector<double> trial_alpha = alpha, trial_offset = offset;
      for (int f = 1; f < n_frames; ++f) {
        const int pb = pose_base(f);
        trial_poses[f].xy += step.segment<2>(pb);
        trial_poses[f].theta = wrap_angle(trial_poses[f].theta + step[pb + 2]);
      }
      for (int w = 0; w < n_walls; ++w) {
        const int wb = wall_base(w);
        trial_alpha[w] = wrap_angle(trial_alpha[w] + step[wb]);
        trial_offset[w] += step[wb + 1];
      }

      const double trial_cost = total_cost(trial_poses, trial_alpha, trial_offset);
      if (trial_cost <= cost) {
        const bool tiny = step.norm() < cfg.step_tol;
        poses = std::move(trial_poses);
        alpha = std::move(trial_alpha);
        offset = std::move(trial_offset);
        cost = trial_cost;
        lambda = std::max(lambda / 3.0, 1e-12);
        stepped = true;
        any_improvement = true;
        if (tiny) iter = cfg.max_iterations;  // converged
        break;
      }
      lambda *= 4.0;
      if (lambda > 1e10) break;
    }
    if (!stepped) break;
  }
  }  // stages

  epi_delta = cfg.huber_epi;
  const double final_cost = total_cost(poses, alpha, offset);
  if (!any_improvement && final_cost > result.initial_cost) {
    result.message = "solver diverged; inputs returned";
    return result;
  }

  result.converged = true;
  result.iterations = iter;
  result.final_cost = final_cost;
  result.trajectory.poses = poses;

  // Rebuild walls: refined line parameters, extents from associated points.
  std::vector<double> lo(n_walls, std::numeric_limits<double>::infinity());
  std::vector<double> hi(n_walls, -std::numeric_limits<double>::infinity());
  std::vector<int> counts(n_walls, 0);
  for (const auto& t : pw_terms) {
    const Vec2d q = poses[t.frame].apply(t.point);
    const Vec2d dir(-std::sin(alpha[t.wall]), std::cos(alpha[t.wall]));
    const double s = dir.dot(q);
    lo[t.wall] = std::min(lo[t.wall], s);
    hi[t.wall] = std::max(hi[t.wall], s);
    ++counts[t.wall];
  }
  result.plan.walls.clear();
  for (int w = 0; w < n_walls; ++w) {
    const Vec2d n(std::cos(alpha[w]), std::sin(alpha[w]));
    const Vec2d dir(-n.y(), n.x());
    LineSegment2 wall;
    if (counts[w] >= 2) {
      wall.a = offset[w] * n + lo[w] * dir;
      wall.b = offset[w] * n + hi[w] * dir;
    } else {
      // No surviving support: project the previous extent onto the new line.
      const auto& old = initial_plan.walls[w];
      wall.a = offset[w] * n + dir * dir.dot(old.a);
      wall.b = offset[w] * n + dir * dir.dot(old.b);
    }
    wall.inlier_count = counts[w];
    wall.rms = initial_plan.walls[w].rms;
    result.plan.walls.push_back(wall);
  }
  finish_plan(&result.plan, cfg);
  return result;
}

std::vector<Vec2d> plan_polygon(const FloorPlan& plan, double snap) {
  const int n = static_cast<int>(plan.walls.size());
  if (n < 3) return {};

  // Greedy chain over wall endpoints starting from the longest wall.
  int start = 0;
  for (int i = 1; i < n; ++i) {
    if (plan.walls[i].length() > plan.walls[start].length()) start = i;
  }
  std::vector<int> chain{start};
  std::vector<bool> used(n, false);
  used[start] = true;
  Vec2d head = plan.walls[start].b;
  const Vec2d tail = plan.walls[start].a;

  while (true) {
    int best = -1;
    bool flip = false;
    double best_d = snap;
    for (int i = 0; i < n; ++i) {
      if (used[i]) continue;
      const double da = (plan.walls[i].a - head).norm();
      const double db = (plan.walls[i].b - head).norm();
      if (da < best_d) {
        best_d = da;
        best = i;
        flip = false;
      }
      if (db < best_d) {
        best_d = db;
        best = i;
        flip = true;
      }
    }
    if (best < 0) break;
    used[best] = true;
    chain.push_back(best);
    head = flip ? plan.walls[best].a : plan.walls[best].b;
    if ((head - tail).norm() < snap && chain.size() >= 3) {
      // Closed: vertices are consecutive-wall intersections.
      std::vector<Vec2d> poly;
      const int m = static_cast<int>(chain.size());
      for (int i = 0; i < m; ++i) {
        const auto& w1 = plan.walls[chain[i]];
        const auto& w2 = plan.walls[chain[(i + 1) % m]];
        const Vec2d d1 = w1.direction(), d2 = w2.direction();
        const double cross = d1.x() * d2.y() - d1.y() * d2.x();
        if (std::abs(cross) < 1e-6) {
          poly.push_back(0.5 * (w1.b + w2.a));
          continue;
        }
        const Vec2d dp = w2.a - w1.a;
        const double t = (dp.x() * d2.y() - dp.y() * d2.x()) / cross;
        poly.push_back(w1.a + t * d1);
      }
      return poly;
    }
  }
  return {};
}

}  // namespace lcl
