#include "lcl/features.hpp"

#include <algorithm>
#include <cmath>

#include "lcl/errors.hpp"

namespace lcl {

std::size_t LidarScan::valid_count() const {
  if (valid.empty()) return points.size();
  std::size_t n = 0;
  for (auto v : valid) n += (v != 0);
  return n;
}

const Vec2d* FeatureTrack::pixel_at(int frame) const {
  auto it = std::lower_bound(
      observations.begin(), observations.end(), frame,
      [](const auto& obs, int f) { return obs.first < f; });
  if (it == observations.end() || it->first != frame) return nullptr;
  return &it->second;
}

namespace {

struct FittedLine {
  Vec2d centroid = Vec2d::Zero();
  Vec2d direction = Vec2d::UnitX();
  double rms = 0.0;
};

FittedLine fit_line(const std::vector<Vec2d>& pts, int lo, int hi) {
  FittedLine out;
  const int n = hi - lo + 1;
  for (int i = lo; i <= hi; ++i) out.centroid += pts[i];
  out.centroid /= double(n);
  Mat2d cov = Mat2d::Zero();
  for (int i = lo; i <= hi; ++i) {
    const Vec2d d = pts[i] - out.centroid;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat2d> es(cov);
  out.direction = es.eigenvectors().col(1);  // largest eigenvalue
  const Vec2d normal(-out.direction.y(), out.direction.x());
  double ss = 0.0;
  for (int i = lo; i <= hi; ++i) {
    const double r = normal.dot(pts[i] - out.centroid);
    ss += r * r;
  }
  out.rms = std::sqrt(ss / n);
  return out;
}

double point_chord_distance(const Vec2d& p, const Vec2d& a, const Vec2d& b) {
  const Vec2d e = b - a;
  const double len = e.norm();
  if (len < 1e-12) return (p - a).norm();
  const Vec2d n(-e.y() / len, e.x() / len);
  return std::abs(n.dot(p - a));
}

void split_region(const std::vector<Vec2d>& pts, int lo, int hi,
                  const LineExtractConfig& cfg,
                  std::vector<std::pair<int, int>>& runs) {
  if (hi - lo + 1 < cfg.min_inliers) return;
  double worst = 0.0;
  int split = -1;
  for (int i = lo + 1; i < hi; ++i) {
    const double d = point_chord_distance(pts[i], pts[lo], pts[hi]);
    if (d > worst) {
      worst = d;
      split = i;
    }
  }
  if (worst > cfg.dist_thresh && split > lo && split < hi) {
    split_region(pts, lo, split, cfg, runs);
    split_region(pts, split, hi, cfg, runs);
  } else {
    runs.emplace_back(lo, hi);
  }
}

double line_distance(const FittedLine& f, const Vec2d& p) {
  const Vec2d n(-f.direction.y(), f.direction.x());
  return std::abs(n.dot(p - f.centroid));
}

/// Chord-based splitting can leave a couple of points from the neighbouring
/// wall at a run boundary; shift each junction to the split that best fits
/// both sides' lines.
void refine_boundaries(const std::vector<Vec2d>& pts,
                       std::vector<std::pair<int, int>>& runs) {
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t i = 0; i + 1 < runs.size(); ++i) {
      auto& r1 = runs[i];
      auto& r2 = runs[i + 1];
      if (r2.first - r1.second > 1) continue;  // discontinuity gap
      if (r1.second - r1.first < 4 || r2.second - r2.first < 4) continue;
      const auto f1 = fit_line(pts, r1.first, r1.second - 2);
      const auto f2 = fit_line(pts, r2.first + 2, r2.second);
      const int w0 = std::max(r1.first + 1, r1.second - 3);
      const int w1 = std::min(r2.second - 1, r2.first + 3);
      int best_s = r1.second;
      double best_sse = std::numeric_limits<double>::infinity();
      for (int s = w0; s <= w1; ++s) {
        double sse = 0.0;
        for (int j = w0; j <= w1; ++j) {
          const double d =
              j <= s ? line_distance(f1, pts[j]) : line_distance(f2, pts[j]);
          sse += d * d;
        }
        if (sse < best_sse) {
          best_sse = sse;
          best_s = s;
        }
      }
      r1.second = best_s;
      r2.first = best_s + 1;
    }
  }
}

LineSegment2 segment_from_run(const std::vector<Vec2d>& pts, int lo, int hi) {
  const auto fit = fit_line(pts, lo, hi);
  LineSegment2 seg;
  double smin = std::numeric_limits<double>::infinity(), smax = -smin;
  for (int i = lo; i <= hi; ++i) {
    const double s = fit.direction.dot(pts[i] - fit.centroid);
    smin = std::min(smin, s);
    smax = std::max(smax, s);
  }
  // Endpoints ordered along the scan.
  const double s_first = fit.direction.dot(pts[lo] - fit.centroid);
  const double s_last = fit.direction.dot(pts[hi] - fit.centroid);
  if (s_first <= s_last) {
    seg.a = fit.centroid + smin * fit.direction;
    seg.b = fit.centroid + smax * fit.direction;
  } else {
    seg.a = fit.centroid + smax * fit.direction;
    seg.b = fit.centroid + smin * fit.direction;
  }
  seg.inlier_count = hi - lo + 1;
  seg.rms = fit.rms;
  return seg;
}

}  // namespace

std::vector<LineSegment2> extract_lines(const LidarScan& scan,
                                        const LineExtractConfig& cfg) {
  const int n = static_cast<int>(scan.points.size());
  std::vector<int> idx;
  idx.reserve(n);
  for (int i = 0; i < n; ++i) {
    if (scan.point_valid(i)) idx.push_back(i);
  }
  if (static_cast<int>(idx.size()) < 2) return {};

  // Rotate the circular scan so it starts at a natural break: the largest
  // range discontinuity, or the max-range point when the contour is smooth
  // (a corner in a convex room).
  const int m = static_cast<int>(idx.size());
  int start = 0;
  double best_jump = -1.0;
  bool has_gap = false;
  for (int i = 0; i < m; ++i) {
    const int j = (i + 1) % m;
    const bool adjacent = (idx[j] - idx[i] + n) % n == 1;
    const double jump = std::abs(scan.points[idx[j]].norm() -
                                 scan.points[idx[i]].norm());
    if (!adjacent || jump > cfg.jump_thresh) {
      has_gap = true;
      if (jump > best_jump) {
        best_jump = jump;
        start = j;
      }
    }
  }
  if (!has_gap) {
    double rmax = -1.0;
    for (int i = 0; i < m; ++i) {
      const double r = scan.points[idx[i]].norm();
      if (r > rmax) {
        rmax = r;
        start = i;
      }
    }
  }

  std::vector<Vec2d> pts(m);
  std::vector<int> orig(m);
  for (int i = 0; i < m; ++i) {
    pts[i] = scan.points[idx[(start + i) % m]];
    orig[i] = idx[(start + i) % m];
  }

  // Regions between discontinuities, then recursive split inside each.
  std::vector<std::pair<int, int>> runs;
  int lo = 0;
  for (int i = 0; i + 1 < m; ++i) {
    const bool adjacent = (orig[i + 1] - orig[i] + n) % n == 1;
    const double jump = std::abs(pts[i + 1].norm() - pts[i].norm());
    if (!adjacent || jump > cfg.jump_thresh) {
      split_region(pts, lo, i, cfg, runs);
      lo = i + 1;
    }
  }
  split_region(pts, lo, m - 1, cfg, runs);
  refine_boundaries(pts, runs);

  std::vector<LineSegment2> segments;
  for (const auto& [a, b] : runs) {
    auto seg = segment_from_run(pts, a, b);
    if (seg.length() < cfg.min_length || seg.rms > cfg.dist_thresh) continue;
    // Merge with the previous segment when collinear and adjacent.
    if (!segments.empty()) {
      auto& prev = segments.back();
      const double ang = std::acos(std::clamp(
          std::abs(prev.direction().dot(seg.direction())), 0.0, 1.0));
      const double off = prev.point_distance(0.5 * (seg.a + seg.b));
      const double gap = (seg.a - prev.b).norm();
      if (ang < cfg.merge_angle && off < cfg.merge_offset && gap < 0.4) {
        prev.b = seg.b;
        prev.inlier_count += seg.inlier_count;
        prev.rms = std::max(prev.rms, seg.rms);
        continue;
      }
    }
    segments.push_back(seg);
  }
  return segments;
}

// --- ICP ---

namespace {

/// Target for point-to-line matching: the extracted line segments of the
/// reference scan. Matching against fitted lines instead of raw neighbor
/// chords keeps corner regions from biasing the optimum.
struct TargetModel {
  std::vector<LineSegment2> segments;
  double extent_margin = 0.2;

  /// Nearest segment line within max_dist (point-to-line distance, with the
  /// projection restricted to the segment extent plus a margin).
  /// Returns the segment index or -1.
  int nearest(const Vec2d& q, double max_dist, double* out_res = nullptr,
              Vec2d* out_normal = nullptr) const {
    int best = -1;
    double best_abs = max_dist;
    for (int i = 0; i < static_cast<int>(segments.size()); ++i) {
      const auto& s = segments[i];
      const double along = s.direction().dot(q - s.a);
      if (along < -extent_margin || along > s.length() + extent_margin)
        continue;
      const double res = s.normal().dot(q - s.a);
      if (std::abs(res) < best_abs) {
        best_abs = std::abs(res);
        best = i;
        if (out_res) *out_res = res;
        if (out_normal) *out_normal = s.normal();
      }
    }
    return best;
  }
};

}  // namespace

LidarMotiond icp_register(const LidarScan& a, const LidarScan& b,
                          const LidarMotiond& init, const IcpConfig& cfg) {
  if (a.valid_count() < 10 || b.valid_count() < 10) {
    throw IcpDiverged("too few valid points");
  }
  TargetModel target;
  target.segments = extract_lines(b);
  if (target.segments.empty()) throw IcpDiverged("no line structure in target");

  std::vector<Vec2d> src;
  src.reserve(a.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    if (a.point_valid(i)) src.push_back(a.points[i]);
  }

  double theta = init.angle();
  Vec2d t = init.t;
  const Mat2d j90 = (Mat2d() << 0, -1, 1, 0).finished();
  const double huber = 3.0 * cfg.inlier_dist;
  // Losing a match that the initial guess had must never pay off, or the
  // solve can slide out of overlap. Absolute coverage is not rewarded: that
  // would drag range-truncated scans toward aligning their window edges.
  const double unmatched_penalty = huber * (cfg.max_corr_dist - 0.5 * huber);
  std::vector<std::uint8_t> matched_at_init(src.size(), 0);
  {
    const Mat2d r0 = rot2(init.angle());
    for (std::size_t i = 0; i < src.size(); ++i) {
      const Vec2d p = r0 * src[i] + init.t;
      matched_at_init[i] = target.nearest(p, cfg.max_corr_dist) >= 0 ? 1 : 0;
    }
  }
  // Prior that pins only the unobservable subspace (a corridor's axis) to the
  // caller's prediction. Identified from the first linearization; zero when
  // the scan geometry constrains all three parameters.
  const double mu = 1.0;
  Eigen::Matrix3d p_null = Eigen::Matrix3d::Zero();
  const Eigen::Vector3d x_init(init.angle(), init.t.x(), init.t.y());

  auto robust_cost = [&](double th, const Vec2d& tr) {
    const Mat2d r = rot2(th);
    double cost = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
      const Vec2d p = r * src[i] + tr;
      double res;
      if (target.nearest(p, cfg.max_corr_dist, &res) < 0) {
        if (matched_at_init[i]) cost += unmatched_penalty;
        continue;
      }
      const double a = std::abs(res);
      cost += a <= huber ? 0.5 * res * res : huber * (a - 0.5 * huber);
    }
    const Eigen::Vector3d x(th, tr.x(), tr.y());
    return cost + 0.5 * mu * (x - x_init).dot(p_null * (x - x_init));
  };

  double cost = robust_cost(theta, t);
  double lambda = 1e-4;
  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    const Mat2d r = rot2(theta);
    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    Eigen::Vector3d g = Eigen::Vector3d::Zero();
    int matched = 0;
    for (const Vec2d& p0 : src) {
      const Vec2d p = r * p0 + t;
      double res;
      Vec2d n;
      if (target.nearest(p, cfg.max_corr_dist, &res, &n) < 0) continue;
      const double w = std::abs(res) <= huber ? 1.0 : huber / std::abs(res);
      Eigen::Vector3d jrow;
      jrow << n.dot(j90 * (r * p0)), n.x(), n.y();
      h += w * jrow * jrow.transpose();
      g += w * jrow * res;
      ++matched;
    }
    if (matched < 5) throw IcpDiverged("no correspondences");

    if (iter == 0) {
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(h);
      for (int k = 0; k < 3; ++k) {
        if (es.eigenvalues()[k] < 1e-6 * es.eigenvalues()[2]) {
          p_null += es.eigenvectors().col(k) * es.eigenvectors().col(k).transpose();
        }
      }
      cost = robust_cost(theta, t);  // now includes the null-space prior
    }
    const Eigen::Vector3d x_cur(theta, t.x(), t.y());
    h += mu * p_null;
    g += mu * (p_null * (x_cur - x_init));

    bool stepped = false;
    for (int tries = 0; tries < 10; ++tries) {
      const Eigen::Vector3d step =
          (h + lambda * Eigen::Matrix3d::Identity()).ldlt().solve(-g);
      const double trial_theta = wrap_angle(theta + step[0]);
      const Vec2d trial_t = t + step.tail<2>();
      const double trial_cost = robust_cost(trial_theta, trial_t);
      if (trial_cost <= cost) {
        const bool tiny = step.norm() < cfg.param_tol;
        theta = trial_theta;
        t = trial_t;
        cost = trial_cost;
        lambda = std::max(lambda / 3.0, 1e-9);
        stepped = true;
        if (tiny) iter = cfg.max_iterations;  // converged
        break;
      }
      lambda *= 4.0;
    }
    if (!stepped) break;
  }

  // Converged-state overlap check.
  const Mat2d r = rot2(theta);
  int inliers = 0;
  for (const Vec2d& p0 : src) {
    const Vec2d p = r * p0 + t;
    double res;
    if (target.nearest(p, cfg.max_corr_dist, &res) < 0) continue;
    if (std::abs(res) < cfg.inlier_dist) ++inliers;
  }
  const double frac = double(inliers) / double(src.size());
  if (frac < cfg.overlap_frac) {
    throw IcpDiverged("inlier fraction " + std::to_string(frac) +
                      " below overlap threshold");
  }
  return LidarMotiond::from_angle(theta, t);
}

ImageLineSet group_lines(const std::vector<ImageSegment>& raw,
                         const VanishingPointd& vp,
                         const CameraIntrinsicsd& k,
                         const LineGroupConfig& cfg) {
  ImageLineSet out;
  bool have_frame = true;
  TopDownFramed frame;
  try {
    frame = topdown_frame(vp, k);
  } catch (const DegenerateVanishingPoint&) {
    have_frame = false;
  }
  const Vec2d vpx(vp.u, vp.v);
  for (const auto& seg : raw) {
    const Vec2d mid = 0.5 * (seg.a + seg.b);
    const Vec2d dir = (seg.b - seg.a).normalized();
    const Vec2d to_vp = vpx - mid;
    bool vertical = false;
    if (to_vp.norm() < 1e-6) {
      vertical = true;
    } else {
      const Vec2d tv = to_vp.normalized();
      const double ang = std::atan2(
          std::abs(dir.x() * tv.y() - dir.y() * tv.x()), std::abs(dir.dot(tv)));
      vertical = ang <= cfg.vp_angle_thresh;
    }
    if (vertical) {
      out.vertical.push_back(seg);
      continue;
    }
    if (have_frame &&
        topdown_denominator(seg.a, frame) > cfg.horizon_margin &&
        topdown_denominator(seg.b, frame) > cfg.horizon_margin) {
      out.horizontal.push_back(seg);
    }
    // otherwise discarded
  }
  return out;
}

double weight_track(const FeatureTrack& track, double image_height,
                    double gamma) {
  if (track.observations.empty() || image_height <= 0) return 0.0;
  double mean_row = 0.0;
  for (const auto& [frame, px] : track.observations) mean_row += px.y();
  mean_row /= double(track.observations.size());
  const double x = std::clamp(mean_row / image_height, 0.0, 1.0);
  return std::pow(x, gamma);
}

}  // namespace lcl
