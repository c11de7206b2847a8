#pragma once

#include <cstdint>
#include <vector>

#include "lcl/geometry.hpp"
#include "lcl/types.hpp"

// Per-frame signal features: LiDAR line segments, scan-to-scan ICP odometry,
// image feature tracks and grouped image line segments.

namespace lcl {

struct LidarScan {
  double timestamp = 0.0;
  std::vector<Vec2d> points;       // sensor frame, meters, sorted by bearing
  std::vector<std::uint8_t> valid; // empty means all valid

  bool point_valid(std::size_t i) const {
    return valid.empty() || valid[i] != 0;
  }
  std::size_t valid_count() const;
};

struct LineSegment2 {
  Vec2d a = Vec2d::Zero();
  Vec2d b = Vec2d::Zero();
  int inlier_count = 0;
  double rms = 0.0;

  double length() const { return (b - a).norm(); }
  Vec2d direction() const { return (b - a).normalized(); }
  Vec2d normal() const {
    const Vec2d d = direction();
    return {-d.y(), d.x()};
  }
  double point_distance(const Vec2d& p) const {
    return std::abs(normal().dot(p - a));
  }
};

struct ImageSegment {
  Vec2d a = Vec2d::Zero();
  Vec2d b = Vec2d::Zero();
};

struct ImageLineSet {
  std::vector<ImageSegment> horizontal;  // ground-wall boundary candidates
  std::vector<ImageSegment> vertical;
};

/// One feature observation in one frame.
struct TrackObs {
  int id = -1;
  Vec2d px = Vec2d::Zero();
};

struct FeatureTrack {
  int id = -1;
  std::vector<std::pair<int, Vec2d>> observations;  // (frame index, pixel)

  const Vec2d* pixel_at(int frame) const;
};

/// One timestep of sensor data. `motion_from_prev` maps previous-frame LiDAR
/// coordinates into this frame; identity for frame 0 (filled by the odometry
/// stage, not present in raw datasets).
struct SensorFrame {
  int index = 0;
  LidarScan scan;
  std::vector<TrackObs> tracks;
  ImageLineSet lines;
  VanishingPointd vp;
  LidarMotiond motion_from_prev;
};

// --- LiDAR line extraction (split-and-merge over the bearing-ordered scan) ---

struct LineExtractConfig {
  double dist_thresh = 0.03;   // max point-to-line distance, m
  double min_length = 0.15;    // m
  int min_inliers = 6;
  double jump_thresh = 0.30;   // range discontinuity split, m
  double merge_angle = 2.0 * EIGEN_PI / 180.0;
  double merge_offset = 0.05;  // m
};

/// Split-and-merge line extraction. Returns segments ordered by bearing;
/// empty for degenerate scans (never throws).
std::vector<LineSegment2> extract_lines(const LidarScan& scan,
                                        const LineExtractConfig& cfg = {});

// --- scan-to-scan ICP (point-to-line metric) ---

struct IcpConfig {
  int max_iterations = 50;
  double param_tol = 1e-6;       // convergence on parameter change
  double max_corr_dist = 0.5;    // m, nearest-neighbor gate
  double inlier_dist = 0.05;     // m, residual gate for the overlap check
  double overlap_frac = 0.5;     // min inlier fraction at convergence
};

/// Point-to-line ICP estimate of the motion a -> b (p_b = R p_a + t for
/// static points). Throws IcpDiverged when the converged inlier fraction
/// falls below overlap_frac; callers fall back to a constant-velocity guess.
LidarMotiond icp_register(const LidarScan& a, const LidarScan& b,
                          const LidarMotiond& init, const IcpConfig& cfg = {});

// --- image line grouping ---

struct LineGroupConfig {
  double vp_angle_thresh = 2.0 * EIGEN_PI / 180.0;
  double horizon_margin = 1e-6;  // on the homogeneous denominator
};

/// Split raw segments into vertical (extension passes near the vanishing
/// point) and horizontal (fully below the rectified horizon) groups; segments
/// in neither are discarded. With a degenerate vanishing point only the
/// vertical test runs and nothing is classified horizontal.
ImageLineSet group_lines(const std::vector<ImageSegment>& raw,
                         const VanishingPointd& vp,
                         const CameraIntrinsicsd& k,
                         const LineGroupConfig& cfg = {});

/// Sampling weight favouring tracks low in the image: (mean row / height)^gamma.
double weight_track(const FeatureTrack& track, double image_height,
                    double gamma = 2.0);

}  // namespace lcl
