#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lcl/sequence.hpp"
#include "lcl/types.hpp"

// Floor-plan integration from posed scans and joint pose/map refinement with
// fused image-feature constraints.

namespace lcl {

struct FloorPlan {
  std::vector<LineSegment2> walls;  // world frame, meters
  std::vector<Vec2d> corners;       // wall intersections and free endpoints
};

struct Trajectory {
  std::vector<Pose2d> poses;  // one per frame; pose 0 is the gauge (identity)
};

struct MappingConfig {
  // wall clustering
  double cluster_angle = 3.0 * EIGEN_PI / 180.0;
  double cluster_offset = 0.10;  // m
  double cluster_gap = 1.0;      // m, max along-line gap when merging
  double min_wall_length = 0.25; // m
  // corners
  double corner_radius = 0.6;    // m, line intersection near both extents
  double corner_min_angle = 20.0 * EIGEN_PI / 180.0;
  double endpoint_corner_gap = 0.4;  // m, free endpoint to nearest corner
  // fused refinement
  double point_wall_assoc = 0.20;   // m, scan point to wall gate
  int max_points_per_frame = 160;
  double huber_wall = 0.05;         // m
  double huber_epi = 3e-3;          // unit-baseline epipolar residual
  double epi_weight = 30.0;         // relative weight of epipolar terms
  double min_baseline = 0.02;       // m, skip pairs below
  int min_shared_tracks = 8;
  std::vector<int> pair_offsets = {1, 2, 4, 8};
  int max_iterations = 60;
  double step_tol = 1e-12;
};

/// Transform per-scan line segments into the world frame, cluster them by
/// direction and offset, and merge each cluster into one wall. Corners are
/// intersections of nearby non-parallel walls plus free endpoints.
FloorPlan integrate_scans(const Sequence& seq, const Trajectory& trajectory,
                          const MappingConfig& cfg = {});

struct FusedRefineResult {
  Trajectory trajectory;
  FloorPlan plan;
  bool converged = false;
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  std::string message;
};

/// Joint nonlinear least squares over poses (pose 0 fixed) and wall
/// parameters with two residual families: LiDAR point-to-wall distances and
/// epipolar residuals of tracked features, with the camera motion derived
/// from the poses through the alignment hypothesis. When the solver cannot
/// decrease the cost the inputs are returned unchanged with a diagnostic.
/// Epipolar terms use a unit-normalized camera translation, so the
/// unobservable monocular scale never enters and the map scale stays pinned
/// by the LiDAR terms.
///
/// `use_epipolar = false` runs the same solver on the LiDAR terms alone,
/// the LiDAR-only baseline the fused result is compared against.
FusedRefineResult fused_refine(const Sequence& seq,
                               const Trajectory& trajectory,
                               const FloorPlan& initial_plan,
                               const SimilarityTransform2d& alignment,
                               const MappingConfig& cfg = {},
                               bool use_epipolar = true);

// Residuals exposed for derivative checks.

/// Point-to-wall residual and its analytic Jacobian w.r.t. the frame pose
/// (x, y, theta) and the wall parameters (alpha, d), wall line
/// n(alpha) . x = d.
double point_wall_residual(const Vec2d& p_scan, const Pose2d& pose,
                           double alpha, double d,
                           Eigen::Matrix<double, 1, 3>* j_pose = nullptr,
                           Eigen::Matrix<double, 1, 2>* j_wall = nullptr);

/// Unit-baseline epipolar residual between two posed frames for one tracked
/// pixel pair, with analytic Jacobians w.r.t. both poses (x, y, theta).
/// Returns false (outputs untouched) when the baseline is below min_baseline.
bool epipolar_pose_residual(const Vec2d& px_i, const Vec2d& px_j,
                            const Pose2d& pose_i, const Pose2d& pose_j,
                            const SimilarityTransform2d& alignment,
                            const TopDownFramed& frame_i,
                            const TopDownFramed& frame_j,
                            const CameraIntrinsicsd& k, double min_baseline,
                            double* residual,
                            Eigen::Matrix<double, 1, 3>* j_pose_i = nullptr,
                            Eigen::Matrix<double, 1, 3>* j_pose_j = nullptr);

/// Chain wall segments into the closed boundary polygon (longest loop),
/// snapping endpoints within `snap`. Vertices are consecutive-wall line
/// intersections. Returns empty when no loop closes.
std::vector<Vec2d> plan_polygon(const FloorPlan& plan, double snap = 0.8);

}  // namespace lcl
