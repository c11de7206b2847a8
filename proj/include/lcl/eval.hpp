#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lcl/mapping.hpp"
#include "lcl/types.hpp"

// Layout metrics: floor-plan-to-image segmentation rendering, pixel accuracy,
// corner RMSE and polygon F-score.

namespace lcl {

inline constexpr std::int32_t kLabelUnknown = 0;
inline constexpr std::int32_t kLabelGround = 1;
inline constexpr std::int32_t kLabelWallBase = 2;  // wall w -> 2 + w

struct LabelImage {
  int width = 0;
  int height = 0;
  std::vector<std::int32_t> labels;

  LabelImage() = default;
  LabelImage(int w, int h) : width(w), height(h), labels(w * h, 0) {}
  std::int32_t& at(int x, int y) { return labels[y * width + x]; }
  std::int32_t at(int x, int y) const { return labels[y * width + x]; }
};

/// Camera pose implied by an alignment hypothesis: planar position through
/// the LiDAR pose, height from the hypothesis scale, orientation composed
/// from the pose heading, the alignment rotation and the rectification frame.
void camera_pose_from_alignment(const Pose2d& lidar_pose,
                                const SimilarityTransform2d& alignment,
                                const TopDownFramed& frame, Mat3d* r_cw,
                                Vec3d* c_w);

/// Ray-cast the wall set from the camera: each raster pixel is labelled
/// ground, the nearest wall whose face it hits below wall_height, or unknown.
/// The raster samples the full image at raster_width x raster_height.
LabelImage render_segmentation(const std::vector<LineSegment2>& walls,
                               double wall_height, const Mat3d& r_cw,
                               const Vec3d& c_w, const CameraIntrinsicsd& k,
                               int image_width, int image_height,
                               int raster_width, int raster_height);

/// Percentage of pixels with the same class (ground / wall / unknown) over
/// the pixels labelled in `truth`. Wall identities are collapsed: predicted
/// and true wall indices come from unrelated orderings.
double segmentation_accuracy(const LabelImage& pred, const LabelImage& truth);

struct CornerMatch {
  double rmse = 0.0;
  int matched = 0;
  int unmatched_pred = 0;
  int unmatched_truth = 0;
};

/// Greedy nearest-neighbour one-to-one corner matching within `radius`;
/// RMSE over matched pairs, unmatched corners reported alongside.
CornerMatch corner_rmse(const FloorPlan& pred, const FloorPlan& truth,
                        double radius = 1.0);

/// Signed shoelace area (positive for counter-oriented rings).
double polygon_area(const std::vector<Vec2d>& poly);

/// Throws InvalidPolygon for rings with fewer than 3 vertices or with
/// self-intersections.
void validate_polygon(const std::vector<Vec2d>& poly);

/// Intersection area of two simple polygons (any orientation, convex or
/// not), via signed fan decomposition into triangle-triangle clips.
double intersection_area(const std::vector<Vec2d>& a,
                         const std::vector<Vec2d>& b);

/// F = 2 |A intersect B| / (|A| + |B|) over unions of disjoint polygons.
double fscore(const std::vector<std::vector<Vec2d>>& pred,
              const std::vector<std::vector<Vec2d>>& truth);
double fscore(const std::vector<Vec2d>& pred, const std::vector<Vec2d>& truth);

/// Deterministic colorized P6 export of a label image.
void write_ppm(const std::string& path, const LabelImage& img);

}  // namespace lcl
