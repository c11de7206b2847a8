#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "lcl/features.hpp"
#include "lcl/mapping.hpp"
#include "lcl/types.hpp"

// Ground-truth scene generator: polygonal rooms with optional wall-like
// clutter, a planar robot trajectory, ray-cast LiDAR scans and synthetic
// camera observations (tracked points, boundary/vertical lines, exact
// vertical vanishing point).
//
// World frames follow the shared planar convention of types.hpp: the world
// z axis points toward the floor, the floor plane is z = 0, and heights above
// the floor are negative z. Viewed on a conventional plot the maps appear
// mirrored; all in-plane transforms stay proper rotations.

namespace lcl {

struct NoiseConfig {
  double range_sigma = 0.01;  // m
  double pixel_sigma = 0.5;   // px
  double dropout = 0.10;      // per-observation probability
};

/// Rigid camera mount relative to the LiDAR. Pitch is the downward tilt; a
/// nonzero roll keeps the vertical vanishing point off the image y axis,
/// where the rectification frame loses rank.
struct CameraMount {
  double height = 1.0;                    // m above floor
  double pitch = 18.0 * EIGEN_PI / 180.0;
  double roll = 3.0 * EIGEN_PI / 180.0;
  double yaw = 0.0;                       // about vertical, vs LiDAR x
  Vec2d offset = Vec2d(0.06, -0.04);      // camera center in LiDAR XY
};

struct LidarSpec {
  int beams = 360;
  double min_range = 0.15;
  double max_range = 8.0;
};

struct WallFeatureSpec {
  int base_points = 6;      // on the ground-wall boundary
  int interior_points = 6;  // on the wall, above ground
  int texture_lines = 1;    // horizontal non-boundary distractor lines
};

struct World {
  std::string name = "square";
  std::vector<Vec2d> floor;  // simple polygon, outer boundary
  std::vector<std::vector<Vec2d>> clutter;  // closed wall-like obstacles
  double wall_height = 2.5;  // m

  CameraMount mount;
  CameraIntrinsicsd intrinsics{1000.0, 1000.0, 960.0, 540.0};
  int image_width = 1920;
  int image_height = 1080;
  double min_pitch = 5.0 * EIGEN_PI / 180.0;

  LidarSpec lidar;
  NoiseConfig noise;

  WallFeatureSpec features;
  std::vector<WallFeatureSpec> per_wall_features;  // optional, indexed as walls()
  int floor_points = 30;

  /// All wall segments: floor boundary edges followed by clutter edges.
  std::vector<LineSegment2> walls() const;
  bool inside(const Vec2d& p) const;
};

World make_square_world();
World make_cluttered_world();
World make_corridor_world();
World make_world(const std::string& name);

/// Full 3D camera pose (camera->world rotation and camera center) for a
/// LiDAR pose and mount. Camera axes: x right, y down, z forward.
void camera_pose_from_mount(const Pose2d& lidar_pose, const CameraMount& mount,
                            Mat3d* r_cw, Vec3d* c_w);

/// The exact alignment (delta, phi, origin) implied by a mount: delta equals
/// the camera height, phi the fixed in-plane rotation between the top-down
/// frame and the LiDAR, origin the planar mount offset.
SimilarityTransform2d true_alignment(const CameraMount& mount,
                                     const CameraIntrinsicsd& k);

/// Exact vertical vanishing point for a camera pose; throws
/// DegenerateVanishingPoint if the camera tilt is below min_pitch.
VanishingPointd true_vanishing_point(const Mat3d& r_cw,
                                     const CameraIntrinsicsd& k,
                                     double min_pitch);

/// Ray-cast scan with Gaussian range noise; occlusion correct.
/// Throws PoseOutsideWorld when the pose is not in free space.
LidarScan simulate_scan(const World& world, const Pose2d& pose,
                        std::mt19937_64& rng);

/// Stable 3D feature points scattered over walls and floor; ids are indices.
struct FeaturePoint {
  int id = -1;
  Vec3d position = Vec3d::Zero();  // world, z <= 0
  bool on_ground = false;
  int wall = -1;                   // -1 for floor points
};

struct CameraObservation {
  std::vector<TrackObs> tracks;
  ImageLineSet lines;                 // raw detector-style buckets
  std::vector<int> horizontal_wall;   // wall id per horizontal line, -1 = texture
  std::vector<int> vertical_corner;   // corner id per vertical line
  VanishingPointd vp;
};

/// World-fixed visual structure: tracked points plus per-wall heights of the
/// horizontal distractor lines (stable across frames, like real texture).
struct FeatureField {
  std::vector<FeaturePoint> points;
  std::vector<std::vector<double>> texture_heights;  // per wall, m above floor
};

FeatureField scatter_features(const World& world, std::mt19937_64& rng);

/// Project the feature field and wall lines through the true camera.
/// Throws PoseOutsideWorld when the pose is not in free space.
CameraObservation simulate_camera(const World& world, const Pose2d& pose,
                                  const FeatureField& features,
                                  std::mt19937_64& rng);

struct GroundTruth {
  std::vector<Pose2d> poses;  // LiDAR, world frame
  SimilarityTransform2d alignment;
  FloorPlan plan;                      // walls incl. clutter, corners
  std::vector<Vec2d> floor_polygon;    // outer boundary only
  CameraMount mount;
  double wall_height = 2.5;
  std::unordered_map<int, bool> track_on_ground;
};

struct SimSequence {
  std::vector<SensorFrame> frames;
  GroundTruth gt;
};

/// Poses spaced 10-20 cm (uniform per step) along a world-specific path:
/// an arc for the room worlds, a weaving path along the corridor.
std::vector<Pose2d> preset_trajectory(const World& world, int frame_count,
                                      std::mt19937_64& rng);

/// Simulate a full sequence over the given trajectory.
SimSequence generate_sequence(const World& world,
                              const std::vector<Pose2d>& trajectory,
                              std::uint64_t seed);

/// Convenience: preset trajectory + sequence from one seed.
SimSequence generate_sequence(const World& world, int frame_count,
                              std::uint64_t seed);

}  // namespace lcl
