#pragma once

#include <optional>
#include <unordered_map>
#include <vector>

#include "lcl/features.hpp"
#include "lcl/geometry.hpp"

// Working state derived from a dataset: frames with odometry filled in,
// per-frame rectification frames and LiDAR segments, and the global track
// store. Built once by the frontend, then read by alignment and mapping.

namespace lcl {

struct FrontendConfig {
  LineExtractConfig lines;
  IcpConfig icp;
  LineGroupConfig grouping;
  double track_gamma = 2.0;
};

struct Sequence {
  CameraIntrinsicsd k;
  int image_width = 0;
  int image_height = 0;

  std::vector<SensorFrame> frames;
  std::vector<std::optional<TopDownFramed>> topdown;  // per frame
  std::vector<std::vector<LineSegment2>> scan_lines;  // per frame
  std::vector<Pose2d> odom_poses;                     // ICP chain, pose 0 = I
  std::unordered_map<int, FeatureTrack> tracks;
  std::unordered_map<int, double> track_weights;

  int size() const { return static_cast<int>(frames.size()); }

  /// Relative motion i -> j from the odometry chain.
  LidarMotiond relative_motion(int i, int j) const {
    return odom_poses[i].motion_to(odom_poses[j]);
  }

  /// Pixel pairs of tracks observed in both frames.
  std::vector<std::pair<Vec2d, Vec2d>> shared_pixels(
      int i, int j, std::vector<int>* ids = nullptr) const;
};

/// Run the frontend over raw frames: extract LiDAR lines, chain ICP odometry
/// (falling back to the constant-velocity guess when ICP reports divergence),
/// compute per-frame rectification frames, regroup image lines against the
/// vanishing point, and build the track store.
Sequence build_sequence(std::vector<SensorFrame> frames,
                        const CameraIntrinsicsd& k, int image_width,
                        int image_height, const FrontendConfig& cfg = {});

}  // namespace lcl
