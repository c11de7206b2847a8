#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lcl/features.hpp"
#include "lcl/sim.hpp"

// Dataset directory format (written by the simulator, read by the pipeline;
// real captures use the same layout):
//   meta.json    - intrinsics, image size, LiDAR range limits
//   frames.jsonl - one record per frame: scan points, tracks, line buckets,
//                  vanishing point
//   gt.json      - optional ground truth (poses, alignment, plan, labels)

namespace lcl {

struct DatasetMeta {
  CameraIntrinsicsd k;
  int image_width = 0;
  int image_height = 0;
  double lidar_min_range = 0.0;
  double lidar_max_range = 0.0;
};

struct Dataset {
  DatasetMeta meta;
  std::vector<SensorFrame> frames;
  std::optional<GroundTruth> gt;
};

Dataset dataset_from_sim(const World& world, const SimSequence& sim);

void write_dataset(const std::string& dir, const Dataset& dataset);

/// Throws IoError naming the missing or malformed file.
Dataset read_dataset(const std::string& dir);

}  // namespace lcl
