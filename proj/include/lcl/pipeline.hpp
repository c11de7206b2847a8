#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lcl/config.hpp"
#include "lcl/dataset.hpp"
#include "lcl/eval.hpp"
#include "lcl/mapping.hpp"
#include "lcl/rransac.hpp"

// End-to-end run: simulate or load a dataset, extract features, track
// alignment hypotheses, build and refine the floor plan, render segmentation
// and evaluate against ground truth when available.

namespace lcl {

struct PipelineOptions {
  std::string dataset_dir;   // read this dataset instead of simulating
  std::string out_dir;       // write artifacts when non-empty
  int reset_tracker_at = -1; // drop all hypotheses at this frame
};

struct PipelineResult {
  int exit_code = 0;   // 0 ok, 2 recoverable (no mature hypothesis)
  std::string message;

  Sequence seq;
  std::optional<GroundTruth> gt;  // expressed in the frame-0 gauge

  std::optional<Hypothesis> best_raw;  // tracker winner
  std::optional<Hypothesis> best;      // after point-to-line optimization

  Trajectory odometry;
  FloorPlan lidar_plan;            // integrated from raw odometry
  FusedRefineResult lidar_refined; // LiDAR-only joint refinement
  FusedRefineResult fused;         // with epipolar terms

  nlohmann::json metrics;
  std::vector<nlohmann::json> telemetry;  // one record per frame
};

/// Ground truth re-expressed in the reconstruction gauge (LiDAR frame 0).
GroundTruth gt_to_gauge(const GroundTruth& gt);

PipelineResult run_pipeline(const Config& cfg, const PipelineOptions& opt = {});

void write_artifacts(const PipelineResult& result, const Config& cfg,
                     const std::string& out_dir);

}  // namespace lcl
