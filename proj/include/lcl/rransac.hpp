#pragma once

#include <optional>
#include <random>
#include <vector>

#include "lcl/sequence.hpp"

// Recursive multi-hypothesis alignment: motion-constrained minimal subsets
// propose similarity hypotheses, epipolar inlier counts score them across the
// sequence, and the winner is polished by point-to-line fitting against the
// ground-wall boundary candidates.

namespace lcl {

enum class GenerationMode {
  kMotionConstrained,  // tracked features + scan motion (three-scan subsets)
  kBoundaryCorners,    // boundary intersections vs LiDAR corners (control)
};

struct RransacConfig {
  // Epipolar inlier gate: 95th percentile of true-match scores on simulated
  // sequences with 1 px feature noise (square room, 10 seeds).
  double tau = 1.2e-7;
  int budget = 25;        // minimal subsets per generation step
  int draw_cap_factor = 4;
  int capacity = 20;      // M
  int stale_age = 10;     // frames without support before pruning
  double promote_thresh = 0.7;
  int min_maturity = 5;   // evaluated frame pairs before eligible as best
  int min_pairs = 8;      // shared tracks needed to evaluate a frame pair
  int window = 8;         // generation window W
  double min_rotation = 0.5 * EIGEN_PI / 180.0;
  double min_translation = 5e-3;  // m camera baseline; below -> pair skipped
  double support_frac = 0.5;
  double assoc_thresh = 5.0;      // px, boundary association gate
  double track_gamma = 2.0;
  GenerationMode mode = GenerationMode::kMotionConstrained;
};

struct Hypothesis {
  int id = 0;
  SimilarityTransform2d transform;
  long long inlier_count = 0;
  long long pairs_evaluated = 0;
  int frames_evaluated = 0;
  int last_support_frame = -1;

  double score() const {
    return pairs_evaluated > 0 ? double(inlier_count) / double(pairs_evaluated)
                               : 0.0;
  }
};

struct TrackerState {
  RransacConfig cfg;
  std::mt19937_64 rng;
  std::vector<Hypothesis> hypotheses;
  int next_id = 0;
  int last_frame = -1;

  TrackerState(const RransacConfig& c, std::uint64_t seed)
      : cfg(c), rng(seed) {}

  void reset() {
    hypotheses.clear();
    last_frame = -1;
  }
};

/// Propose up to `budget` hypotheses from the frames in `window` (indices
/// into the sequence). The two scan pairs with the largest relative rotation
/// anchor the minimal subsets; one tracked feature per pair is sampled with
/// bottom-of-image weighting. Degenerate draws are retried without consuming
/// budget, up to draw_cap_factor * budget attempts. Throws NoValidMotion
/// when fewer than two scan pairs exceed the minimum rotation.
std::vector<Hypothesis> generate_hypotheses(const Sequence& seq,
                                            const std::vector<int>& window,
                                            int budget,
                                            const RransacConfig& cfg,
                                            std::mt19937_64& rng);

/// Control strategy: random pairs of boundary-candidate intersections
/// (top-down) against LiDAR corner points, same budget accounting.
std::vector<Hypothesis> generate_hypotheses_baseline(const Sequence& seq,
                                                     int frame,
                                                     int budget,
                                                     const RransacConfig& cfg,
                                                     std::mt19937_64& rng);

/// Score a hypothesis on one frame pair: epipolar inliers over the shared
/// tracks. Counters accumulate into the returned copy; pairs with too few
/// shared tracks, a missing rectification frame, or near-zero camera baseline
/// are skipped with counters unchanged (`skipped` reports this).
Hypothesis evaluate_hypothesis(const Hypothesis& h, const Sequence& seq,
                               int frame_i, int frame_j,
                               const RransacConfig& cfg,
                               bool* skipped = nullptr);

/// Advance the tracker by one frame: update every stored hypothesis against
/// (previous, new), spend the generation budget when no hypothesis is
/// promoted yet, and prune by capacity and staleness.
void rransac_step(TrackerState& state, const Sequence& seq, int new_frame);

/// Highest-scoring hypothesis with enough evaluated pairs; ties break on
/// inlier count, then lowest id. Empty when none is mature.
std::optional<Hypothesis> select_best(const TrackerState& state);

struct BoundaryAssociation {
  int segment = -1;        // index into scan_lines[frame]
  int line = -1;           // index into frames[frame].lines.horizontal, -1 none
  double mean_distance_px = std::numeric_limits<double>::infinity();
};

/// Project each LiDAR segment of the frame into the image through the
/// hypothesis and associate it to the closest horizontal boundary candidate
/// within the pixel gate. Unmatched segments are reported with line = -1.
std::vector<BoundaryAssociation> identify_boundaries(
    const SimilarityTransform2d& h, const Sequence& seq, int frame,
    const RransacConfig& cfg);

struct OptimizeResult {
  Hypothesis hypothesis;
  bool rank_deficient = false;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
};

/// Residual of one LiDAR point against a top-down boundary line
/// (n . x = d) under the alignment, with the analytic Jacobian w.r.t.
/// (delta, phi, origin). This is the term optimize_hypothesis minimizes.
double alignment_line_residual(const SimilarityTransform2d& t,
                               const Vec2d& line_n, double line_d,
                               const Vec2d& p_lidar,
                               Eigen::Matrix<double, 1, 4>* jac = nullptr);

/// Refine (delta, phi, origin) by damped Gauss-Newton on the summed squared
/// top-down point-to-line distances of the associated boundaries over the
/// given frames. Associations are fixed at entry, so the cost never
/// increases. When the association directions leave the 4-DOF problem rank
/// deficient the hypothesis is returned unchanged and flagged.
OptimizeResult optimize_hypothesis(const Hypothesis& h, const Sequence& seq,
                                   const std::vector<int>& frames,
                                   const RransacConfig& cfg);

}  // namespace lcl
