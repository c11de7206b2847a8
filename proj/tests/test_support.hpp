#pragma once

// Shared helpers for simulator-backed tests.

#include "lcl/sequence.hpp"
#include "lcl/sim.hpp"

namespace lcl::test {

inline World without_noise(World w) {
  w.noise.range_sigma = 0.0;
  w.noise.pixel_sigma = 0.0;
  w.noise.dropout = 0.0;
  return w;
}

struct SimRun {
  GroundTruth gt;
  Sequence seq;
};

inline SimRun make_run(const World& world, int frames, std::uint64_t seed,
                       const FrontendConfig& cfg = {}) {
  auto sim = generate_sequence(world, frames, seed);
  SimRun run;
  run.gt = sim.gt;
  run.seq = build_sequence(std::move(sim.frames), world.intrinsics,
                           world.image_width, world.image_height, cfg);
  return run;
}

inline SimRun make_run(const World& world, const std::vector<Pose2d>& traj,
                       std::uint64_t seed, const FrontendConfig& cfg = {}) {
  auto sim = generate_sequence(world, traj, seed);
  SimRun run;
  run.gt = sim.gt;
  run.seq = build_sequence(std::move(sim.frames), world.intrinsics,
                           world.image_width, world.image_height, cfg);
  return run;
}

inline bool close_to(const SimilarityTransform2d& a,
                     const SimilarityTransform2d& b, double scale_tol,
                     double rot_tol, double origin_tol) {
  return std::abs(a.delta / b.delta - 1.0) < scale_tol &&
         std::abs(wrap_angle(a.phi - b.phi)) < rot_tol &&
         (a.origin - b.origin).norm() < origin_tol;
}

}  // namespace lcl::test
