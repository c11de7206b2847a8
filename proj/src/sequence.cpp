#include "lcl/sequence.hpp"

#include <algorithm>

#include "lcl/errors.hpp"

namespace lcl {

std::vector<std::pair<Vec2d, Vec2d>> Sequence::shared_pixels(
    int i, int j, std::vector<int>* ids) const {
  std::unordered_map<int, Vec2d> in_j;
  in_j.reserve(frames[j].tracks.size());
  for (const auto& obs : frames[j].tracks) in_j.emplace(obs.id, obs.px);

  std::vector<std::pair<Vec2d, Vec2d>> out;
  if (ids) ids->clear();
  for (const auto& obs : frames[i].tracks) {
    auto it = in_j.find(obs.id);
    if (it == in_j.end()) continue;
    out.emplace_back(obs.px, it->second);
    if (ids) ids->push_back(obs.id);
  }
  return out;
}

Sequence build_sequence(std::vector<SensorFrame> frames,
                        const CameraIntrinsicsd& k, int image_width,
                        int image_height, const FrontendConfig& cfg) {
  Sequence seq;
  seq.k = k;
  seq.image_width = image_width;
  seq.image_height = image_height;
  seq.frames = std::move(frames);

  const int n = seq.size();
  seq.topdown.resize(n);
  seq.scan_lines.resize(n);
  seq.odom_poses.resize(n);

  LidarMotiond prev_motion;  // constant-velocity guess
  for (int i = 0; i < n; ++i) {
    auto& frame = seq.frames[i];
    frame.index = i;
    seq.scan_lines[i] = extract_lines(frame.scan, cfg.lines);

    try {
      seq.topdown[i] = topdown_frame(frame.vp, k);
    } catch (const DegenerateVanishingPoint&) {
      seq.topdown[i] = std::nullopt;  // frame skipped by alignment stages
    }

    // Regroup the raw line buckets against the vanishing point.
    std::vector<ImageSegment> raw;
    raw.reserve(frame.lines.horizontal.size() + frame.lines.vertical.size());
    raw.insert(raw.end(), frame.lines.horizontal.begin(),
               frame.lines.horizontal.end());
    raw.insert(raw.end(), frame.lines.vertical.begin(),
               frame.lines.vertical.end());
    frame.lines = group_lines(raw, frame.vp, k, cfg.grouping);

    if (i == 0) {
      frame.motion_from_prev = LidarMotiond{};
      seq.odom_poses[0] = Pose2d{};
    } else {
      LidarMotiond motion = prev_motion;
      try {
        motion = icp_register(seq.frames[i - 1].scan, frame.scan, prev_motion,
                              cfg.icp);
      } catch (const IcpDiverged&) {
        // keep the constant-velocity guess
      }
      frame.motion_from_prev = motion;
      prev_motion = motion;
      const auto inv = motion.inverse();
      seq.odom_poses[i] =
          seq.odom_poses[i - 1].compose(Pose2d{inv.t, inv.angle()});
    }

    for (const auto& obs : frame.tracks) {
      auto& track = seq.tracks[obs.id];
      track.id = obs.id;
      track.observations.emplace_back(i, obs.px);
    }
  }

  for (const auto& [id, track] : seq.tracks) {
    seq.track_weights[id] = weight_track(track, image_height, cfg.track_gamma);
  }
  return seq;
}

}  // namespace lcl
