#include "lcl/rransac.hpp"

#include <algorithm>
#include <cmath>

#include "lcl/errors.hpp"

namespace lcl {

namespace {

constexpr double kHorizonMargin = 1e-4;

bool plausible(const SimilarityTransform2d& t) {
  return t.delta > 0.05 && t.delta < 20.0 && t.origin.norm() < 50.0 &&
         std::isfinite(t.phi);
}

/// Tracked features usable for one scan pair: both observations project to
/// the floor side of the horizon.
struct PairFeatures {
  std::vector<Vec2d> pg_i, pg_j;
  std::vector<double> weights;

  bool empty() const { return pg_i.empty(); }
};

PairFeatures pair_features(const Sequence& seq, int i, int j) {
  PairFeatures out;
  std::vector<int> ids;
  const auto pixels = seq.shared_pixels(i, j, &ids);
  const auto& td_i = *seq.topdown[i];
  const auto& td_j = *seq.topdown[j];
  for (std::size_t n = 0; n < pixels.size(); ++n) {
    const auto& [pi, pj] = pixels[n];
    if (topdown_denominator(pi, td_i) < kHorizonMargin) continue;
    if (topdown_denominator(pj, td_j) < kHorizonMargin) continue;
    out.pg_i.push_back(project_topdown(pi, td_i));
    out.pg_j.push_back(project_topdown(pj, td_j));
    auto w = seq.track_weights.find(ids[n]);
    out.weights.push_back(
        std::max(w != seq.track_weights.end() ? w->second : 0.0, 1e-4));
  }
  return out;
}

Vec2d rotation_center(const LidarMotiond& m) {
  const Mat2d a = Mat2d::Identity() - m.r;
  const double det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
  Mat2d inv;
  inv << a(1, 1), -a(0, 1), -a(1, 0), a(0, 0);
  return (inv / det) * m.t;
}

}  // namespace

std::vector<Hypothesis> generate_hypotheses(const Sequence& seq,
                                            const std::vector<int>& window,
                                            int budget,
                                            const RransacConfig& cfg,
                                            std::mt19937_64& rng) {
  if (budget <= 0) return {};

  struct Cand {
    int i, j;
    double rot;
    Vec2d icr;
  };
  std::vector<Cand> cands;
  for (std::size_t a = 0; a + 1 < window.size(); ++a) {
    for (std::size_t b = a + 1; b < window.size(); ++b) {
      const int i = window[a], j = window[b];
      if (!seq.topdown[i] || !seq.topdown[j]) continue;
      const auto motion = seq.relative_motion(i, j);
      const double rot = std::abs(motion.angle());
      if (rot <= cfg.min_rotation) continue;
      cands.push_back({i, j, rot, rotation_center(motion)});
    }
  }
  if (cands.size() < 2) {
    throw NoValidMotion("fewer than two scan pairs exceed the rotation gate");
  }

  // Pick the two scan pairs maximizing the subset conditioning: the noise of
  // a motion-constrained source scales with 1/(2 sin(theta/2)), and the
  // similarity accuracy with the separation of the two rotation centers.
  std::sort(cands.begin(), cands.end(),
            [](const Cand& x, const Cand& y) { return x.rot > y.rot; });
  if (cands.size() > 12) cands.resize(12);
  const auto gain = [](double rot) { return 2.0 * std::sin(rot / 2.0); };
  int best_a = -1, best_b = -1;
  double best_score = 0.0;
  for (std::size_t a = 0; a + 1 < cands.size(); ++a) {
    for (std::size_t b = a + 1; b < cands.size(); ++b) {
      const double sep = (cands[a].icr - cands[b].icr).norm();
      const double score = sep * gain(cands[a].rot) * gain(cands[b].rot);
      if (score > best_score) {
        best_score = score;
        best_a = static_cast<int>(a);
        best_b = static_cast<int>(b);
      }
    }
  }
  if (best_a < 0 || best_score < 1e-6) {
    throw NoValidMotion("rotation centers in window are degenerate");
  }

  const Cand* pa = &cands[best_a];
  const Cand* pb = &cands[best_b];
  PairFeatures fa = pair_features(seq, pa->i, pa->j);
  PairFeatures fb = pair_features(seq, pb->i, pb->j);
  if (fa.empty() || fb.empty()) {
    throw NoValidMotion("no tracked ground candidates on the selected pairs");
  }

  const auto motion_a = seq.relative_motion(pa->i, pa->j);
  const auto motion_b = seq.relative_motion(pb->i, pb->j);
  std::discrete_distribution<int> draw_a(fa.weights.begin(), fa.weights.end());
  std::discrete_distribution<int> draw_b(fb.weights.begin(), fb.weights.end());

  std::vector<Hypothesis> out;
  const int max_draws = cfg.draw_cap_factor * budget;
  for (int draws = 0; draws < max_draws && (int)out.size() < budget; ++draws) {
    const int ia = draw_a(rng);
    const int ib = draw_b(rng);
    try {
      const auto pair_1 = motion_constraint_pair(motion_a, fa.pg_i[ia],
                                                 fa.pg_j[ia], cfg.min_rotation);
      const auto pair_2 = motion_constraint_pair(motion_b, fb.pg_i[ib],
                                                 fb.pg_j[ib], cfg.min_rotation);
      const auto t = similarity_from_pairs(pair_1, pair_2);
      if (!plausible(t)) continue;
      Hypothesis h;
      h.transform = t;
      out.push_back(h);
    } catch (const CoincidentPoints&) {
    } catch (const DegenerateMotion&) {
    }
  }
  return out;
}

std::vector<Hypothesis> generate_hypotheses_baseline(const Sequence& seq,
                                                     int frame, int budget,
                                                     const RransacConfig& cfg,
                                                     std::mt19937_64& rng) {
  if (budget <= 0 || !seq.topdown[frame]) return {};
  const auto& td = *seq.topdown[frame];

  // Boundary candidates as top-down lines.
  struct GLine {
    Vec2d p, dir;
  };
  std::vector<GLine> glines;
  for (const auto& seg : seq.frames[frame].lines.horizontal) {
    if (topdown_denominator(seg.a, td) < kHorizonMargin ||
        topdown_denominator(seg.b, td) < kHorizonMargin)
      continue;
    const Vec2d g1 = project_topdown(seg.a, td);
    const Vec2d g2 = project_topdown(seg.b, td);
    if ((g2 - g1).norm() < 1e-6) continue;
    glines.push_back({g1, (g2 - g1).normalized()});
  }

  // Source points: intersections of non-parallel boundary candidates.
  std::vector<Vec2d> sources;
  for (std::size_t a = 0; a + 1 < glines.size(); ++a) {
    for (std::size_t b = a + 1; b < glines.size(); ++b) {
      const double denom = glines[a].dir.x() * glines[b].dir.y() -
                           glines[a].dir.y() * glines[b].dir.x();
      if (std::abs(denom) < std::sin(15.0 * EIGEN_PI / 180.0)) continue;
      const Vec2d dp = glines[b].p - glines[a].p;
      const double t = (dp.x() * glines[b].dir.y() - dp.y() * glines[b].dir.x()) / denom;
      const Vec2d x = glines[a].p + t * glines[a].dir;
      if (x.norm() > 50.0) continue;
      sources.push_back(x);
    }
  }

  // Destination points: LiDAR corners from adjacent extracted segments.
  std::vector<Vec2d> dests;
  const auto& segs = seq.scan_lines[frame];
  for (std::size_t a = 0; a + 1 < segs.size(); ++a) {
    const auto& s1 = segs[a];
    const auto& s2 = segs[a + 1];
    if ((s2.a - s1.b).norm() > 0.6) continue;
    const Vec2d d1 = s1.direction(), d2 = s2.direction();
    const double denom = d1.x() * d2.y() - d1.y() * d2.x();
    if (std::abs(denom) < std::sin(25.0 * EIGEN_PI / 180.0)) continue;
    const Vec2d dp = s2.a - s1.a;
    const double t = (dp.x() * d2.y() - dp.y() * d2.x()) / denom;
    dests.push_back(s1.a + t * d1);
  }

  if (sources.size() < 2 || dests.size() < 2) return {};

  std::uniform_int_distribution<int> pick_s(0, (int)sources.size() - 1);
  std::uniform_int_distribution<int> pick_d(0, (int)dests.size() - 1);
  std::vector<Hypothesis> out;
  const int max_draws = cfg.draw_cap_factor * budget;
  for (int draws = 0; draws < max_draws && (int)out.size() < budget; ++draws) {
    const int s1 = pick_s(rng), s2 = pick_s(rng);
    const int d1 = pick_d(rng), d2 = pick_d(rng);
    if (s1 == s2 || d1 == d2) continue;
    try {
      const auto t =
          similarity_from_pairs(PointPair2d{sources[s1], dests[d1]},
                                PointPair2d{sources[s2], dests[d2]});
      if (!plausible(t)) continue;
      Hypothesis h;
      h.transform = t;
      out.push_back(h);
    } catch (const CoincidentPoints&) {
    }
  }
  return out;
}

Hypothesis evaluate_hypothesis(const Hypothesis& h, const Sequence& seq,
                               int frame_i, int frame_j,
                               const RransacConfig& cfg, bool* skipped) {
  if (skipped) *skipped = true;
  if (frame_i < 0 || frame_j < 0 || !seq.topdown[frame_i] ||
      !seq.topdown[frame_j])
    return h;
  const auto pixels = seq.shared_pixels(frame_i, frame_j);
  if ((int)pixels.size() < cfg.min_pairs) return h;

  const auto motion = seq.relative_motion(frame_i, frame_j);
  const auto [rc, tc] = camera_motion_from_hypothesis(
      h.transform, *seq.topdown[frame_i], *seq.topdown[frame_j], motion);
  // tc carries 1/delta; gate on the physical baseline in meters.
  if (tc.norm() * h.transform.delta < cfg.min_translation) return h;

  const Mat3d f = fundamental_matrix(rc, tc, seq.k, seq.k);
  long long inliers = 0;
  for (const auto& [pi, pj] : pixels) {
    if (epipolar_residual(h.transform, f, pi, pj) < cfg.tau) ++inliers;
  }

  Hypothesis out = h;
  out.pairs_evaluated += (long long)pixels.size();
  out.inlier_count += inliers;
  out.frames_evaluated += 1;
  if ((double)inliers >= cfg.support_frac * (double)pixels.size()) {
    out.last_support_frame = std::max(out.last_support_frame, frame_j);
  }
  if (skipped) *skipped = false;
  return out;
}

void rransac_step(TrackerState& state, const Sequence& seq, int new_frame) {
  const auto& cfg = state.cfg;

  if (state.last_frame >= 0 && new_frame > 0) {
    for (auto& h : state.hypotheses) {
      h = evaluate_hypothesis(h, seq, new_frame - 1, new_frame, cfg);
    }
  }

  double best = -1.0;
  for (const auto& h : state.hypotheses) best = std::max(best, h.score());

  if (best < cfg.promote_thresh) {
    std::vector<Hypothesis> fresh;
    try {
      if (cfg.mode == GenerationMode::kMotionConstrained) {
        std::vector<int> window;
        for (int f = std::max(0, new_frame - cfg.window + 1); f <= new_frame; ++f)
          window.push_back(f);
        fresh = generate_hypotheses(seq, window, cfg.budget, cfg, state.rng);
      } else {
        fresh = generate_hypotheses_baseline(seq, new_frame, cfg.budget, cfg,
                                             state.rng);
      }
    } catch (const NoValidMotion&) {
      // degenerate frames pass through; wait for more motion
    }
    for (auto& h : fresh) {
      h.id = state.next_id++;
      h.last_support_frame = new_frame;  // newborn grace period
      h = evaluate_hypothesis(h, seq, new_frame - 1, new_frame, cfg);
      state.hypotheses.push_back(h);
    }
  }

  // Prune stale, then enforce capacity keeping the strongest.
  std::erase_if(state.hypotheses, [&](const Hypothesis& h) {
    return new_frame - h.last_support_frame > cfg.stale_age;
  });
  std::sort(state.hypotheses.begin(), state.hypotheses.end(),
            [](const Hypothesis& a, const Hypothesis& b) {
              if (a.score() != b.score()) return a.score() > b.score();
              if (a.inlier_count != b.inlier_count)
                return a.inlier_count > b.inlier_count;
              return a.id < b.id;
            });
  if ((int)state.hypotheses.size() > cfg.capacity) {
    state.hypotheses.resize(cfg.capacity);
  }
  state.last_frame = new_frame;
}

std::optional<Hypothesis> select_best(const TrackerState& state) {
  const Hypothesis* best = nullptr;
  for (const auto& h : state.hypotheses) {
    if (h.frames_evaluated < state.cfg.min_maturity) continue;
    if (!best || h.score() > best->score() ||
        (h.score() == best->score() &&
         (h.inlier_count > best->inlier_count ||
          (h.inlier_count == best->inlier_count && h.id < best->id)))) {
      best = &h;
    }
  }
  if (!best) return std::nullopt;
  return *best;
}

namespace {

constexpr int kSegmentSamples = 8;

std::vector<Vec2d> sample_segment(const LineSegment2& seg) {
  std::vector<Vec2d> pts;
  pts.reserve(kSegmentSamples);
  for (int i = 0; i < kSegmentSamples; ++i) {
    const double t = double(i) / (kSegmentSamples - 1);
    pts.push_back(seg.a + t * (seg.b - seg.a));
  }
  return pts;
}

}  // namespace

double alignment_line_residual(const SimilarityTransform2d& t,
                               const Vec2d& line_n, double line_d,
                               const Vec2d& p_lidar,
                               Eigen::Matrix<double, 1, 4>* jac) {
  static const Mat2d j90 = (Mat2d() << 0, -1, 1, 0).finished();
  const Vec2d q = t.rotation().transpose() * (p_lidar - t.origin) / t.delta;
  if (jac) {
    (*jac)[0] = line_n.dot(-q / t.delta);
    (*jac)[1] = line_n.dot(-(j90 * q));
    jac->rightCols<2>() = -(t.rotation() * line_n).transpose() / t.delta;
  }
  return line_n.dot(q) - line_d;
}

std::vector<BoundaryAssociation> identify_boundaries(
    const SimilarityTransform2d& h, const Sequence& seq, int frame,
    const RransacConfig& cfg) {
  std::vector<BoundaryAssociation> out;
  const auto& segs = seq.scan_lines[frame];
  const auto& lines = seq.frames[frame].lines.horizontal;
  const bool ok = seq.topdown[frame].has_value();

  for (int s = 0; s < (int)segs.size(); ++s) {
    BoundaryAssociation assoc;
    assoc.segment = s;
    if (ok && !lines.empty()) {
      std::vector<Vec2d> px;
      for (const auto& p : sample_segment(segs[s])) {
        const Vec3d ray =
            topdown_to_image_ray(h.apply_inverse(p), *seq.topdown[frame], seq.k);
        if (ray.z() > 1e-9) px.emplace_back(ray.x() / ray.z(), ray.y() / ray.z());
      }
      if ((int)px.size() >= kSegmentSamples / 2) {
        for (int l = 0; l < (int)lines.size(); ++l) {
          const Vec2d e = lines[l].b - lines[l].a;
          if (e.norm() < 1e-9) continue;
          const Vec2d n(-e.y() / e.norm(), e.x() / e.norm());
          double mean = 0.0;
          for (const auto& p : px) mean += std::abs(n.dot(p - lines[l].a));
          mean /= double(px.size());
          if (mean < assoc.mean_distance_px) {
            assoc.mean_distance_px = mean;
            assoc.line = l;
          }
        }
        if (assoc.mean_distance_px > cfg.assoc_thresh) assoc.line = -1;
      }
    }
    out.push_back(assoc);
  }
  return out;
}

OptimizeResult optimize_hypothesis(const Hypothesis& h, const Sequence& seq,
                                   const std::vector<int>& frames,
                                   const RransacConfig& cfg) {
  // One unit per associated boundary: a top-down line and the LiDAR samples.
  struct Unit {
    Vec2d n;
    double d;
    std::vector<Vec2d> pts;  // LiDAR frame of the unit's own timestep
  };
  std::vector<Unit> units;
  for (int f : frames) {
    if (f < 0 || f >= seq.size() || !seq.topdown[f]) continue;
    const auto assocs = identify_boundaries(h.transform, seq, f, cfg);
    const auto& lines = seq.frames[f].lines.horizontal;
    for (const auto& a : assocs) {
      if (a.line < 0) continue;
      const auto& img = lines[a.line];
      const auto& td = *seq.topdown[f];
      if (topdown_denominator(img.a, td) < kHorizonMargin ||
          topdown_denominator(img.b, td) < kHorizonMargin)
        continue;
      const Vec2d g1 = project_topdown(img.a, td);
      const Vec2d g2 = project_topdown(img.b, td);
      const Vec2d e = g2 - g1;
      if (e.norm() < 1e-9) continue;
      Unit u;
      u.n = Vec2d(-e.y(), e.x()).normalized();
      u.d = u.n.dot(g1);
      u.pts = sample_segment(seq.scan_lines[f][a.segment]);
      units.push_back(std::move(u));
    }
  }

  OptimizeResult result;
  result.hypothesis = h;
  std::size_t n_res = 0;
  for (const auto& u : units) n_res += u.pts.size();
  if (n_res < 8) {
    result.rank_deficient = true;
    return result;
  }

  using Vec4 = Eigen::Vector4d;
  using RowVec4 = Eigen::Matrix<double, 1, 4>;

  auto assemble = [&](const SimilarityTransform2d& t, Eigen::VectorXd* r,
                      Eigen::MatrixXd* jac) {
    std::size_t row = 0;
    for (const auto& u : units) {
      for (const auto& p : u.pts) {
        RowVec4 jrow;
        (*r)[row] = alignment_line_residual(t, u.n, u.d, p,
                                            jac ? &jrow : nullptr);
        if (jac) jac->row(row) = jrow;
        ++row;
      }
    }
  };

  Eigen::VectorXd r(n_res);
  Eigen::MatrixXd jac(n_res, 4);
  SimilarityTransform2d cur = h.transform;
  assemble(cur, &r, &jac);

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac);
  if (svd.singularValues()[3] < 1e-9 * svd.singularValues()[0]) {
    result.rank_deficient = true;
    return result;
  }

  double cost = 0.5 * r.squaredNorm();
  result.initial_cost = cost;
  double lambda = 1e-6;
  for (int iter = 0; iter < 40; ++iter) {
    assemble(cur, &r, &jac);
    const Eigen::Matrix4d jtj = jac.transpose() * jac;
    const Vec4 g = jac.transpose() * r;
    bool stepped = false;
    for (int tries = 0; tries < 12; ++tries) {
      const Vec4 step =
          (jtj + lambda * Eigen::Matrix4d::Identity()).ldlt().solve(-g);
      SimilarityTransform2d trial = cur;
      trial.delta += step[0];
      trial.phi = wrap_angle(trial.phi + step[1]);
      trial.origin += step.tail<2>();
      if (trial.delta <= 1e-6) {
        lambda *= 4.0;
        continue;
      }
      Eigen::VectorXd rt_(n_res);
      assemble(trial, &rt_, nullptr);
      const double trial_cost = 0.5 * rt_.squaredNorm();
      if (trial_cost <= cost) {
        const bool tiny = step.norm() < 1e-12;
        cur = trial;
        cost = trial_cost;
        lambda = std::max(lambda / 3.0, 1e-12);
        stepped = true;
        result.iterations = iter + 1;
        if (tiny) iter = 1000;  // converged
        break;
      }
      lambda *= 4.0;
    }
    if (!stepped) break;
  }

  result.hypothesis.transform = cur;
  result.final_cost = cost;
  return result;
}

}  // namespace lcl
