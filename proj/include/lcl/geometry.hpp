#pragma once

#include <cmath>
#include <utility>

#include "lcl/errors.hpp"
#include "lcl/types.hpp"

// Closed-form geometry linking the camera's top-down rectification to the
// LiDAR frame: vertical direction from the vanishing point, the gravity
// aligned top-down frame and homography, the two-pair similarity solution,
// motion-constrained correspondences, and epipolar scoring of hypotheses.

namespace lcl {

constexpr double kDefaultVpEps = 1e-6;          // normalized coords
constexpr double kDefaultPairEps = 1e-9;        // meters / top-down units
constexpr double kDefaultHorizonEps = 1e-9;     // homogeneous denominator
constexpr double kDefaultMinRotation = 0.5 * EIGEN_PI / 180.0;
constexpr double kDefaultMinTranslation = 1e-9;

/// Unit vertical direction in camera coordinates from the vertical vanishing
/// point: normalize(K^-1 * p_v).
template <typename S>
Vec3<S> vertical_direction(const VanishingPoint<S>& vp,
                           const CameraIntrinsics<S>& k) {
  const Vec3<S> dir = k.inverse_matrix() * vp.homogeneous();
  return dir / dir.norm();
}

/// Build the top-down frame from the vertical vanishing point.
///
/// e_X is chosen orthogonal to the vertical in the camera's xz plane, e_Z is
/// the vertical direction signed to point toward the floor (the vanishing
/// direction with a positive image-down component), and e_Y completes a
/// right-handed frame. Throws DegenerateVanishingPoint when the normalized
/// vanishing point sits on an image axis (|x_v| or |y_v| <= eps), where the
/// parametrization loses rank.
template <typename S>
TopDownFrame<S> topdown_frame(const VanishingPoint<S>& vp,
                              const CameraIntrinsics<S>& k,
                              S eps_v = S(kDefaultVpEps)) {
  const Vec3<S> nv_h = k.inverse_matrix() * vp.homogeneous();
  const S x_v = nv_h.x(), y_v = nv_h.y();
  if (std::abs(x_v) <= eps_v || std::abs(y_v) <= eps_v) {
    throw DegenerateVanishingPoint("vanishing point on image axis: x_v=" +
                                   std::to_string(x_v) +
                                   " y_v=" + std::to_string(y_v));
  }

  Vec3<S> e_x(-S(1) / x_v, S(0), S(1));
  e_x.normalize();
  Vec3<S> e_y(x_v, -(x_v * x_v + S(1)) / y_v, S(1));
  e_y.normalize();
  Vec3<S> e_z = nv_h.normalized();
  if (y_v < S(0)) e_z = -e_z;  // floor side: positive image-down component
  if (e_x.cross(e_y).dot(e_z) < S(0)) e_y = -e_y;  // right-hand rule

  TopDownFrame<S> frame;
  frame.r_g.row(0) = e_x;
  frame.r_g.row(1) = e_y;
  frame.r_g.row(2) = e_z;
  frame.h_g = frame.r_g * k.inverse_matrix();
  return frame;
}

/// Homogeneous denominator of the top-down projection of a pixel; positive
/// for pixels below the rectified horizon.
template <typename S>
S topdown_denominator(const Vec2<S>& p_img, const TopDownFrame<S>& frame) {
  return frame.h_g.row(2).dot(Vec3<S>(p_img.x(), p_img.y(), S(1)));
}

/// Top-down coordinates of a pixel through the rectifying homography.
template <typename S>
Vec2<S> project_topdown(const Vec2<S>& p_img, const TopDownFrame<S>& frame,
                        S eps = S(kDefaultHorizonEps)) {
  const Vec3<S> p(p_img.x(), p_img.y(), S(1));
  const S d = frame.h_g.row(2).dot(p);
  if (std::abs(d) < eps) {
    throw PointAtHorizon("pixel on rectified horizon");
  }
  return {frame.h_g.row(0).dot(p) / d, frame.h_g.row(1).dot(p) / d};
}

/// Map a top-down point back to a pixel (inverse of project_topdown).
/// Returns the homogeneous camera ray scaled so the pixel is finite; callers
/// should check `positive_depth` (third component > 0) before trusting it.
template <typename S>
Vec3<S> topdown_to_image_ray(const Vec2<S>& p_g, const TopDownFrame<S>& frame,
                             const CameraIntrinsics<S>& k) {
  const Vec3<S> dir =
      frame.r_g.transpose() * Vec3<S>(p_g.x(), p_g.y(), S(1));
  return k.matrix() * dir;
}

/// Exact similarity from two correspondences. The construction solves for a
/// pure rotation; it cannot yield a reflection, so no determinant check is
/// needed. Both sources map exactly onto both destinations.
template <typename S>
SimilarityTransform2<S> similarity_from_pairs(const PointPair2<S>& a,
                                              const PointPair2<S>& b,
                                              S eps_p = S(kDefaultPairEps)) {
  const Vec2<S> ds = a.source - b.source;
  const Vec2<S> dd = a.destination - b.destination;
  if (ds.norm() < eps_p || dd.norm() < eps_p) {
    throw CoincidentPoints("source or destination points coincide");
  }
  SimilarityTransform2<S> out;
  out.delta = dd.norm() / ds.norm();
  out.phi = wrap_angle(std::atan2(dd.y(), dd.x()) - std::atan2(ds.y(), ds.x()));
  const Vec2<S> mean_s = (a.source + b.source) / S(2);
  const Vec2<S> mean_d = (a.destination + b.destination) / S(2);
  out.origin = mean_d - out.delta * (out.rotation() * mean_s);
  return out;
}

/// Motion-constrained correspondence from one feature tracked across a scan
/// pair. The destination depends only on the LiDAR motion: it is the
/// instantaneous center of rotation (I - R)^-1 t, the fixed point of the
/// planar motion. Requires a rotation bounded away from identity.
template <typename S>
PointPair2<S> motion_constraint_pair(const LidarMotion<S>& motion,
                                     const Vec2<S>& pg_i, const Vec2<S>& pg_j,
                                     S min_rotation = S(kDefaultMinRotation)) {
  if (std::abs(motion.angle()) < min_rotation) {
    throw DegenerateMotion("relative rotation below minimum");
  }
  const Mat2<S> a = Mat2<S>::Identity() - motion.r;
  const S det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
  Mat2<S> a_inv;
  a_inv << a(1, 1), -a(0, 1), -a(1, 0), a(0, 0);
  a_inv /= det;

  PointPair2<S> pair;
  pair.destination = a_inv * motion.t;
  pair.source = a_inv * (pg_j - motion.r * pg_i);
  return pair;
}

namespace detail {

/// Planar rotation extended to 3D about the shared down axis.
template <typename S>
Mat3<S> planar_to_3d(const Mat2<S>& r) {
  Mat3<S> out = Mat3<S>::Identity();
  out.template topLeftCorner<2, 2>() = r;
  return out;
}

template <typename S>
Vec3<S> planar_to_3d(const Vec2<S>& v) {
  return {v.x(), v.y(), S(0)};
}

}  // namespace detail

/// Relative camera motion (view i -> view j) implied by an alignment
/// hypothesis and the LiDAR motion between the scans. 2D rotations and
/// translations are extended to 3D about the vertical; each view may carry
/// its own top-down frame (they coincide when the vanishing point is exact).
template <typename S>
std::pair<Mat3<S>, Vec3<S>> camera_motion_from_hypothesis(
    const SimilarityTransform2<S>& h, const TopDownFrame<S>& frame_i,
    const TopDownFrame<S>& frame_j, const LidarMotion<S>& motion) {
  const Mat3<S> rl3 = detail::planar_to_3d(motion.r);
  const Mat3<S> rphi3 = detail::planar_to_3d(h.rotation());
  const Vec2<S> arm2 = motion.r * h.origin + motion.t - h.origin;
  const Vec3<S> arm = detail::planar_to_3d(arm2);

  const Mat3<S> r_c = frame_j.r_g.transpose() * rl3 * frame_i.r_g;
  const Vec3<S> t_c =
      (S(1) / h.delta) * (frame_j.r_g.transpose() * (rphi3.transpose() * arm));
  return {r_c, t_c};
}

template <typename S>
std::pair<Mat3<S>, Vec3<S>> camera_motion_from_hypothesis(
    const SimilarityTransform2<S>& h, const TopDownFrame<S>& frame,
    const LidarMotion<S>& motion) {
  return camera_motion_from_hypothesis(h, frame, frame, motion);
}

template <typename S>
Mat3<S> cross_matrix(const Vec3<S>& t) {
  Mat3<S> m;
  m << S(0), -t.z(), t.y(), t.z(), S(0), -t.x(), -t.y(), t.x(), S(0);
  return m;
}

/// Fundamental matrix F = K2^-T [t]x R K^-1 for pixel correspondences
/// p2^T F p1 = 0 (p1 in view i, p2 in view j).
template <typename S>
Mat3<S> fundamental_matrix(const Mat3<S>& r_c, const Vec3<S>& t_c,
                           const CameraIntrinsics<S>& k,
                           const CameraIntrinsics<S>& k2,
                           S eps = S(kDefaultMinTranslation)) {
  if (t_c.norm() < eps) {
    throw ZeroTranslation("epipolar geometry undefined for zero translation");
  }
  return k2.inverse_matrix().transpose() * cross_matrix(t_c) * r_c *
         k.inverse_matrix();
}

/// Scale-eliminated epipolar score delta^2 (p2^T F p1)^2. Because the camera
/// translation carries a 1/delta factor, the score is invariant to rescaling
/// the hypothesis scale.
template <typename S>
S epipolar_residual(const SimilarityTransform2<S>& h, const Mat3<S>& f,
                    const Vec2<S>& p, const Vec2<S>& p2) {
  const Vec3<S> p1h(p.x(), p.y(), S(1));
  const Vec3<S> p2h(p2.x(), p2.y(), S(1));
  const S v = p2h.dot(f * p1h);
  return h.delta * h.delta * v * v;
}

}  // namespace lcl
