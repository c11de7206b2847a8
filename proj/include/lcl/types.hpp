#pragma once

#include <Eigen/Dense>

#include <cmath>

// Core domain types for the LiDAR/camera alignment geometry.
//
// Planar frame convention used throughout: every 2D frame (world, LiDAR body,
// top-down) shares the same in-plane orientation as the top-down frame, whose
// Z axis points toward the floor. Equivalently, all planar coordinates are
// "x forward / y right" style frames with an implicit downward normal. This
// keeps every frame-to-frame map a proper rotation (no reflections), which the
// two-pair similarity construction relies on.

namespace lcl {

template <typename S>
using Vec2 = Eigen::Matrix<S, 2, 1>;
template <typename S>
using Vec3 = Eigen::Matrix<S, 3, 1>;
template <typename S>
using Mat2 = Eigen::Matrix<S, 2, 2>;
template <typename S>
using Mat3 = Eigen::Matrix<S, 3, 3>;

using Vec2d = Vec2<double>;
using Vec3d = Vec3<double>;
using Mat2d = Mat2<double>;
using Mat3d = Mat3<double>;

/// Wrap an angle to (-pi, pi].
template <typename S>
S wrap_angle(S a) {
  const S two_pi = S(2) * S(EIGEN_PI);
  a = std::fmod(a, two_pi);
  if (a <= -S(EIGEN_PI)) a += two_pi;
  if (a > S(EIGEN_PI)) a -= two_pi;
  return a;
}

/// 2x2 rotation by angle (counter-positive in the shared planar convention).
template <typename S>
Mat2<S> rot2(S angle) {
  const S c = std::cos(angle), s = std::sin(angle);
  Mat2<S> r;
  r << c, -s, s, c;
  return r;
}

/// Angle of a 2x2 rotation matrix.
template <typename S>
S rot2_angle(const Mat2<S>& r) {
  return std::atan2(r(1, 0), r(0, 0));
}

/// Pinhole intrinsics; pixels have x right, y down.
template <typename S>
struct CameraIntrinsics {
  S fx = S(1), fy = S(1);
  S cx = S(0), cy = S(0);

  Mat3<S> matrix() const {
    Mat3<S> k;
    k << fx, S(0), cx, S(0), fy, cy, S(0), S(0), S(1);
    return k;
  }

  /// Closed-form inverse of the upper-triangular K.
  Mat3<S> inverse_matrix() const {
    Mat3<S> ki;
    ki << S(1) / fx, S(0), -cx / fx, S(0), S(1) / fy, -cy / fy, S(0), S(0),
        S(1);
    return ki;
  }

  /// Normalized camera coordinates of a pixel (unprojection at depth 1).
  Vec2<S> normalize(const Vec2<S>& px) const {
    return {(px.x() - cx) / fx, (px.y() - cy) / fy};
  }

  Vec2<S> project(const Vec3<S>& p_cam) const {
    return {fx * p_cam.x() / p_cam.z() + cx, fy * p_cam.y() / p_cam.z() + cy};
  }
};

using CameraIntrinsicsd = CameraIntrinsics<double>;

/// Vertical vanishing point in pixel coordinates (finite by type; a camera
/// with zero tilt has no finite vertical vanishing point and yields no frame).
template <typename S>
struct VanishingPoint {
  S u = S(0);
  S v = S(0);

  Vec3<S> homogeneous() const { return {u, v, S(1)}; }
};

using VanishingPointd = VanishingPoint<double>;

/// Gravity-aligned rectification frame derived from the vertical vanishing
/// point: rows of `r_g` are the axes e_X, e_Y, e_Z expressed in camera
/// coordinates, with e_Z pointing toward the floor and det(r_g) = +1. The
/// homography `h_g` maps homogeneous pixels to top-down coordinates.
template <typename S>
struct TopDownFrame {
  Mat3<S> r_g = Mat3<S>::Identity();
  Mat3<S> h_g = Mat3<S>::Identity();

  Vec3<S> e_x() const { return r_g.row(0); }
  Vec3<S> e_y() const { return r_g.row(1); }
  Vec3<S> e_z() const { return r_g.row(2); }
};

using TopDownFramed = TopDownFrame<double>;

/// Similarity p_lidar = delta * R(phi) * p_topdown + origin. `origin` is the
/// camera center in LiDAR XY (meters); `delta` is LiDAR-meters per top-down
/// unit.
template <typename S>
struct SimilarityTransform2 {
  S delta = S(1);
  S phi = S(0);
  Vec2<S> origin = Vec2<S>::Zero();

  Mat2<S> rotation() const { return rot2(phi); }

  Vec2<S> apply(const Vec2<S>& p) const {
    return delta * (rotation() * p) + origin;
  }

  Vec2<S> apply_inverse(const Vec2<S>& p) const {
    return (rotation().transpose() * (p - origin)) / delta;
  }

  SimilarityTransform2<S> inverse() const {
    SimilarityTransform2<S> inv;
    inv.delta = S(1) / delta;
    inv.phi = wrap_angle(-phi);
    inv.origin = -(rot2(-phi) * origin) / delta;
    return inv;
  }
};

using SimilarityTransform2d = SimilarityTransform2<double>;

/// Relative planar rigid motion between two scans: p_j = r * p_i + t.
template <typename S>
struct LidarMotion {
  Mat2<S> r = Mat2<S>::Identity();
  Vec2<S> t = Vec2<S>::Zero();

  S angle() const { return rot2_angle(r); }

  static LidarMotion<S> from_angle(S angle, const Vec2<S>& t) {
    return {rot2(angle), t};
  }

  Vec2<S> apply(const Vec2<S>& p) const { return r * p + t; }

  LidarMotion<S> inverse() const {
    return {r.transpose(), -(r.transpose() * t)};
  }

  /// Composition: (this after other), i.e. maps through `other` first.
  LidarMotion<S> compose(const LidarMotion<S>& other) const {
    return {r * other.r, r * other.t + t};
  }
};

using LidarMotiond = LidarMotion<double>;

/// One source/destination correspondence for similarity estimation.
template <typename S>
struct PointPair2 {
  Vec2<S> source = Vec2<S>::Zero();
  Vec2<S> destination = Vec2<S>::Zero();
};

using PointPair2d = PointPair2<double>;

/// Planar pose of the LiDAR in the world frame (world = LiDAR frame 0).
template <typename S>
struct Pose2 {
  Vec2<S> xy = Vec2<S>::Zero();
  S theta = S(0);

  Mat2<S> rotation() const { return rot2(theta); }

  Vec2<S> apply(const Vec2<S>& p_local) const { return rotation() * p_local + xy; }

  Vec2<S> apply_inverse(const Vec2<S>& p_world) const {
    return rotation().transpose() * (p_world - xy);
  }

  Pose2<S> compose(const Pose2<S>& local) const {
    return {apply(local.xy), wrap_angle(theta + local.theta)};
  }

  Pose2<S> inverse() const {
    return {-(rot2(-theta) * xy), wrap_angle(-theta)};
  }

  /// Coordinate change from this pose's frame into `other`'s frame,
  /// as a LidarMotion (p_other = r p_this + t).
  LidarMotion<S> motion_to(const Pose2<S>& other) const {
    const Mat2<S> r = rot2(other.theta).transpose() * rotation();
    const Vec2<S> t = rot2(other.theta).transpose() * (xy - other.xy);
    return {r, t};
  }
};

using Pose2d = Pose2<double>;

}  // namespace lcl
