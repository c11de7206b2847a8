#include "lcl/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "lcl/errors.hpp"

namespace lcl {

void camera_pose_from_alignment(const Pose2d& lidar_pose,
                                const SimilarityTransform2d& alignment,
                                const TopDownFramed& frame, Mat3d* r_cw,
                                Vec3d* c_w) {
  Mat3d rz = Mat3d::Identity();
  rz.topLeftCorner<2, 2>() = rot2(lidar_pose.theta);
  Mat3d rphi = Mat3d::Identity();
  rphi.topLeftCorner<2, 2>() = alignment.rotation();
  *r_cw = rz * rphi * frame.r_g;
  const Vec2d c = lidar_pose.apply(alignment.origin);
  *c_w = Vec3d(c.x(), c.y(), -alignment.delta);
}

LabelImage render_segmentation(const std::vector<LineSegment2>& walls,
                               double wall_height, const Mat3d& r_cw,
                               const Vec3d& c_w, const CameraIntrinsicsd& k,
                               int image_width, int image_height,
                               int raster_width, int raster_height) {
  LabelImage img(raster_width, raster_height);
  const double sx = double(image_width) / raster_width;
  const double sy = double(image_height) / raster_height;
  const Mat3d ki = k.inverse_matrix();

  for (int y = 0; y < raster_height; ++y) {
    for (int x = 0; x < raster_width; ++x) {
      const Vec3d pix((x + 0.5) * sx, (y + 0.5) * sy, 1.0);
      const Vec3d ray = r_cw * (ki * pix);  // world direction

      double best_t = std::numeric_limits<double>::infinity();
      std::int32_t label = kLabelUnknown;

      // Floor plane z = 0 (camera z is negative, world z points down).
      if (ray.z() > 1e-12) {
        best_t = -c_w.z() / ray.z();
        label = kLabelGround;
      }

      const Vec2d o(c_w.x(), c_w.y());
      const Vec2d d(ray.x(), ray.y());
      for (std::size_t w = 0; w < walls.size(); ++w) {
        const Vec2d e = walls[w].b - walls[w].a;
        const double denom = d.x() * e.y() - d.y() * e.x();
        if (std::abs(denom) < 1e-14) continue;
        const Vec2d ao = walls[w].a - o;
        const double t = (ao.x() * e.y() - ao.y() * e.x()) / denom;
        const double s = (ao.x() * d.y() - ao.y() * d.x()) / denom;
        if (t <= 1e-9 || s < 0.0 || s > 1.0 || t >= best_t) continue;
        const double z = c_w.z() + t * ray.z();
        if (z < -wall_height || z > 1e-9) continue;  // above the wall top
        best_t = t;
        label = kLabelWallBase + static_cast<std::int32_t>(w);
      }
      img.at(x, y) = label;
    }
  }
  return img;
}

namespace {

int label_class(std::int32_t label) {
  if (label == kLabelUnknown) return 0;
  return label == kLabelGround ? 1 : 2;
}

}  // namespace

double segmentation_accuracy(const LabelImage& pred, const LabelImage& truth) {
  if (pred.width != truth.width || pred.height != truth.height) {
    throw DimensionMismatch("label images differ in size");
  }
  long long total = 0, correct = 0;
  for (std::size_t i = 0; i < truth.labels.size(); ++i) {
    if (truth.labels[i] == kLabelUnknown) continue;
    ++total;
    if (label_class(pred.labels[i]) == label_class(truth.labels[i])) ++correct;
  }
  return total > 0 ? 100.0 * double(correct) / double(total) : 0.0;
}

CornerMatch corner_rmse(const FloorPlan& pred, const FloorPlan& truth,
                        double radius) {
  if (pred.corners.empty() || truth.corners.empty()) {
    throw NoCorners("corner RMSE needs corners on both plans");
  }
  struct Cand {
    double d;
    int i, j;
  };
  std::vector<Cand> cands;
  for (std::size_t i = 0; i < pred.corners.size(); ++i) {
    for (std::size_t j = 0; j < truth.corners.size(); ++j) {
      const double d = (pred.corners[i] - truth.corners[j]).norm();
      if (d <= radius) cands.push_back({d, int(i), int(j)});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.d != b.d) return a.d < b.d;
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });

  std::vector<bool> used_p(pred.corners.size(), false);
  std::vector<bool> used_t(truth.corners.size(), false);
  CornerMatch out;
  double ss = 0.0;
  for (const auto& c : cands) {
    if (used_p[c.i] || used_t[c.j]) continue;
    used_p[c.i] = used_t[c.j] = true;
    ss += c.d * c.d;
    ++out.matched;
  }
  out.rmse = out.matched > 0 ? std::sqrt(ss / out.matched) : 0.0;
  out.unmatched_pred = int(pred.corners.size()) - out.matched;
  out.unmatched_truth = int(truth.corners.size()) - out.matched;
  return out;
}

double polygon_area(const std::vector<Vec2d>& poly) {
  double twice = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % n];
    twice += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * twice;
}

namespace {

double cross2(const Vec2d& a, const Vec2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

bool proper_intersect(const Vec2d& a, const Vec2d& b, const Vec2d& c,
                      const Vec2d& d) {
  const double d1 = cross2(b - a, c - a);
  const double d2 = cross2(b - a, d - a);
  const double d3 = cross2(d - c, a - c);
  const double d4 = cross2(d - c, b - c);
  return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
         ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

/// Clip a convex CCW polygon by the half-plane left of (a, b).
std::vector<Vec2d> clip_halfplane(const std::vector<Vec2d>& poly,
                                  const Vec2d& a, const Vec2d& b) {
  std::vector<Vec2d> out;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2d& p = poly[i];
    const Vec2d& q = poly[(i + 1) % n];
    const double sp = cross2(b - a, p - a);
    const double sq = cross2(b - a, q - a);
    if (sp >= 0) out.push_back(p);
    if ((sp > 0 && sq < 0) || (sp < 0 && sq > 0)) {
      out.push_back(p + (sp / (sp - sq)) * (q - p));
    }
  }
  return out;
}

double tri_tri_intersection_area(std::array<Vec2d, 3> t,
                                 std::array<Vec2d, 3> s) {
  if (polygon_area({t.begin(), t.end()}) < 0) std::swap(t[1], t[2]);
  if (polygon_area({s.begin(), s.end()}) < 0) std::swap(s[1], s[2]);
  std::vector<Vec2d> poly(t.begin(), t.end());
  for (int i = 0; i < 3 && !poly.empty(); ++i) {
    poly = clip_halfplane(poly, s[i], s[(i + 1) % 3]);
  }
  if (poly.size() < 3) return 0.0;
  return std::abs(polygon_area(poly));
}

}  // namespace

void validate_polygon(const std::vector<Vec2d>& poly) {
  const std::size_t n = poly.size();
  if (n < 3) throw InvalidPolygon("polygon needs at least 3 vertices");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
      if (proper_intersect(poly[i], poly[(i + 1) % n], poly[j],
                           poly[(j + 1) % n])) {
        throw InvalidPolygon("self-intersecting polygon");
      }
    }
  }
}

double intersection_area(const std::vector<Vec2d>& a,
                         const std::vector<Vec2d>& b) {
  validate_polygon(a);
  validate_polygon(b);
  // Signed fan decomposition: the indicator of a simple polygon equals the
  // orientation-signed sum of its fan triangles, so the intersection area is
  // the double sum of signed triangle-triangle intersections.
  double total = 0.0;
  for (std::size_t i = 1; i + 1 < a.size(); ++i) {
    const std::array<Vec2d, 3> t{a[0], a[i], a[i + 1]};
    const double at = polygon_area({t.begin(), t.end()});
    if (std::abs(at) < 1e-15) continue;
    for (std::size_t j = 1; j + 1 < b.size(); ++j) {
      const std::array<Vec2d, 3> s{b[0], b[j], b[j + 1]};
      const double as = polygon_area({s.begin(), s.end()});
      if (std::abs(as) < 1e-15) continue;
      const double inter = tri_tri_intersection_area(t, s);
      total += (at > 0 ? 1.0 : -1.0) * (as > 0 ? 1.0 : -1.0) * inter;
    }
  }
  return std::abs(total);
}

double fscore(const std::vector<std::vector<Vec2d>>& pred,
              const std::vector<std::vector<Vec2d>>& truth) {
  double area_p = 0.0, area_t = 0.0, inter = 0.0;
  for (const auto& p : pred) {
    validate_polygon(p);
    area_p += std::abs(polygon_area(p));
  }
  for (const auto& t : truth) {
    validate_polygon(t);
    area_t += std::abs(polygon_area(t));
  }
  for (const auto& p : pred) {
    for (const auto& t : truth) {
      inter += intersection_area(p, t);
    }
  }
  if (area_p + area_t <= 0.0) return 0.0;
  return 2.0 * inter / (area_p + area_t);
}

double fscore(const std::vector<Vec2d>& pred, const std::vector<Vec2d>& truth) {
  return fscore(std::vector<std::vector<Vec2d>>{pred},
                std::vector<std::vector<Vec2d>>{truth});
}

void write_ppm(const std::string& path, const LabelImage& img) {
  static const unsigned char palette[8][3] = {
      {200, 80, 80},  {80, 120, 200}, {210, 180, 70}, {150, 90, 180},
      {90, 190, 190}, {220, 130, 60}, {120, 160, 90}, {180, 100, 130},
  };
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> row(img.width * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::int32_t l = img.at(x, y);
      unsigned char* px = &row[3 * x];
      if (l == kLabelUnknown) {
        px[0] = px[1] = px[2] = 25;
      } else if (l == kLabelGround) {
        px[0] = 60;
        px[1] = 170;
        px[2] = 60;
      } else {
        const auto& c = palette[(l - kLabelWallBase) % 8];
        px[0] = c[0];
        px[1] = c[1];
        px[2] = c[2];
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()), row.size());
  }
}

}  // namespace lcl
