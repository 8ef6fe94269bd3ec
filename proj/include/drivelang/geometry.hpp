#pragma once

// Geometry kernels: axis-aligned 2D IoU, rotated bird's-eye-view overlap via
// convex polygon clipping, full 3D IoU, and center distances. All functions
// are pure and symmetric in their box arguments.

#include <cmath>
#include <vector>

#include "drivelang/types.hpp"

namespace drivelang {

inline double iou_2d(const Box2D& a, const Box2D& b) {
  const double ix = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double iy = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return inter / uni;
}

namespace geom {

struct Vec2 {
  double x{0.0};
  double y{0.0};
};

inline double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

}  // namespace geom

// Convex polygon with counterclockwise vertices. Empty means no area.
class ConvexPolygon {
 public:
  static constexpr double kCollinearTol = 1e-9;
  static constexpr double kSliverArea = 1e-12;

  ConvexPolygon() = default;

  explicit ConvexPolygon(std::vector<geom::Vec2> vertices)
      : vertices_(std::move(vertices)) {
    if (!vertices_.empty()) {
      if (vertices_.size() < 3) {
        throw ValidationError("convex polygon requires >= 3 vertices");
      }
      if (signed_area() < 0.0) {
        throw ValidationError("convex polygon vertices must be counterclockwise");
      }
      const std::size_t n = vertices_.size();
      for (std::size_t i = 0; i < n; ++i) {
        if (geom::cross(vertices_[i], vertices_[(i + 1) % n],
                        vertices_[(i + 2) % n]) < -kCollinearTol) {
          throw ValidationError("polygon vertices are not convex");
        }
      }
    }
  }

  // Footprint of a yaw-rotated box in the (x, y) plane.
  static ConvexPolygon from_box_bev(const Box3D& b) {
    const double c = std::cos(b.yaw);
    const double s = std::sin(b.yaw);
    const double hl = 0.5 * b.l;
    const double hw = 0.5 * b.w;
    auto corner = [&](double dx, double dy) {
      return geom::Vec2{b.cx + dx * c - dy * s, b.cy + dx * s + dy * c};
    };
    ConvexPolygon p;
    p.vertices_ = {corner(hl, hw), corner(-hl, hw), corner(-hl, -hw),
                   corner(hl, -hw)};
    return p;
  }

  bool empty() const { return vertices_.empty(); }
  const std::vector<geom::Vec2>& vertices() const { return vertices_; }

  double signed_area() const {
    double acc = 0.0;
    const std::size_t n = vertices_.size();
    for (std::size_t i = 0; i < n; ++i) {
      const geom::Vec2& p = vertices_[i];
      const geom::Vec2& q = vertices_[(i + 1) % n];
      acc += p.x * q.y - q.x * p.y;
    }
    return 0.5 * acc;
  }

  double area() const {
    if (vertices_.size() < 3) return 0.0;
    const double a = signed_area();
    return a < kSliverArea ? 0.0 : a;
  }

  // Sutherland-Hodgman clip of this polygon against a convex clip polygon.
  ConvexPolygon clip(const ConvexPolygon& clipper) const {
    if (empty() || clipper.empty()) return ConvexPolygon();
    std::vector<geom::Vec2> subject = vertices_;
    const std::size_t cn = clipper.vertices_.size();
    for (std::size_t e = 0; e < cn && !subject.empty(); ++e) {
      const geom::Vec2& a = clipper.vertices_[e];
      const geom::Vec2& b = clipper.vertices_[(e + 1) % cn];
      subject = clip_half_plane(subject, a, b);
    }
    ConvexPolygon out;
    out.vertices_ = dedup_vertices(std::move(subject));
    if (out.vertices_.size() < 3 || out.signed_area() < kSliverArea) {
      out.vertices_.clear();
    }
    return out;
  }

 private:
  // Keeps the part of `poly` on the left of directed edge a->b.
  static std::vector<geom::Vec2> clip_half_plane(const std::vector<geom::Vec2>& poly,
                                                 const geom::Vec2& a,
                                                 const geom::Vec2& b) {
    std::vector<geom::Vec2> out;
    const std::size_t n = poly.size();
    out.reserve(n + 1);
    for (std::size_t i = 0; i < n; ++i) {
      const geom::Vec2& cur = poly[i];
      const geom::Vec2& nxt = poly[(i + 1) % n];
      const double dc = geom::cross(a, b, cur);
      const double dn = geom::cross(a, b, nxt);
      const bool in_c = dc >= -kCollinearTol;
      const bool in_n = dn >= -kCollinearTol;
      if (in_c) out.push_back(cur);
      if (in_c != in_n) {
        const double t = dc / (dc - dn);
        out.push_back(geom::Vec2{cur.x + t * (nxt.x - cur.x),
                                 cur.y + t * (nxt.y - cur.y)});
      }
    }
    return out;
  }

  static std::vector<geom::Vec2> dedup_vertices(std::vector<geom::Vec2> v) {
    std::vector<geom::Vec2> out;
    for (const geom::Vec2& p : v) {
      if (out.empty() || std::abs(p.x - out.back().x) > kCollinearTol ||
          std::abs(p.y - out.back().y) > kCollinearTol) {
        out.push_back(p);
      }
    }
    while (out.size() > 1 && std::abs(out.front().x - out.back().x) <= kCollinearTol &&
           std::abs(out.front().y - out.back().y) <= kCollinearTol) {
      out.pop_back();
    }
    return out;
  }

  std::vector<geom::Vec2> vertices_;
};

// Area of intersection of two yaw-rotated rectangular footprints, m^2.
inline double bev_intersection_area(const Box3D& a, const Box3D& b) {
  const ConvexPolygon pa = ConvexPolygon::from_box_bev(a);
  const ConvexPolygon pb = ConvexPolygon::from_box_bev(b);
  return pa.clip(pb).area();
}

inline double iou_3d(const Box3D& a, const Box3D& b) {
  const double inter_bev = bev_intersection_area(a, b);
  if (inter_bev <= 0.0) return 0.0;
  const double za1 = a.cz - 0.5 * a.h, za2 = a.cz + 0.5 * a.h;
  const double zb1 = b.cz - 0.5 * b.h, zb2 = b.cz + 0.5 * b.h;
  const double overlap_z = std::min(za2, zb2) - std::max(za1, zb1);
  if (overlap_z <= 0.0) return 0.0;
  const double inter = inter_bev * overlap_z;
  const double uni = a.volume() + b.volume() - inter;
  const double iou = inter / uni;
  return std::clamp(iou, 0.0, 1.0);
}

enum class DistanceMode { Xyz, Bev };

inline double center_distance(const Box3D& a, const Box3D& b,
                              DistanceMode mode = DistanceMode::Xyz) {
  const double dx = a.cx - b.cx;
  const double dy = a.cy - b.cy;
  if (mode == DistanceMode::Bev) {
    return std::hypot(dx, dy);
  }
  const double dz = a.cz - b.cz;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace drivelang
