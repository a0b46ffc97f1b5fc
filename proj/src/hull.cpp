// Copyright 2026 The graspfactory Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "graspfactory/hull.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <unordered_set>

namespace gf {
namespace {

struct HullTriangle {
  std::array<int, 3> v;
  Vec3 normal;
  double offset;
  double area2;  // twice the area
  bool alive = true;
};

std::uint64_t edge_key(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

HullTriangle make_triangle(const Eigen::Matrix<double, 3, Eigen::Dynamic>& p,
                           int a, int b, int c) {
  HullTriangle t;
  t.v = {a, b, c};
  const Vec3 cross = (p.col(b) - p.col(a)).cross(p.col(c) - p.col(a));
  t.area2 = cross.norm();
  t.normal = t.area2 > 0.0 ? Vec3(cross / t.area2) : Vec3::Zero();
  t.offset = t.normal.dot(p.col(a));
  return t;
}

std::vector<HullTriangle> build_hull(
    const Eigen::Matrix<double, 3, Eigen::Dynamic>& p) {
  const int n = static_cast<int>(p.cols());
  if (n < 4) throw DegenerateMesh("convex hull needs at least 4 points");

  const Vec3 lo = p.rowwise().minCoeff();
  const Vec3 hi = p.rowwise().maxCoeff();
  const double scale = std::max((hi - lo).norm(), 1e-300);
  const double eps = 1e-10 * scale;

  // Initial tetrahedron from extreme points.
  int i0 = 0;
  for (int i = 1; i < n; ++i)
    if (p(0, i) < p(0, i0)) i0 = i;
  int i1 = i0;
  double best = -1.0;
  for (int i = 0; i < n; ++i) {
    const double d = (p.col(i) - p.col(i0)).squaredNorm();
    if (d > best) best = d, i1 = i;
  }
  const Vec3 axis = (p.col(i1) - p.col(i0)).normalized();
  int i2 = i0;
  best = -1.0;
  for (int i = 0; i < n; ++i) {
    const Vec3 d = p.col(i) - p.col(i0);
    const double dist = (d - d.dot(axis) * axis).norm();
    if (dist > best) best = dist, i2 = i;
  }
  if (best <= eps) throw DegenerateMesh("points are collinear");
  const Vec3 plane_n =
      (p.col(i1) - p.col(i0)).cross(p.col(i2) - p.col(i0)).normalized();
  int i3 = i0;
  best = -1.0;
  for (int i = 0; i < n; ++i) {
    const double dist = std::abs(plane_n.dot(p.col(i) - p.col(i0)));
    if (dist > best) best = dist, i3 = i;
  }
  if (best <= eps) throw DegenerateMesh("points are coplanar");

  const Vec3 inside = 0.25 * (p.col(i0) + p.col(i1) + p.col(i2) + p.col(i3));
  std::vector<HullTriangle> tris;
  auto add_oriented = [&](int a, int b, int c) {
    HullTriangle t = make_triangle(p, a, b, c);
    if (t.normal.dot(inside) - t.offset > 0.0) t = make_triangle(p, a, c, b);
    tris.push_back(t);
  };
  add_oriented(i0, i1, i2);
  add_oriented(i0, i1, i3);
  add_oriented(i0, i2, i3);
  add_oriented(i1, i2, i3);

  std::unordered_set<std::uint64_t> visible_edges;
  std::vector<std::size_t> visible;
  for (int i = 0; i < n; ++i) {
    if (i == i0 || i == i1 || i == i2 || i == i3) continue;
    const Vec3 q = p.col(i);
    visible.clear();
    for (std::size_t f = 0; f < tris.size(); ++f) {
      if (tris[f].alive && tris[f].normal.dot(q) - tris[f].offset > eps)
        visible.push_back(f);
    }
    if (visible.empty()) continue;

    visible_edges.clear();
    for (std::size_t f : visible) {
      const auto& v = tris[f].v;
      for (int k = 0; k < 3; ++k) visible_edges.insert(edge_key(v[k], v[(k + 1) % 3]));
    }
    std::vector<std::array<int, 2>> horizon;
    for (std::size_t f : visible) {
      const auto& v = tris[f].v;
      for (int k = 0; k < 3; ++k) {
        const int a = v[k], b = v[(k + 1) % 3];
        if (!visible_edges.count(edge_key(b, a))) horizon.push_back({a, b});
      }
      tris[f].alive = false;
    }
    for (const auto& e : horizon) tris.push_back(make_triangle(p, e[0], e[1], i));

    std::erase_if(tris, [](const HullTriangle& t) { return !t.alive; });
  }
  std::erase_if(tris, [](const HullTriangle& t) { return !t.alive; });
  return tris;
}

}  // namespace

std::vector<std::array<int, 3>> convex_hull_triangles(
    const Eigen::Matrix<double, 3, Eigen::Dynamic>& points) {
  std::vector<std::array<int, 3>> out;
  for (const auto& t : build_hull(points)) out.push_back(t.v);
  return out;
}

std::vector<HullFacet> convex_hull_facets(
    const Eigen::Matrix<double, 3, Eigen::Dynamic>& points) {
  const auto tris = build_hull(points);
  const Vec3 lo = points.rowwise().minCoeff();
  const Vec3 hi = points.rowwise().maxCoeff();
  const double scale = (hi - lo).norm();
  const double min_area2 = 1e-12 * scale * scale;

  std::vector<HullFacet> facets;
  for (const auto& t : tris) {
    if (t.area2 <= min_area2) continue;
    HullFacet* match = nullptr;
    for (auto& f : facets) {
      if (f.normal.dot(t.normal) > 1.0 - 1e-9 &&
          std::abs(f.offset - t.offset) <= 1e-9 * scale) {
        match = &f;
        break;
      }
    }
    if (!match) {
      facets.push_back(HullFacet{t.normal, t.offset, {}});
      match = &facets.back();
    }
    for (int v : t.v) {
      if (std::find(match->vertices.begin(), match->vertices.end(), v) ==
          match->vertices.end())
        match->vertices.push_back(v);
    }
  }
  return facets;
}

std::vector<Eigen::Vector2d> convex_hull_2d(std::vector<Eigen::Vector2d> pts) {
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a,
                  const Eigen::Vector2d& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Eigen::Vector2d> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& pt : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pt) <= 0) --k;
    hull[k++] = pt;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

double polygon_margin(const std::vector<Eigen::Vector2d>& ccw_polygon,
                      const Eigen::Vector2d& q) {
  if (ccw_polygon.size() < 3) return -std::numeric_limits<double>::infinity();
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ccw_polygon.size(); ++i) {
    const Eigen::Vector2d& a = ccw_polygon[i];
    const Eigen::Vector2d& b = ccw_polygon[(i + 1) % ccw_polygon.size()];
    const Eigen::Vector2d e = b - a;
    const double len = e.norm();
    if (len <= 0.0) continue;
    const Eigen::Vector2d inward(-e.y() / len, e.x() / len);
    margin = std::min(margin, inward.dot(q - a));
  }
  return margin;
}

}  // namespace gf
