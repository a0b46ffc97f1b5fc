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

#ifndef GRASPFACTORY_HULL_HPP_
#define GRASPFACTORY_HULL_HPP_

#include <array>
#include <vector>

#include "graspfactory/common.hpp"

namespace gf {

// Planar facet of a 3D convex hull; `vertices` index the input point set.
struct HullFacet {
  Vec3 normal;  // outward, unit
  double offset = 0.0;  // normal.dot(x) == offset on the facet plane
  std::vector<int> vertices;
};

// Incremental 3D hull. Coplanar hull triangles are merged into facets.
// Throws DegenerateMesh when the points are (nearly) coplanar.
std::vector<HullFacet> convex_hull_facets(
    const Eigen::Matrix<double, 3, Eigen::Dynamic>& points);

// Triangulated hull, outward winding.
std::vector<std::array<int, 3>> convex_hull_triangles(
    const Eigen::Matrix<double, 3, Eigen::Dynamic>& points);

// 2D hull (counter-clockwise, no collinear points) via monotone chain.
std::vector<Eigen::Vector2d> convex_hull_2d(std::vector<Eigen::Vector2d> pts);

// Signed distance of q to the boundary of a CCW convex polygon; positive
// inside. Returns -infinity for polygons with fewer than three vertices.
double polygon_margin(const std::vector<Eigen::Vector2d>& ccw_polygon,
                      const Eigen::Vector2d& q);

}  // namespace gf

#endif  // GRASPFACTORY_HULL_HPP_
