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

#ifndef GRASPFACTORY_ASSETS_HPP_
#define GRASPFACTORY_ASSETS_HPP_

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "graspfactory/common.hpp"

namespace gf {

using Vertices = Eigen::Matrix<double, 3, Eigen::Dynamic>;
using Triangles = Eigen::Matrix<int, 3, Eigen::Dynamic>;

struct AlignedBox {
  Vec3 min;
  Vec3 max;
  Vec3 extent() const { return max - min; }
  Vec3 center() const { return 0.5 * (min + max); }
};

// Triangle mesh in meters. Only constructible through make_mesh, which
// enforces the invariants (valid indices, no zero-area faces, positive
// extent on every axis).
class Mesh {
 public:
  const Vertices& vertices() const { return vertices_; }
  const Triangles& triangles() const { return triangles_; }
  const std::string& category() const { return category_; }
  const std::string& instance_id() const { return instance_id_; }

  Eigen::Index vertex_count() const { return vertices_.cols(); }
  Eigen::Index triangle_count() const { return triangles_.cols(); }

  Vec3 vertex(Eigen::Index i) const { return vertices_.col(i); }
  AlignedBox bounds() const;

  // Signed volume of the closed solid bounded by the triangles.
  double signed_volume() const;
  // Uniform-density center of mass; vertex centroid when the signed volume
  // is not positive (open or inverted surfaces).
  Vec3 center_of_mass() const;
  // Unit outward normal of triangle i (winding-based).
  Vec3 face_normal(Eigen::Index i) const;
  double face_area(Eigen::Index i) const;

 private:
  friend Mesh make_mesh(Vertices, const Triangles&, std::string, std::string);
  Vertices vertices_;
  Triangles triangles_;
  std::string category_;
  std::string instance_id_;
};

// Validates and builds a mesh. Zero-area triangles are dropped; throws
// DegenerateMesh when nothing survives or the bounds are flat, ParseError on
// out-of-range indices.
Mesh make_mesh(Vertices vertices, const Triangles& triangles,
               std::string category = {}, std::string instance_id = {});

// Rigidly/affinely maps every vertex; the triangle list is shared.
Mesh transformed(const Mesh& mesh, const Pose& pose);

struct CategorySpec {
  std::string name;
  double min_size = 0.0;
  double max_size = 0.0;
  bool upright_only = false;
};

class CategoryRegistry {
 public:
  void add(CategorySpec spec);
  const CategorySpec& at(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::vector<std::string> names() const;
  std::size_t size() const { return specs_.size(); }

 private:
  std::map<std::string, CategorySpec> specs_;
};

// Registry file: {"mug": {"min_size": 0.06, "max_size": 0.14,
// "upright_only": true}, ...}
CategoryRegistry load_category_registry(const std::filesystem::path& path);
CategoryRegistry parse_category_registry(std::istream& in);
void write_category_registry(const CategoryRegistry& registry,
                             const std::filesystem::path& path);

// ASCII OBJ subset: `v x y z` and `f i j k ...` (1-based; `i/t/n` forms and
// negative indices accepted; polygons are fan-triangulated). Everything else
// is ignored.
Mesh load_mesh(const std::filesystem::path& path, std::string category = {},
               std::string instance_id = {});
Mesh parse_obj(std::istream& in, std::string category = {},
               std::string instance_id = {});
void write_obj(const Mesh& mesh, const std::filesystem::path& path);

// Uniform scale about the bounding-box center so the largest extent becomes
// `extent`.
Mesh scale_to_extent(const Mesh& mesh, double extent);

// Draws the target extent uniformly from [min_size, max_size].
double draw_category_extent(const CategorySpec& spec, Rng& rng);
Mesh scale_to_category(const Mesh& mesh, const CategorySpec& spec, Rng& rng);

// Uniform-grid vertex clustering. Requires target_vertex_count >= 4.
Mesh simplify_mesh(const Mesh& mesh, int target_vertex_count);

struct StablePoseOptions {
  // Minimum distance (meters) between the projected center of mass and every
  // edge of the support polygon.
  double margin = 0.0;
};

// Rotations that rest one convex-hull facet on the table (facet normal maps
// to -z) with the projected center of mass strictly inside the facet. With
// upright_only, only the identity rotation is returned (if it is stable).
std::vector<Mat3> stable_poses(const Mesh& mesh, bool upright_only,
                               const StablePoseOptions& options = {});

// Signed distance from the center-of-mass projection to the support polygon
// boundary of the lowest hull facet after applying `rotation` (positive
// inside). Used by stable_poses and by tilt checks in tests.
double support_margin(const Mesh& mesh, const Mat3& rotation,
                      double contact_tolerance = 1e-9);

// Procedural desk-scale meshes used by the built-in asset library and tests.
Mesh make_box(double sx, double sy, double sz, std::string category = "box",
              std::string instance_id = "box");
Mesh make_icosphere(double radius, int subdivisions,
                    std::string category = "ball",
                    std::string instance_id = "ball");
Mesh make_cylinder(double radius, double height, int segments,
                   std::string category = "can",
                   std::string instance_id = "can");
Mesh make_cone(double radius, double height, int segments,
               std::string category = "cone", std::string instance_id = "cone");

struct AssetDescriptor {
  std::string instance_id;
  std::string category;
  std::filesystem::path path;
};

// Writes the built-in library (five categories, four instances each) as OBJ
// files plus categories.json into `dir`, returning the descriptors.
std::vector<AssetDescriptor> write_builtin_library(
    const std::filesystem::path& dir);
CategoryRegistry builtin_categories();
std::vector<Mesh> builtin_meshes();

// Scans `dir` for `<category>__<instance>.obj` files.
std::vector<AssetDescriptor> scan_asset_dir(const std::filesystem::path& dir);

}  // namespace gf

#endif  // GRASPFACTORY_ASSETS_HPP_
