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

#include "graspfactory/assets.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "graspfactory/hull.hpp"

namespace gf {

AlignedBox Mesh::bounds() const {
  return {vertices_.rowwise().minCoeff(), vertices_.rowwise().maxCoeff()};
}

double Mesh::signed_volume() const {
  const Vec3 origin = vertices_.rowwise().mean();
  double volume = 0.0;
  for (Eigen::Index i = 0; i < triangles_.cols(); ++i) {
    const Vec3 a = vertices_.col(triangles_(0, i)) - origin;
    const Vec3 b = vertices_.col(triangles_(1, i)) - origin;
    const Vec3 c = vertices_.col(triangles_(2, i)) - origin;
    volume += a.dot(b.cross(c)) / 6.0;
  }
  return volume;
}

Vec3 Mesh::center_of_mass() const {
  const Vec3 origin = vertices_.rowwise().mean();
  double volume = 0.0;
  Vec3 moment = Vec3::Zero();
  for (Eigen::Index i = 0; i < triangles_.cols(); ++i) {
    const Vec3 a = vertices_.col(triangles_(0, i)) - origin;
    const Vec3 b = vertices_.col(triangles_(1, i)) - origin;
    const Vec3 c = vertices_.col(triangles_(2, i)) - origin;
    const double v = a.dot(b.cross(c)) / 6.0;
    volume += v;
    moment += v * (a + b + c) / 4.0;
  }
  const double extent = bounds().extent().maxCoeff();
  if (volume <= 1e-12 * extent * extent * extent) return origin;
  return origin + moment / volume;
}

Vec3 Mesh::face_normal(Eigen::Index i) const {
  const Vec3 a = vertices_.col(triangles_(0, i));
  const Vec3 b = vertices_.col(triangles_(1, i));
  const Vec3 c = vertices_.col(triangles_(2, i));
  return (b - a).cross(c - a).normalized();
}

double Mesh::face_area(Eigen::Index i) const {
  const Vec3 a = vertices_.col(triangles_(0, i));
  const Vec3 b = vertices_.col(triangles_(1, i));
  const Vec3 c = vertices_.col(triangles_(2, i));
  return 0.5 * (b - a).cross(c - a).norm();
}

Mesh make_mesh(Vertices vertices, const Triangles& triangles,
               std::string category, std::string instance_id) {
  const Eigen::Index nv = vertices.cols();
  if (nv == 0) throw DegenerateMesh("mesh has no vertices");
  if (!vertices.allFinite()) throw ParseError("non-finite vertex coordinate");

  std::vector<int> kept;
  kept.reserve(static_cast<std::size_t>(triangles.cols()));
  for (Eigen::Index i = 0; i < triangles.cols(); ++i) {
    for (int k = 0; k < 3; ++k) {
      if (triangles(k, i) < 0 || triangles(k, i) >= nv)
        throw ParseError("triangle index out of range");
    }
    const Vec3 e1 = vertices.col(triangles(1, i)) - vertices.col(triangles(0, i));
    const Vec3 e2 = vertices.col(triangles(2, i)) - vertices.col(triangles(0, i));
    const double cross = e1.cross(e2).norm();
    if (cross > 1e-12 * (e1.squaredNorm() + e2.squaredNorm()) && cross > 0.0)
      kept.push_back(static_cast<int>(i));
  }
  if (kept.empty()) throw DegenerateMesh("no non-degenerate triangles");

  Mesh mesh;
  mesh.triangles_.resize(3, static_cast<Eigen::Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j)
    mesh.triangles_.col(static_cast<Eigen::Index>(j)) = triangles.col(kept[j]);
  mesh.vertices_ = std::move(vertices);
  mesh.category_ = std::move(category);
  mesh.instance_id_ = std::move(instance_id);
  if ((mesh.bounds().extent().array() <= 0.0).any())
    throw DegenerateMesh("bounding box is flat along some axis");
  return mesh;
}

Mesh transformed(const Mesh& mesh, const Pose& pose) {
  Vertices v = pose * mesh.vertices();
  return make_mesh(std::move(v), mesh.triangles(), mesh.category(),
                   mesh.instance_id());
}

// ---------------------------------------------------------------------------
// Category registry

void CategoryRegistry::add(CategorySpec spec) {
  if (!(spec.min_size > 0.0) || !(spec.min_size <= spec.max_size))
    throw ConfigError("category '" + spec.name +
                      "' needs 0 < min_size <= max_size");
  if (specs_.count(spec.name))
    throw ConfigError("duplicate category '" + spec.name + "'");
  const std::string name = spec.name;
  specs_.emplace(name, std::move(spec));
}

const CategorySpec& CategoryRegistry::at(const std::string& name) const {
  auto it = specs_.find(name);
  if (it == specs_.end()) throw ConfigError("unknown category '" + name + "'");
  return it->second;
}

bool CategoryRegistry::contains(const std::string& name) const {
  return specs_.count(name) != 0;
}

std::vector<std::string> CategoryRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, spec] : specs_) out.push_back(name);
  return out;
}

CategoryRegistry parse_category_registry(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("category registry: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("category registry must be an object");
  CategoryRegistry registry;
  for (const auto& [name, entry] : doc.items()) {
    try {
      registry.add({name, entry.at("min_size").get<double>(),
                    entry.at("max_size").get<double>(),
                    entry.value("upright_only", false)});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("category '" + name + "': " + e.what());
    }
  }
  return registry;
}

CategoryRegistry load_category_registry(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_category_registry(in);
}

void write_category_registry(const CategoryRegistry& registry,
                             const std::filesystem::path& path) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& name : registry.names()) {
    const auto& s = registry.at(name);
    doc[name] = {{"min_size", s.min_size},
                 {"max_size", s.max_size},
                 {"upright_only", s.upright_only}};
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// OBJ subset

namespace {

int parse_obj_index(const std::string& token, int vertex_count, int line_no) {
  const std::string head = token.substr(0, token.find('/'));
  std::size_t used = 0;
  long idx = 0;
  try {
    idx = std::stol(head, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != head.size() || idx == 0)
    throw ParseError("line " + std::to_string(line_no) + ": bad face index '" +
                     token + "'");
  const long resolved = idx > 0 ? idx - 1 : vertex_count + idx;
  if (resolved < 0 || resolved >= vertex_count)
    throw ParseError("line " + std::to_string(line_no) +
                     ": face index out of range");
  return static_cast<int>(resolved);
}

}  // namespace

Mesh parse_obj(std::istream& in, std::string category,
               std::string instance_id) {
  std::vector<Vec3> verts;
  std::vector<Eigen::Vector3i> tris;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 p;
      if (!(ls >> p.x() >> p.y() >> p.z()))
        throw ParseError("line " + std::to_string(line_no) + ": bad vertex");
      verts.push_back(p);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok)
        idx.push_back(parse_obj_index(tok, static_cast<int>(verts.size()), line_no));
      if (idx.size() < 3)
        throw ParseError("line " + std::to_string(line_no) +
                         ": face needs 3 indices");
      for (std::size_t k = 1; k + 1 < idx.size(); ++k)
        tris.emplace_back(idx[0], idx[k], idx[k + 1]);
    }
  }
  if (verts.empty() && tris.empty()) throw ParseError("empty OBJ input");
  if (tris.empty()) throw DegenerateMesh("OBJ input has no faces");

  Vertices v(3, static_cast<Eigen::Index>(verts.size()));
  for (std::size_t i = 0; i < verts.size(); ++i) v.col(static_cast<Eigen::Index>(i)) = verts[i];
  Triangles t(3, static_cast<Eigen::Index>(tris.size()));
  for (std::size_t i = 0; i < tris.size(); ++i) t.col(static_cast<Eigen::Index>(i)) = tris[i];
  return make_mesh(std::move(v), t, std::move(category), std::move(instance_id));
}

Mesh load_mesh(const std::filesystem::path& path, std::string category,
               std::string instance_id) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open mesh file " + path.string());
  if (instance_id.empty()) instance_id = path.stem().string();
  return parse_obj(in, std::move(category), std::move(instance_id));
}

void write_obj(const Mesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  for (Eigen::Index i = 0; i < mesh.vertex_count(); ++i) {
    const Vec3 p = mesh.vertex(i);
    out << "v " << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  }
  for (Eigen::Index i = 0; i < mesh.triangle_count(); ++i) {
    out << "f " << mesh.triangles()(0, i) + 1 << ' ' << mesh.triangles()(1, i) + 1
        << ' ' << mesh.triangles()(2, i) + 1 << '\n';
  }
}

// ---------------------------------------------------------------------------
// Scaling and simplification

Mesh scale_to_extent(const Mesh& mesh, double extent) {
  const AlignedBox box = mesh.bounds();
  const double current = box.extent().maxCoeff();
  const double s = extent / current;
  const Vec3 c = box.center();
  Vertices v = ((mesh.vertices().colwise() - c) * s).colwise() + c;
  return make_mesh(std::move(v), mesh.triangles(), mesh.category(),
                   mesh.instance_id());
}

double draw_category_extent(const CategorySpec& spec, Rng& rng) {
  return uniform(rng, spec.min_size, spec.max_size);
}

Mesh scale_to_category(const Mesh& mesh, const CategorySpec& spec, Rng& rng) {
  return scale_to_extent(mesh, draw_category_extent(spec, rng));
}

namespace {

using CellKey = std::array<int, 3>;

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const {
    return static_cast<std::size_t>(
        mix64((static_cast<std::uint64_t>(k[0]) << 42) ^
              (static_cast<std::uint64_t>(k[1]) << 21) ^
              static_cast<std::uint64_t>(k[2])));
  }
};

std::vector<int> cluster_vertices(const Mesh& mesh, int cells_on_longest,
                                  int* cluster_count) {
  const AlignedBox box = mesh.bounds();
  const double cell = box.extent().maxCoeff() / cells_on_longest;
  std::unordered_map<CellKey, int, CellKeyHash> ids;
  std::vector<int> assignment(static_cast<std::size_t>(mesh.vertex_count()));
  for (Eigen::Index i = 0; i < mesh.vertex_count(); ++i) {
    const Vec3 rel = (mesh.vertex(i) - box.min) / cell;
    CellKey key;
    for (int a = 0; a < 3; ++a) {
      const int limit =
          std::max(0, static_cast<int>(std::ceil(box.extent()[a] / cell)) - 1);
      key[a] = std::clamp(static_cast<int>(std::floor(rel[a])), 0, limit);
    }
    auto [it, inserted] = ids.try_emplace(key, static_cast<int>(ids.size()));
    assignment[static_cast<std::size_t>(i)] = it->second;
  }
  *cluster_count = static_cast<int>(ids.size());
  return assignment;
}

}  // namespace

Mesh simplify_mesh(const Mesh& mesh, int target_vertex_count) {
  if (target_vertex_count < 4)
    throw PreconditionError("simplify_mesh target must be >= 4");
  if (mesh.vertex_count() <= target_vertex_count) return mesh;

  // Finest grid whose occupied-cell count fits the budget.
  int best_n = 0;
  for (int n = 1; n <= 4096; ++n) {
    int count = 0;
    cluster_vertices(mesh, n, &count);
    if (count > target_vertex_count) break;
    best_n = n;
  }
  int clusters = 0;
  const std::vector<int> assignment =
      cluster_vertices(mesh, std::max(best_n, 1), &clusters);

  // Representative per cluster: a vertex attaining a bounding-box extreme if
  // the cluster has one (keeps the extents), otherwise the one nearest the
  // cluster mean.
  const AlignedBox box = mesh.bounds();
  std::vector<Vec3> mean(static_cast<std::size_t>(clusters), Vec3::Zero());
  std::vector<int> count(static_cast<std::size_t>(clusters), 0);
  for (Eigen::Index i = 0; i < mesh.vertex_count(); ++i) {
    const auto c = static_cast<std::size_t>(assignment[static_cast<std::size_t>(i)]);
    mean[c] += mesh.vertex(i);
    ++count[c];
  }
  for (std::size_t c = 0; c < mean.size(); ++c) mean[c] /= count[c];

  std::vector<int> rep(static_cast<std::size_t>(clusters), -1);
  std::vector<int> rep_extremes(static_cast<std::size_t>(clusters), -1);
  std::vector<double> rep_dist(static_cast<std::size_t>(clusters), 0.0);
  for (Eigen::Index i = 0; i < mesh.vertex_count(); ++i) {
    const auto c = static_cast<std::size_t>(assignment[static_cast<std::size_t>(i)]);
    const Vec3 p = mesh.vertex(i);
    int extremes = 0;
    for (int a = 0; a < 3; ++a)
      extremes += (p[a] == box.min[a]) + (p[a] == box.max[a]);
    const double d = (p - mean[c]).squaredNorm();
    if (rep[c] < 0 || extremes > rep_extremes[c] ||
        (extremes == rep_extremes[c] && d < rep_dist[c])) {
      rep[c] = static_cast<int>(i);
      rep_extremes[c] = extremes;
      rep_dist[c] = d;
    }
  }

  std::set<std::array<int, 3>> seen;
  std::vector<std::array<int, 3>> tris;
  for (Eigen::Index t = 0; t < mesh.triangle_count(); ++t) {
    std::array<int, 3> c;
    for (int k = 0; k < 3; ++k)
      c[k] = assignment[static_cast<std::size_t>(mesh.triangles()(k, t))];
    if (c[0] == c[1] || c[1] == c[2] || c[0] == c[2]) continue;
    std::array<int, 3> key = c;
    std::sort(key.begin(), key.end());
    if (!seen.insert(key).second) continue;
    tris.push_back(c);
  }
  if (tris.empty()) throw DegenerateMesh("clustering collapsed every triangle");

  // Compact to referenced clusters only.
  std::vector<int> remap(static_cast<std::size_t>(clusters), -1);
  std::vector<Vec3> out_verts;
  for (auto& tri : tris) {
    for (int& c : tri) {
      auto& slot = remap[static_cast<std::size_t>(c)];
      if (slot < 0) {
        slot = static_cast<int>(out_verts.size());
        out_verts.push_back(mesh.vertex(rep[static_cast<std::size_t>(c)]));
      }
      c = slot;
    }
  }
  Vertices v(3, static_cast<Eigen::Index>(out_verts.size()));
  for (std::size_t i = 0; i < out_verts.size(); ++i) v.col(static_cast<Eigen::Index>(i)) = out_verts[i];
  Triangles t(3, static_cast<Eigen::Index>(tris.size()));
  for (std::size_t i = 0; i < tris.size(); ++i)
    t.col(static_cast<Eigen::Index>(i)) << tris[i][0], tris[i][1], tris[i][2];
  return make_mesh(std::move(v), t, mesh.category(), mesh.instance_id());
}

// ---------------------------------------------------------------------------
// Stable poses

namespace {

// Rotation taking `from` onto `to` (both unit).
Mat3 align(const Vec3& from, const Vec3& to) {
  return Quat::FromTwoVectors(from, to).toRotationMatrix();
}

double facet_margin(const Mesh& mesh, const HullFacet& facet, const Mat3& r,
                    const Vec3& com) {
  std::vector<Eigen::Vector2d> pts;
  pts.reserve(facet.vertices.size());
  for (int v : facet.vertices) pts.push_back((r * mesh.vertex(v)).head<2>());
  return polygon_margin(convex_hull_2d(std::move(pts)), (r * com).head<2>());
}

}  // namespace

double support_margin(const Mesh& mesh, const Mat3& rotation,
                      double contact_tolerance) {
  const Vertices rotated = rotation * mesh.vertices();
  const double zmin = rotated.row(2).minCoeff();
  const double tol = contact_tolerance * std::max(1.0, mesh.bounds().extent().maxCoeff());
  std::vector<Eigen::Vector2d> contact;
  for (Eigen::Index i = 0; i < rotated.cols(); ++i)
    if (rotated(2, i) <= zmin + tol) contact.push_back(rotated.col(i).head<2>());
  return polygon_margin(convex_hull_2d(std::move(contact)),
                        (rotation * mesh.center_of_mass()).head<2>());
}

std::vector<Mat3> stable_poses(const Mesh& mesh, bool upright_only,
                               const StablePoseOptions& options) {
  const auto facets = convex_hull_facets(mesh.vertices());
  const Vec3 com = mesh.center_of_mass();
  const Vec3 down = -Vec3::UnitZ();

  std::vector<Mat3> poses;
  for (const auto& facet : facets) {
    if (upright_only && facet.normal.dot(down) < 1.0 - 1e-9) continue;
    const Mat3 r = upright_only ? Mat3::Identity() : align(facet.normal, down);
    if (facet_margin(mesh, facet, r, com) > options.margin) poses.push_back(r);
    if (upright_only) break;
  }
  if (poses.empty())
    throw NoStablePose("no stable resting facet for '" + mesh.instance_id() + "'");
  return poses;
}

// ---------------------------------------------------------------------------
// Procedural meshes

Mesh make_box(double sx, double sy, double sz, std::string category,
              std::string instance_id) {
  Vertices v(3, 8);
  for (int i = 0; i < 8; ++i) {
    v.col(i) << ((i & 1) ? 0.5 : -0.5) * sx, ((i & 2) ? 0.5 : -0.5) * sy,
        ((i & 4) ? 0.5 : -0.5) * sz;
  }
  Triangles t(3, 12);
  std::array<std::array<int, 3>, 12> faces = {{{0, 2, 3}, {0, 3, 1},
                                               {4, 5, 7}, {4, 7, 6},
                                               {0, 1, 5}, {0, 5, 4},
                                               {2, 6, 7}, {2, 7, 3},
                                               {0, 4, 6}, {0, 6, 2},
                                               {1, 3, 7}, {1, 7, 5}}};
  for (int i = 0; i < 12; ++i) t.col(i) << faces[i][0], faces[i][1], faces[i][2];
  return make_mesh(std::move(v), t, std::move(category), std::move(instance_id));
}

Mesh make_icosphere(double radius, int subdivisions, std::string category,
                    std::string instance_id) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {
      {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
      {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
      {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& p : verts) p.normalize();
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7}, {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      verts.push_back((verts[static_cast<std::size_t>(a)] + verts[static_cast<std::size_t>(b)]).normalized());
      const int id = static_cast<int>(verts.size()) - 1;
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    for (const auto& f : faces) {
      const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }
  Vertices v(3, static_cast<Eigen::Index>(verts.size()));
  for (std::size_t i = 0; i < verts.size(); ++i) v.col(static_cast<Eigen::Index>(i)) = radius * verts[i];
  Triangles t(3, static_cast<Eigen::Index>(faces.size()));
  for (std::size_t i = 0; i < faces.size(); ++i)
    t.col(static_cast<Eigen::Index>(i)) << faces[i][0], faces[i][1], faces[i][2];
  return make_mesh(std::move(v), t, std::move(category), std::move(instance_id));
}

Mesh make_cylinder(double radius, double height, int segments,
                   std::string category, std::string instance_id) {
  const int n = segments;
  Vertices v(3, 2 * n + 2);
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * M_PI * i / n;
    v.col(i) << radius * std::cos(a), radius * std::sin(a), -0.5 * height;
    v.col(n + i) << radius * std::cos(a), radius * std::sin(a), 0.5 * height;
  }
  v.col(2 * n) << 0, 0, -0.5 * height;
  v.col(2 * n + 1) << 0, 0, 0.5 * height;
  Triangles t(3, 4 * n);
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    t.col(4 * i) << i, j, n + j;
    t.col(4 * i + 1) << i, n + j, n + i;
    t.col(4 * i + 2) << 2 * n, j, i;
    t.col(4 * i + 3) << 2 * n + 1, n + i, n + j;
  }
  return make_mesh(std::move(v), t, std::move(category), std::move(instance_id));
}

Mesh make_cone(double radius, double height, int segments, std::string category,
               std::string instance_id) {
  const int n = segments;
  Vertices v(3, n + 2);
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * M_PI * i / n;
    v.col(i) << radius * std::cos(a), radius * std::sin(a), -0.5 * height;
  }
  v.col(n) << 0, 0, -0.5 * height;
  v.col(n + 1) << 0, 0, 0.5 * height;
  Triangles t(3, 2 * n);
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    t.col(2 * i) << n, j, i;
    t.col(2 * i + 1) << i, j, n + 1;
  }
  return make_mesh(std::move(v), t, std::move(category), std::move(instance_id));
}

// ---------------------------------------------------------------------------
// Built-in library

CategoryRegistry builtin_categories() {
  CategoryRegistry r;
  r.add({"block", 0.03, 0.10, false});
  r.add({"bottle", 0.10, 0.22, true});
  r.add({"ball", 0.03, 0.07, false});
  r.add({"can", 0.05, 0.14, true});
  r.add({"toy", 0.02, 0.12, false});
  return r;
}

std::vector<Mesh> builtin_meshes() {
  std::vector<Mesh> m;
  // Extents here are nominal; scenes rescale per category.
  m.push_back(make_box(0.05, 0.05, 0.05, "block", "block_cube"));
  m.push_back(make_box(0.06, 0.04, 0.03, "block", "block_brick"));
  m.push_back(make_box(0.08, 0.03, 0.03, "block", "block_bar"));
  m.push_back(make_box(0.05, 0.05, 0.02, "block", "block_tile"));
  m.push_back(make_cylinder(0.025, 0.18, 16, "bottle", "bottle_tall"));
  m.push_back(make_cylinder(0.03, 0.15, 12, "bottle", "bottle_wide"));
  m.push_back(make_box(0.05, 0.05, 0.2, "bottle", "bottle_square"));
  m.push_back(make_cylinder(0.02, 0.16, 8, "bottle", "bottle_slim"));
  m.push_back(make_icosphere(0.03, 1, "ball", "ball_coarse"));
  m.push_back(make_icosphere(0.03, 2, "ball", "ball_fine"));
  m.push_back(make_icosphere(0.03, 0, "ball", "ball_ico"));
  m.push_back(make_box(0.04, 0.04, 0.04, "ball", "ball_dice"));
  m.push_back(make_cylinder(0.03, 0.1, 16, "can", "can_soda"));
  m.push_back(make_cylinder(0.04, 0.06, 16, "can", "can_tuna"));
  m.push_back(make_cylinder(0.035, 0.12, 10, "can", "can_tall"));
  m.push_back(make_cylinder(0.03, 0.08, 6, "can", "can_hex"));
  m.push_back(make_cone(0.03, 0.06, 12, "toy", "toy_cone"));
  m.push_back(make_box(0.03, 0.02, 0.01, "toy", "toy_chip"));
  m.push_back(make_cylinder(0.015, 0.05, 8, "toy", "toy_peg"));
  m.push_back(make_icosphere(0.02, 1, "toy", "toy_bead"));
  return m;
}

std::vector<AssetDescriptor> write_builtin_library(
    const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<AssetDescriptor> out;
  for (const Mesh& m : builtin_meshes()) {
    const auto path = dir / (m.category() + "__" + m.instance_id() + ".obj");
    write_obj(m, path);
    out.push_back({m.instance_id(), m.category(), path});
  }
  write_category_registry(builtin_categories(), dir / "categories.json");
  return out;
}

std::vector<AssetDescriptor> scan_asset_dir(const std::filesystem::path& dir) {
  std::vector<AssetDescriptor> out;
  if (!std::filesystem::is_directory(dir))
    throw IoError("asset directory not found: " + dir.string());
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".obj") continue;
    const std::string stem = entry.path().stem().string();
    const auto sep = stem.find("__");
    if (sep == std::string::npos) continue;
    out.push_back({stem.substr(sep + 2), stem.substr(0, sep), entry.path()});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.instance_id < b.instance_id;
  });
  return out;
}

}  // namespace gf
