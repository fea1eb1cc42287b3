#pragma once

#include "vprism/core.hpp"

#include <array>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace vprism {

struct TriangleMesh {
  std::vector<Point3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;

  bool empty() const { return triangles.empty(); }
  double triangle_area(std::size_t t) const;
  double surface_area() const;
  /// Volume enclosed by a closed, outward-wound mesh (divergence theorem).
  double signed_volume() const;

  /// Area-weighted uniform surface samples.
  std::vector<Point3> sample_surface(std::size_t n, Rng& rng) const;
};

/// Batch field evaluator: one value per query point, same order.
using BatchField = std::function<std::vector<double>(std::span<const Point3>)>;
using PointField = std::function<double(const Point3&)>;

struct MarchingCubesResult {
  TriangleMesh mesh;
  bool empty = true;
  std::size_t degenerate_dropped = 0;
};

/// Extracts the level set of a sampled scalar field. The region where
/// field >= level is treated as inside; triangles are wound so normals point
/// out of it. Grid vertices sit at bounds.lo + i * cell along each axis.
MarchingCubesResult marching_cubes(const BatchField& field, const Aabb& bounds, double cell,
                                   double level);
MarchingCubesResult marching_cubes(const PointField& field, const Aabb& bounds, double cell,
                                   double level);

/// ASCII OBJ with `v x y z` and 1-based `f i j k` lines.
void write_obj(std::ostream& os, const TriangleMesh& mesh);
void write_obj_file(const std::string& path, const TriangleMesh& mesh);
/// Strict reader: only `v`, `f` (three 1-based indices), comments and blank
/// lines are accepted. Throws InputError with the offending line number.
TriangleMesh read_obj(std::istream& is);

}  // namespace vprism
