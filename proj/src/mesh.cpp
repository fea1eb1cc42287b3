#include "vprism/mesh.hpp"

#include "vprism/mc_tables.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string_view>

namespace vprism {

double TriangleMesh::triangle_area(std::size_t t) const {
  const auto& tri = triangles[t];
  const Point3& a = vertices[tri[0]];
  return 0.5 * (vertices[tri[1]] - a).cross(vertices[tri[2]] - a).norm();
}

double TriangleMesh::surface_area() const {
  double total = 0.0;
  for (std::size_t t = 0; t < triangles.size(); ++t) total += triangle_area(t);
  return total;
}

double TriangleMesh::signed_volume() const {
  double v = 0.0;
  for (const auto& tri : triangles) {
    v += vertices[tri[0]].dot(vertices[tri[1]].cross(vertices[tri[2]]));
  }
  return v / 6.0;
}

std::vector<Point3> TriangleMesh::sample_surface(std::size_t n, Rng& rng) const {
  if (triangles.empty()) throw InputError("cannot sample an empty mesh");
  std::vector<double> cumulative(triangles.size());
  double total = 0.0;
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    total += triangle_area(t);
    cumulative[t] = total;
  }
  std::vector<Point3> out;
  out.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double pick = rng.uniform() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    const std::size_t t =
        std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), triangles.size() - 1);
    const double r1 = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    const auto& tri = triangles[t];
    out.push_back((1.0 - r1) * vertices[tri[0]] + r1 * (1.0 - r2) * vertices[tri[1]] +
                  r1 * r2 * vertices[tri[2]]);
  }
  return out;
}

namespace {

// Corner offsets in the table's numbering.
constexpr std::array<std::array<int, 3>, 8> kCorner = {{
    {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1},
}};

constexpr std::array<std::array<int, 2>, 12> kEdgeCorners = {{
    {0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6}, {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7},
}};

}  // namespace

MarchingCubesResult marching_cubes(const BatchField& field, const Aabb& bounds, double cell,
                                   double level) {
  if (!(cell > 0.0)) throw InputError("marching cubes cell size must be positive");
  const Point3 extent = bounds.extent();
  if (!(extent.array() > 0.0).all()) throw InputError("marching cubes bounds are degenerate");

  std::array<std::size_t, 3> n{};
  for (int d = 0; d < 3; ++d) {
    n[d] = static_cast<std::size_t>(std::ceil(extent[d] / cell - 1e-9)) + 1;
    n[d] = std::max<std::size_t>(n[d], 2);
  }
  const std::size_t total = n[0] * n[1] * n[2];
  auto flat = [&](std::size_t i, std::size_t j, std::size_t k) { return (k * n[1] + j) * n[0] + i; };
  auto position = [&](std::size_t i, std::size_t j, std::size_t k) {
    return Point3(bounds.lo.x() + cell * static_cast<double>(i),
                  bounds.lo.y() + cell * static_cast<double>(j),
                  bounds.lo.z() + cell * static_cast<double>(k));
  };

  std::vector<Point3> grid;
  grid.reserve(total);
  for (std::size_t k = 0; k < n[2]; ++k)
    for (std::size_t j = 0; j < n[1]; ++j)
      for (std::size_t i = 0; i < n[0]; ++i) grid.push_back(position(i, j, k));
  const std::vector<double> values = field(grid);
  if (values.size() != total) throw InputError("field returned the wrong number of values");

  MarchingCubesResult result;
  TriangleMesh& mesh = result.mesh;
  // One shared vertex per grid edge: id = 3 * base grid index + axis.
  std::vector<std::int64_t> edge_vertex(3 * total, -1);

  auto edge_vertex_id = [&](std::size_t gi, std::size_t gj, std::size_t gk, int e) {
    const auto& c0 = kCorner[kEdgeCorners[e][0]];
    const auto& c1 = kCorner[kEdgeCorners[e][1]];
    std::array<std::size_t, 3> a{gi + c0[0], gj + c0[1], gk + c0[2]};
    std::array<std::size_t, 3> b{gi + c1[0], gj + c1[1], gk + c1[2]};
    if (a[0] > b[0] || a[1] > b[1] || a[2] > b[2]) std::swap(a, b);
    const int axis = a[0] != b[0] ? 0 : (a[1] != b[1] ? 1 : 2);
    const std::size_t ia = flat(a[0], a[1], a[2]);
    const std::size_t ib = flat(b[0], b[1], b[2]);
    auto& slot = edge_vertex[3 * ia + static_cast<std::size_t>(axis)];
    if (slot < 0) {
      const double fa = values[ia];
      const double fb = values[ib];
      double t = 0.5;
      if (fb != fa) t = std::clamp((level - fa) / (fb - fa), 0.0, 1.0);
      mesh.vertices.push_back(grid[ia] + t * (grid[ib] - grid[ia]));
      slot = static_cast<std::int64_t>(mesh.vertices.size() - 1);
    }
    return static_cast<std::uint32_t>(slot);
  };

  for (std::size_t k = 0; k + 1 < n[2]; ++k) {
    for (std::size_t j = 0; j + 1 < n[1]; ++j) {
      for (std::size_t i = 0; i + 1 < n[0]; ++i) {
        unsigned cube = 0;
        for (int c = 0; c < 8; ++c) {
          const double v = values[flat(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2])];
          if (v < level) cube |= 1u << c;
        }
        if (detail::kEdgeTable[cube] == 0) continue;
        const auto& tris = detail::kTriTable[cube];
        for (int t = 0; tris[t] != -1; t += 3) {
          // With below-level corners flagged, table order already gives
          // normals pointing out of the above-level region.
          const std::uint32_t a = edge_vertex_id(i, j, k, tris[t]);
          const std::uint32_t b = edge_vertex_id(i, j, k, tris[t + 1]);
          const std::uint32_t c = edge_vertex_id(i, j, k, tris[t + 2]);
          const double area2 =
              (mesh.vertices[b] - mesh.vertices[a]).cross(mesh.vertices[c] - mesh.vertices[a]).norm();
          if (a == b || b == c || a == c || 0.5 * area2 < 1e-12) {
            ++result.degenerate_dropped;
            continue;
          }
          mesh.triangles.push_back({a, b, c});
        }
      }
    }
  }
  result.empty = mesh.triangles.empty();
  return result;
}

MarchingCubesResult marching_cubes(const PointField& field, const Aabb& bounds, double cell,
                                   double level) {
  BatchField batch = [&field](std::span<const Point3> pts) {
    std::vector<double> out;
    out.reserve(pts.size());
    for (const auto& p : pts) out.push_back(field(p));
    return out;
  };
  return marching_cubes(batch, bounds, cell, level);
}

void write_obj(std::ostream& os, const TriangleMesh& mesh) {
  // Shortest text that reads back to the same double.
  auto put = [&os](double x) {
    char buf[32];
    os << ' ' << std::string_view(buf, std::to_chars(buf, buf + sizeof buf, x).ptr);
  };
  for (const auto& v : mesh.vertices) {
    os << 'v';
    put(v.x());
    put(v.y());
    put(v.z());
    os << '\n';
  }
  for (const auto& t : mesh.triangles) {
    os << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  }
}

void write_obj_file(const std::string& path, const TriangleMesh& mesh) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot open '" + path + "' for writing");
  write_obj(os, mesh);
  if (!os) throw InputError("failed writing '" + path + "'");
}

TriangleMesh read_obj(std::istream& is) {
  TriangleMesh mesh;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::array<long long, 3>> faces;
  auto fail = [&](const std::string& why) {
    throw InputError("OBJ line " + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) fail("vertex needs three coordinates");
      mesh.vertices.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::array<long long, 3> f{};
      for (auto& idx : f) {
        std::string tok;
        if (!(ls >> tok)) fail("face needs three indices");
        std::size_t used = 0;
        try {
          idx = std::stoll(tok, &used);
        } catch (const std::exception&) {
          fail("bad face index '" + tok + "'");
        }
        if (used != tok.size()) fail("bad face index '" + tok + "'");
      }
      faces.push_back(f);
    } else {
      fail("unsupported record '" + tag + "'");
    }
    std::string extra;
    if (ls >> extra) fail("trailing tokens");
  }
  for (const auto& f : faces) {
    std::array<std::uint32_t, 3> t{};
    for (int c = 0; c < 3; ++c) {
      if (f[c] < 1 || static_cast<std::size_t>(f[c]) > mesh.vertices.size()) {
        throw InputError("OBJ face index " + std::to_string(f[c]) + " out of range");
      }
      t[c] = static_cast<std::uint32_t>(f[c] - 1);
    }
    mesh.triangles.push_back(t);
  }
  return mesh;
}

}  // namespace vprism
