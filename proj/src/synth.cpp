#include "vprism/synth.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace vprism {

namespace {

constexpr double kRayEps = 1e-9;
constexpr double kInsideTol = 1e-9;

// Box-local coordinates: translate to the center and undo the yaw.
Point3 to_box_frame(const Box& b, const Point3& p) {
  const Point3 d = p - b.center;
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  return {c * d.x() + s * d.y(), -s * d.x() + c * d.y(), d.z()};
}

Point3 rotate_to_box_frame(const Box& b, const Point3& v) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  return {c * v.x() + s * v.y(), -s * v.x() + c * v.y(), v.z()};
}

std::optional<double> smallest_positive(std::initializer_list<double> ts) {
  std::optional<double> best;
  for (double t : ts) {
    if (std::isfinite(t) && t > kRayEps && (!best || t < *best)) best = t;
  }
  return best;
}

std::optional<double> intersect(const Sphere& s, const Point3& o, const Point3& d) {
  const Point3 oc = o - s.center;
  const double b = oc.dot(d);
  const double c = oc.squaredNorm() - s.radius * s.radius;
  const double a = d.squaredNorm();
  const double disc = b * b - a * c;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  return smallest_positive({(-b - sq) / a, (-b + sq) / a});
}

std::optional<double> intersect(const Box& box, const Point3& o, const Point3& d) {
  const Point3 lo = to_box_frame(box, o);
  const Point3 ld = rotate_to_box_frame(box, d);
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double h = box.half_extents[a];
    if (std::abs(ld[a]) < 1e-300) {
      if (std::abs(lo[a]) > h) return std::nullopt;
      continue;
    }
    double t0 = (-h - lo[a]) / ld[a];
    double t1 = (h - lo[a]) / ld[a];
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
  }
  if (t_near > t_far) return std::nullopt;
  return smallest_positive({t_near, t_far});
}

std::optional<double> intersect(const Cylinder& cyl, const Point3& o, const Point3& d) {
  const Point3 lo = o - cyl.center;
  std::optional<double> best;
  auto consider = [&](double t) {
    if (std::isfinite(t) && t > kRayEps && (!best || t < *best)) best = t;
  };
  const double a = d.x() * d.x() + d.y() * d.y();
  if (a > 1e-300) {
    const double b = lo.x() * d.x() + lo.y() * d.y();
    const double c = lo.x() * lo.x() + lo.y() * lo.y() - cyl.radius * cyl.radius;
    const double disc = b * b - a * c;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      for (double t : {(-b - sq) / a, (-b + sq) / a}) {
        if (std::abs(lo.z() + t * d.z()) <= cyl.half_height) consider(t);
      }
    }
  }
  if (std::abs(d.z()) > 1e-300) {
    for (double cap : {-cyl.half_height, cyl.half_height}) {
      const double t = (cap - lo.z()) / d.z();
      const double x = lo.x() + t * d.x(), y = lo.y() + t * d.y();
      if (x * x + y * y <= cyl.radius * cyl.radius) consider(t);
    }
  }
  return best;
}

double sdf(const Sphere& s, const Point3& p) { return (p - s.center).norm() - s.radius; }

double sdf(const Box& b, const Point3& p) {
  const Eigen::Array3d q = to_box_frame(b, p).array().abs() - b.half_extents.array();
  return q.max(0.0).matrix().norm() + std::min(q.maxCoeff(), 0.0);
}

double sdf(const Cylinder& c, const Point3& p) {
  const Point3 l = p - c.center;
  const Eigen::Array2d q(std::hypot(l.x(), l.y()) - c.radius, std::abs(l.z()) - c.half_height);
  return std::min(q.maxCoeff(), 0.0) + q.max(0.0).matrix().norm();
}

void check_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw InputError(std::string(what) + " must be positive");
}

}  // namespace

double signed_distance(const Shape& shape, const Point3& p) {
  return std::visit([&](const auto& s) { return sdf(s, p); }, shape);
}

std::optional<double> intersect_ray(const Shape& shape, const Point3& origin, const Point3& dir) {
  return std::visit([&](const auto& s) { return intersect(s, origin, dir); }, shape);
}

Aabb bounding_box(const Shape& shape) {
  struct Visitor {
    Aabb operator()(const Sphere& s) const {
      return {s.center.array() - s.radius, s.center.array() + s.radius};
    }
    Aabb operator()(const Box& b) const {
      const double c = std::abs(std::cos(b.yaw)), s = std::abs(std::sin(b.yaw));
      const Point3 h(c * b.half_extents.x() + s * b.half_extents.y(),
                     s * b.half_extents.x() + c * b.half_extents.y(), b.half_extents.z());
      return {b.center - h, b.center + h};
    }
    Aabb operator()(const Cylinder& c) const {
      const Point3 h(c.radius, c.radius, c.half_height);
      return {c.center - h, c.center + h};
    }
  };
  return std::visit(Visitor{}, shape);
}

double volume(const Shape& shape) {
  struct Visitor {
    double operator()(const Sphere& s) const {
      return 4.0 / 3.0 * std::numbers::pi * s.radius * s.radius * s.radius;
    }
    double operator()(const Box& b) const { return 8.0 * b.half_extents.prod(); }
    double operator()(const Cylinder& c) const {
      return std::numbers::pi * c.radius * c.radius * 2.0 * c.half_height;
    }
  };
  return std::visit(Visitor{}, shape);
}

SceneOracle::SceneOracle(std::vector<Primitive> primitives, double table_half_extent)
    : primitives_(std::move(primitives)), table_half_extent_(table_half_extent) {
  if (!(table_half_extent_ > 0.0)) throw InputError("table half extent must be positive");
  std::set<ClassIndex> ids;
  for (const auto& p : primitives_) {
    std::visit(
        [](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Sphere>) check_positive(s.radius, "sphere radius");
          if constexpr (std::is_same_v<T, Box>) {
            for (int a = 0; a < 3; ++a) check_positive(s.half_extents[a], "box half extent");
          }
          if constexpr (std::is_same_v<T, Cylinder>) {
            check_positive(s.radius, "cylinder radius");
            check_positive(s.half_height, "cylinder half height");
          }
        },
        p.shape);
    if (p.object_id == 0) throw InputError("object ids start at 1");
    if (!ids.insert(p.object_id).second) {
      throw InputError("duplicate object id " + std::to_string(p.object_id));
    }
    if (bounding_box(p.shape).lo.z() < -1e-6) {
      throw InputError("object " + std::to_string(p.object_id) + " extends below the table");
    }
  }
  if (!ids.empty() && *ids.rbegin() != ids.size()) {
    throw InputError("object ids must be contiguous from 1");
  }
  // Pairwise disjointness, checked on a lattice over each AABB overlap.
  for (std::size_t a = 0; a < primitives_.size(); ++a) {
    for (std::size_t b = a + 1; b < primitives_.size(); ++b) {
      const Aabb ba = bounding_box(primitives_[a].shape);
      const Aabb bb = bounding_box(primitives_[b].shape);
      const Point3 lo = ba.lo.cwiseMax(bb.lo), hi = ba.hi.cwiseMin(bb.hi);
      if (!(lo.array() < hi.array()).all()) continue;
      constexpr int kSteps = 24;
      for (int i = 0; i <= kSteps; ++i)
        for (int j = 0; j <= kSteps; ++j)
          for (int k = 0; k <= kSteps; ++k) {
            const Point3 t(i, j, k);
            const Point3 q = lo + (hi - lo).cwiseProduct(t / kSteps);
            if (signed_distance(primitives_[a].shape, q) < 0.0 &&
                signed_distance(primitives_[b].shape, q) < 0.0) {
              throw InputError("objects " + std::to_string(primitives_[a].object_id) + " and " +
                               std::to_string(primitives_[b].object_id) + " intersect");
            }
          }
    }
  }
}

const Primitive& SceneOracle::object(ClassIndex object_id) const {
  for (const auto& p : primitives_) {
    if (p.object_id == object_id) return p;
  }
  throw InputError("unknown object id " + std::to_string(object_id));
}

ClassIndex SceneOracle::occupancy_label(const Point3& q) const {
  ClassIndex label = 0;
  for (const auto& p : primitives_) {
    if (signed_distance(p.shape, q) <= kInsideTol && (label == 0 || p.object_id < label)) {
      label = p.object_id;
    }
  }
  return label;
}

std::optional<SceneOracle::Hit> SceneOracle::cast(const Point3& origin, const Point3& dir) const {
  std::optional<Hit> best;
  for (const auto& p : primitives_) {
    if (auto t = intersect_ray(p.shape, origin, dir)) {
      if (!best || *t < best->t || (*t == best->t && p.object_id < best->label)) {
        best = Hit{*t, p.object_id};
      }
    }
  }
  if (std::abs(dir.z()) > 1e-300) {
    const double t = -table_plane_.signed_distance(origin) / dir.z();
    const Point3 p = origin + t * dir;
    if (t > kRayEps && std::abs(p.x()) <= table_half_extent_ &&
        std::abs(p.y()) <= table_half_extent_ && (!best || t < best->t)) {
      best = Hit{t, 0};
    }
  }
  return best;
}

void CameraSpec::validate() const {
  if (!origin.allFinite() || !look_at.allFinite()) throw InputError("camera pose is not finite");
  if ((look_at - origin).norm() < 1e-12) throw InputError("camera origin equals look_at");
  if (!(horizontal_fov > 0.0 && horizontal_fov < std::numbers::pi)) {
    throw InputError("horizontal fov must be in (0, pi)");
  }
  if (image_width == 0 || image_height == 0) throw InputError("image size must be positive");
  if ((look_at - origin).normalized().cross(up).norm() < 1e-9) {
    throw InputError("camera up vector is parallel to the viewing direction");
  }
  if (!(max_range > 0.0)) throw InputError("camera max range must be positive");
}

CameraSpec::Frame CameraSpec::frame() const {
  Frame f;
  f.forward = (look_at - origin).normalized();
  f.right = f.forward.cross(up).normalized();
  f.up = f.right.cross(f.forward);
  f.tan_half_h = std::tan(0.5 * horizontal_fov);
  f.tan_half_v = f.tan_half_h * static_cast<double>(image_height) / static_cast<double>(image_width);
  return f;
}

Point3 CameraSpec::pixel_ray(std::size_t col, std::size_t row) const {
  const Frame f = frame();
  const double x = (2.0 * (static_cast<double>(col) + 0.5) / static_cast<double>(image_width) - 1.0) *
                   f.tan_half_h;
  const double y = (1.0 - 2.0 * (static_cast<double>(row) + 0.5) / static_cast<double>(image_height)) *
                   f.tan_half_v;
  return (f.forward + x * f.right + y * f.up).normalized();
}

bool CameraSpec::in_view(const Point3& q) const {
  const Frame f = frame();
  const Point3 d = q - origin;
  const double z = d.dot(f.forward);
  if (z <= 0.0) return false;
  return std::abs(d.dot(f.right) / z) <= f.tan_half_h && std::abs(d.dot(f.up) / z) <= f.tan_half_v;
}

RenderedCloud raycast_scene(const SceneOracle& oracle, const CameraSpec& camera, double depth_noise,
                            std::uint64_t noise_seed) {
  camera.validate();
  if (oracle.occupancy_label(camera.origin) != 0) {
    throw InputError("camera origin is inside an object");
  }
  Rng rng(noise_seed);
  std::vector<Point3> points;
  std::vector<ClassIndex> object_labels;
  for (std::size_t row = 0; row < camera.image_height; ++row) {
    for (std::size_t col = 0; col < camera.image_width; ++col) {
      const Point3 dir = camera.pixel_ray(col, row);
      const auto hit = oracle.cast(camera.origin, dir);
      if (!hit || hit->t > camera.max_range) continue;
      double t = hit->t;
      if (depth_noise > 0.0) t += depth_noise * rng.normal();
      points.push_back(camera.origin + t * dir);
      object_labels.push_back(hit->label);
    }
  }
  if (points.empty()) throw InputError("no camera ray hit the scene");

  std::set<ClassIndex> seen(object_labels.begin(), object_labels.end());
  seen.erase(0);
  std::vector<ClassIndex> class_to_object{0};
  class_to_object.insert(class_to_object.end(), seen.begin(), seen.end());
  std::vector<ClassIndex> object_to_class(oracle.num_objects() + 1, 0);
  for (std::size_t k = 1; k < class_to_object.size(); ++k) {
    object_to_class[class_to_object[k]] = static_cast<ClassIndex>(k);
  }
  std::vector<ClassIndex> labels;
  labels.reserve(object_labels.size());
  for (ClassIndex id : object_labels) labels.push_back(object_to_class[id]);
  return RenderedCloud{
      SegmentedCloud(std::move(points), std::move(labels), camera.origin, class_to_object.size()),
      std::move(class_to_object)};
}

TriangleMesh ground_truth_mesh(const SceneOracle& oracle, ClassIndex object_id, double cell) {
  const Primitive& prim = oracle.object(object_id);
  const Aabb bounds = bounding_box(prim.shape).padded(2.0 * cell);
  const Shape shape = prim.shape;
  auto inside = [shape](const Point3& p) { return -signed_distance(shape, p); };
  return marching_cubes(PointField(inside), bounds, cell, 0.0).mesh;
}

namespace {

using nlohmann::json;

Point3 vec3(const json& j, const char* key) {
  if (!j.contains(key)) throw InputError(std::string("missing field '") + key + "'");
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != 3) {
    throw InputError(std::string("field '") + key + "' must be a 3-element array");
  }
  Point3 p;
  for (int i = 0; i < 3; ++i) {
    if (!v[i].is_number()) throw InputError(std::string("field '") + key + "' must be numeric");
    p[i] = v[i].get<double>();
  }
  return p;
}

double number(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw InputError(std::string("missing numeric field '") + key + "'");
  }
  return j.at(key).get<double>();
}

json to_json(const Point3& p) { return json::array({p.x(), p.y(), p.z()}); }

json primitive_to_json(const Primitive& p) {
  json out = std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          return {{"type", "sphere"}, {"center", to_json(s.center)}, {"radius", s.radius}};
        } else if constexpr (std::is_same_v<T, Box>) {
          return {{"type", "box"},
                  {"center", to_json(s.center)},
                  {"half_extents", to_json(s.half_extents)},
                  {"yaw", s.yaw}};
        } else {
          return {{"type", "cylinder"},
                  {"center", to_json(s.center)},
                  {"radius", s.radius},
                  {"half_height", s.half_height}};
        }
      },
      p.shape);
  out["object_id"] = p.object_id;
  return out;
}

Primitive primitive_from_json(const json& j) {
  if (!j.is_object() || !j.contains("type")) throw InputError("primitive must have a 'type'");
  const std::string type = j.at("type").get<std::string>();
  if (!j.contains("object_id") || !j.at("object_id").is_number_unsigned()) {
    throw InputError("primitive needs a non-negative integer 'object_id'");
  }
  const auto id = j.at("object_id").get<ClassIndex>();
  if (type == "sphere") return {Sphere{vec3(j, "center"), number(j, "radius")}, id};
  if (type == "box") {
    return {Box{vec3(j, "center"), vec3(j, "half_extents"), j.value("yaw", 0.0)}, id};
  }
  if (type == "cylinder") {
    return {Cylinder{vec3(j, "center"), number(j, "radius"), number(j, "half_height")}, id};
  }
  throw InputError("unknown primitive type '" + type + "'");
}

void check_format(const json& j, const std::string& format) {
  if (!j.is_object()) throw InputError(format + " document must be a JSON object");
  if (j.value("format", std::string()) != format) {
    throw InputError("expected format '" + format + "'");
  }
  if (!j.contains("version") || j.at("version") != 1) {
    throw InputError("unsupported " + format + " version");
  }
}

}  // namespace

json oracle_to_json(const SceneOracle& oracle) {
  json prims = json::array();
  for (const auto& p : oracle.primitives()) prims.push_back(primitive_to_json(p));
  json table = json::object();
  if (std::isfinite(oracle.table_half_extent())) table["half_extent"] = oracle.table_half_extent();
  return {{"format", "vprism-oracle"}, {"version", 1}, {"table", table}, {"primitives", prims}};
}

SceneOracle oracle_from_json(const json& j) {
  if (!j.contains("primitives") || !j.at("primitives").is_array()) {
    throw InputError("missing 'primitives' array");
  }
  std::vector<Primitive> prims;
  for (const auto& p : j.at("primitives")) prims.push_back(primitive_from_json(p));
  double half = std::numeric_limits<double>::infinity();
  if (j.contains("table") && j.at("table").contains("half_extent")) {
    half = number(j.at("table"), "half_extent");
  }
  return SceneOracle(std::move(prims), half);
}

json camera_to_json(const CameraSpec& c) {
  json out = {{"origin", to_json(c.origin)},
              {"look_at", to_json(c.look_at)},
              {"up", to_json(c.up)},
              {"horizontal_fov", c.horizontal_fov},
              {"width", c.image_width},
              {"height", c.image_height}};
  if (std::isfinite(c.max_range)) out["max_range"] = c.max_range;
  return out;
}

CameraSpec camera_from_json(const json& j) {
  if (!j.is_object()) throw InputError("camera must be an object");
  CameraSpec c;
  c.origin = vec3(j, "origin");
  c.look_at = vec3(j, "look_at");
  c.up = j.contains("up") ? vec3(j, "up").normalized() : Point3::UnitZ();
  c.horizontal_fov = number(j, "horizontal_fov");
  if (!j.contains("width") || !j.at("width").is_number_unsigned() || !j.contains("height") ||
      !j.at("height").is_number_unsigned()) {
    throw InputError("camera needs integer 'width' and 'height'");
  }
  c.image_width = j.at("width").get<std::size_t>();
  c.image_height = j.at("height").get<std::size_t>();
  if (j.contains("max_range")) c.max_range = number(j, "max_range");
  c.validate();
  return c;
}

SceneSpec scene_from_json(const json& j) {
  check_format(j, "vprism-scene");
  if (!j.contains("camera")) throw InputError("scene is missing 'camera'");
  SceneSpec spec{oracle_from_json(j), camera_from_json(j.at("camera")), j.value("depth_noise", 0.0)};
  if (spec.depth_noise < 0.0) throw InputError("depth_noise must be non-negative");
  return spec;
}

json scene_to_json(const SceneSpec& scene) {
  json out = oracle_to_json(scene.oracle);
  out["format"] = "vprism-scene";
  out["camera"] = camera_to_json(scene.camera);
  out["depth_noise"] = scene.depth_noise;
  return out;
}

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kTableHalfExtent = 0.2;

CameraSpec orbit_camera(const Point3& target, double azimuth, double elevation, double distance) {
  CameraSpec c;
  c.origin = target + distance * Point3(std::cos(elevation) * std::cos(azimuth),
                                        std::cos(elevation) * std::sin(azimuth),
                                        std::sin(elevation));
  c.look_at = target;
  c.up = Point3::UnitZ();
  c.horizontal_fov = 45.0 * kDeg;
  c.image_width = 64;
  c.image_height = 48;
  c.max_range = 2.0;
  return c;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"bare-plane", "one-sphere", "three-object", "two-sphere-oblique", "two-sphere-inline"};
}

SceneSpec scene_preset(const std::string& name) {
  if (name == "bare-plane") {
    return {SceneOracle({}, kTableHalfExtent), orbit_camera({0, 0, 0}, 0.0, 60 * kDeg, 0.6)};
  }
  if (name == "one-sphere") {
    SceneOracle oracle({{Sphere{{0, 0, 0.08}, 0.08}, 1}}, kTableHalfExtent);
    return {oracle, orbit_camera({0, 0, 0.06}, 0.0, 40 * kDeg, 0.6)};
  }
  if (name == "three-object") {
    SceneOracle oracle({{Sphere{{0.0, -0.11, 0.06}, 0.06}, 1},
                        {Box{{0.02, 0.06, 0.05}, {0.05, 0.04, 0.05}, 0.4}, 2},
                        {Cylinder{{-0.12, 0.02, 0.07}, 0.045, 0.07}, 3}},
                       kTableHalfExtent);
    return {oracle, orbit_camera({-0.02, 0, 0.05}, 10 * kDeg, 40 * kDeg, 0.65)};
  }
  if (name == "two-sphere-oblique" || name == "two-sphere-inline") {
    SceneOracle oracle({{Sphere{{0.0, 0, 0.05}, 0.05}, 1}, {Sphere{{-0.2, 0, 0.05}, 0.05}, 2}},
                       kTableHalfExtent);
    if (name == "two-sphere-inline") {
      CameraSpec c = orbit_camera({0, 0, 0.05}, 0.0, 0.0, 0.5);
      return {oracle, c};
    }
    return {oracle, orbit_camera({-0.1, 0, 0.05}, 90 * kDeg, 45 * kDeg, 0.6)};
  }
  throw InputError("unknown scene preset '" + name + "'");
}

SceneSpec random_scene(std::uint64_t seed, std::size_t max_objects) {
  if (max_objects == 0) throw InputError("random scene needs at least one object");
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng(mix_seed(seed, attempt));
    const std::size_t count = 1 + rng.index(max_objects);
    std::vector<Primitive> prims;
    std::vector<std::pair<Point3, double>> footprints;  // xy center, radius
    for (std::size_t placed = 0, tries = 0; placed < count && tries < 200; ++tries) {
      Shape shape;
      double footprint = 0.0;
      const double kind = rng.uniform();
      if (kind < 1.0 / 3.0) {
        const double r = rng.uniform(0.04, 0.07);
        shape = Sphere{{0, 0, r}, r};
        footprint = r;
      } else if (kind < 2.0 / 3.0) {
        const Point3 h(rng.uniform(0.03, 0.06), rng.uniform(0.03, 0.06), rng.uniform(0.03, 0.06));
        shape = Box{{0, 0, h.z()}, h, rng.uniform(0.0, std::numbers::pi)};
        footprint = std::hypot(h.x(), h.y());
      } else {
        const double r = rng.uniform(0.03, 0.055);
        const double hh = rng.uniform(0.04, 0.08);
        shape = Cylinder{{0, 0, hh}, r, hh};
        footprint = r;
      }
      const double radius = rng.uniform(0.0, 0.1);
      const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const Point3 xy(radius * std::cos(angle), radius * std::sin(angle), 0.0);
      bool clear = true;
      for (const auto& [c, r] : footprints) {
        if ((c - xy).norm() < r + footprint + 0.015) clear = false;
      }
      if (!clear) continue;
      std::visit([&](auto& s) { s.center += xy; }, shape);
      footprints.emplace_back(xy, footprint);
      prims.push_back({shape, static_cast<ClassIndex>(++placed)});
    }
    SceneOracle oracle(prims, kTableHalfExtent);
    Point3 target = Point3::Zero();
    for (const auto& [c, r] : footprints) target += c;
    target /= static_cast<double>(footprints.size());
    target.z() = 0.05;
    const CameraSpec camera = orbit_camera(target, rng.uniform(0.0, 2.0 * std::numbers::pi),
                                           rng.uniform(30.0, 50.0) * kDeg, rng.uniform(0.55, 0.7));
    SceneSpec spec{oracle, camera};
    // Keep only scenes where every object is observed by a reasonable number of rays.
    try {
      const RenderedCloud rendered = raycast_scene(spec.oracle, spec.camera);
      std::vector<std::size_t> counts(rendered.class_to_object.size(), 0);
      for (ClassIndex l : rendered.cloud.labels()) ++counts[l];
      const bool all_visible = rendered.class_to_object.size() == prims.size() + 1 &&
                               std::all_of(counts.begin() + 1, counts.end(),
                                           [](std::size_t n) { return n >= 30; });
      if (all_visible) return spec;
    } catch (const InputError&) {
    }
  }
}

}  // namespace vprism
