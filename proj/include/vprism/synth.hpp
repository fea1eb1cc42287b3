#pragma once

#include "vprism/core.hpp"
#include "vprism/mesh.hpp"

#include "json.hpp"

#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace vprism {

struct Sphere {
  Point3 center;
  double radius;
};

/// Box rotated by `yaw` radians about the vertical axis through its center.
struct Box {
  Point3 center;
  Point3 half_extents;
  double yaw = 0.0;
};

/// Upright cylinder (axis along +z).
struct Cylinder {
  Point3 center;
  double radius;
  double half_height;
};

using Shape = std::variant<Sphere, Box, Cylinder>;

struct Primitive {
  Shape shape;
  ClassIndex object_id;
};

/// Negative inside, positive outside, zero on the surface.
double signed_distance(const Shape& shape, const Point3& p);
/// Smallest t > eps with origin + t * dir on the surface.
std::optional<double> intersect_ray(const Shape& shape, const Point3& origin, const Point3& dir);
Aabb bounding_box(const Shape& shape);
double volume(const Shape& shape);

/// Analytic ground truth for a tabletop scene. The table is the plane z = 0,
/// optionally limited to |x|, |y| <= table_half_extent.
class SceneOracle {
 public:
  SceneOracle(std::vector<Primitive> primitives,
              double table_half_extent = std::numeric_limits<double>::infinity());

  const std::vector<Primitive>& primitives() const { return primitives_; }
  const Plane& table_plane() const { return table_plane_; }
  double table_half_extent() const { return table_half_extent_; }
  std::size_t num_objects() const { return primitives_.size(); }
  const Primitive& object(ClassIndex object_id) const;

  /// Object id of the primitive containing q (surface within 1e-9 counts as
  /// inside), else 0.
  ClassIndex occupancy_label(const Point3& q) const;

  struct Hit {
    double t;
    ClassIndex label;  // 0 for the table
  };
  /// Nearest intersection along origin + t * dir with any primitive or the table.
  std::optional<Hit> cast(const Point3& origin, const Point3& dir) const;

 private:
  std::vector<Primitive> primitives_;
  Plane table_plane_;
  double table_half_extent_;
};

struct CameraSpec {
  Point3 origin;
  Point3 look_at;
  Point3 up = Point3::UnitZ();
  double horizontal_fov;
  std::size_t image_width;
  std::size_t image_height;
  double max_range = std::numeric_limits<double>::infinity();

  void validate() const;
  /// Unit ray direction through the center of pixel (col, row).
  Point3 pixel_ray(std::size_t col, std::size_t row) const;
  /// True when q projects inside the image and lies in front of the camera.
  bool in_view(const Point3& q) const;

 private:
  struct Frame {
    Point3 forward, right, up;
    double tan_half_h, tan_half_v;
  };
  Frame frame() const;
};

/// A rendered observation. Cloud classes are contiguous; class_to_object maps
/// each cloud class back to the oracle's object id (entry 0 is 0). Objects
/// that no ray hit have no class.
struct RenderedCloud {
  SegmentedCloud cloud;
  std::vector<ClassIndex> class_to_object;
};

/// One ray per pixel. Depth noise (standard deviation in meters along the
/// ray) is applied only when depth_noise > 0. Throws InputError when no ray
/// hits anything or the camera is inside a primitive.
RenderedCloud raycast_scene(const SceneOracle& oracle, const CameraSpec& camera,
                            double depth_noise = 0.0, std::uint64_t noise_seed = 0);

/// Marching-cubes mesh of one primitive's analytic inside function.
TriangleMesh ground_truth_mesh(const SceneOracle& oracle, ClassIndex object_id, double cell);

struct SceneSpec {
  SceneOracle oracle;
  CameraSpec camera;
  double depth_noise = 0.0;
};

/// Versioned JSON scene description (`format: "vprism-scene"`, version 1).
SceneSpec scene_from_json(const nlohmann::json& j);
nlohmann::json scene_to_json(const SceneSpec& scene);
nlohmann::json oracle_to_json(const SceneOracle& oracle);
SceneOracle oracle_from_json(const nlohmann::json& j);
nlohmann::json camera_to_json(const CameraSpec& camera);
CameraSpec camera_from_json(const nlohmann::json& j);

/// Named presets: "bare-plane", "one-sphere", "three-object",
/// "two-sphere-oblique", "two-sphere-inline".
SceneSpec scene_preset(const std::string& name);
std::vector<std::string> preset_names();

/// Random tabletop scene with 1..max_objects non-intersecting primitives
/// clustered near the origin and a camera looking down at them from a random
/// azimuth. Every object is visible from the camera.
SceneSpec random_scene(std::uint64_t seed, std::size_t max_objects = 3);

}  // namespace vprism
