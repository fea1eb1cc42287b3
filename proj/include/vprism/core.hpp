#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vprism {

using Point3 = Eigen::Vector3d;
using ClassIndex = std::uint32_t;

/// Raised for malformed or inconsistent inputs. Maps to CLI exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a numerical routine fails (non-PD precision, divergence).
/// Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Aabb {
  Point3 lo = Point3::Zero();
  Point3 hi = Point3::Zero();

  static Aabb of(std::span<const Point3> pts);
  Point3 center() const { return 0.5 * (lo + hi); }
  Point3 extent() const { return hi - lo; }
  Aabb padded(double margin) const;
  Aabb padded(const Point3& margin) const;
  bool contains(const Point3& p) const;
  void expand(const Point3& p);
  void expand(const Aabb& other);
};

/// Plane {x : normal . x + offset = 0}; positive side faces the camera.
struct Plane {
  Point3 normal = Point3::UnitZ();
  double offset = 0.0;

  double signed_distance(const Point3& p) const { return normal.dot(p) + offset; }
};

/// Observed points with one class label each. Class 0 is background/table;
/// classes 1..c-1 are object instances. A background-only cloud has c = 1.
/// Immutable once constructed.
class SegmentedCloud {
 public:
  SegmentedCloud(std::vector<Point3> points, std::vector<ClassIndex> labels,
                 Point3 camera_origin, std::size_t num_classes);

  const std::vector<Point3>& points() const { return points_; }
  const std::vector<ClassIndex>& labels() const { return labels_; }
  const Point3& camera_origin() const { return camera_origin_; }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t size() const { return points_.size(); }

  /// Points carrying the given label, in input order.
  std::vector<Point3> points_with_label(ClassIndex k) const;

 private:
  std::vector<Point3> points_;
  std::vector<ClassIndex> labels_;
  Point3 camera_origin_;
  std::size_t num_classes_;
};

enum class SamplingMode {
  kVprism,        // stratified near-object rays + under-table samples
  kBhm,           // uniform samples along full rays, nothing else
  kNoUnderTable,  // stratified rays only
  kFixedStep,     // fixed-length steps along rays + under-table samples
};

enum class CovarianceMode { kFull, kDiagonal };

std::string to_string(SamplingMode mode);
SamplingMode sampling_mode_from_string(const std::string& s);
std::string to_string(CovarianceMode mode);
CovarianceMode covariance_mode_from_string(const std::string& s);

struct Hyperparams {
  // Learning.
  double kernel_gamma = 1000.0;
  double hinge_grid_spacing = 0.05;
  std::size_t surface_hinges_per_object = 32;
  std::size_t em_iterations = 3;
  double prior_mean_scale = 0.0;
  double prior_variance = 100.0;
  CovarianceMode covariance_mode = CovarianceMode::kFull;
  // Kernel entries below this value are dropped from sparse feature rows.
  // Zero keeps every entry (the dense reference path).
  double kernel_cutoff = 1e-12;
  std::size_t max_hinges = 4096;
  std::optional<Aabb> hinge_bounds;

  // Sampling.
  SamplingMode sampling = SamplingMode::kVprism;
  double r_obj = 0.25;
  double subsample_res_surface = 0.01;
  double subsample_res_empty = 0.015;
  std::size_t ray_strata = 32;
  double fixed_step = 0.02;
  std::size_t under_table_samples_per_object = 512;
  std::size_t ransac_iterations = 200;
  double ransac_inlier_threshold = 0.01;

  // Reconstruction.
  double level_set_tau = 0.5;

  std::uint64_t rng_seed = 0;

  /// Throws InputError naming the first offending field.
  void validate() const;
};

/// Deterministic random stream. Raw bits come from mt19937_64 (whose output
/// sequence is fixed by the standard); all derived distributions are computed
/// here so results do not depend on the standard library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t bits() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  double normal();
  /// Uniform point in the ball of the given radius.
  Point3 in_ball(double radius);
  /// Independent stream derived from this stream's seed and a key.
  Rng child(std::uint64_t key) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::optional<double> spare_normal_;
};

Rng seeded_rng(std::uint64_t seed);

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t key);

}  // namespace vprism
