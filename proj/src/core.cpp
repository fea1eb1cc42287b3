#include "vprism/core.hpp"

#include <cmath>
#include <numbers>

namespace vprism {

Aabb Aabb::of(std::span<const Point3> pts) {
  if (pts.empty()) throw InputError("bounding box of an empty point set");
  Aabb box{pts[0], pts[0]};
  for (const auto& p : pts) box.expand(p);
  return box;
}

Aabb Aabb::padded(double margin) const {
  return padded(Point3::Constant(margin));
}

Aabb Aabb::padded(const Point3& margin) const { return {lo - margin, hi + margin}; }

bool Aabb::contains(const Point3& p) const {
  return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
}

void Aabb::expand(const Point3& p) {
  lo = lo.cwiseMin(p);
  hi = hi.cwiseMax(p);
}

void Aabb::expand(const Aabb& other) {
  expand(other.lo);
  expand(other.hi);
}

SegmentedCloud::SegmentedCloud(std::vector<Point3> points, std::vector<ClassIndex> labels,
                               Point3 camera_origin, std::size_t num_classes)
    : points_(std::move(points)),
      labels_(std::move(labels)),
      camera_origin_(camera_origin),
      num_classes_(num_classes) {
  if (num_classes_ < 1) throw InputError("a segmented cloud needs at least one class");
  if (points_.empty()) throw InputError("a segmented cloud needs at least one point");
  if (points_.size() != labels_.size()) {
    throw InputError("point count " + std::to_string(points_.size()) + " != label count " +
                     std::to_string(labels_.size()));
  }
  if (!camera_origin_.allFinite()) throw InputError("camera origin is not finite");
  std::vector<bool> seen(num_classes_, false);
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!points_[i].allFinite()) throw InputError("point " + std::to_string(i) + " is not finite");
    if (labels_[i] >= num_classes_) {
      throw InputError("label " + std::to_string(labels_[i]) + " at point " + std::to_string(i) +
                       " is not below num_classes " + std::to_string(num_classes_));
    }
    seen[labels_[i]] = true;
  }
  for (std::size_t k = 1; k < num_classes_; ++k) {
    if (!seen[k]) throw InputError("object class " + std::to_string(k) + " has no points");
  }
}

std::vector<Point3> SegmentedCloud::points_with_label(ClassIndex k) const {
  std::vector<Point3> out;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (labels_[i] == k) out.push_back(points_[i]);
  }
  return out;
}

std::string to_string(SamplingMode mode) {
  switch (mode) {
    case SamplingMode::kVprism: return "vprism";
    case SamplingMode::kBhm: return "bhm";
    case SamplingMode::kNoUnderTable: return "no-under-table";
    case SamplingMode::kFixedStep: return "fixed-step";
  }
  return "vprism";
}

SamplingMode sampling_mode_from_string(const std::string& s) {
  if (s == "vprism") return SamplingMode::kVprism;
  if (s == "bhm") return SamplingMode::kBhm;
  if (s == "no-under-table") return SamplingMode::kNoUnderTable;
  if (s == "fixed-step") return SamplingMode::kFixedStep;
  throw InputError("unknown sampling mode '" + s + "'");
}

std::string to_string(CovarianceMode mode) {
  return mode == CovarianceMode::kFull ? "full" : "diagonal";
}

CovarianceMode covariance_mode_from_string(const std::string& s) {
  if (s == "full") return CovarianceMode::kFull;
  if (s == "diagonal") return CovarianceMode::kDiagonal;
  throw InputError("unknown covariance mode '" + s + "'");
}

void Hyperparams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InputError(std::string(name) + " must be positive");
  };
  auto nonzero = [](std::size_t v, const char* name) {
    if (v == 0) throw InputError(std::string(name) + " must be at least 1");
  };
  positive(kernel_gamma, "kernel_gamma");
  positive(hinge_grid_spacing, "hinge_grid_spacing");
  nonzero(surface_hinges_per_object, "surface_hinges_per_object");
  nonzero(em_iterations, "em_iterations");
  positive(prior_variance, "prior_variance");
  if (!std::isfinite(prior_mean_scale)) throw InputError("prior_mean_scale must be finite");
  if (!(kernel_cutoff >= 0.0 && kernel_cutoff < 1.0)) {
    throw InputError("kernel_cutoff must be in [0, 1)");
  }
  nonzero(max_hinges, "max_hinges");
  positive(r_obj, "r_obj");
  positive(subsample_res_surface, "subsample_res_surface");
  positive(subsample_res_empty, "subsample_res_empty");
  nonzero(ray_strata, "ray_strata");
  positive(fixed_step, "fixed_step");
  nonzero(under_table_samples_per_object, "under_table_samples_per_object");
  nonzero(ransac_iterations, "ransac_iterations");
  positive(ransac_inlier_threshold, "ransac_inlier_threshold");
  if (!(level_set_tau > 0.0 && level_set_tau < 1.0)) {
    throw InputError("level_set_tau must be in (0, 1)");
  }
  if (hinge_bounds && !(hinge_bounds->hi.array() > hinge_bounds->lo.array()).all()) {
    throw InputError("hinge_bounds must have positive extent");
  }
}

// splitmix64 finalizer
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t key) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (key + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw InputError("Rng::index on an empty range");
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v = engine_();
  while (v >= limit) v = engine_();
  return static_cast<std::size_t>(v % n);
}

double Rng::normal() {
  if (spare_normal_) {
    const double v = *spare_normal_;
    spare_normal_.reset();
    return v;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_normal_ = r * std::sin(theta);
  return r * std::cos(theta);
}

Point3 Rng::in_ball(double radius) {
  while (true) {
    Point3 p(uniform(-1.0, 1.0), uniform(-1.0, 1.0), uniform(-1.0, 1.0));
    if (p.squaredNorm() <= 1.0) return radius * p;
  }
}

Rng Rng::child(std::uint64_t key) const { return Rng(mix_seed(seed_, key)); }

Rng seeded_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace vprism
