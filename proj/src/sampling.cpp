#include "vprism/sampling.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <map>
#include <tuple>

namespace vprism {

void LabeledSamples::append(const LabeledSamples& other) {
  points.insert(points.end(), other.points.begin(), other.points.end());
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
}

namespace {

struct PlaneFit {
  Point3 normal;
  Point3 centroid;
  Eigen::Vector3d eigenvalues;
};

PlaneFit least_squares_plane(const std::vector<Point3>& pts) {
  Point3 centroid = Point3::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : pts) cov += (p - centroid) * (p - centroid).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  return {eig.eigenvectors().col(0), centroid, eig.eigenvalues()};
}

double nearest_center_distance(const Point3& p, const ObjectCenters& centers) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : centers.centers) best = std::min(best, (p - c).norm());
  return best;
}

}  // namespace

Plane fit_table_plane(const SegmentedCloud& cloud, const Hyperparams& params, Rng& rng) {
  const std::vector<Point3> bg = cloud.points_with_label(0);
  if (bg.size() < 3) {
    throw InputError("plane fit needs at least 3 background points, got " + std::to_string(bg.size()));
  }
  const PlaneFit all = least_squares_plane(bg);
  if (all.eigenvalues[1] <= 1e-12 * std::max(all.eigenvalues[2], 1e-300)) {
    throw InputError("plane fit failed: background points are collinear");
  }

  std::vector<std::size_t> best_inliers;
  for (std::size_t it = 0; it < params.ransac_iterations; ++it) {
    const std::size_t a = rng.index(bg.size());
    std::size_t b = rng.index(bg.size() - 1);
    if (b >= a) ++b;
    std::size_t c = rng.index(bg.size() - 2);
    if (c >= std::min(a, b)) ++c;
    if (c >= std::max(a, b)) ++c;
    const Point3 ab = bg[b] - bg[a], ac = bg[c] - bg[a];
    Point3 n = ab.cross(ac);
    if (n.norm() <= 1e-12 * ab.norm() * ac.norm()) continue;
    n.normalize();
    const double d = -n.dot(bg[a]);
    std::vector<std::size_t> inliers;
    for (std::size_t i = 0; i < bg.size(); ++i) {
      if (std::abs(n.dot(bg[i]) + d) <= params.ransac_inlier_threshold) inliers.push_back(i);
    }
    if (inliers.size() > best_inliers.size()) best_inliers = std::move(inliers);
  }
  if (best_inliers.size() < 3) throw NumericalError("RANSAC found no non-degenerate plane");

  std::vector<Point3> inlier_pts;
  inlier_pts.reserve(best_inliers.size());
  for (std::size_t i : best_inliers) inlier_pts.push_back(bg[i]);
  const PlaneFit refined = least_squares_plane(inlier_pts);
  Plane plane{refined.normal.normalized(), 0.0};
  plane.offset = -plane.normal.dot(refined.centroid);
  const double cam = plane.signed_distance(cloud.camera_origin());
  if (cam == 0.0) throw InputError("camera lies on the fitted table plane");
  if (cam < 0.0) {
    plane.normal = -plane.normal;
    plane.offset = -plane.offset;
  }
  return plane;
}

ObjectCenters object_centers(const SegmentedCloud& cloud) {
  const std::size_t objects = cloud.num_classes() - 1;
  std::vector<Aabb> boxes(objects);
  std::vector<bool> seen(objects, false);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const ClassIndex k = cloud.labels()[i];
    if (k == 0) continue;
    if (!seen[k - 1]) {
      boxes[k - 1] = Aabb{cloud.points()[i], cloud.points()[i]};
      seen[k - 1] = true;
    } else {
      boxes[k - 1].expand(cloud.points()[i]);
    }
  }
  ObjectCenters out;
  for (const auto& b : boxes) out.centers.push_back(b.center());
  return out;
}

LabeledSamples stratified_ray_samples(const SegmentedCloud& cloud, const ObjectCenters& centers,
                                      const Hyperparams& params, Rng& rng) {
  LabeledSamples out;
  const std::uint64_t base = rng.bits();
  const Point3& o = cloud.camera_origin();
  const double strata = static_cast<double>(params.ray_strata);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    Rng ray_rng(mix_seed(base, i));
    const Point3 ray = cloud.points()[i] - o;
    for (std::size_t s = 0; s < params.ray_strata; ++s) {
      const double t = (static_cast<double>(s) + ray_rng.uniform()) / strata;
      if (t >= 1.0) continue;
      const Point3 p = o + t * ray;
      if (nearest_center_distance(p, centers) <= params.r_obj) out.push(p, 0);
    }
  }
  return out;
}

LabeledSamples fixed_step_ray_samples(const SegmentedCloud& cloud, const ObjectCenters& centers,
                                      const Hyperparams& params) {
  LabeledSamples out;
  const Point3& o = cloud.camera_origin();
  for (const auto& x : cloud.points()) {
    const Point3 ray = x - o;
    const double length = ray.norm();
    for (std::size_t j = 1; static_cast<double>(j) * params.fixed_step < length; ++j) {
      const Point3 p = o + (static_cast<double>(j) * params.fixed_step / length) * ray;
      if (nearest_center_distance(p, centers) <= params.r_obj) out.push(p, 0);
    }
  }
  return out;
}

LabeledSamples full_ray_samples(const SegmentedCloud& cloud, const Hyperparams& params, Rng& rng) {
  LabeledSamples out;
  const std::uint64_t base = rng.bits();
  const Point3& o = cloud.camera_origin();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    Rng ray_rng(mix_seed(base, i));
    const Point3 ray = cloud.points()[i] - o;
    for (std::size_t s = 0; s < params.ray_strata; ++s) out.push(o + ray_rng.uniform() * ray, 0);
  }
  return out;
}

LabeledSamples under_table_samples(const ObjectCenters& centers, const Plane& plane,
                                   const Hyperparams& params, Rng& rng) {
  LabeledSamples out;
  for (const auto& c : centers.centers) {
    for (std::size_t s = 0; s < params.under_table_samples_per_object; ++s) {
      const Point3 p = c + rng.in_ball(params.r_obj);
      if (plane.signed_distance(p) < 0.0) out.push(p, 0);
    }
  }
  return out;
}

LabeledSamples grid_subsample(const LabeledSamples& samples, double res_surface, double res_empty,
                              CellRepresentative rep) {
  if (!(res_surface > 0.0) || !(res_empty > 0.0)) {
    throw InputError("subsampling resolutions must be positive");
  }
  using Key = std::tuple<std::int64_t, std::int64_t, std::int64_t, ClassIndex>;
  struct Cell {
    Point3 sum = Point3::Zero();
    std::size_t count = 0;
    std::size_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
  };
  std::map<Key, Cell> cells;
  std::vector<Cell*> cell_of(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const ClassIndex label = samples.labels[i];
    const double res = label == 0 ? res_empty : res_surface;
    const Point3& p = samples.points[i];
    const Key key{static_cast<std::int64_t>(std::floor(p.x() / res)),
                  static_cast<std::int64_t>(std::floor(p.y() / res)),
                  static_cast<std::int64_t>(std::floor(p.z() / res)), label};
    Cell& cell = cells[key];
    cell.sum += p;
    ++cell.count;
    cell_of[i] = &cell;
  }
  if (rep == CellRepresentative::kNearestMember) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      Cell& cell = *cell_of[i];
      const double d = (samples.points[i] - cell.sum / static_cast<double>(cell.count)).squaredNorm();
      if (d < cell.best_dist) {
        cell.best_dist = d;
        cell.best = i;
      }
    }
  }
  LabeledSamples out;
  out.points.reserve(cells.size());
  out.labels.reserve(cells.size());
  for (const auto& [key, cell] : cells) {
    const Point3 p = rep == CellRepresentative::kCentroid ? Point3(cell.sum / static_cast<double>(cell.count))
                                                          : samples.points[cell.best];
    out.push(p, std::get<3>(key));
  }
  return out;
}

TrainingSet build_training_set(const SegmentedCloud& cloud, const Hyperparams& params, Rng& rng) {
  params.validate();
  const std::uint64_t stage_seed = rng.bits();
  Rng plane_rng(mix_seed(stage_seed, 1));
  Rng ray_rng(mix_seed(stage_seed, 2));
  Rng table_rng(mix_seed(stage_seed, 3));

  TrainingSet out;
  out.plane = fit_table_plane(cloud, params, plane_rng);
  const ObjectCenters centers = object_centers(cloud);

  LabeledSamples all;
  all.points = cloud.points();
  all.labels = cloud.labels();
  switch (params.sampling) {
    case SamplingMode::kVprism:
      all.append(stratified_ray_samples(cloud, centers, params, ray_rng));
      all.append(under_table_samples(centers, out.plane, params, table_rng));
      break;
    case SamplingMode::kNoUnderTable:
      all.append(stratified_ray_samples(cloud, centers, params, ray_rng));
      break;
    case SamplingMode::kFixedStep:
      all.append(fixed_step_ray_samples(cloud, centers, params));
      all.append(under_table_samples(centers, out.plane, params, table_rng));
      break;
    case SamplingMode::kBhm:
      all.append(full_ray_samples(cloud, params, ray_rng));
      break;
  }
  // A centroid of free-space points can fall inside a convex object; a member
  // point never does.
  out.samples = grid_subsample(all, params.subsample_res_surface, params.subsample_res_empty,
                               CellRepresentative::kNearestMember);
  return out;
}

}  // namespace vprism
