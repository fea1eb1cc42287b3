#pragma once

#include "vprism/core.hpp"

#include <vector>

namespace vprism {

/// Labeled training points: label 0 is unoccupied/background, k >= 1 is the
/// surface of object k.
struct LabeledSamples {
  std::vector<Point3> points;
  std::vector<ClassIndex> labels;

  std::size_t size() const { return points.size(); }
  void append(const LabeledSamples& other);
  void push(const Point3& p, ClassIndex label) {
    points.push_back(p);
    labels.push_back(label);
  }
};

/// centers[k - 1] is the AABB midpoint of the class-k points.
struct ObjectCenters {
  std::vector<Point3> centers;
};

/// RANSAC over background points, refined by least squares over the best
/// inlier set. The normal is oriented toward the camera.
Plane fit_table_plane(const SegmentedCloud& cloud, const Hyperparams& params, Rng& rng);

ObjectCenters object_centers(const SegmentedCloud& cloud);

/// Splits each camera ray [o, x_i) into `ray_strata` equal pieces, draws one
/// point per piece and keeps those within r_obj of some object center.
LabeledSamples stratified_ray_samples(const SegmentedCloud& cloud, const ObjectCenters& centers,
                                      const Hyperparams& params, Rng& rng);

/// Points at j * fixed_step (j >= 1) along each ray, kept within r_obj of a center.
LabeledSamples fixed_step_ray_samples(const SegmentedCloud& cloud, const ObjectCenters& centers,
                                      const Hyperparams& params);

/// `ray_strata` uniform draws along each full ray with no distance filter.
LabeledSamples full_ray_samples(const SegmentedCloud& cloud, const Hyperparams& params, Rng& rng);

/// Uniform draws in the r_obj ball of every center, kept strictly below the plane.
LabeledSamples under_table_samples(const ObjectCenters& centers, const Plane& plane,
                                   const Hyperparams& params, Rng& rng);

enum class CellRepresentative {
  kCentroid,       // mean of the cell's points
  kNearestMember,  // the cell's point closest to that mean (first on ties)
};

/// One representative per occupied voxel, per label. Label 0 uses res_empty,
/// other labels res_surface. Output is sorted by (cell index, label).
LabeledSamples grid_subsample(const LabeledSamples& samples, double res_surface, double res_empty,
                              CellRepresentative rep = CellRepresentative::kCentroid);

struct TrainingSet {
  LabeledSamples samples;
  Plane plane;
};

/// Observed points plus the negative samples selected by params.sampling,
/// grid-subsampled to the member point nearest each cell centroid.
TrainingSet build_training_set(const SegmentedCloud& cloud, const Hyperparams& params, Rng& rng);

}  // namespace vprism
