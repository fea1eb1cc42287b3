#pragma once

#include "vprism/core.hpp"
#include "vprism/features.hpp"
#include "vprism/model.hpp"
#include "vprism/sampling.hpp"

namespace vprism {

struct BuildStats {
  std::size_t observed_points = 0;
  std::size_t training_samples = 0;
  std::size_t negative_samples = 0;
  std::size_t hinges = 0;
  double sampling_seconds = 0.0;
  double fit_seconds = 0.0;
};

struct BuildResult {
  PosteriorModel model;
  TrainingSet training;
  BuildStats stats;
};

/// Observed AABB of each object class, index k - 1.
std::vector<Aabb> observed_object_bounds(const SegmentedCloud& cloud);

/// Negative sampling, hinge placement and fit, all seeded from params.rng_seed.
BuildResult build_model(const SegmentedCloud& cloud, const Hyperparams& params, FitTrace* trace = nullptr);

/// The same training set and hinges with point-estimate SGD weights instead.
SgdModel build_sgd_model(const SegmentedCloud& cloud, const Hyperparams& params, const SgdOptions& options);

}  // namespace vprism
