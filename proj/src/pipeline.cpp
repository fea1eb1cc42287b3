#include "vprism/pipeline.hpp"

#include "vprism/io.hpp"

#include <algorithm>
#include <chrono>

namespace vprism {

std::vector<Aabb> observed_object_bounds(const SegmentedCloud& cloud) {
  std::vector<Aabb> out;
  for (ClassIndex k = 1; k < cloud.num_classes(); ++k) out.push_back(Aabb::of(cloud.points_with_label(k)));
  return out;
}

namespace {

struct Prepared {
  TrainingSet training;
  HingeSet hinges;
  Rng fit_rng;
};

Prepared prepare(const SegmentedCloud& cloud, const Hyperparams& params) {
  params.validate();
  Rng root = seeded_rng(params.rng_seed);
  Rng sample_rng(mix_seed(root.bits(), 1));
  Rng hinge_rng(mix_seed(root.bits(), 2));
  Rng fit_rng(mix_seed(root.bits(), 3));
  TrainingSet training = build_training_set(cloud, params, sample_rng);
  HingeSet hinges = generate_hinges(cloud, training.samples, params, hinge_rng);
  return {std::move(training), std::move(hinges), fit_rng};
}

}  // namespace

BuildResult build_model(const SegmentedCloud& cloud, const Hyperparams& params, FitTrace* trace) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  Prepared prep = prepare(cloud, params);
  const auto t1 = clock::now();

  BuildResult out;
  out.model = fit(prep.training.samples, prep.hinges, params, cloud.num_classes(), trace);
  const auto t2 = clock::now();
  out.model.plane = prep.training.plane;
  out.model.object_bounds = observed_object_bounds(cloud);
  out.model.input_digest = cloud_digest(cloud);

  out.stats.observed_points = cloud.size();
  out.stats.training_samples = prep.training.samples.size();
  out.stats.negative_samples = static_cast<std::size_t>(
      std::count(prep.training.samples.labels.begin(), prep.training.samples.labels.end(), 0u));
  out.stats.hinges = prep.hinges.hinges.size();
  out.stats.sampling_seconds = std::chrono::duration<double>(t1 - t0).count();
  out.stats.fit_seconds = std::chrono::duration<double>(t2 - t1).count();
  out.training = std::move(prep.training);
  return out;
}

SgdModel build_sgd_model(const SegmentedCloud& cloud, const Hyperparams& params, const SgdOptions& options) {
  Prepared prep = prepare(cloud, params);
  return fit_sgd(prep.training.samples, prep.hinges, params, options, prep.fit_rng, cloud.num_classes());
}

}  // namespace vprism
