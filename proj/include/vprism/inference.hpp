#pragma once

#include "vprism/core.hpp"
#include "vprism/features.hpp"
#include "vprism/model.hpp"
#include "vprism/synth.hpp"

#include <Eigen/Core>

#include <functional>
#include <span>
#include <vector>

namespace vprism {

struct ClassDistribution {
  Eigen::VectorXd probs;

  std::size_t num_classes() const { return static_cast<std::size_t>(probs.size()); }
  ClassIndex argmax() const;
};

/// Logistic sigmoid expectation under a Gaussian logit with the given mean
/// and variance: sigma(mean / sqrt(1 + pi var / 8)).
double expected_sigmoid(double mean, double var);

/// Class probabilities from per-class logit means and variances, treating the
/// classes as independent. Scores are clamped to [1e-9, 1] and renormalized.
Eigen::VectorXd pairwise_sigmoid_probs(const Eigen::VectorXd& logit_mean, const Eigen::VectorXd& logit_var);

ClassDistribution predict(const PosteriorModel& model, const Point3& x);

/// Monte-Carlo estimate of E[softmax(W phi(x))]. The class logits are jointly
/// Gaussian with independent entries, so they are sampled directly.
ClassDistribution predict_mc(const PosteriorModel& model, const Point3& x, std::size_t num_samples, Rng& rng);

/// Shannon entropy in nats, 0 ln 0 = 0.
double entropy(const ClassDistribution& dist);
double entropy(const Eigen::Ref<const Eigen::VectorXd>& probs);

/// Anything that maps query points to class distributions.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::size_t num_classes() const = 0;
  /// One row of class probabilities per query point.
  virtual Eigen::MatrixXd predict_batch(std::span<const Point3> xs) const = 0;

  ClassDistribution predict(const Point3& x) const;
};

class BayesianPredictor : public Predictor {
 public:
  explicit BayesianPredictor(const PosteriorModel& model);

  std::size_t num_classes() const override { return model_.num_classes(); }
  Eigen::MatrixXd predict_batch(std::span<const Point3> xs) const override;

 private:
  const PosteriorModel& model_;
  Featurizer featurizer_;
};

/// Softmax of point-estimate weights.
class PointEstimatePredictor : public Predictor {
 public:
  explicit PointEstimatePredictor(const SgdModel& model);

  std::size_t num_classes() const override { return model_.num_classes(); }
  Eigen::MatrixXd predict_batch(std::span<const Point3> xs) const override;

 private:
  const SgdModel& model_;
  Featurizer featurizer_;
};

/// One-hot predictor driven by a labelling function.
class LabelPredictor : public Predictor {
 public:
  LabelPredictor(std::size_t num_classes, std::function<ClassIndex(const Point3&)> label);

  std::size_t num_classes() const override { return num_classes_; }
  Eigen::MatrixXd predict_batch(std::span<const Point3> xs) const override;

 private:
  std::size_t num_classes_;
  std::function<ClassIndex(const Point3&)> label_;
};

/// Perfect predictor: one-hot on the ground-truth class. class_to_object maps
/// cloud classes to oracle object ids; objects without a class read as 0.
LabelPredictor oracle_predictor(const SceneOracle& oracle, const std::vector<ClassIndex>& class_to_object);

struct SliceSpec {
  Point3 origin = Point3::Zero();  // slice center
  Point3 axis_u = Point3::UnitX();
  Point3 axis_v = Point3::UnitY();
  double extent = 0.5;             // side length in meters
  std::size_t resolution = 64;     // pixels per side

  void validate() const;
  /// Pixel (row, col) position; columns run along axis_u, rows along axis_v.
  Point3 pixel(std::size_t row, std::size_t col) const;
  std::vector<Point3> pixels() const;
};

struct EntropySlice {
  SliceSpec spec;
  std::vector<double> values;  // row-major, resolution x resolution
  double min = 0.0;
  double max = 0.0;
};

EntropySlice entropy_slice(const Predictor& predictor, const SliceSpec& spec);
EntropySlice entropy_slice(const PosteriorModel& model, const SliceSpec& spec);

}  // namespace vprism
