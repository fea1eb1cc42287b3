#include "vprism/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace vprism {

ClassIndex ClassDistribution::argmax() const {
  Eigen::Index k = 0;
  probs.maxCoeff(&k);
  return static_cast<ClassIndex>(k);
}

double expected_sigmoid(double mean, double var) {
  const double kappa = 1.0 / std::sqrt(1.0 + std::numbers::pi * std::max(var, 0.0) / 8.0);
  const double a = kappa * mean;
  return a >= 0.0 ? 1.0 / (1.0 + std::exp(-a)) : std::exp(a) / (1.0 + std::exp(a));
}

Eigen::VectorXd pairwise_sigmoid_probs(const Eigen::VectorXd& logit_mean, const Eigen::VectorXd& logit_var) {
  const Eigen::Index c = logit_mean.size();
  Eigen::VectorXd scores(c);
  for (Eigen::Index k = 0; k < c; ++k) {
    double inv_sum = 0.0;
    for (Eigen::Index i = 0; i < c; ++i) {
      if (i == k) continue;
      const double e = expected_sigmoid(logit_mean[k] - logit_mean[i], logit_var[k] + logit_var[i]);
      inv_sum += 1.0 / std::max(e, 1e-300);
    }
    const double s = 1.0 / (2.0 - static_cast<double>(c) + inv_sum);
    scores[k] = std::clamp(std::isfinite(s) ? s : 0.0, 1e-9, 1.0);
  }
  return scores / scores.sum();
}

namespace {

constexpr std::size_t kPredictChunk = 4096;

LogitMoments point_moments(const PosteriorModel& model, const Featurizer& featurizer, std::span<const Point3> xs) {
  if (featurizer.dim() != model.dim()) throw InputError("model hinges and posterior dimension differ");
  return logit_moments(featurizer(xs), model.posterior);
}

}  // namespace

ClassDistribution predict(const PosteriorModel& model, const Point3& x) {
  return BayesianPredictor(model).predict(x);
}

ClassDistribution predict_mc(const PosteriorModel& model, const Point3& x, std::size_t num_samples, Rng& rng) {
  if (num_samples == 0) throw InputError("predict_mc needs at least one sample");
  const Featurizer f(model.hinges, model.params.kernel_cutoff);
  const LogitMoments lm = point_moments(model, f, std::span<const Point3>(&x, 1));
  const Eigen::VectorXd mean = lm.mean.row(0).transpose();
  const Eigen::VectorXd sd = lm.var.row(0).transpose().cwiseSqrt();
  const Eigen::Index c = mean.size();
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(c), z(c);
  for (std::size_t s = 0; s < num_samples; ++s) {
    for (Eigen::Index k = 0; k < c; ++k) z[k] = mean[k] + sd[k] * rng.normal();
    z = (z.array() - z.maxCoeff()).exp();
    acc += z / z.sum();
  }
  return {acc / static_cast<double>(num_samples)};
}

double entropy(const Eigen::Ref<const Eigen::VectorXd>& probs) {
  double h = 0.0;
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    if (probs[k] > 0.0) h -= probs[k] * std::log(probs[k]);
  }
  return h;
}

double entropy(const ClassDistribution& dist) { return entropy(dist.probs); }

ClassDistribution Predictor::predict(const Point3& x) const {
  return {predict_batch(std::span<const Point3>(&x, 1)).row(0).transpose()};
}

BayesianPredictor::BayesianPredictor(const PosteriorModel& model)
    : model_(model), featurizer_(model.hinges, model.params.kernel_cutoff) {}

Eigen::MatrixXd BayesianPredictor::predict_batch(std::span<const Point3> xs) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(num_classes()));
  for (std::size_t start = 0; start < xs.size(); start += kPredictChunk) {
    const std::size_t count = std::min(kPredictChunk, xs.size() - start);
    const LogitMoments lm = point_moments(model_, featurizer_, xs.subspan(start, count));
    for (std::size_t i = 0; i < count; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      out.row(static_cast<Eigen::Index>(start + i)) =
          pairwise_sigmoid_probs(lm.mean.row(r).transpose(), lm.var.row(r).transpose()).transpose();
    }
  }
  return out;
}

PointEstimatePredictor::PointEstimatePredictor(const SgdModel& model)
    : model_(model), featurizer_(model.hinges, model.params.kernel_cutoff) {}

Eigen::MatrixXd PointEstimatePredictor::predict_batch(std::span<const Point3> xs) const {
  const auto c = static_cast<Eigen::Index>(num_classes());
  Eigen::MatrixXd out(static_cast<Eigen::Index>(xs.size()), c);
  FeatureMatrix row;
  Eigen::VectorXd z(c);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    row.row_start.assign(1, 0);
    row.cols.clear();
    row.vals.clear();
    row.dim = featurizer_.dim();
    featurizer_.append_row(xs[i], row);
    const auto cols = row.row_cols(0);
    const auto vals = row.row_vals(0);
    for (Eigen::Index k = 0; k < c; ++k) {
      double acc = 0.0;
      for (std::size_t a = 0; a < cols.size(); ++a) acc += vals[a] * model_.weights(k, cols[a]);
      z[k] = acc;
    }
    z = (z.array() - z.maxCoeff()).exp();
    out.row(static_cast<Eigen::Index>(i)) = (z / z.sum()).transpose();
  }
  return out;
}

LabelPredictor::LabelPredictor(std::size_t num_classes, std::function<ClassIndex(const Point3&)> label)
    : num_classes_(num_classes), label_(std::move(label)) {
  if (num_classes_ < 2) throw InputError("a predictor needs at least two classes");
}

Eigen::MatrixXd LabelPredictor::predict_batch(std::span<const Point3> xs) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(xs.size()),
                                              static_cast<Eigen::Index>(num_classes_));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const ClassIndex k = label_(xs[i]);
    if (k >= num_classes_) throw InputError("label function returned an out-of-range class");
    out(static_cast<Eigen::Index>(i), k) = 1.0;
  }
  return out;
}

LabelPredictor oracle_predictor(const SceneOracle& oracle, const std::vector<ClassIndex>& class_to_object) {
  std::vector<ClassIndex> object_to_class(oracle.num_objects() + 1, 0);
  for (std::size_t k = 1; k < class_to_object.size(); ++k) {
    if (class_to_object[k] == 0 || class_to_object[k] > oracle.num_objects()) {
      throw InputError("class_to_object refers to an unknown object");
    }
    object_to_class[class_to_object[k]] = static_cast<ClassIndex>(k);
  }
  return LabelPredictor(class_to_object.size(), [&oracle, object_to_class](const Point3& q) {
    return object_to_class[oracle.occupancy_label(q)];
  });
}

void SliceSpec::validate() const {
  if (resolution < 2) throw InputError("slice resolution must be at least 2");
  if (!(extent > 0.0) || !std::isfinite(extent)) throw InputError("slice has zero area: extent must be positive");
  if (axis_u.norm() < 1e-12 || axis_v.norm() < 1e-12 ||
      axis_u.normalized().cross(axis_v.normalized()).norm() < 1e-9) {
    throw InputError("slice has zero area: axes must be non-zero and non-parallel");
  }
  if (!origin.allFinite()) throw InputError("slice origin must be finite");
}

Point3 SliceSpec::pixel(std::size_t row, std::size_t col) const {
  const double step = extent / static_cast<double>(resolution - 1);
  const double u = -0.5 * extent + step * static_cast<double>(col);
  const double v = -0.5 * extent + step * static_cast<double>(row);
  return origin + u * axis_u.normalized() + v * axis_v.normalized();
}

std::vector<Point3> SliceSpec::pixels() const {
  std::vector<Point3> out;
  out.reserve(resolution * resolution);
  for (std::size_t r = 0; r < resolution; ++r)
    for (std::size_t c = 0; c < resolution; ++c) out.push_back(pixel(r, c));
  return out;
}

EntropySlice entropy_slice(const Predictor& predictor, const SliceSpec& spec) {
  spec.validate();
  const std::vector<Point3> pts = spec.pixels();
  const Eigen::MatrixXd probs = predictor.predict_batch(pts);
  EntropySlice out{spec, std::vector<double>(pts.size()), 0.0, 0.0};
  for (std::size_t i = 0; i < pts.size(); ++i) {
    out.values[i] = entropy(probs.row(static_cast<Eigen::Index>(i)).transpose());
  }
  const auto [lo, hi] = std::minmax_element(out.values.begin(), out.values.end());
  out.min = *lo;
  out.max = *hi;
  return out;
}

EntropySlice entropy_slice(const PosteriorModel& model, const SliceSpec& spec) {
  return entropy_slice(BayesianPredictor(model), spec);
}

}  // namespace vprism
