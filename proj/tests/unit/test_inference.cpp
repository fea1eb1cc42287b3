#include "doctest.h"

#include "vprism/inference.hpp"
#include "vprism/synth.hpp"

#include <cmath>
#include <numbers>

using namespace vprism;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Random model over a handful of hinges near the origin.
PosteriorModel random_model(Rng& rng, std::size_t c, std::size_t m, double mean_scale, double var_scale) {
  PosteriorModel model;
  model.hinges.kernel_gamma = 30.0;
  for (std::size_t j = 0; j < m; ++j)
    model.hinges.hinges.emplace_back(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(0, 0.2));
  model.hinges.grid_count = m;
  model.params.kernel_cutoff = 0.0;
  const auto d = static_cast<Eigen::Index>(m + 1);
  model.posterior.means.resize(static_cast<Eigen::Index>(c), d);
  for (Eigen::Index i = 0; i < model.posterior.means.size(); ++i) model.posterior.means.data()[i] = mean_scale * rng.normal();
  for (std::size_t k = 0; k < c; ++k) {
    Eigen::MatrixXd a(d, d);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
    Eigen::MatrixXd cov = var_scale * (a * a.transpose()) / static_cast<double>(d) + 1e-6 * Eigen::MatrixXd::Identity(d, d);
    model.posterior.covariances.push_back(cov);
    model.posterior.log_det_covariance.push_back(std::log(cov.determinant()));
  }
  model.prior = GaussianPrior::isotropic(m + 1, 0.0, 100.0);
  return model;
}

PosteriorModel constant_model(std::size_t c, double var) {
  Rng rng(0);
  PosteriorModel m = random_model(rng, c, 3, 0.0, 0.0);
  m.posterior.means.setZero();
  for (auto& cov : m.posterior.covariances) cov = var * Eigen::MatrixXd::Identity(4, 4);
  return m;
}

}  // namespace

TEST_CASE("expected sigmoid") {
  for (double x : {-5.0, -0.3, 0.0, 2.0}) CHECK(expected_sigmoid(x, 0.0) == doctest::Approx(sigmoid(x)).epsilon(1e-15));
  CHECK(expected_sigmoid(2.0, 8.0 / std::numbers::pi * 3.0) == doctest::Approx(sigmoid(1.0)));
  CHECK(expected_sigmoid(-800.0, 0.0) >= 0.0);
  CHECK(expected_sigmoid(800.0, 0.0) == 1.0);
}

TEST_CASE("pairwise probabilities reduce to exact softmax for two classes") {
  for (double d : {-3.0, -0.5, 0.0, 1.7}) {
    Eigen::Vector2d mean(0.0, d), var = Eigen::Vector2d::Zero();
    const Eigen::VectorXd p = pairwise_sigmoid_probs(mean, var);
    CHECK(p[0] == doctest::Approx(sigmoid(-d)).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(sigmoid(d)).epsilon(1e-12));
  }
}

TEST_CASE("zero information model is uniform") {
  for (std::size_t c : {2u, 3u, 5u}) {
    const PosteriorModel m = constant_model(c, 0.5);
    const ClassDistribution d = predict(m, Point3(0.01, 0.02, 0.03));
    for (std::size_t k = 0; k < c; ++k) CHECK(d.probs[static_cast<Eigen::Index>(k)] == doctest::Approx(1.0 / c).epsilon(1e-12));
    const EntropySlice s = entropy_slice(m, SliceSpec{});
    CHECK(s.min == doctest::Approx(std::log(static_cast<double>(c))).epsilon(1e-12));
    CHECK(s.max == doctest::Approx(std::log(static_cast<double>(c))).epsilon(1e-12));
  }
}

TEST_CASE("predictions are normalized and bounded") {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const PosteriorModel m = random_model(rng, 2 + rng.index(5), 6, 5.0, 10.0);
    const BayesianPredictor p(m);
    std::vector<Point3> xs;
    for (int i = 0; i < 30; ++i) xs.emplace_back(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-0.1, 0.3));
    const Eigen::MatrixXd probs = p.predict_batch(xs);
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
      CHECK(std::abs(probs.row(i).sum() - 1.0) <= 1e-9);
      CHECK(probs.row(i).minCoeff() >= 0.0);
      CHECK(probs.row(i).maxCoeff() <= 1.0);
      const ClassDistribution single = predict(m, xs[static_cast<std::size_t>(i)]);
      CHECK((single.probs - probs.row(i).transpose()).cwiseAbs().maxCoeff() <= 1e-14);
    }
  }
}

TEST_CASE("monte carlo predictions") {
  Rng rng(5);
  SUBCASE("zero covariance matches softmax exactly") {
    PosteriorModel m = random_model(rng, 3, 4, 1.0, 0.0);
    for (auto& cov : m.posterior.covariances) cov.setZero();
    const Point3 x(0.05, 0.0, 0.1);
    const Eigen::VectorXd phi = featurize(m.hinges, x);
    Eigen::VectorXd z = m.posterior.means * phi;
    z = (z.array() - z.maxCoeff()).exp();
    z /= z.sum();
    Rng r(1);
    const ClassDistribution d = predict_mc(m, x, 50, r);
    CHECK((d.probs - z).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("seeded and normalized") {
    const PosteriorModel m = random_model(rng, 4, 5, 1.0, 1.0);
    Rng a(9), b(9);
    const ClassDistribution da = predict_mc(m, Point3(0, 0, 0.1), 1000, a);
    const ClassDistribution db = predict_mc(m, Point3(0, 0, 0.1), 1000, b);
    CHECK(da.probs == db.probs);
    CHECK(std::abs(da.probs.sum() - 1.0) <= 1e-12);
    Rng r(1);
    CHECK_THROWS_AS(predict_mc(m, Point3::Zero(), 0, r), InputError);
  }
  SUBCASE("disjoint seeds agree within sampling error") {
    const PosteriorModel m = random_model(rng, 3, 5, 1.0, 1.0);
    const Point3 x(0.02, -0.03, 0.08);
    const std::size_t n = 2000;
    // Per-sample spread of the class-0 softmax from a large independent run.
    Rng s(77);
    double acc = 0.0, acc2 = 0.0;
    for (int i = 0; i < 20000; ++i) {
      const double v = predict_mc(m, x, 1, s).probs[0];
      acc += v;
      acc2 += v * v;
    }
    const double sd = std::sqrt(acc2 / 20000 - (acc / 20000) * (acc / 20000));
    const double se = sd * std::sqrt(2.0 / static_cast<double>(n));
    int within = 0;
    for (int t = 0; t < 100; ++t) {
      Rng a(1000 + 2 * t), b(1001 + 2 * t);
      const ClassDistribution da = predict_mc(m, x, n, a), db = predict_mc(m, x, n, b);
      if (std::abs(da.probs[0] - db.probs[0]) <= 3.0 * se) ++within;
    }
    CHECK(within >= 95);
  }
}

TEST_CASE("monte carlo error shrinks with more samples") {
  Rng rng(13);
  const PosteriorModel m = random_model(rng, 3, 5, 1.0, 2.0);
  std::vector<Point3> xs;
  for (int i = 0; i < 20; ++i) xs.emplace_back(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(0, 0.2));
  std::vector<Eigen::VectorXd> ref;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    Rng r(500 + i);
    ref.push_back(predict_mc(m, xs[i], 1000000, r).probs);
  }
  double prev = INFINITY;
  for (std::size_t n : {1000u, 10000u, 100000u}) {
    double sq = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      Rng r(900 + i + n);
      sq += (predict_mc(m, xs[i], n, r).probs - ref[i]).squaredNorm();
    }
    const double rms = std::sqrt(sq / static_cast<double>(xs.size()));
    CHECK(rms < prev);
    prev = rms;
  }
}

TEST_CASE("entropy values") {
  CHECK(entropy(ClassDistribution{Eigen::Vector3d::Constant(1.0 / 3.0)}) == doctest::Approx(std::log(3.0)));
  CHECK(entropy(ClassDistribution{Eigen::Vector3d(0, 1, 0)}) == 0.0);
  CHECK(entropy(ClassDistribution{Eigen::Vector3d(0.5, 0.5, 0)}) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("slice geometry and validation") {
  SliceSpec s;
  s.origin = Point3(1, 2, 3);
  s.extent = 2.0;
  s.resolution = 3;
  CHECK(s.pixel(0, 0).isApprox(Point3(0, 1, 3)));
  CHECK(s.pixel(0, 2).isApprox(Point3(2, 1, 3)));
  CHECK(s.pixel(2, 0).isApprox(Point3(0, 3, 3)));
  CHECK(s.pixels().size() == 9);
  SliceSpec bad = s;
  bad.resolution = 1;
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = s;
  bad.extent = 0.0;
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = s;
  bad.axis_v = 2.0 * bad.axis_u;
  CHECK_THROWS_AS(bad.validate(), InputError);
}

TEST_CASE("slice matches pointwise entropy") {
  Rng rng(17);
  const PosteriorModel m = random_model(rng, 3, 6, 2.0, 1.0);
  SliceSpec spec;
  spec.origin = Point3(0, 0, 0.1);
  spec.extent = 0.4;
  spec.resolution = 9;
  const EntropySlice slice = entropy_slice(m, spec);
  REQUIRE(slice.values.size() == 81);
  for (std::size_t r = 0; r < 9; ++r)
    for (std::size_t c = 0; c < 9; ++c) {
      CHECK(slice.values[r * 9 + c] == doctest::Approx(entropy(predict(m, spec.pixel(r, c)))).epsilon(1e-12));
    }
  CHECK(slice.min == *std::min_element(slice.values.begin(), slice.values.end()));
  CHECK(slice.max <= std::log(3.0) + 1e-12);
}

TEST_CASE("label and oracle predictors") {
  SceneOracle oracle({{Sphere{{0, 0, 0.1}, 0.1}, 1}, {Sphere{{0.5, 0, 0.1}, 0.1}, 2}});
  const LabelPredictor p = oracle_predictor(oracle, {0, 2});  // class 1 is object 2
  CHECK(p.num_classes() == 2);
  CHECK(p.predict(Point3(0.5, 0, 0.1)).probs == Eigen::Vector2d(0, 1));
  CHECK(p.predict(Point3(0, 0, 0.1)).probs == Eigen::Vector2d(1, 0));
  CHECK_THROWS_AS(oracle_predictor(oracle, {0, 3}), InputError);
  CHECK_THROWS_AS(LabelPredictor(1, [](const Point3&) { return ClassIndex{0}; }), InputError);
}

TEST_CASE("point estimate predictor is a softmax") {
  SgdModel m;
  m.hinges.kernel_gamma = 10.0;
  m.hinges.hinges = {Point3::Zero()};
  m.params.kernel_cutoff = 0.0;
  m.weights = Eigen::MatrixXd::Zero(2, 2);
  m.weights(1, 0) = 2.0;
  const PointEstimatePredictor p(m);
  const ClassDistribution d = p.predict(Point3::Zero());
  CHECK(d.probs[1] == doctest::Approx(sigmoid(2.0)));
  CHECK(d.argmax() == 1);
}
