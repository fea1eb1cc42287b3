#include "doctest.h"

#include "vprism/model.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace vprism;

namespace {

FeatureMatrix from_dense(const Eigen::MatrixXd& dense) {
  FeatureMatrix f;
  f.dim = static_cast<std::size_t>(dense.cols());
  f.row_start = {0};
  for (Eigen::Index i = 0; i < dense.rows(); ++i) {
    for (Eigen::Index j = 0; j < dense.cols(); ++j) {
      f.cols.push_back(static_cast<std::uint32_t>(j));
      f.vals.push_back(dense(i, j));
    }
    f.row_start.push_back(f.cols.size());
  }
  return f;
}

struct Toy {
  FeatureMatrix features;
  std::vector<ClassIndex> labels;
  GaussianPrior prior;
  std::size_t c;
};

// Random kernel-like features in (0, 1] with a bias column.
Toy random_toy(Rng& rng, std::size_t n, std::size_t m, std::size_t c) {
  Eigen::MatrixXd phi(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m + 1));
  std::vector<ClassIndex> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) phi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::exp(-3.0 * rng.uniform());
    phi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)) = 1.0;
    labels[i] = static_cast<ClassIndex>(rng.index(c));
  }
  return {from_dense(phi), labels, GaussianPrior::isotropic(m + 1, 0.0, 10.0), c};
}

// Runs a couple of EM rounds on a toy problem and returns the state and moments.
struct EmPoint {
  GaussianPosterior posterior;
  VariationalState state;
};

EmPoint em_rounds(const Toy& t, int rounds) {
  VariationalState s = VariationalState::initial(t.features.rows(), t.c);
  GaussianPosterior post;
  for (int r = 0; r < rounds; ++r) {
    post = update_posterior(t.features, t.labels, s, t.prior, t.c);
    const LogitMoments lm = logit_moments(t.features, post);
    s.alpha = update_alpha(s, lm);
    s.xi = update_xi(s.alpha, lm);
  }
  return {post, s};
}

double point_bound(const LogitMoments& lm, std::size_t i, double alpha, const Eigen::RowVectorXd& xi) {
  VariationalState s;
  s.alpha = Eigen::VectorXd::Zero(lm.mean.rows());
  s.xi = Eigen::MatrixXd::Zero(lm.mean.rows(), lm.mean.cols());
  s.alpha[static_cast<Eigen::Index>(i)] = alpha;
  s.xi.row(static_cast<Eigen::Index>(i)) = xi;
  return expected_bound(i, lm, s);
}

TEST_CASE("lambda values") {
  CHECK(lambda_fn(0.0) == 0.125);
  CHECK(lambda_fn(1.0) == doctest::Approx(0.11552928931500245).epsilon(1e-14));
  CHECK(lambda_fn(1e-7) == doctest::Approx(0.125).epsilon(1e-12));
  CHECK_THROWS_AS(lambda_fn(-0.1), InputError);
  double prev = lambda_fn(0.0);
  for (int i = 1; i <= 20000; ++i) {
    const double v = lambda_fn(i * 1e-3);
    CHECK(v < prev);
    CHECK(v > 0.0);
    prev = v;
  }
  // Continuity across the Taylor switch.
  CHECK(std::abs(lambda_fn(0.999999e-6) - lambda_fn(1.000001e-6)) < 1e-12);
}

TEST_CASE("bouchard bound examples") {
  const std::vector<double> z{0, 0, 0}, xi{1, 1, 1};
  CHECK(bouchard_bound(z, 0.0, xi) == doctest::Approx(2.0931971946096612).epsilon(1e-12));
  CHECK(log_sum_exp(z) == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  CHECK(bouchard_bound(z, 0.0, xi) >= log_sum_exp(z));

  // One class with xi = |t - alpha| keeps the bound above t.
  for (double t : {-3.0, -0.5, 0.0, 0.7, 4.0}) {
    for (double alpha : {-1.0, 0.0, 2.0}) {
      const std::vector<double> zz{t}, x{std::abs(t - alpha)};
      const double gap = bouchard_bound(zz, alpha, x) - t;
      CHECK(gap >= 0.0);
    }
  }
}

TEST_CASE("bouchard bound is an upper bound on random inputs") {
  Rng rng(11);
  int violations = 0;
  for (int trial = 0; trial < 20000; ++trial) {
    const std::size_t c = 2 + rng.index(7);
    std::vector<double> z(c), xi(c);
    for (std::size_t k = 0; k < c; ++k) {
      z[k] = rng.uniform(-10, 10);
      xi[k] = rng.uniform(0, 10);
    }
    if (bouchard_bound(z, rng.uniform(-10, 10), xi) < log_sum_exp(z)) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("log-sum-exp is stable") {
  const std::vector<double> big{1000.0, 1000.0};
  CHECK(log_sum_exp(big) == doctest::Approx(1000.0 + std::log(2.0)));
  const std::vector<double> small{-1000.0};
  CHECK(log_sum_exp(small) == -1000.0);
}

TEST_CASE("alpha update examples") {
  const FeatureMatrix f = from_dense(Eigen::MatrixXd::Ones(3, 2));
  for (std::size_t c : {2u, 4u}) {
    GaussianPosterior post;
    post.means = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(c), 2);
    post.covariances.assign(c, Eigen::MatrixXd::Identity(2, 2));
    post.log_det_covariance.assign(c, 0.0);
    VariationalState s = VariationalState::initial(3, c);
    Rng rng(1);
    for (Eigen::Index i = 0; i < 3; ++i)
      for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(c); ++k) s.xi(i, k) = rng.uniform(0, 3);
    const Eigen::VectorXd a = update_alpha(s, f, post);
    for (Eigen::Index i = 0; i < 3; ++i) {
      double sum_lambda = 0.0;
      for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(c); ++k) sum_lambda += lambda_fn(s.xi(i, k));
      const double expected = c == 2 ? 0.0 : 0.5 / sum_lambda;
      CHECK(a[i] == doctest::Approx(expected).epsilon(1e-14));
    }
  }
}

TEST_CASE("xi update examples") {
  LogitMoments lm{Eigen::MatrixXd(1, 3), Eigen::MatrixXd::Zero(1, 3)};
  lm.mean << 0.5, -2.0, 0.0;
  CHECK(update_xi(Eigen::VectorXd::Zero(1), lm).isApprox(Eigen::RowVector3d(0.5, 2.0, 0.0)));
  const Eigen::MatrixXd xi = update_xi(Eigen::VectorXd::Constant(1, 0.7), lm);
  CHECK(xi(0, 0) == doctest::Approx(0.2));
  CHECK(xi(0, 1) == doctest::Approx(2.7));
  CHECK(xi(0, 2) == doctest::Approx(0.7));
  lm.var << 1.0, 0.0, 3.0;
  const Eigen::MatrixXd xv = update_xi(Eigen::VectorXd::Zero(1), lm);
  CHECK(xv(0, 0) == doctest::Approx(std::sqrt(1.25)));
  CHECK(xv(0, 2) == doctest::Approx(std::sqrt(3.0)));
}

TEST_CASE("closed-form variational updates are optimal") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const Toy t = random_toy(rng, 30, 5, 3);
    const EmPoint em = em_rounds(t, 2);
    const LogitMoments lm = logit_moments(t.features, em.posterior);
    const Eigen::VectorXd alpha = update_alpha(em.state, lm);
    const Eigen::MatrixXd xi = update_xi(alpha, lm);
    for (std::size_t i = 0; i < t.features.rows(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      // alpha is optimal for the xi it was computed from.
      const Eigen::RowVectorXd xi_old = em.state.xi.row(ii);
      const double best_alpha = point_bound(lm, i, alpha[ii], xi_old);
      for (double da : {-1e-3, 1e-3}) CHECK(point_bound(lm, i, alpha[ii] + da, xi_old) >= best_alpha);
      // xi is optimal for the new alpha.
      const double best = point_bound(lm, i, alpha[ii], xi.row(ii));
      for (double f : {1.0 - 1e-3, 1.0 + 1e-3}) {
        for (Eigen::Index k = 0; k < 3; ++k) {
          Eigen::RowVectorXd x = xi.row(ii);
          x[k] *= f;
          CHECK(point_bound(lm, i, alpha[ii], x) >= best);
        }
      }
    }
  }
}

TEST_CASE("hand-computed two by two posterior") {
  // One point on its hinge: phi = (1, 1). xi = 0 gives lambda = 1/8.
  const FeatureMatrix f = from_dense(Eigen::MatrixXd::Ones(1, 2));
  const std::vector<ClassIndex> labels{1};
  VariationalState s = VariationalState::initial(1, 2);
  s.xi.setZero();
  const GaussianPrior prior = GaussianPrior::isotropic(2, 0.0, 1.0);
  const GaussianPosterior post = update_posterior(f, labels, s, prior, 2);
  Eigen::Matrix2d precision;
  precision << 1.25, 0.25, 0.25, 1.25;
  for (int k = 0; k < 2; ++k) {
    const Eigen::MatrixXd p = post.covariances[static_cast<std::size_t>(k)].inverse();
    CHECK((p - precision).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(post.log_det_covariance[static_cast<std::size_t>(k)] == doctest::Approx(-std::log(1.5)).epsilon(1e-12));
  }
  CHECK(std::abs(post.means(1, 0) - 1.0 / 3.0) <= 1e-12);
  CHECK(std::abs(post.means(1, 1) - 1.0 / 3.0) <= 1e-12);
  CHECK(std::abs(post.means(0, 0) + 1.0 / 3.0) <= 1e-12);
  CHECK(std::abs(post.means(0, 1) + 1.0 / 3.0) <= 1e-12);
  CHECK(post.covariances[0].isApprox(post.covariances[0].transpose()));
}

TEST_CASE("no data returns the prior") {
  FeatureMatrix empty;
  empty.dim = 4;
  GaussianPrior prior = GaussianPrior::isotropic(4, 0.3, 2.0);
  const GaussianPosterior post = update_posterior(empty, {}, VariationalState::initial(0, 3), prior, 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(post.means.row(static_cast<Eigen::Index>(k)).transpose() == prior.mean);
    CHECK(post.covariances[k] == prior.covariance);
  }
}

TEST_CASE("information only grows") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const Toy t = random_toy(rng, 12, 1 + rng.index(15), 2 + rng.index(3));
    const EmPoint em = em_rounds(t, 1);
    const Eigen::MatrixXd prior_precision = t.prior.covariance.inverse();
    for (std::size_t k = 0; k < t.c; ++k) {
      const Eigen::MatrixXd& cov = em.posterior.covariances[k];
      CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() <= 1e-9);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> info(cov.inverse() - prior_precision);
      CHECK(info.eigenvalues().minCoeff() >= -1e-8);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> shrink(t.prior.covariance - cov);
      CHECK(shrink.eigenvalues().minCoeff() >= -1e-8);
      CHECK(Eigen::LLT<Eigen::MatrixXd>(cov).info() == Eigen::Success);
    }
  }
}

TEST_CASE("blocked posterior matches the row-wise path") {
  Rng rng(41);
  const Toy t = random_toy(rng, 70, 8, 3);
  VariationalState s = VariationalState::initial(70, 3);
  for (Eigen::Index i = 0; i < 70; ++i) {
    s.alpha[i] = rng.uniform(-1, 1);
    for (Eigen::Index k = 0; k < 3; ++k) s.xi(i, k) = rng.uniform(0, 2);
  }
  const auto blocks = block_rows(t.features, 7);
  for (auto mode : {CovarianceMode::kFull, CovarianceMode::kDiagonal}) {
    const auto a = update_posterior(t.features, t.labels, s, t.prior, 3, mode);
    const auto b = update_posterior(blocks, 70, t.labels, s, t.prior, 3, mode);
    CHECK((a.means - b.means).cwiseAbs().maxCoeff() <= 1e-10);
    const LogitMoments la = logit_moments(t.features, a), lb = logit_moments(blocks, 70, a);
    CHECK((la.mean - lb.mean).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((la.var - lb.var).cwiseAbs().maxCoeff() <= 1e-10);
    for (std::size_t i = 0; i < 70; ++i) {
      CHECK(la.var(static_cast<Eigen::Index>(i), 1) ==
            doctest::Approx(a.quadratic_form(1, t.features.row_cols(i), t.features.row_vals(i))));
    }
  }
}

TEST_CASE("non positive definite precision names the class") {
  const FeatureMatrix f = from_dense(Eigen::MatrixXd::Ones(1, 2));
  GaussianPrior prior = GaussianPrior::isotropic(2, 0.0, 1.0);
  prior.covariance(0, 0) = -1.0;
  CHECK_THROWS_WITH_AS(update_posterior(f, std::vector<ClassIndex>{1}, VariationalState::initial(1, 2), prior, 2),
                       doctest::Contains("positive definite"), NumericalError);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Ones(1, 2);
  bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(update_posterior(from_dense(bad), std::vector<ClassIndex>{1}, VariationalState::initial(1, 2),
                                        GaussianPrior::isotropic(2, 0.0, 1.0), 2),
                       doctest::Contains("class 0"), NumericalError);
}

TEST_CASE("objective decreases across iterations") {
  Rng rng(51);
  for (int trial = 0; trial < 5; ++trial) {
    LabeledSamples train;
    HingeSet h;
    h.kernel_gamma = 50.0;
    for (int j = 0; j < 12; ++j) h.hinges.emplace_back(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 0.0);
    h.grid_count = h.hinges.size();
    for (int i = 0; i < 80; ++i) {
      const Point3 p(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 0.0);
      train.push(p, p.x() > 0.1 ? 2 : (p.y() > 0 ? 1 : 0));
    }
    Hyperparams params;
    params.em_iterations = 8;
    params.kernel_cutoff = 0.0;
    FitTrace trace;
    fit(train, h, params, 3, &trace);
    REQUIRE(trace.negative_elbo.size() == 8);
    for (std::size_t it = 0; it < trace.negative_elbo.size(); ++it) {
      CHECK(std::isfinite(trace.negative_elbo[it]));
      CHECK(std::isfinite(trace.expected_bound_objective[it]));
      if (it > 0) CHECK(trace.negative_elbo[it] <= trace.negative_elbo[it - 1] + 1e-8);
    }
  }
}

LabeledSamples separable_set(Rng& rng) {
  LabeledSamples s;
  for (int i = 0; i < 120; ++i) {
    const double x = rng.uniform(-0.3, 0.3), y = rng.uniform(-0.3, 0.3);
    if (std::abs(x) < 0.03) continue;
    s.push(Point3(x, y, 0.0), x > 0 ? 1 : 0);
  }
  return s;
}

HingeSet planar_grid(double gamma) {
  HingeSet h;
  h.kernel_gamma = gamma;
  for (int i = -3; i <= 3; ++i)
    for (int j = -3; j <= 3; ++j) h.hinges.emplace_back(0.1 * i, 0.1 * j, 0.0);
  h.grid_count = h.hinges.size();
  return h;
}

TEST_CASE("fit separates a separable set") {
  Rng rng(61);
  const LabeledSamples s = separable_set(rng);
  const HingeSet h = planar_grid(100.0);
  Hyperparams params;
  const PosteriorModel m = fit(s, h, params);
  const FeatureMatrix f = Featurizer(h, params.kernel_cutoff)(s.points);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double z0 = f.row_dot(i, m.posterior.means.row(0).transpose());
    const double z1 = f.row_dot(i, m.posterior.means.row(1).transpose());
    correct += (z1 > z0 ? 1u : 0u) == s.labels[i] ? 1 : 0;
  }
  CHECK(correct == s.size());

  const PosteriorModel again = fit(s, h, params);
  CHECK(again.posterior.means == m.posterior.means);
  for (std::size_t k = 0; k < 2; ++k) CHECK(again.posterior.covariances[k] == m.posterior.covariances[k]);
}

TEST_CASE("fit is symmetric under label swap and point permutation") {
  Rng rng(71);
  const LabeledSamples s = separable_set(rng);
  const HingeSet h = planar_grid(100.0);
  Hyperparams params;
  LabeledSamples swapped = s;
  for (auto& l : swapped.labels) l = 1 - l;
  const PosteriorModel a = fit(s, h, params), b = fit(swapped, h, params);
  CHECK((a.posterior.means.row(0) - b.posterior.means.row(1)).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK((a.posterior.means.row(1) - b.posterior.means.row(0)).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK((a.posterior.covariances[0] - b.posterior.covariances[1]).cwiseAbs().maxCoeff() <= 1e-9);

  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);
  LabeledSamples permuted;
  for (std::size_t i : order) permuted.push(s.points[i], s.labels[i]);
  const PosteriorModel c = fit(permuted, h, params);
  CHECK((a.posterior.means - c.posterior.means).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK((a.posterior.covariances[1] - c.posterior.covariances[1]).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("classes without data keep the prior") {
  Rng rng(81);
  const LabeledSamples s = separable_set(rng);
  const HingeSet h = planar_grid(100.0);
  Hyperparams params;
  params.em_iterations = 1;
  const PosteriorModel m = fit(s, h, params, 3);
  CHECK(m.num_classes() == 3);
  CHECK(m.posterior.means.allFinite());
  // Class 2 has no positives, so its logit sits below the true class everywhere.
  const FeatureMatrix f = Featurizer(h, params.kernel_cutoff)(s.points);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double z2 = f.row_dot(i, m.posterior.means.row(2).transpose());
    CHECK(z2 < f.row_dot(i, m.posterior.means.row(s.labels[i]).transpose()));
  }
}

TEST_CASE("fit input errors") {
  const HingeSet h = planar_grid(100.0);
  Hyperparams params;
  CHECK_THROWS_AS(fit(LabeledSamples{}, h, params), InputError);
  LabeledSamples s;
  s.push(Point3::Zero(), 3);
  CHECK_THROWS_AS(fit(s, h, params, 2), InputError);
}

TEST_CASE("diagonal mode stores marginal variances") {
  Rng rng(91);
  const Toy t = random_toy(rng, 40, 6, 3);
  const auto post = update_posterior(t.features, t.labels, VariationalState::initial(40, 3), t.prior, 3,
                                     CovarianceMode::kDiagonal);
  CHECK(post.covariances[0].cols() == 1);
  CHECK(post.covariances[0].rows() == 7);
  CHECK((post.covariances[0].array() > 0.0).all());
}

TEST_CASE("kl to prior") {
  const GaussianPrior prior = GaussianPrior::isotropic(3, 0.0, 2.0);
  GaussianPosterior same;
  same.means = Eigen::MatrixXd::Zero(2, 3);
  same.covariances.assign(2, prior.covariance);
  same.log_det_covariance.assign(2, 3.0 * std::log(2.0));
  CHECK(std::abs(kl_to_prior(same, prior)) < 1e-12);
  same.means(0, 0) = 2.0;
  CHECK(kl_to_prior(same, prior) == doctest::Approx(0.5 * 4.0 / 2.0));
}

TEST_CASE("softmax gradient matches finite differences") {
  Rng rng(101);
  const Toy t = random_toy(rng, 5, 4, 3);
  Eigen::MatrixXd w(3, 5);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-1, 1);
  const Eigen::MatrixXd g = softmax_nll_gradient(w, t.features, t.labels);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    Eigen::MatrixXd wp = w, wm = w;
    wp.data()[i] += h;
    wm.data()[i] -= h;
    const double fd = (softmax_nll(wp, t.features, t.labels) - softmax_nll(wm, t.features, t.labels)) / (2 * h);
    CHECK(std::abs(fd - g.data()[i]) <= 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("sgd fits a separable set deterministically") {
  Rng data_rng(111);
  const LabeledSamples s = separable_set(data_rng);
  const HingeSet h = planar_grid(100.0);
  Hyperparams params;
  SgdOptions opt;
  opt.epochs = 200;
  Rng r1(5), r2(5);
  const SgdModel a = fit_sgd(s, h, params, opt, r1);
  const SgdModel b = fit_sgd(s, h, params, opt, r2);
  CHECK(a.weights == b.weights);
  const FeatureMatrix f = Featurizer(h, params.kernel_cutoff)(s.points);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double z0 = f.row_dot(i, a.weights.row(0).transpose());
    const double z1 = f.row_dot(i, a.weights.row(1).transpose());
    correct += (z1 > z0 ? 1u : 0u) == s.labels[i] ? 1 : 0;
  }
  CHECK(correct == s.size());

  opt.epochs = 0;
  Rng r3(5);
  CHECK(fit_sgd(s, h, params, opt, r3).weights.isZero(0.0));
}

TEST_CASE("sgd divergence is reported") {
  Rng data_rng(121);
  const LabeledSamples s = separable_set(data_rng);
  const HingeSet h = planar_grid(100.0);
  Hyperparams params;
  SgdOptions opt;
  opt.learning_rate = std::numeric_limits<double>::max();
  opt.batch_size = 1;
  Rng r(1);
  CHECK_THROWS_AS(fit_sgd(s, h, params, opt, r), NumericalError);
}

}  // namespace
