#pragma once

#include "vprism/core.hpp"
#include "vprism/features.hpp"
#include "vprism/sampling.hpp"

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

namespace vprism {

/// Quadratic-bound coefficient ((1 + e^-xi)^-1 - 1/2) / (2 xi). Uses the
/// Taylor value 1/8 - xi^2/96 below 1e-6. Throws InputError for xi < 0.
double lambda_fn(double xi);

double log_sum_exp(std::span<const double> z);

/// Upper bound on log-sum-exp(z) for any alpha and any xi >= 0:
/// alpha + sum_k [(z_k - alpha - xi_k)/2 + lambda(xi_k)((z_k - alpha)^2 - xi_k^2)
///                + ln(1 + e^xi_k)].
double bouchard_bound(std::span<const double> z, double alpha, std::span<const double> xi);

/// Gaussian prior shared by every class row of the weight matrix.
struct GaussianPrior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;

  static GaussianPrior isotropic(std::size_t dim, double mean_scale, double variance);
  std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }
};

/// Per-class Gaussian weight posteriors. In diagonal mode covariances[k] is a
/// D x 1 column of marginal variances.
struct GaussianPosterior {
  CovarianceMode mode = CovarianceMode::kFull;
  Eigen::MatrixXd means;  // c x D, row k is mu_k
  std::vector<Eigen::MatrixXd> covariances;
  std::vector<double> log_det_covariance;

  std::size_t num_classes() const { return static_cast<std::size_t>(means.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(means.cols()); }

  /// phi^T Sigma_k phi for one sparse feature row.
  double quadratic_form(std::size_t k, std::span<const std::uint32_t> cols,
                        std::span<const double> vals) const;
};

/// Per-point alpha_i and per-point-per-class xi_{i,k}.
struct VariationalState {
  Eigen::VectorXd alpha;  // n
  Eigen::MatrixXd xi;     // n x c

  /// Initial values: xi = 1, alpha = 0.
  static VariationalState initial(std::size_t n, std::size_t num_classes);
};

/// Means (n x c) and variances (n x c) of the class logits w_k^T phi(x_i).
struct LogitMoments {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd var;
};

LogitMoments logit_moments(const FeatureMatrix& features, const GaussianPosterior& posterior);
/// Same, from precomputed row blocks covering rows 0..n-1.
LogitMoments logit_moments(const std::vector<FeatureBlock>& blocks, std::size_t n,
                           const GaussianPosterior& posterior);

Eigen::VectorXd update_alpha(const VariationalState& state, const LogitMoments& moments);
Eigen::VectorXd update_alpha(const VariationalState& state, const FeatureMatrix& features,
                             const GaussianPosterior& posterior);

Eigen::MatrixXd update_xi(const Eigen::VectorXd& alpha, const LogitMoments& moments);
Eigen::MatrixXd update_xi(const VariationalState& state, const FeatureMatrix& features,
                          const GaussianPosterior& posterior);

/// Closed-form Gaussian posterior under the quadratic bound. Throws
/// NumericalError naming the class if a precision matrix is not positive
/// definite.
GaussianPosterior update_posterior(const FeatureMatrix& features, std::span<const ClassIndex> labels,
                                   const VariationalState& state, const GaussianPrior& prior,
                                   std::size_t num_classes,
                                   CovarianceMode mode = CovarianceMode::kFull);
GaussianPosterior update_posterior(const std::vector<FeatureBlock>& blocks, std::size_t n,
                                   std::span<const ClassIndex> labels, const VariationalState& state,
                                   const GaussianPrior& prior, std::size_t num_classes, CovarianceMode mode);

/// E_q[bound_i] evaluated from logit moments.
double expected_bound(std::size_t i, const LogitMoments& moments, const VariationalState& state);

/// sum_i (E_q[bound_i] - E_q[z_{i, y_i}]): the negated expected log-likelihood
/// lower bound.
double expected_bound_objective(const LogitMoments& moments, std::span<const ClassIndex> labels,
                                const VariationalState& state);

/// sum_k KL(q_k || prior).
double kl_to_prior(const GaussianPosterior& posterior, const GaussianPrior& prior);

/// Fitted map: weight posteriors plus everything needed to featurize queries.
struct PosteriorModel {
  GaussianPosterior posterior;
  GaussianPrior prior;
  HingeSet hinges;
  Hyperparams params;
  Plane plane;
  std::vector<Aabb> object_bounds;  // observed AABB of each object class, index k - 1
  std::string input_digest;

  std::size_t num_classes() const { return posterior.num_classes(); }
  std::size_t dim() const { return posterior.dim(); }
};

struct FitTrace {
  std::vector<double> expected_bound_objective;  // one entry per EM iteration
  std::vector<double> negative_elbo;             // adds the KL term
};

/// The EM driver: initialize xi = 1, alpha = 0, then repeat em_iterations
/// times: posterior, alpha, xi. num_classes == 0 infers max label + 1.
PosteriorModel fit(const LabeledSamples& train, const HingeSet& hinges, const Hyperparams& params,
                   std::size_t num_classes = 0, FitTrace* trace = nullptr);

struct SgdOptions {
  double learning_rate = 0.5;
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
};

/// Point-estimate softmax weights (c x D) trained by mini-batch SGD.
struct SgdModel {
  Eigen::MatrixXd weights;
  HingeSet hinges;
  Hyperparams params;

  std::size_t num_classes() const { return static_cast<std::size_t>(weights.rows()); }
};

/// Mean softmax cross-entropy.
double softmax_nll(const Eigen::MatrixXd& weights, const FeatureMatrix& features,
                   std::span<const ClassIndex> labels);
Eigen::MatrixXd softmax_nll_gradient(const Eigen::MatrixXd& weights, const FeatureMatrix& features,
                                     std::span<const ClassIndex> labels);

/// Weights start at zero. Throws NumericalError if the loss becomes non-finite.
SgdModel fit_sgd(const LabeledSamples& train, const HingeSet& hinges, const Hyperparams& params,
                 const SgdOptions& options, Rng& rng, std::size_t num_classes = 0);

}  // namespace vprism
