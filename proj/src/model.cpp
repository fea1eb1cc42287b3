#include "vprism/model.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>

namespace vprism {

double lambda_fn(double xi) {
  if (!(xi >= 0.0)) throw InputError("lambda is defined for xi >= 0 only");
  if (xi < 1e-6) return 0.125 - xi * xi / 96.0;
  // sigmoid(xi) - 1/2 == tanh(xi / 2) / 2
  return std::tanh(0.5 * xi) / (4.0 * xi);
}

namespace {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

}  // namespace

double log_sum_exp(std::span<const double> z) {
  if (z.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

double bouchard_bound(std::span<const double> z, double alpha, std::span<const double> xi) {
  if (z.size() != xi.size()) throw InputError("bouchard_bound: z and xi differ in length");
  double total = alpha;
  for (std::size_t k = 0; k < z.size(); ++k) {
    if (!(xi[k] >= 0.0)) throw InputError("bouchard_bound: xi must be non-negative");
    const double d = z[k] - alpha;
    total += 0.5 * (d - xi[k]) + lambda_fn(xi[k]) * (d * d - xi[k] * xi[k]) + softplus(xi[k]);
  }
  return total;
}

GaussianPrior GaussianPrior::isotropic(std::size_t dim, double mean_scale, double variance) {
  const auto d = static_cast<Eigen::Index>(dim);
  return {Eigen::VectorXd::Constant(d, mean_scale), variance * Eigen::MatrixXd::Identity(d, d)};
}

double GaussianPosterior::quadratic_form(std::size_t k, std::span<const std::uint32_t> cols,
                                         std::span<const double> vals) const {
  const Eigen::MatrixXd& cov = covariances[k];
  double acc = 0.0;
  if (mode == CovarianceMode::kDiagonal) {
    for (std::size_t a = 0; a < cols.size(); ++a) acc += vals[a] * vals[a] * cov(cols[a], 0);
    return acc;
  }
  for (std::size_t a = 0; a < cols.size(); ++a) {
    const double* column = cov.data() + static_cast<std::size_t>(cov.rows()) * cols[a];
    double inner = 0.0;
    for (std::size_t b = 0; b < cols.size(); ++b) inner += vals[b] * column[cols[b]];
    acc += vals[a] * inner;
  }
  return acc;
}

VariationalState VariationalState::initial(std::size_t n, std::size_t num_classes) {
  const auto rows = static_cast<Eigen::Index>(n);
  return {Eigen::VectorXd::Zero(rows),
          Eigen::MatrixXd::Ones(rows, static_cast<Eigen::Index>(num_classes))};
}

LogitMoments logit_moments(const std::vector<FeatureBlock>& blocks, std::size_t n,
                           const GaussianPosterior& posterior) {
  const auto c = static_cast<Eigen::Index>(posterior.num_classes());
  LogitMoments m{Eigen::MatrixXd(static_cast<Eigen::Index>(n), c), Eigen::MatrixXd(static_cast<Eigen::Index>(n), c)};
  Eigen::VectorXd mu_u, mean, var;
  Eigen::MatrixXd sub, prod;
  for (const FeatureBlock& b : blocks) {
    const auto u = static_cast<Eigen::Index>(b.cols.size());
    mu_u.resize(u);
    for (Eigen::Index k = 0; k < c; ++k) {
      for (Eigen::Index j = 0; j < u; ++j) mu_u[j] = posterior.means(k, b.cols[static_cast<std::size_t>(j)]);
      mean.noalias() = b.phi * mu_u;
      const Eigen::MatrixXd& cov = posterior.covariances[static_cast<std::size_t>(k)];
      if (posterior.mode == CovarianceMode::kDiagonal) {
        for (Eigen::Index j = 0; j < u; ++j) mu_u[j] = cov(b.cols[static_cast<std::size_t>(j)], 0);
        var.noalias() = b.phi.cwiseAbs2() * mu_u;
      } else {
        sub.resize(u, u);
        for (Eigen::Index j = 0; j < u; ++j) {
          const double* col = cov.data() + static_cast<std::size_t>(cov.rows()) * b.cols[static_cast<std::size_t>(j)];
          for (Eigen::Index i = 0; i < u; ++i) sub(i, j) = col[b.cols[static_cast<std::size_t>(i)]];
        }
        prod.noalias() = b.phi * sub;
        var = prod.cwiseProduct(b.phi).rowwise().sum();
      }
      for (std::size_t r = 0; r < b.rows.size(); ++r) {
        const auto row = static_cast<Eigen::Index>(b.rows[r]);
        m.mean(row, k) = mean[static_cast<Eigen::Index>(r)];
        m.var(row, k) = std::max(0.0, var[static_cast<Eigen::Index>(r)]);
      }
    }
  }
  return m;
}

LogitMoments logit_moments(const FeatureMatrix& features, const GaussianPosterior& posterior) {
  if (features.dim != posterior.dim()) throw InputError("feature and posterior dimensions differ");
  return logit_moments(block_rows(features), features.rows(), posterior);
}

Eigen::VectorXd update_alpha(const VariationalState& state, const LogitMoments& moments) {
  const Eigen::Index n = state.xi.rows(), c = state.xi.cols();
  if (moments.mean.rows() != n || moments.mean.cols() != c) {
    throw InputError("update_alpha: shape mismatch");
  }
  Eigen::VectorXd alpha(n);
  const double offset = 0.5 * (0.5 * static_cast<double>(c) - 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    double num = offset, den = 0.0;
    for (Eigen::Index k = 0; k < c; ++k) {
      const double lam = lambda_fn(state.xi(i, k));
      num += lam * moments.mean(i, k);
      den += lam;
    }
    if (!(den > 0.0)) throw NumericalError("update_alpha: lambda sum vanished at point " + std::to_string(i));
    alpha[i] = num / den;
  }
  return alpha;
}

Eigen::VectorXd update_alpha(const VariationalState& state, const FeatureMatrix& features,
                             const GaussianPosterior& posterior) {
  return update_alpha(state, logit_moments(features, posterior));
}

Eigen::MatrixXd update_xi(const Eigen::VectorXd& alpha, const LogitMoments& moments) {
  const Eigen::Index n = moments.mean.rows(), c = moments.mean.cols();
  if (alpha.size() != n) throw InputError("update_xi: shape mismatch");
  Eigen::MatrixXd xi(n, c);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < c; ++k) {
      const double mu = moments.mean(i, k);
      const double radicand = moments.var(i, k) + mu * mu + alpha[i] * alpha[i] - 2.0 * alpha[i] * mu;
      xi(i, k) = std::sqrt(std::max(0.0, radicand));
    }
  }
  return xi;
}

Eigen::MatrixXd update_xi(const VariationalState& state, const FeatureMatrix& features,
                          const GaussianPosterior& posterior) {
  return update_xi(state.alpha, logit_moments(features, posterior));
}

GaussianPosterior update_posterior(const std::vector<FeatureBlock>& blocks, std::size_t n,
                                   std::span<const ClassIndex> labels, const VariationalState& state,
                                   const GaussianPrior& prior, std::size_t num_classes, CovarianceMode mode) {
  const auto d = static_cast<Eigen::Index>(prior.dim());
  if (labels.size() != n || static_cast<std::size_t>(state.alpha.size()) != n ||
      static_cast<std::size_t>(state.xi.rows()) != n ||
      static_cast<std::size_t>(state.xi.cols()) != num_classes) {
    throw InputError("update_posterior: state dimensions do not match the data");
  }

  GaussianPosterior post;
  post.mode = mode;
  post.means.resize(static_cast<Eigen::Index>(num_classes), d);

  Eigen::LLT<Eigen::MatrixXd> prior_llt(prior.covariance);
  if (prior_llt.info() != Eigen::Success) throw NumericalError("prior covariance is not positive definite");
  const double prior_log_det = 2.0 * prior_llt.matrixLLT().diagonal().array().log().sum();

  if (n == 0) {
    for (std::size_t k = 0; k < num_classes; ++k) {
      post.means.row(static_cast<Eigen::Index>(k)) = prior.mean.transpose();
      if (mode == CovarianceMode::kFull) {
        post.covariances.push_back(prior.covariance);
      } else {
        post.covariances.emplace_back(prior.covariance.diagonal());
      }
      post.log_det_covariance.push_back(prior_log_det);
    }
    return post;
  }

  const Eigen::MatrixXd prior_precision = prior_llt.solve(Eigen::MatrixXd::Identity(d, d));
  const Eigen::VectorXd prior_term = prior_llt.solve(prior.mean);

  Eigen::MatrixXd precision(d, d);
  Eigen::MatrixXd scaled, gram;
  Eigen::VectorXd w, coef, rhs_u;
  for (std::size_t k = 0; k < num_classes; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    precision.triangularView<Eigen::Lower>() = prior_precision;
    Eigen::VectorXd rhs = prior_term;
    Eigen::VectorXd diag = prior_precision.diagonal();
    for (const FeatureBlock& b : blocks) {
      const auto rows = static_cast<Eigen::Index>(b.rows.size());
      const auto u = static_cast<Eigen::Index>(b.cols.size());
      w.resize(rows);
      coef.resize(rows);
      for (Eigen::Index r = 0; r < rows; ++r) {
        const std::size_t i = b.rows[static_cast<std::size_t>(r)];
        const double lam = lambda_fn(state.xi(static_cast<Eigen::Index>(i), kk));
        assert(lam >= 0.0);
        w[r] = 2.0 * lam;
        const double y = labels[i] == k ? 1.0 : 0.0;
        coef[r] = y - 0.5 + 2.0 * state.alpha[static_cast<Eigen::Index>(i)] * lam;
      }
      rhs_u.noalias() = b.phi.transpose() * coef;
      scaled = b.phi.array().colwise() * w.array().sqrt();
      gram.setZero(u, u);
      gram.selfadjointView<Eigen::Lower>().rankUpdate(scaled.transpose());
      for (Eigen::Index j = 0; j < u; ++j) {
        const std::uint32_t cj = b.cols[static_cast<std::size_t>(j)];
        rhs[cj] += rhs_u[j];
        diag[cj] += gram(j, j);
        double* column = precision.data() + static_cast<std::size_t>(d) * cj;
        // Columns are sorted, so i >= j addresses the lower triangle.
        for (Eigen::Index i = j; i < u; ++i) column[b.cols[static_cast<std::size_t>(i)]] += gram(i, j);
      }
    }
    Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>, Eigen::Lower> llt(precision);
    // LLT accepts NaN pivots, so check the factor's diagonal as well.
    if (llt.info() != Eigen::Success || !precision.diagonal().allFinite()) {
      throw NumericalError("posterior precision of class " + std::to_string(k) + " is not positive definite");
    }
    post.means.row(kk) = llt.solve(rhs).transpose();
    if (mode == CovarianceMode::kFull) {
      post.log_det_covariance.push_back(-2.0 * llt.matrixLLT().diagonal().array().log().sum());
      Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(d, d));
      cov = 0.5 * (cov + cov.transpose()).eval();
      post.covariances.push_back(std::move(cov));
    } else {
      // Mean-field marginals: the inverse of the precision diagonal.
      post.log_det_covariance.push_back(-diag.array().log().sum());
      post.covariances.emplace_back(diag.cwiseInverse());
    }
  }
  return post;
}

GaussianPosterior update_posterior(const FeatureMatrix& features, std::span<const ClassIndex> labels,
                                   const VariationalState& state, const GaussianPrior& prior,
                                   std::size_t num_classes, CovarianceMode mode) {
  if (features.dim != prior.dim()) throw InputError("update_posterior: feature/prior dimension mismatch");
  return update_posterior(block_rows(features), features.rows(), labels, state, prior, num_classes, mode);
}

double expected_bound(std::size_t i, const LogitMoments& moments, const VariationalState& state) {
  const auto ii = static_cast<Eigen::Index>(i);
  const double alpha = state.alpha[ii];
  double total = alpha;
  for (Eigen::Index k = 0; k < moments.mean.cols(); ++k) {
    const double xi = state.xi(ii, k);
    const double d = moments.mean(ii, k) - alpha;
    total += 0.5 * (d - xi) + lambda_fn(xi) * (moments.var(ii, k) + d * d - xi * xi) + softplus(xi);
  }
  return total;
}

double expected_bound_objective(const LogitMoments& moments, std::span<const ClassIndex> labels,
                                const VariationalState& state) {
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    total += expected_bound(i, moments, state) - moments.mean(static_cast<Eigen::Index>(i), labels[i]);
  }
  return total;
}

double kl_to_prior(const GaussianPosterior& posterior, const GaussianPrior& prior) {
  const auto d = static_cast<Eigen::Index>(prior.dim());
  Eigen::LLT<Eigen::MatrixXd> prior_llt(prior.covariance);
  const Eigen::MatrixXd prior_precision = prior_llt.solve(Eigen::MatrixXd::Identity(d, d));
  const double prior_log_det = 2.0 * prior_llt.matrixLLT().diagonal().array().log().sum();
  double total = 0.0;
  for (std::size_t k = 0; k < posterior.num_classes(); ++k) {
    const Eigen::VectorXd diff = posterior.means.row(static_cast<Eigen::Index>(k)).transpose() - prior.mean;
    const Eigen::MatrixXd& cov = posterior.covariances[k];
    const double trace = posterior.mode == CovarianceMode::kFull
                             ? prior_precision.cwiseProduct(cov).sum()
                             : prior_precision.diagonal().dot(cov.col(0));
    total += 0.5 * (trace + diff.dot(prior_precision * diff) - static_cast<double>(d) + prior_log_det -
                    posterior.log_det_covariance[k]);
  }
  return total;
}

PosteriorModel fit(const LabeledSamples& train, const HingeSet& hinges, const Hyperparams& params,
                   std::size_t num_classes, FitTrace* trace) {
  params.validate();
  if (train.size() == 0) throw InputError("fit needs at least one training point");
  if (num_classes == 0) {
    num_classes = *std::max_element(train.labels.begin(), train.labels.end()) + 1;
  }
  num_classes = std::max<std::size_t>(num_classes, 2);
  for (ClassIndex l : train.labels) {
    if (l >= num_classes) throw InputError("training label exceeds the class count");
  }

  const Featurizer featurizer(hinges, params.kernel_cutoff);
  const FeatureMatrix features = featurizer(train.points);
  const std::vector<FeatureBlock> blocks = block_rows(features);
  const GaussianPrior prior =
      GaussianPrior::isotropic(hinges.dim(), params.prior_mean_scale, params.prior_variance);

  VariationalState state = VariationalState::initial(train.size(), num_classes);
  GaussianPosterior posterior;
  for (std::size_t it = 0; it < params.em_iterations; ++it) {
    posterior = update_posterior(blocks, train.size(), train.labels, state, prior, num_classes,
                                 params.covariance_mode);
    const LogitMoments moments = logit_moments(blocks, train.size(), posterior);
    state.alpha = update_alpha(state, moments);
    state.xi = update_xi(state.alpha, moments);
#ifndef NDEBUG
    for (std::size_t i = 0; i < train.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      std::vector<double> z(num_classes), xi(num_classes);
      for (std::size_t k = 0; k < num_classes; ++k) {
        z[k] = moments.mean(ii, static_cast<Eigen::Index>(k));
        xi[k] = state.xi(ii, static_cast<Eigen::Index>(k));
      }
      assert(bouchard_bound(z, state.alpha[ii], xi) >= log_sum_exp(z) - 1e-9);
    }
#endif
    if (trace) {
      const double bound = expected_bound_objective(moments, train.labels, state);
      trace->expected_bound_objective.push_back(bound);
      trace->negative_elbo.push_back(bound + kl_to_prior(posterior, prior));
    }
  }

  PosteriorModel model;
  model.posterior = std::move(posterior);
  model.prior = prior;
  model.hinges = hinges;
  model.params = params;
  return model;
}

namespace {

void softmax_row(const Eigen::MatrixXd& weights, const FeatureMatrix& features, std::size_t i,
                 Eigen::VectorXd& probs) {
  const auto c = weights.rows();
  const auto cols = features.row_cols(i);
  const auto vals = features.row_vals(i);
  probs.resize(c);
  for (Eigen::Index k = 0; k < c; ++k) {
    double z = 0.0;
    for (std::size_t a = 0; a < cols.size(); ++a) z += vals[a] * weights(k, cols[a]);
    probs[k] = z;
  }
  const double m = probs.maxCoeff();
  probs = (probs.array() - m).exp();
  probs /= probs.sum();
}

}  // namespace

double softmax_nll(const Eigen::MatrixXd& weights, const FeatureMatrix& features,
                   std::span<const ClassIndex> labels) {
  double total = 0.0;
  Eigen::VectorXd p;
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const auto cols = features.row_cols(i);
    const auto vals = features.row_vals(i);
    std::vector<double> z(static_cast<std::size_t>(weights.rows()));
    for (Eigen::Index k = 0; k < weights.rows(); ++k) {
      double acc = 0.0;
      for (std::size_t a = 0; a < cols.size(); ++a) acc += vals[a] * weights(k, cols[a]);
      z[static_cast<std::size_t>(k)] = acc;
    }
    total += log_sum_exp(z) - z[labels[i]];
  }
  return total / static_cast<double>(features.rows());
}

Eigen::MatrixXd softmax_nll_gradient(const Eigen::MatrixXd& weights, const FeatureMatrix& features,
                                     std::span<const ClassIndex> labels) {
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(weights.rows(), weights.cols());
  Eigen::VectorXd p;
  const double scale = 1.0 / static_cast<double>(features.rows());
  for (std::size_t i = 0; i < features.rows(); ++i) {
    softmax_row(weights, features, i, p);
    p[labels[i]] -= 1.0;
    const auto cols = features.row_cols(i);
    const auto vals = features.row_vals(i);
    for (Eigen::Index k = 0; k < weights.rows(); ++k) {
      for (std::size_t a = 0; a < cols.size(); ++a) grad(k, cols[a]) += scale * p[k] * vals[a];
    }
  }
  return grad;
}

SgdModel fit_sgd(const LabeledSamples& train, const HingeSet& hinges, const Hyperparams& params,
                 const SgdOptions& options, Rng& rng, std::size_t num_classes) {
  if (!(options.learning_rate > 0.0)) throw InputError("SGD learning rate must be positive");
  if (options.batch_size == 0) throw InputError("SGD batch size must be positive");
  if (train.size() == 0) throw InputError("SGD needs at least one training point");
  if (num_classes == 0) {
    num_classes = *std::max_element(train.labels.begin(), train.labels.end()) + 1;
  }
  num_classes = std::max<std::size_t>(num_classes, 2);

  const Featurizer featurizer(hinges, params.kernel_cutoff);
  const FeatureMatrix features = featurizer(train.points);
  SgdModel model{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(num_classes),
                                       static_cast<Eigen::Index>(hinges.dim())),
                 hinges, params};

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Eigen::VectorXd> batch_grad;
  Eigen::VectorXd p;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      const double step = options.learning_rate / static_cast<double>(end - start);
      batch_grad.clear();
      for (std::size_t b = start; b < end; ++b) {
        softmax_row(model.weights, features, order[b], p);
        p[train.labels[order[b]]] -= 1.0;
        batch_grad.push_back(p);
      }
      for (std::size_t b = start; b < end; ++b) {
        const auto cols = features.row_cols(order[b]);
        const auto vals = features.row_vals(order[b]);
        const Eigen::VectorXd& g = batch_grad[b - start];
        for (Eigen::Index k = 0; k < model.weights.rows(); ++k) {
          for (std::size_t a = 0; a < cols.size(); ++a) model.weights(k, cols[a]) -= step * g[k] * vals[a];
        }
      }
    }
    const double loss = softmax_nll(model.weights, features, train.labels);
    if (!std::isfinite(loss) || !model.weights.allFinite()) {
      throw NumericalError("SGD diverged at epoch " + std::to_string(epoch));
    }
  }
  return model;
}

}  // namespace vprism
