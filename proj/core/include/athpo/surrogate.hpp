#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "athpo/domain.hpp"

namespace athpo {

// Maps (config, fidelity) onto [0,1]^11: each HP dimension min-max scaled
// over its candidate set (learning rates and pgd_alpha in log10 first),
// then the two fidelity dimensions as value/max. Injective on the grid.
class SpaceEncoder {
 public:
  explicit SpaceEncoder(const SearchSpace& space);

  static constexpr std::size_t kDims = 11;
  std::vector<double> encode(const HPConfig& c, const FidelityPoint& f) const;

 private:
  struct Scale {
    double lo = 0.0, hi = 1.0;
    bool log10 = false;
    double apply(double v) const;
  };
  Scale hp_[9];
  double max_epochs_ = 1.0;
  double max_iters_ = 1.0;
};

struct GPKernelParams {
  std::vector<double> log_length_scales;  // one per input dimension
  double log_signal_var = 0.0;
  double log_noise_var = -18.0;
};

// Matern-5/2 ARD Gaussian-process regressor. Targets are standardized
// internally; the prior mean reported by prior_mean() is the target mean.
// Construction factorizes the training covariance once (jitter escalates
// 1e-10 x10 up to 1e-4 before FitError).
class GPModel {
 public:
  GPModel(GPKernelParams params, std::vector<std::vector<double>> points,
          std::vector<double> targets);

  struct Prediction {
    double mean = 0.0;
    double variance = 0.0;
  };
  Prediction predict(std::span<const double> point) const;

  // Posterior covariance between two query points.
  double posterior_cov(std::span<const double> a,
                       std::span<const double> b) const;

  // L^-1 k(X, point). posterior_cov(a, b) equals
  // kernel(a,b) - dot(whitened_cross(a), whitened_cross(b)); callers that
  // score many pairs cache these vectors.
  std::vector<double> whitened_cross(std::span<const double> point) const;

  double log_marginal_likelihood() const { return lml_; }
  double prior_mean() const { return target_mean_; }
  double signal_variance() const;
  double noise_variance() const;
  const GPKernelParams& params() const { return params_; }
  std::size_t train_size() const { return points_.size(); }
  const std::vector<std::vector<double>>& train_points() const {
    return points_;
  }

  double kernel(std::span<const double> a, std::span<const double> b) const;

 private:
  GPKernelParams params_;
  std::vector<std::vector<double>> points_;
  std::vector<double> targets_std_;  // standardized
  double target_mean_ = 0.0, target_scale_ = 1.0;
  std::vector<double> chol_;   // lower Cholesky of K + noise I, row-major
  std::vector<double> alpha_;  // (K + noise I)^-1 y
  double lml_ = 0.0;

  friend struct GPFitAccess;
};

struct GPFitOptions {
  int restarts = 8;
  int max_iters = 60;
  std::uint64_t seed = 0;
  // Warm start from these params (used as restart 0) when set.
  const GPKernelParams* warm_start = nullptr;
};

// Kernel hyper-parameters chosen by maximizing the log marginal likelihood
// with seeded multi-start gradient ascent; noise variance is kept at or
// above noise_floor. Needs >= 2 points and finite targets.
GPModel fit_gp(std::vector<std::vector<double>> points,
               std::vector<double> targets, double noise_floor,
               const GPFitOptions& opts = {});

// Log marginal likelihood and its gradient w.r.t. the log hyper-parameters
// (length scales, signal var, noise var), exposed for the gradient checks.
double gp_log_marginal_likelihood(const GPKernelParams& params,
                                  const std::vector<std::vector<double>>& points,
                                  const std::vector<double>& targets,
                                  std::vector<double>* grad = nullptr);

// EI under minimization: sigma*(g*Phi(g) + phi(g)) with
// g = (incumbent - mean)/sigma; collapses to max(0, incumbent - mean)
// when sigma < 1e-12.
double expected_improvement(double mean, double variance, double incumbent);

double normal_cdf(double z);
double normal_pdf(double z);

}  // namespace athpo
