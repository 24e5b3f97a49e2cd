#include "athpo/surrogate.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "athpo/errors.hpp"
#include "athpo/rng.hpp"

namespace athpo {

namespace {

constexpr double kSqrt5 = 2.2360679774997896964091736687747;
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kJitterStart = 1e-10;
constexpr double kJitterMax = 1e-4;

double matern52(double r, double signal_var) {
  const double u = kSqrt5 * r;
  return signal_var * (1.0 + u + u * u / 3.0) * std::exp(-u);
}

double scaled_dist(std::span<const double> a, std::span<const double> b,
                   const std::vector<double>& log_ls) {
  double r2 = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = (a[d] - b[d]) / std::exp(log_ls[d]);
    r2 += diff * diff;
  }
  return std::sqrt(r2);
}

}  // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); }

double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
}

double expected_improvement(double mean, double variance, double incumbent) {
  const double sigma = std::sqrt(std::max(variance, 0.0));
  if (sigma < 1e-12) return std::max(0.0, incumbent - mean);
  const double g = (incumbent - mean) / sigma;
  return std::max(0.0, sigma * (g * normal_cdf(g) + normal_pdf(g)));
}

// ---------------------------------------------------------------------------
// SpaceEncoder

double SpaceEncoder::Scale::apply(double v) const {
  const double t = log10 ? std::log10(v) : v;
  if (hi == lo) return 0.0;
  return (t - lo) / (hi - lo);
}

SpaceEncoder::SpaceEncoder(const SearchSpace& space) {
  validate(space);
  auto minmax_d = [](const std::vector<double>& v, bool log) {
    Scale s;
    s.log10 = log;
    double lo = 1e300, hi = -1e300;
    for (double x : v) {
      const double t = log ? std::log10(x) : x;
      lo = std::min(lo, t);
      hi = std::max(hi, t);
    }
    s.lo = lo;
    s.hi = hi;
    return s;
  };
  auto minmax_i = [&](const std::vector<int>& v) {
    std::vector<double> tmp(v.begin(), v.end());
    return minmax_d(tmp, false);
  };
  const auto& at_lr = space.tie_phases && space.at_lr.empty() ? space.st_lr
                                                              : space.at_lr;
  const auto& at_m = space.tie_phases && space.at_momentum.empty()
                         ? space.st_momentum
                         : space.at_momentum;
  const auto& at_b = space.tie_phases && space.at_batch.empty()
                         ? space.st_batch
                         : space.at_batch;
  hp_[0] = minmax_d(space.st_lr, true);
  hp_[1] = minmax_d(space.st_momentum, false);
  hp_[2] = minmax_i(space.st_batch);
  hp_[3] = minmax_d(at_lr, true);
  hp_[4] = minmax_d(at_m, false);
  hp_[5] = minmax_i(at_b);
  hp_[6] = minmax_d(space.pgd_alpha, true);
  hp_[7] = minmax_i(space.rat_pct);
  hp_[8] = minmax_i(space.ae_pct);
  max_epochs_ = static_cast<double>(space.max_epochs());
  max_iters_ = static_cast<double>(space.max_attack_iters());
}

std::vector<double> SpaceEncoder::encode(const HPConfig& c,
                                         const FidelityPoint& f) const {
  std::vector<double> v(kDims);
  v[0] = hp_[0].apply(c.st_lr);
  v[1] = hp_[1].apply(c.st_momentum);
  v[2] = hp_[2].apply(c.st_batch);
  v[3] = hp_[3].apply(c.at_lr);
  v[4] = hp_[4].apply(c.at_momentum);
  v[5] = hp_[5].apply(c.at_batch);
  v[6] = hp_[6].apply(c.pgd_alpha);
  v[7] = hp_[7].apply(c.rat_pct);
  v[8] = hp_[8].apply(c.ae_pct);
  v[9] = f.epochs / max_epochs_;
  v[10] = f.attack_iters / max_iters_;
  return v;
}

// ---------------------------------------------------------------------------
// GPModel

double GPModel::kernel(std::span<const double> a,
                       std::span<const double> b) const {
  return matern52(scaled_dist(a, b, params_.log_length_scales),
                  std::exp(params_.log_signal_var));
}

namespace {

// Factorize K + (noise + jitter) I, escalating jitter; returns lower
// Cholesky in L (row-major) or throws FitError.
void factorize(const std::vector<std::vector<double>>& points,
               const GPKernelParams& params, std::vector<double>& chol) {
  const std::size_t n = points.size();
  const double signal = std::exp(params.log_signal_var);
  const double noise = std::exp(params.log_noise_var);
  Eigen::MatrixXd k(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = matern52(
          scaled_dist(points[i], points[j], params.log_length_scales), signal);
      k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      k(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  }
  for (double jitter = kJitterStart; jitter <= kJitterMax * 1.0001;
       jitter *= 10.0) {
    Eigen::MatrixXd kj = k;
    kj.diagonal().array() += noise + jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(kj);
    if (llt.info() == Eigen::Success) {
      const Eigen::MatrixXd l = llt.matrixL();
      chol.assign(n * n, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j)
          chol[i * n + j] =
              l(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      return;
    }
  }
  throw FitError("GP covariance not positive definite at maximum jitter");
}

// Forward solve L v = b.
std::vector<double> solve_lower(const std::vector<double>& chol,
                                std::span<const double> b) {
  const std::size_t n = b.size();
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t j = 0; j < i; ++j) s -= chol[i * n + j] * v[j];
    v[i] = s / chol[i * n + i];
  }
  return v;
}

// Backward solve L^T w = v.
std::vector<double> solve_upper(const std::vector<double>& chol,
                                std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<double> w(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = v[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= chol[j * n + i] * w[j];
    w[i] = s / chol[i * n + i];
  }
  return w;
}

}  // namespace

GPModel::GPModel(GPKernelParams params, std::vector<std::vector<double>> points,
                 std::vector<double> targets)
    : params_(std::move(params)),
      points_(std::move(points)),
      targets_std_(std::move(targets)) {
  if (points_.size() < 1 || points_.size() != targets_std_.size())
    throw ConfigError("GPModel: points/targets size mismatch");
  const std::size_t dims = points_.front().size();
  if (params_.log_length_scales.size() != dims)
    throw ConfigError("GPModel: one length scale per input dimension");
  for (double t : targets_std_)
    if (!std::isfinite(t)) throw ConfigError("GPModel: non-finite target");

  factorize(points_, params_, chol_);
  const std::size_t n = points_.size();
  alpha_ = solve_upper(chol_, solve_lower(chol_, targets_std_));

  double quad = 0.0, logdet = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    quad += targets_std_[i] * alpha_[i];
    logdet += std::log(chol_[i * n + i]);
  }
  lml_ = -0.5 * quad - logdet - 0.5 * static_cast<double>(n) * kLog2Pi;
}

double GPModel::signal_variance() const {
  return std::exp(params_.log_signal_var);
}

double GPModel::noise_variance() const {
  return std::exp(params_.log_noise_var);
}

GPModel::Prediction GPModel::predict(std::span<const double> point) const {
  const std::size_t n = points_.size();
  std::vector<double> ks(n);
  for (std::size_t i = 0; i < n; ++i) ks[i] = kernel(points_[i], point);
  double mean = target_mean_;
  for (std::size_t i = 0; i < n; ++i) mean += ks[i] * alpha_[i];
  const std::vector<double> v = solve_lower(chol_, ks);
  double var = signal_variance();
  for (double x : v) var -= x * x;
  return {mean, std::max(var, 0.0)};
}

std::vector<double> GPModel::whitened_cross(
    std::span<const double> point) const {
  const std::size_t n = points_.size();
  std::vector<double> ks(n);
  for (std::size_t i = 0; i < n; ++i) ks[i] = kernel(points_[i], point);
  return solve_lower(chol_, ks);
}

double GPModel::posterior_cov(std::span<const double> a,
                              std::span<const double> b) const {
  const std::vector<double> va = whitened_cross(a);
  const std::vector<double> vb = whitened_cross(b);
  double cov = kernel(a, b);
  for (std::size_t i = 0; i < va.size(); ++i) cov -= va[i] * vb[i];
  return cov;
}

// Lets fit_gp install the standardization offset after construction.
struct GPFitAccess {
  static void set_prior_mean(GPModel& m, double mean) {
    m.target_mean_ = mean;
  }
};

double gp_log_marginal_likelihood(
    const GPKernelParams& params,
    const std::vector<std::vector<double>>& points,
    const std::vector<double>& targets, std::vector<double>* grad) {
  const std::size_t n = points.size();
  const std::size_t dims = points.front().size();
  const double signal = std::exp(params.log_signal_var);
  const double noise = std::exp(params.log_noise_var);

  Eigen::MatrixXd k(n, n);
  Eigen::MatrixXd r_mat(n, n);  // scaled distances, reused by the gradient
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double r =
          scaled_dist(points[i], points[j], params.log_length_scales);
      r_mat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r;
      r_mat(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = r;
      const double v = matern52(r, signal);
      k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      k(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }

  Eigen::MatrixXd kn = k;
  kn.diagonal().array() += noise;
  Eigen::LLT<Eigen::MatrixXd> llt(kn);
  double jitter = 0.0;
  if (llt.info() != Eigen::Success) {
    for (jitter = kJitterStart; jitter <= kJitterMax * 1.0001; jitter *= 10.0) {
      Eigen::MatrixXd kj = kn;
      kj.diagonal().array() += jitter;
      llt.compute(kj);
      if (llt.info() == Eigen::Success) break;
    }
    if (llt.info() != Eigen::Success)
      throw FitError("GP covariance not positive definite at maximum jitter");
  }

  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) y(static_cast<Eigen::Index>(i)) = targets[i];
  const Eigen::VectorXd alpha = llt.solve(y);
  const double logdet =
      Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  const double lml = -0.5 * y.dot(alpha) - logdet -
                     0.5 * static_cast<double>(n) * kLog2Pi;
  if (!grad) return lml;

  const Eigen::MatrixXd kinv =
      llt.solve(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n),
                                          static_cast<Eigen::Index>(n)));
  const Eigen::MatrixXd w = alpha * alpha.transpose() - kinv;

  grad->assign(dims + 2, 0.0);
  // d k / d log l_d = (5 sigma^2 / 3) e^{-u} (1+u) (diff_d / l_d)^2
  for (std::size_t d = 0; d < dims; ++d) {
    const double ls = std::exp(params.log_length_scales[d]);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double u = kSqrt5 * r_mat(static_cast<Eigen::Index>(i),
                                        static_cast<Eigen::Index>(j));
        const double diff = (points[i][d] - points[j][d]) / ls;
        const double dk =
            (5.0 * signal / 3.0) * std::exp(-u) * (1.0 + u) * diff * diff;
        acc += w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *
               dk;
      }
    (*grad)[d] = 0.5 * acc;
  }
  // d k / d log sigma_f^2 = k
  {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        acc += w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *
               k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    (*grad)[dims] = 0.5 * acc;
  }
  // d K / d log sigma_n^2 = sigma_n^2 I
  (*grad)[dims + 1] = 0.5 * noise * w.trace();
  return lml;
}

GPModel fit_gp(std::vector<std::vector<double>> points,
               std::vector<double> targets, double noise_floor,
               const GPFitOptions& opts) {
  if (points.size() < 2) throw ConfigError("fit_gp needs at least 2 points");
  if (points.size() != targets.size())
    throw ConfigError("fit_gp: points/targets size mismatch");
  for (double t : targets)
    if (!std::isfinite(t)) throw ConfigError("fit_gp: non-finite target");
  if (noise_floor < 0.0) throw ConfigError("fit_gp: negative noise floor");

  const std::size_t n = points.size();
  const std::size_t dims = points.front().size();

  // Standardize targets for the optimization; fitted variances convert back.
  double mean = std::accumulate(targets.begin(), targets.end(), 0.0) /
                static_cast<double>(n);
  double var = 0.0;
  for (double t : targets) var += (t - mean) * (t - mean);
  var /= static_cast<double>(n);
  const double scale = var > 1e-300 ? std::sqrt(var) : 1.0;
  std::vector<double> y_std(n);
  for (std::size_t i = 0; i < n; ++i) y_std[i] = (targets[i] - mean) / scale;

  const double floor_std = noise_floor / (scale * scale);
  const double log_noise_lo = std::log(std::max(floor_std, 1e-12));

  auto clamp_params = [&](GPKernelParams& p) {
    for (double& v : p.log_length_scales) v = std::clamp(v, -6.0, 6.0);
    p.log_signal_var = std::clamp(p.log_signal_var, -12.0, 6.0);
    p.log_noise_var = std::clamp(p.log_noise_var, log_noise_lo, 2.0);
  };

  auto eval = [&](const GPKernelParams& p, std::vector<double>* g) {
    try {
      return gp_log_marginal_likelihood(p, points, y_std, g);
    } catch (const FitError&) {
      return -1e300;
    }
  };

  Rng rng(mix_seed(opts.seed, 0x67504F41ULL));
  GPKernelParams best;
  double best_lml = -1e301;

  for (int restart = 0; restart < std::max(1, opts.restarts); ++restart) {
    GPKernelParams p;
    if (restart == 0 && opts.warm_start &&
        opts.warm_start->log_length_scales.size() == dims) {
      p = *opts.warm_start;
    } else if (restart == 0) {
      // deterministic anchor: moderate scales with noise at the floor, so
      // noiseless data interpolates instead of hiding in the noise term
      p.log_length_scales.assign(dims, std::log(0.5));
      p.log_signal_var = 0.0;
      p.log_noise_var = log_noise_lo;
    } else {
      p.log_length_scales.resize(dims);
      for (double& v : p.log_length_scales)
        v = rng.uniform(std::log(0.1), std::log(2.0));
      p.log_signal_var = rng.uniform(std::log(0.2), std::log(2.0));
      p.log_noise_var =
          rng.uniform(std::max(log_noise_lo, std::log(1e-8)), std::log(0.2));
    }
    clamp_params(p);

    std::vector<double> grad;
    double f = eval(p, opts.max_iters > 0 ? &grad : nullptr);
    double step = 0.1;
    for (int it = 0; it < opts.max_iters && step > 1e-6; ++it) {
      GPKernelParams trial = p;
      for (std::size_t d = 0; d < dims; ++d)
        trial.log_length_scales[d] += step * grad[d];
      trial.log_signal_var += step * grad[dims];
      trial.log_noise_var += step * grad[dims + 1];
      clamp_params(trial);
      std::vector<double> trial_grad;
      const double f_trial = eval(trial, &trial_grad);
      if (f_trial > f) {
        p = std::move(trial);
        f = f_trial;
        grad = std::move(trial_grad);
        step *= 1.2;
      } else {
        step *= 0.5;
      }
    }
    if (f > best_lml) {
      best_lml = f;
      best = p;
    }
  }
  if (best_lml <= -1e300)
    throw FitError("GP fit failed: no restart produced a valid factorization");

  // Convert standardized variances back to target units.
  const double log_s2 = 2.0 * std::log(scale);
  best.log_signal_var += log_s2;
  best.log_noise_var += log_s2;

  std::vector<double> y_orig(n);
  for (std::size_t i = 0; i < n; ++i) y_orig[i] = targets[i] - mean;
  GPModel model(std::move(best), std::move(points), std::move(y_orig));
  GPFitAccess::set_prior_mean(model, mean);
  return model;
}

}  // namespace athpo
