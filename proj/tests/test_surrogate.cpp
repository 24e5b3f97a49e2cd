#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "athpo/domain.hpp"
#include "athpo/errors.hpp"
#include "athpo/rng.hpp"
#include "athpo/surrogate.hpp"

using namespace athpo;

namespace {

std::vector<std::vector<double>> grid_1d(std::initializer_list<double> xs) {
  std::vector<std::vector<double>> out;
  for (double x : xs) out.push_back({x});
  return out;
}

// Independent Matern-5/2 evaluation for the hand-solved posterior oracle.
double matern52_oracle(double a, double b, double length, double signal) {
  const double r = std::fabs(a - b) / length;
  const double u = std::sqrt(5.0) * r;
  return signal * (1.0 + u + u * u / 3.0) * std::exp(-u);
}

// 3x3 linear solve by Gaussian elimination, written apart from the
// production Cholesky path.
std::vector<double> solve3(double m[3][3], std::vector<double> b) {
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::fabs(m[r][col]) > std::fabs(m[pivot][col])) pivot = r;
    std::swap(m[col], m[pivot]);
    std::swap(b[col], b[pivot]);
    for (int r = col + 1; r < 3; ++r) {
      const double f = m[r][col] / m[col][col];
      for (int c = col; c < 3; ++c) m[r][c] -= f * m[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(3);
  for (int r = 2; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < 3; ++c) s -= m[r][c] * x[c];
    x[r] = s / m[r][r];
  }
  return x;
}

SearchSpace encoder_space() {
  SearchSpace s;
  s.st_lr = {1e-3, 1e-2, 1e-1};
  s.st_momentum = {0.0, 0.9};
  s.st_batch = {64, 128};
  s.at_lr = {1e-2, 1e-1};
  s.at_momentum = {0.0, 0.9};
  s.at_batch = {64, 128};
  s.pgd_alpha = {1e-3, 1e-2};
  s.rat_pct = {0, 50, 100};
  s.ae_pct = {50, 100};
  s.epochs = {1, 2, 4, 8, 16};
  s.attack_iters = {1, 5, 10, 20};
  s.epsilon = {0.05};
  return s;
}

}  // namespace

TEST_CASE("expected improvement closed-form anchor values") {
  CHECK(expected_improvement(1.0, 0.0, 1.0) == 0.0);
  CHECK(expected_improvement(2.0, 0.0, 1.0) == 0.0);
  CHECK(expected_improvement(0.5, 0.0, 1.0) == 0.5);  // deterministic gain
  // mu == incumbent, sigma = 1 -> EI = 1/sqrt(2 pi)
  CHECK(expected_improvement(1.0, 1.0, 1.0) ==
        doctest::Approx(0.3989422804014327).epsilon(1e-12));
}

TEST_CASE("expected improvement is non-increasing in the mean") {
  double prev = 1e300;
  for (double mu = -2.0; mu <= 2.0; mu += 0.05) {
    const double ei = expected_improvement(mu, 0.5, 0.3);
    CHECK(ei <= prev + 1e-15);
    CHECK(ei >= 0.0);
    prev = ei;
  }
}

TEST_CASE("expected improvement matches Monte-Carlo on random triples") {
  Rng rng(40);
  for (int trial = 0; trial < 10; ++trial) {
    const double mu = rng.uniform(-1.0, 1.0);
    const double sigma = rng.uniform(0.05, 0.5);
    const double inc = rng.uniform(-1.0, 1.0);
    const double closed = expected_improvement(mu, sigma * sigma, inc);

    double acc = 0.0;
    const int n = 200000;
    for (int i = 0; i < n / 2; ++i) {
      const double z = rng.normal();
      acc += std::max(0.0, inc - (mu + sigma * z));
      acc += std::max(0.0, inc - (mu - sigma * z));  // antithetic pair
    }
    CHECK(std::fabs(acc / n - closed) <= 3e-3);
  }
}

TEST_CASE("zero-noise fit interpolates a smooth function") {
  const auto points = grid_1d({0.0, 0.25, 0.5, 0.75, 1.0});
  std::vector<double> targets;
  for (const auto& p : points) targets.push_back(std::sin(3.0 * p[0]));

  const GPModel gp = fit_gp(points, targets, 0.0, {.seed = 1});
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto pred = gp.predict(points[i]);
    CHECK(std::fabs(pred.mean - targets[i]) <= 1e-6);
    CHECK(pred.variance >= 0.0);
  }
}

TEST_CASE("conflicting duplicate points are absorbed as noise") {
  const auto points = grid_1d({0.3, 0.3, 0.8});
  const std::vector<double> targets = {0.0, 1.0, 0.5};
  const GPModel gp = fit_gp(points, targets, 1e-8, {.seed = 2});
  const auto pred = gp.predict(points[0]);
  CHECK(pred.mean > 0.0);
  CHECK(pred.mean < 1.0);  // posterior sits between the conflicting values
}

TEST_CASE("far from data the posterior reverts to the prior") {
  GPKernelParams params;
  params.log_length_scales = {std::log(0.05)};
  params.log_signal_var = std::log(2.0);
  params.log_noise_var = std::log(1e-6);
  const GPModel gp(params, grid_1d({0.0, 0.02}), {1.0, 1.1});
  const auto pred = gp.predict(std::vector<double>{50.0});
  CHECK(std::fabs(pred.mean - gp.prior_mean()) <= 1e-9);
  CHECK(pred.mean == doctest::Approx(0.0).epsilon(1e-9));  // raw model prior
  CHECK(pred.variance == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("fitted model's prior mean is the target mean") {
  const auto points = grid_1d({0.0, 0.5, 1.0});
  const std::vector<double> targets = {2.0, 4.0, 6.0};
  const GPModel gp = fit_gp(points, targets, 1e-8, {.seed = 3});
  CHECK(gp.prior_mean() == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("posterior matches a hand-computed three-point solve") {
  // dense linear-algebra oracle with known kernel parameters
  const double length = 0.7, signal = 1.3, noise = 0.01;
  const auto xs = std::vector<double>{0.0, 0.5, 1.0};
  const std::vector<double> ys = {1.0, 2.0, 3.0};
  const double q = 0.25;

  double k[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      k[i][j] = matern52_oracle(xs[i], xs[j], length, signal);
      if (i == j) k[i][j] += noise;
    }
  const std::vector<double> alpha = solve3(k, ys);
  double mean = 0.0;
  std::vector<double> kq(3);
  for (int i = 0; i < 3; ++i) {
    kq[i] = matern52_oracle(q, xs[i], length, signal);
    mean += kq[i] * alpha[i];
  }
  double km[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      km[i][j] = matern52_oracle(xs[i], xs[j], length, signal);
      if (i == j) km[i][j] += noise;
    }
  const std::vector<double> w = solve3(km, kq);
  double var = signal;
  for (int i = 0; i < 3; ++i) var -= kq[i] * w[i];

  GPKernelParams params;
  params.log_length_scales = {std::log(length)};
  params.log_signal_var = std::log(signal);
  params.log_noise_var = std::log(noise);
  const GPModel gp(params, grid_1d({0.0, 0.5, 1.0}), ys);
  const auto pred = gp.predict(std::vector<double>{q});
  CHECK(pred.mean == doctest::Approx(mean).epsilon(1e-9));
  CHECK(pred.variance == doctest::Approx(var).epsilon(1e-7));
}

TEST_CASE("log marginal likelihood gradients match finite differences") {
  // central-difference oracle at relative 1e-3
  Rng rng(44);
  const std::size_t n = 8, dims = 2;
  std::vector<std::vector<double>> points(n, std::vector<double>(dims));
  std::vector<double> targets(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& v : points[i]) v = rng.uniform();
    targets[i] = rng.uniform(-1.0, 1.0);
  }
  GPKernelParams params;
  params.log_length_scales = {std::log(0.4), std::log(0.8)};
  params.log_signal_var = std::log(0.9);
  params.log_noise_var = std::log(0.05);

  std::vector<double> grad;
  gp_log_marginal_likelihood(params, points, targets, &grad);

  const double h = 1e-6;
  auto fd_check = [&](double* param, double analytic) {
    const double saved = *param;
    *param = saved + h;
    const double fp = gp_log_marginal_likelihood(params, points, targets);
    *param = saved - h;
    const double fm = gp_log_marginal_likelihood(params, points, targets);
    *param = saved;
    const double fd = (fp - fm) / (2 * h);
    const double scale = std::max({std::fabs(fd), std::fabs(analytic), 1e-8});
    CHECK(std::fabs(fd - analytic) / scale <= 1e-3);
  };
  fd_check(&params.log_length_scales[0], grad[0]);
  fd_check(&params.log_length_scales[1], grad[1]);
  fd_check(&params.log_signal_var, grad[2]);
  fd_check(&params.log_noise_var, grad[3]);
}

TEST_CASE("predictive variance is never negative") {
  Rng rng(45);
  const std::size_t n = 40, dims = 3;
  std::vector<std::vector<double>> points(n, std::vector<double>(dims));
  std::vector<double> targets(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& v : points[i]) v = rng.uniform();
    targets[i] = std::sin(5.0 * points[i][0]) + 0.1 * points[i][1];
  }
  const GPModel gp = fit_gp(points, targets, 1e-10, {.seed = 4});
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<double> q(dims);
    for (double& v : q) v = rng.uniform(-0.5, 1.5);
    CHECK(gp.predict(q).variance >= 0.0);
  }
}

TEST_CASE("fit is deterministic given the restart seed") {
  Rng rng(46);
  const std::size_t n = 12;
  std::vector<std::vector<double>> points(n, std::vector<double>(2));
  std::vector<double> targets(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& v : points[i]) v = rng.uniform();
    targets[i] = points[i][0] * points[i][0];
  }
  const GPModel a = fit_gp(points, targets, 1e-9, {.seed = 7});
  const GPModel b = fit_gp(points, targets, 1e-9, {.seed = 7});
  CHECK(a.params().log_length_scales == b.params().log_length_scales);
  CHECK(a.params().log_signal_var == b.params().log_signal_var);
  CHECK(a.params().log_noise_var == b.params().log_noise_var);
  const std::vector<double> q = {0.3, 0.6};
  CHECK(a.predict(q).mean == b.predict(q).mean);
}

TEST_CASE("kernel is stationary under translation") {
  GPKernelParams params;
  params.log_length_scales = {0.0, 0.0};
  params.log_signal_var = 0.0;
  params.log_noise_var = std::log(1e-4);
  const GPModel gp(params, {{0.0, 0.0}, {1.0, 1.0}}, {0.0, 1.0});
  // translations by exact binary fractions keep the differences bit-equal
  const std::vector<double> a = {0.25, 0.5}, b = {0.125, 0.75};
  const std::vector<double> at = {0.5, 0.875}, bt = {0.375, 1.125};
  CHECK(gp.kernel(a, b) == gp.kernel(at, bt));
}

TEST_CASE("noise floor is respected") {
  const auto points = grid_1d({0.0, 0.5, 1.0, 0.2, 0.9});
  const std::vector<double> targets = {0.0, 1.0, 0.0, 0.8, 0.1};
  const double floor = 0.01;
  const GPModel gp = fit_gp(points, targets, floor, {.seed = 5});
  CHECK(gp.noise_variance() >= floor * (1.0 - 1e-9));
}

TEST_CASE("fit rejects degenerate inputs") {
  CHECK_THROWS_AS(fit_gp(grid_1d({0.5}), {1.0}, 0.0, {}), ConfigError);
  CHECK_THROWS_AS(fit_gp(grid_1d({0.1, 0.2}), {1.0, std::nan("")}, 0.0, {}),
                  ConfigError);
}

TEST_CASE("encoder maps the grid bijectively into the unit cube") {
  const SearchSpace s = encoder_space();
  const SpaceEncoder enc(s);
  const auto configs = enumerate_space(s);

  std::vector<std::vector<double>> seen;
  for (const HPConfig& c : configs)
    for (const FidelityPoint& f : s.fidelity_grid()) {
      const auto v = enc.encode(c, f);
      REQUIRE(v.size() == SpaceEncoder::kDims);
      for (double x : v) {
        CHECK(x >= 0.0);
        CHECK(x <= 1.0 + 1e-12);
      }
      seen.push_back(v);
    }
  std::sort(seen.begin(), seen.end());
  CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
}

TEST_CASE("learning-rate dimensions are log-scaled") {
  const SearchSpace s = encoder_space();
  const SpaceEncoder enc(s);
  HPConfig c;
  c.st_lr = 1e-3;
  c.st_momentum = 0.0;
  c.st_batch = 64;
  c.at_lr = 1e-2;
  c.at_momentum = 0.0;
  c.at_batch = 64;
  c.pgd_alpha = 1e-3;
  c.rat_pct = 0;
  c.ae_pct = 50;
  const FidelityPoint f{16, 20};

  CHECK(enc.encode(c, f)[0] == doctest::Approx(0.0));
  c.st_lr = 1e-2;  // geometric midpoint of the {1e-3,1e-2,1e-1} grid
  CHECK(enc.encode(c, f)[0] == doctest::Approx(0.5));
  c.st_lr = 1e-1;
  CHECK(enc.encode(c, f)[0] == doctest::Approx(1.0));
}

TEST_CASE("full fidelity encodes to one in the fidelity coordinates") {
  const SearchSpace s = encoder_space();
  const SpaceEncoder enc(s);
  HPConfig c;
  c.st_lr = 1e-2;
  c.at_lr = 1e-2;
  c.st_batch = 64;
  c.at_batch = 64;
  c.pgd_alpha = 1e-2;
  c.rat_pct = 50;
  c.ae_pct = 100;
  const auto v = enc.encode(c, s.full_fidelity());
  CHECK(v[9] == 1.0);
  CHECK(v[10] == 1.0);
}
