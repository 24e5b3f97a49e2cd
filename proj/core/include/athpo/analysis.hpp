#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "athpo/domain.hpp"

namespace athpo {

enum class Criterion { Error, AdvError, MeanError };

std::string to_string(Criterion c);
Criterion criterion_from_string(const std::string& s);

struct ReductionRow {
  Criterion criterion = Criterion::Error;
  int rat_pct = 0;
  double epsilon = 0.0;
  double best_same = 0.0;
  double best_diff = 0.0;
  double reduction_pct = 0.0;  // 100 * (same - diff) / same
};

// Best tied (st_* == at_* on lr/momentum/batch) vs best untied config at
// full fidelity, rat_pct pinned, alpha and ae_pct optimized in both arms.
ReductionRow error_reduction(const TabularDataset& ds, Criterion criterion,
                             int rat_pct, double epsilon);

// Empirical CDF over a sample; values are kept sorted and the probability
// at values[i] is (i+1)/n.
struct Cdf {
  std::vector<double> values;

  double at(double x) const;  // P(V <= x)
  double median() const;
  double max() const { return values.back(); }
  double min() const { return values.front(); }
  bool empty() const { return values.empty(); }
};

Cdf empirical_cdf(std::vector<double> values);

struct StConfigReduction {
  double st_lr = 0.0;
  double st_momentum = 0.0;
  int st_batch = 0;
  double best_same = 0.0;
  double best_diff = 0.0;
  double reduction_pct = 0.0;
};

// For every ST-phase triple: best completion with the common HPs tied vs
// freely re-tuned, optimizing alpha, ae_pct and rat_pct in {30,50,70} in
// both arms. Negative reductions are kept.
std::vector<StConfigReduction> per_st_config_reduction(const TabularDataset& ds,
                                                       Criterion criterion,
                                                       double epsilon);

// Sample Pearson coefficient; throws ConfigError on fewer than 2 points or
// zero variance.
double pearson(std::span<const double> xs, std::span<const double> ys);

struct CorrelationReport {
  double epsilon = 0.0;
  int cheap_iters = 0;
  int baseline_iters = 20;
  double r_std = 0.0;
  double r_adv = 0.0;
  // (cheap, baseline) pairs per config at max epochs, seed-averaged
  std::vector<std::pair<double, double>> pairs_std;
  std::vector<std::pair<double, double>> pairs_adv;
};

CorrelationReport fidelity_correlation(const TabularDataset& ds,
                                       double epsilon, int cheap_iters,
                                       int baseline_iters = 20);

struct TimeReductionReport {
  std::string method;  // "fgsm", "pgd5", "pgd10", "st_only"
  Cdf cdf;             // reductions (t_base - t_cheap) / t_base
  std::size_t skipped = 0;
};

// Training-time reduction of the cheaper attack settings w.r.t. the
// baseline PGD iteration count, pooled over matched (config, epochs,
// epsilon) cells; the st_only arm pairs each rat>0 cell with the rat=0
// record sharing its ST triple.
std::vector<TimeReductionReport> time_reduction_cdf(const TabularDataset& ds,
                                                    int baseline_iters = 20);

struct ParetoPoint {
  double std_error = 0.0;
  double adv_error = 0.0;
};

// Indices (input order) of all points not strictly dominated: dominated
// means <= in both coordinates and < in at least one.
std::vector<std::size_t> pareto_frontier(std::span<const ParetoPoint> points);

struct GeomeanResult {
  double value = 0.0;
  std::size_t excluded = 0;  // non-positive inputs dropped
};

GeomeanResult geomean_reduction(std::span<const double> percents);

}  // namespace athpo
