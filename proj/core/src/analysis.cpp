#include "athpo/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <tuple>

#include "athpo/errors.hpp"

namespace athpo {

std::string to_string(Criterion c) {
  switch (c) {
    case Criterion::Error:
      return "error";
    case Criterion::AdvError:
      return "adv_error";
    case Criterion::MeanError:
      return "mean_error";
  }
  return "unknown";
}

Criterion criterion_from_string(const std::string& s) {
  if (s == "error") return Criterion::Error;
  if (s == "adv_error") return Criterion::AdvError;
  if (s == "mean_error") return Criterion::MeanError;
  throw ConfigError("unknown criterion: " + s);
}

namespace {

struct CellMean {
  double std_error = 0.0;
  double adv_error = 0.0;
  double train_time = 0.0;
  int n = 0;

  void add(const EvalRecord& r) {
    std_error += r.std_error;
    adv_error += r.adv_error;
    train_time += r.train_time_s;
    ++n;
  }
  void finalize() {
    std_error /= n;
    adv_error /= n;
    train_time /= n;
  }
};

double criterion_value(const CellMean& m, Criterion c) {
  switch (c) {
    case Criterion::Error:
      return m.std_error;
    case Criterion::AdvError:
      return m.adv_error;
    case Criterion::MeanError:
      return 0.5 * (m.std_error + m.adv_error);
  }
  return 0.0;
}

// Seed-averaged cell values for one epsilon slice.
std::map<std::pair<HPConfig, FidelityPoint>, CellMean> cell_means(
    const TabularDataset& ds, double epsilon) {
  std::map<std::pair<HPConfig, FidelityPoint>, CellMean> cells;
  for (const EvalRecord& r : ds.records()) {
    if (r.epsilon != epsilon) continue;
    cells[{r.config, r.fidelity}].add(r);
  }
  for (auto& [key, cell] : cells) cell.finalize();
  return cells;
}

FidelityPoint max_fidelity_of(
    const std::map<std::pair<HPConfig, FidelityPoint>, CellMean>& cells) {
  FidelityPoint full{0, 0};
  for (const auto& [key, cell] : cells) {
    full.epochs = std::max(full.epochs, key.second.epochs);
    full.attack_iters = std::max(full.attack_iters, key.second.attack_iters);
  }
  return full;
}

bool phases_tied(const HPConfig& c) {
  return c.st_lr == c.at_lr && c.st_momentum == c.at_momentum &&
         c.st_batch == c.at_batch;
}

double reduction_pct(double same, double diff) {
  if (same <= 0.0) return 0.0;  // both minima at zero error
  return 100.0 * (same - diff) / same;
}

}  // namespace

ReductionRow error_reduction(const TabularDataset& ds, Criterion criterion,
                             int rat_pct, double epsilon) {
  const auto cells = cell_means(ds, epsilon);
  if (cells.empty())
    throw ConfigError("error_reduction: no records at this epsilon");
  const FidelityPoint full = max_fidelity_of(cells);

  double best_same = std::numeric_limits<double>::infinity();
  double best_diff = std::numeric_limits<double>::infinity();
  for (const auto& [key, cell] : cells) {
    const auto& [config, fid] = key;
    if (fid != full || config.rat_pct != rat_pct) continue;
    const double v = criterion_value(cell, criterion);
    best_diff = std::min(best_diff, v);
    if (phases_tied(config)) best_same = std::min(best_same, v);
  }
  if (!std::isfinite(best_diff))
    throw ConfigError("error_reduction: empty untied subspace at rat_pct=" +
                      std::to_string(rat_pct));
  if (!std::isfinite(best_same))
    throw ConfigError("error_reduction: empty tied subspace at rat_pct=" +
                      std::to_string(rat_pct));
  return {criterion, rat_pct, epsilon, best_same, best_diff,
          reduction_pct(best_same, best_diff)};
}

Cdf empirical_cdf(std::vector<double> values) {
  if (values.empty()) throw ConfigError("empirical_cdf: empty sample");
  std::sort(values.begin(), values.end());
  return Cdf{std::move(values)};
}

double Cdf::at(double x) const {
  const auto it = std::upper_bound(values.begin(), values.end(), x);
  return static_cast<double>(it - values.begin()) /
         static_cast<double>(values.size());
}

double Cdf::median() const {
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<StConfigReduction> per_st_config_reduction(const TabularDataset& ds,
                                                       Criterion criterion,
                                                       double epsilon) {
  const auto cells = cell_means(ds, epsilon);
  if (cells.empty())
    throw ConfigError("per_st_config_reduction: no records at this epsilon");
  const FidelityPoint full = max_fidelity_of(cells);

  // Both arms restrict the mixing ratio to the interior grid values, as in
  // the same-vs-different study.
  auto interior_rat = [](int rat) {
    return rat == 30 || rat == 50 || rat == 70;
  };

  std::map<std::tuple<double, double, int>,
           std::pair<double, double>>
      arms;  // st triple -> (best_same, best_diff)
  for (const auto& [key, cell] : cells) {
    const auto& [config, fid] = key;
    if (fid != full || !interior_rat(config.rat_pct)) continue;
    const double v = criterion_value(cell, criterion);
    const auto st_key =
        std::make_tuple(config.st_lr, config.st_momentum, config.st_batch);
    auto it = arms.find(st_key);
    if (it == arms.end())
      it = arms
               .emplace(st_key,
                        std::make_pair(std::numeric_limits<double>::infinity(),
                                       std::numeric_limits<double>::infinity()))
               .first;
    it->second.second = std::min(it->second.second, v);
    if (phases_tied(config)) it->second.first = std::min(it->second.first, v);
  }

  std::vector<StConfigReduction> out;
  for (const auto& [st_key, best] : arms) {
    if (!std::isfinite(best.first) || !std::isfinite(best.second)) continue;
    StConfigReduction row;
    row.st_lr = std::get<0>(st_key);
    row.st_momentum = std::get<1>(st_key);
    row.st_batch = std::get<2>(st_key);
    row.best_same = best.first;
    row.best_diff = best.second;
    row.reduction_pct = reduction_pct(best.first, best.second);
    out.push_back(row);
  }
  if (out.empty())
    throw ConfigError(
        "per_st_config_reduction: no ST setting has both a tied and an "
        "untied completion");
  return out;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size())
    throw ConfigError("pearson: length mismatch");
  const std::size_t n = xs.size();
  if (n < 2) throw ConfigError("pearson: need at least 2 points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw ConfigError("pearson: zero variance, correlation undefined");
  return sxy / std::sqrt(sxx * syy);
}

CorrelationReport fidelity_correlation(const TabularDataset& ds,
                                       double epsilon, int cheap_iters,
                                       int baseline_iters) {
  const auto cells = cell_means(ds, epsilon);
  if (cells.empty())
    throw ConfigError("fidelity_correlation: no records at this epsilon");
  int max_epochs = 0;
  for (const auto& [key, cell] : cells)
    max_epochs = std::max(max_epochs, key.second.epochs);

  CorrelationReport report;
  report.epsilon = epsilon;
  report.cheap_iters = cheap_iters;
  report.baseline_iters = baseline_iters;

  for (const auto& [key, cell] : cells) {
    const auto& [config, fid] = key;
    if (fid.epochs != max_epochs || fid.attack_iters != cheap_iters) continue;
    const auto base =
        cells.find({config, FidelityPoint{max_epochs, baseline_iters}});
    if (base == cells.end()) continue;
    report.pairs_std.emplace_back(cell.std_error, base->second.std_error);
    report.pairs_adv.emplace_back(cell.adv_error, base->second.adv_error);
  }
  if (report.pairs_std.size() < 2)
    throw ConfigError("fidelity_correlation: fewer than 2 matched configs");

  std::vector<double> xs, ys;
  for (const auto& [cheap, base] : report.pairs_std) {
    xs.push_back(cheap);
    ys.push_back(base);
  }
  report.r_std = pearson(xs, ys);
  xs.clear();
  ys.clear();
  for (const auto& [cheap, base] : report.pairs_adv) {
    xs.push_back(cheap);
    ys.push_back(base);
  }
  report.r_adv = pearson(xs, ys);
  return report;
}

std::vector<TimeReductionReport> time_reduction_cdf(const TabularDataset& ds,
                                                    int baseline_iters) {
  // Seed-averaged time per (config, epochs, iters, epsilon).
  std::map<std::tuple<HPConfig, int, int, double>, std::pair<double, int>>
      times;
  for (const EvalRecord& r : ds.records()) {
    auto& [sum, n] =
        times[{r.config, r.fidelity.epochs, r.fidelity.attack_iters,
               r.epsilon}];
    sum += r.train_time_s;
    ++n;
  }
  auto mean_time = [&](const HPConfig& c, int epochs, int iters,
                       double eps) -> std::optional<double> {
    const auto it = times.find({c, epochs, iters, eps});
    if (it == times.end()) return std::nullopt;
    return it->second.first / it->second.second;
  };

  // rat=0 twin per ST triple, keyed by (st triple, epochs, epsilon).
  std::map<std::tuple<double, double, int, int, double>, double> st_only;
  for (const auto& [key, agg] : times) {
    const auto& [config, epochs, iters, eps] = key;
    if (config.rat_pct != 0 || iters != baseline_iters) continue;
    const auto st_key = std::make_tuple(config.st_lr, config.st_momentum,
                                        config.st_batch, epochs, eps);
    if (!st_only.count(st_key))
      st_only[st_key] = agg.first / agg.second;  // first key wins, sorted map
  }

  struct Method {
    std::string name;
    int iters;  // 0 marks the st_only arm
  };
  const Method methods[] = {{"fgsm", 1}, {"pgd5", 5}, {"pgd10", 10},
                            {"st_only", 0}};

  std::vector<TimeReductionReport> out;
  for (const Method& m : methods) {
    TimeReductionReport report;
    report.method = m.name;
    std::vector<double> reductions;
    for (const auto& [key, agg] : times) {
      const auto& [config, epochs, iters, eps] = key;
      if (iters != baseline_iters || config.rat_pct == 0) continue;
      const double t_base = agg.first / agg.second;
      if (t_base <= 0.0) {
        ++report.skipped;
        continue;
      }
      std::optional<double> t_cheap;
      if (m.iters > 0) {
        t_cheap = mean_time(config, epochs, m.iters, eps);
      } else {
        const auto it = st_only.find(std::make_tuple(
            config.st_lr, config.st_momentum, config.st_batch, epochs, eps));
        if (it != st_only.end()) t_cheap = it->second;
      }
      if (!t_cheap) {
        ++report.skipped;
        continue;
      }
      reductions.push_back((t_base - *t_cheap) / t_base);
    }
    if (!reductions.empty()) report.cdf = empirical_cdf(std::move(reductions));
    out.push_back(std::move(report));
  }
  return out;
}

std::vector<std::size_t> pareto_frontier(std::span<const ParetoPoint> points) {
  if (points.empty()) throw ConfigError("pareto_frontier: empty input");
  std::vector<std::size_t> frontier;
  for (std::size_t i = 0; i < points.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < points.size() && !dominated; ++j) {
      if (i == j) continue;
      const bool leq = points[j].std_error <= points[i].std_error &&
                       points[j].adv_error <= points[i].adv_error;
      const bool strict = points[j].std_error < points[i].std_error ||
                          points[j].adv_error < points[i].adv_error;
      dominated = leq && strict;
    }
    if (!dominated) frontier.push_back(i);
  }
  return frontier;
}

GeomeanResult geomean_reduction(std::span<const double> percents) {
  GeomeanResult result;
  double log_sum = 0.0;
  std::size_t n = 0;
  for (double v : percents) {
    if (v <= 0.0) {
      ++result.excluded;
      continue;
    }
    log_sum += std::log(v);
    ++n;
  }
  if (n == 0)
    throw ConfigError("geomean_reduction: no positive values remain");
  result.value = std::exp(log_sum / static_cast<double>(n));
  return result;
}

}  // namespace athpo
