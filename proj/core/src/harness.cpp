#include "athpo/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "athpo/errors.hpp"
#include "athpo/svg.hpp"

namespace athpo {

ReplayOracle::ReplayOracle(const TabularDataset& ds, double epsilon,
                           const SearchSpace& space)
    : space_(space), epsilon_(epsilon) {
  validate(space_);
  const std::vector<HPConfig> configs = enumerate_space(space_);
  const std::vector<FidelityPoint> fids = space_.fidelity_grid();

  std::vector<std::string> missing;
  for (const HPConfig& c : configs) {
    for (const FidelityPoint& f : fids) {
      const auto records = ds.find(c, f, epsilon);
      if (records.empty()) {
        if (missing.size() < 20) {
          std::ostringstream os;
          os << "(st_lr=" << c.st_lr << ", at_lr=" << c.at_lr
             << ", rat=" << c.rat_pct << ", ae=" << c.ae_pct
             << ", epochs=" << f.epochs << ", iters=" << f.attack_iters
             << ", eps=" << epsilon << ")";
          missing.push_back(os.str());
        }
        continue;
      }
      EvalOutcome sum{};
      for (const EvalRecord& r : records) {
        sum.std_error += r.std_error;
        sum.adv_error += r.adv_error;
        sum.cost_s += r.train_time_s;
      }
      const double n = static_cast<double>(records.size());
      table_[{c, f}] = {sum.std_error / n, sum.adv_error / n, sum.cost_s / n};
    }
  }
  if (!missing.empty()) {
    std::string msg = "dataset does not cover the declared space; missing " +
                      std::to_string(missing.size()) + " keys (first 20):";
    for (const std::string& m : missing) msg += "\n  " + m;
    throw CoverageError(msg);
  }
}

EvalOutcome ReplayOracle::lookup(const HPConfig& c,
                                 const FidelityPoint& f) const {
  const auto it = table_.find({c, f});
  if (it == table_.end())
    throw CoverageError("lookup outside the declared space");
  return it->second;
}

Evaluator ReplayOracle::evaluator() const {
  return [this](const HPConfig& c, const FidelityPoint& f) {
    return lookup(c, f);
  };
}

std::string to_string(ReportMode mode) {
  return mode == ReportMode::ObservedIncumbent ? "observed_incumbent"
                                               : "recommendation";
}

std::string OptimizerSpec::name() const {
  switch (kind) {
    case Kind::Random:
      return "random";
    case Kind::BoEi:
      return "bo_ei";
    case Kind::HyperBand:
      return "hyperband";
    case Kind::MfCostAware: {
      const bool e = std::find(mf.dims.begin(), mf.dims.end(),
                               FidelityDim::Epochs) != mf.dims.end();
      const bool k = std::find(mf.dims.begin(), mf.dims.end(),
                               FidelityDim::AttackIters) != mf.dims.end();
      if (e && k) return "mf_epochs_iters";
      return e ? "mf_epochs" : "mf_iters";
    }
  }
  return "unknown";
}

OptimizerSpec OptimizerSpec::parse(const std::string& name) {
  OptimizerSpec spec;
  if (name == "random") {
    spec.kind = Kind::Random;
  } else if (name == "bo_ei") {
    spec.kind = Kind::BoEi;
  } else if (name == "hyperband") {
    spec.kind = Kind::HyperBand;
  } else if (name == "mf_epochs_iters") {
    spec.kind = Kind::MfCostAware;
    spec.mf.dims = {FidelityDim::Epochs, FidelityDim::AttackIters};
  } else if (name == "mf_epochs") {
    spec.kind = Kind::MfCostAware;
    spec.mf.dims = {FidelityDim::Epochs};
  } else if (name == "mf_iters") {
    spec.kind = Kind::MfCostAware;
    spec.mf.dims = {FidelityDim::AttackIters};
  } else {
    throw ConfigError("unknown optimizer: " + name);
  }
  return spec;
}

namespace {

TunerState run_optimizer(const OptimizerSpec& spec, const SearchSpace& space,
                         const Objective& objective, double budget_s,
                         std::uint64_t seed) {
  switch (spec.kind) {
    case OptimizerSpec::Kind::Random:
      return random_search(space, objective, budget_s, seed);
    case OptimizerSpec::Kind::BoEi:
      return bo_ei(space, objective, budget_s, seed, spec.bo);
    case OptimizerSpec::Kind::HyperBand:
      return hyperband(space, objective, spec.hb, budget_s, seed);
    case OptimizerSpec::Kind::MfCostAware:
      return mf_costaware(space, objective, spec.mf, budget_s, seed);
  }
  throw ConfigError("unknown optimizer kind");
}

SeedTrace trace_for_seed(const OptimizerSpec& spec, const ReplayOracle& oracle,
                         std::int64_t seed, double budget_s,
                         double alpha_weight, ReportMode mode) {
  SeedTrace trace;
  trace.seed = seed;
  Objective objective{alpha_weight, oracle.evaluator()};
  TunerState state;
  try {
    state = run_optimizer(spec, oracle.space(), objective, budget_s,
                          static_cast<std::uint64_t>(seed));
  } catch (const std::exception& e) {
    trace.failed = true;
    trace.error = e.what();
    return trace;
  }

  const FidelityPoint full = oracle.space().full_fidelity();
  double best = std::numeric_limits<double>::infinity();
  double best_std = 0.0, best_adv = 0.0;
  bool have_best = false;
  for (std::size_t i = 0; i < state.history.size(); ++i) {
    const HistoryEntry& h = state.history[i];
    if (h.fidelity == full && (!have_best || h.objective < best)) {
      best = h.objective;
      best_std = h.std_error;
      best_adv = h.adv_error;
      have_best = true;
    }
    if (mode == ReportMode::ObservedIncumbent) {
      if (have_best)
        trace.points.push_back(
            {h.cumulative_cost_s, best, best_std, best_adv});
    } else {
      const auto& rec = i < state.recommendation_trace.size()
                            ? state.recommendation_trace[i]
                            : state.incumbent;
      if (rec) {
        // Oracle-assisted scoring at full fidelity; not charged.
        const EvalOutcome out = oracle.lookup(*rec, full);
        trace.points.push_back({h.cumulative_cost_s,
                                objective.value(out.std_error, out.adv_error),
                                out.std_error, out.adv_error});
      }
    }
  }
  return trace;
}

}  // namespace

RunTrace replay(const OptimizerSpec& spec, const ReplayOracle& oracle,
                std::span<const std::int64_t> seeds, double budget_s,
                double alpha_weight, ReportMode mode, int jobs) {
  if (seeds.empty()) throw ConfigError("replay: empty seed list");
  if (budget_s <= 0.0) throw ConfigError("replay: budget must be positive");

  RunTrace run;
  run.optimizer = spec.name();
  run.mode = mode;
  run.budget_s = budget_s;
  run.seeds.resize(seeds.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= seeds.size()) return;
      run.seeds[i] =
          trace_for_seed(spec, oracle, seeds[i], budget_s, alpha_weight, mode);
    }
  };
  const int n_jobs = std::max(1, jobs);
  if (n_jobs == 1 || seeds.size() == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_jobs; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // Aggregate on the uniform grid with last-observation-carried-forward.
  run.grid_t.resize(kTraceGridPoints);
  run.mean.assign(kTraceGridPoints, std::numeric_limits<double>::quiet_NaN());
  run.stddev.assign(kTraceGridPoints,
                    std::numeric_limits<double>::quiet_NaN());
  for (int k = 0; k < kTraceGridPoints; ++k)
    run.grid_t[k] = budget_s * static_cast<double>(k) /
                    static_cast<double>(kTraceGridPoints - 1);

  for (int k = 0; k < kTraceGridPoints; ++k) {
    const double t = run.grid_t[k];
    double sum = 0.0, sum2 = 0.0;
    int n = 0;
    for (const SeedTrace& st : run.seeds) {
      if (st.failed) continue;
      // last point with t_s <= t
      double value = std::numeric_limits<double>::quiet_NaN();
      for (const TracePoint& p : st.points) {
        if (p.t_s <= t)
          value = p.objective;
        else
          break;
      }
      if (std::isnan(value)) continue;
      sum += value;
      sum2 += value * value;
      ++n;
    }
    if (n > 0) {
      const double mean = sum / n;
      run.mean[k] = mean;
      run.stddev[k] =
          n > 1 ? std::sqrt(std::max(0.0, (sum2 - n * mean * mean) / (n - 1)))
                : 0.0;
    }
  }
  return run;
}

double speedup(const RunTrace& a, const RunTrace& b) {
  if (a.grid_t.size() != b.grid_t.size())
    throw ConfigError("speedup: traces use different grids");
  double b_final = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = b.mean.size(); k-- > 0;) {
    if (!std::isnan(b.mean[k])) {
      b_final = b.mean[k];
      break;
    }
  }
  if (std::isnan(b_final)) return std::numeric_limits<double>::infinity();
  const double t_b = b.grid_t.back();
  for (std::size_t k = 0; k < a.mean.size(); ++k) {
    if (!std::isnan(a.mean[k]) && a.mean[k] <= b_final) {
      const double t_a = a.grid_t[k];
      if (t_a <= 0.0) return std::numeric_limits<double>::infinity();
      return t_b / t_a;
    }
  }
  return std::numeric_limits<double>::infinity();
}

void write_seed_traces_csv(const RunTrace& trace, std::ostream& out) {
  out << "seed,t_s,objective,std_error,adv_error\n";
  for (const SeedTrace& st : trace.seeds) {
    if (st.failed) continue;
    for (const TracePoint& p : st.points)
      out << st.seed << ',' << format_double(p.t_s) << ','
          << format_double(p.objective) << ',' << format_double(p.std_error)
          << ',' << format_double(p.adv_error) << '\n';
  }
}

void write_aggregate_csv(const RunTrace& trace, std::ostream& out) {
  out << "t_s,mean,std\n";
  for (std::size_t k = 0; k < trace.grid_t.size(); ++k)
    out << format_double(trace.grid_t[k]) << ','
        << format_double(trace.mean[k]) << ','
        << format_double(trace.stddev[k]) << '\n';
}

std::string summary_json(const std::vector<RunTrace>& traces) {
  nlohmann::json j;
  for (const RunTrace& t : traces) {
    nlohmann::json entry;
    entry["mode"] = to_string(t.mode);
    entry["budget_s"] = t.budget_s;
    double final_mean = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t k = t.mean.size(); k-- > 0;)
      if (!std::isnan(t.mean[k])) {
        final_mean = t.mean[k];
        break;
      }
    entry["final_mean_objective"] =
        std::isnan(final_mean) ? nlohmann::json() : nlohmann::json(final_mean);
    int failed = 0;
    for (const SeedTrace& st : t.seeds) failed += st.failed ? 1 : 0;
    entry["seeds"] = t.seeds.size();
    entry["failed_seeds"] = failed;
    entry["oracle_assisted"] = t.mode == ReportMode::Recommendation;
    j["optimizers"][t.optimizer] = entry;
  }
  for (const RunTrace& a : traces)
    for (const RunTrace& b : traces) {
      if (a.optimizer == b.optimizer) continue;
      const double s = speedup(a, b);
      j["speedups"][a.optimizer + "_vs_" + b.optimizer] =
          std::isinf(s) ? nlohmann::json("inf") : nlohmann::json(s);
    }
  return j.dump(2) + "\n";
}

void write_trace_chart_svg(const std::vector<RunTrace>& traces,
                           std::ostream& out) {
  std::vector<svg::Series> series;
  std::vector<svg::Band> bands;
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b"};
  std::size_t i = 0;
  for (const RunTrace& t : traces) {
    svg::Series s;
    s.label = t.optimizer;
    s.color = colors[i % 6];
    svg::Band band;
    band.color = s.color;
    for (std::size_t k = 0; k < t.grid_t.size(); ++k) {
      if (std::isnan(t.mean[k])) continue;
      s.points.emplace_back(t.grid_t[k], t.mean[k]);
      band.points.emplace_back(t.grid_t[k], t.mean[k] - t.stddev[k],
                               t.mean[k] + t.stddev[k]);
    }
    series.push_back(std::move(s));
    bands.push_back(std::move(band));
    ++i;
  }
  svg::ChartOptions opts;
  opts.title = "Mean objective vs simulated optimization time";
  opts.x_label = "simulated seconds";
  opts.y_label = "objective";
  svg::write_chart(out, opts, series, bands);
}

}  // namespace athpo
