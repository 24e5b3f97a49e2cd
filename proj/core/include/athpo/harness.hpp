#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "athpo/domain.hpp"
#include "athpo/optimizers.hpp"

namespace athpo {

// Total lookup table over (config, fidelity) at one epsilon; multi-seed
// records are averaged at construction. Coverage gaps are a construction
// error, never a runtime one.
class ReplayOracle {
 public:
  ReplayOracle(const TabularDataset& ds, double epsilon,
               const SearchSpace& space);

  EvalOutcome lookup(const HPConfig& c, const FidelityPoint& f) const;
  Evaluator evaluator() const;
  const SearchSpace& space() const { return space_; }
  double epsilon() const { return epsilon_; }

 private:
  SearchSpace space_;
  double epsilon_;
  std::map<std::pair<HPConfig, FidelityPoint>, EvalOutcome> table_;
};

// Observed-incumbent reporting uses the best full-fidelity observation so
// far; Recommendation scores the optimizer's current suggestion at full
// fidelity from the oracle without charging the clock (flagged in output).
enum class ReportMode { ObservedIncumbent, Recommendation };

std::string to_string(ReportMode mode);

struct TracePoint {
  double t_s = 0.0;
  double objective = 0.0;
  double std_error = 0.0;
  double adv_error = 0.0;
};

struct SeedTrace {
  std::int64_t seed = 0;
  std::vector<TracePoint> points;
  bool failed = false;
  std::string error;
};

struct RunTrace {
  std::string optimizer;
  ReportMode mode = ReportMode::ObservedIncumbent;
  double budget_s = 0.0;
  std::vector<SeedTrace> seeds;
  // Aggregate on a uniform time grid via last-observation-carried-forward;
  // grid rows where no seed has an observation yet hold NaN.
  std::vector<double> grid_t;
  std::vector<double> mean;
  std::vector<double> stddev;
};

struct OptimizerSpec {
  enum class Kind { Random, BoEi, HyperBand, MfCostAware };
  Kind kind = Kind::Random;
  BoOptions bo;
  HyperBandOptions hb;
  MfOptions mf;

  std::string name() const;
  static OptimizerSpec parse(const std::string& name);
};

inline constexpr int kTraceGridPoints = 200;

// Runs the optimizer once per seed against the oracle, charging each
// evaluation's train_time to a simulated clock. Failed seeds are excluded
// from aggregates and carry their error text.
RunTrace replay(const OptimizerSpec& spec, const ReplayOracle& oracle,
                std::span<const std::int64_t> seeds, double budget_s,
                double alpha_weight, ReportMode mode, int jobs = 1);

// T_B / T_A where T_A is the first grid time at which a's mean incumbent
// reaches b's final mean incumbent and T_B is b's total time; +inf when a
// never reaches it.
double speedup(const RunTrace& a, const RunTrace& b);

void write_seed_traces_csv(const RunTrace& trace, std::ostream& out);
void write_aggregate_csv(const RunTrace& trace, std::ostream& out);

// summary.json: per-optimizer final incumbents plus every ordered pairwise
// speedup.
std::string summary_json(const std::vector<RunTrace>& traces);

// Mean +/- stddev band chart across all traces.
void write_trace_chart_svg(const std::vector<RunTrace>& traces,
                           std::ostream& out);

}  // namespace athpo
