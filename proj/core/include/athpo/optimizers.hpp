#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "athpo/domain.hpp"

namespace athpo {

struct EvalOutcome {
  double std_error = 0.0;
  double adv_error = 0.0;
  double cost_s = 0.0;
};

using Evaluator = std::function<EvalOutcome(const HPConfig&, const FidelityPoint&)>;

// Scalarized tuning goal: alpha_weight * std_error + (1-alpha_weight) *
// adv_error, both taken at full fidelity for the final ranking.
struct Objective {
  double alpha_weight = 0.5;
  Evaluator evaluator;

  double value(double std_error, double adv_error) const {
    return alpha_weight * std_error + (1.0 - alpha_weight) * adv_error;
  }
};

struct HistoryEntry {
  HPConfig config;
  FidelityPoint fidelity;
  double objective = 0.0;
  double std_error = 0.0;
  double adv_error = 0.0;
  double cost_s = 0.0;
  double cumulative_cost_s = 0.0;
};

struct TunerState {
  std::vector<HistoryEntry> history;
  std::optional<HPConfig> incumbent;  // best full-fidelity observation
  double incumbent_value = 0.0;
  double incumbent_std = 0.0;
  double incumbent_adv = 0.0;
  // Current suggestion after each evaluation; equals the incumbent for the
  // model-free optimizers, the posterior argmin for mf_costaware.
  std::vector<std::optional<HPConfig>> recommendation_trace;
  std::optional<HPConfig> recommendation;
  std::uint64_t seed = 0;
  double budget_s = 0.0;
  bool space_exhausted = false;
  int surrogate_failures = 0;  // rounds that fell back to random picks
};

// Uniform sampling without replacement, full fidelity only.
TunerState random_search(const SearchSpace& space, const Objective& objective,
                         double budget_s, std::uint64_t seed);

struct BoOptions {
  int init_design = 5;
  int max_candidates = 4096;
  double noise_floor = 1e-10;
};

// GP + expected improvement over the encoded config space; the first
// init_design picks coincide with random_search picks under the same seed.
TunerState bo_ei(const SearchSpace& space, const Objective& objective,
                 double budget_s, std::uint64_t seed, const BoOptions& opts = {});

struct HyperBandOptions {
  int R = 16;   // should equal the top of the epochs fidelity grid
  int eta = 2;  // 2 keeps rung levels on a {1,2,4,8,16}-style grid
};

struct BracketRung {
  int n = 0;       // configs evaluated at this rung
  double r = 0.0;  // resource (epochs) per config, possibly fractional
};

struct Bracket {
  int s = 0;
  std::vector<BracketRung> rungs;
};

// The bracket arithmetic alone: s_max = floor(log_eta R); bracket s starts
// n = ceil((s_max+1)/(s+1) * eta^s) configs at r = R * eta^-s.
std::vector<Bracket> hyperband_schedule(int R, int eta);

// Successive-halving brackets repeated until the budget is exhausted;
// attack_iters pinned to the grid maximum, fractional rung levels snapped
// to the nearest epochs grid value (ties toward the lower level).
TunerState hyperband(const SearchSpace& space, const Objective& objective,
                     const HyperBandOptions& opts, double budget_s,
                     std::uint64_t seed);

enum class FidelityDim { Epochs, AttackIters };

struct MfOptions {
  std::vector<FidelityDim> dims = {FidelityDim::Epochs,
                                   FidelityDim::AttackIters};
  int init_design = 5;
  int fantasies = 32;
  int max_candidates = 4096;
  int inner_candidates = 256;  // full-fidelity set scored inside fantasies
  double cost_c0 = 1.0;
  double noise_floor = 1e-10;
};

// Cost-aware multi-fidelity tuner: joint GP over (config, fidelity),
// knowledge-gradient-per-unit-cost acquisition with one-step Monte-Carlo
// fantasies. Fidelity dimensions not listed in opts.dims stay pinned to
// their maxima. Recommendation is the posterior-mean argmin at full
// fidelity.
TunerState mf_costaware(const SearchSpace& space, const Objective& objective,
                        const MfOptions& opts, double budget_s,
                        std::uint64_t seed);

}  // namespace athpo
