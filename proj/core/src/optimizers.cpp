#include "athpo/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "athpo/errors.hpp"
#include "athpo/rng.hpp"
#include "athpo/surrogate.hpp"

namespace athpo {

namespace {

constexpr std::uint64_t kPickStream = 0x5049434BULL;   // config pick order
constexpr std::uint64_t kRoundStream = 0x524F554EULL;  // per-round draws

// Shared budget accounting: keep evaluating while the spent budget is
// strictly below the limit, so the final evaluation may overshoot.
class TunerLoop {
 public:
  TunerLoop(const SearchSpace& space, const Objective& objective,
            double budget_s, std::uint64_t seed)
      : space_(space), objective_(objective) {
    if (budget_s <= 0.0) throw ConfigError("tuner budget must be positive");
    if (!objective_.evaluator) throw ConfigError("objective has no evaluator");
    state_.seed = seed;
    state_.budget_s = budget_s;
    full_ = space.full_fidelity();
  }

  bool budget_left() const { return spent_ < state_.budget_s; }
  double spent() const { return spent_; }
  const FidelityPoint& full() const { return full_; }
  TunerState& state() { return state_; }

  const HistoryEntry& evaluate(const HPConfig& config,
                               const FidelityPoint& fidelity) {
    const EvalOutcome out = objective_.evaluator(config, fidelity);
    spent_ += out.cost_s;
    HistoryEntry e{config,     fidelity,   objective_.value(out.std_error,
                                                            out.adv_error),
                   out.std_error, out.adv_error, out.cost_s, spent_};
    state_.history.push_back(e);
    if (fidelity == full_ &&
        (!state_.incumbent || e.objective < state_.incumbent_value)) {
      state_.incumbent = config;
      state_.incumbent_value = e.objective;
      state_.incumbent_std = out.std_error;
      state_.incumbent_adv = out.adv_error;
    }
    return state_.history.back();
  }

  // Default recommendation: the incumbent.
  void record_recommendation() {
    state_.recommendation_trace.push_back(state_.incumbent);
    state_.recommendation = state_.incumbent;
  }
  void record_recommendation(const std::optional<HPConfig>& rec) {
    state_.recommendation_trace.push_back(rec);
    state_.recommendation = rec;
  }

 private:
  const SearchSpace& space_;
  const Objective& objective_;
  TunerState state_;
  FidelityPoint full_;
  double spent_ = 0.0;
};

std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(seed, kPickStream));
  rng.shuffle(order);
  return order;
}

int snap_to_grid(double r, const std::vector<int>& grid_sorted) {
  int best = grid_sorted.front();
  double best_dist = std::fabs(r - best);
  for (int g : grid_sorted) {
    const double dist = std::fabs(r - g);
    if (dist < best_dist) {  // ties keep the lower level
      best = g;
      best_dist = dist;
    }
  }
  return best;
}

}  // namespace

TunerState random_search(const SearchSpace& space, const Objective& objective,
                         double budget_s, std::uint64_t seed) {
  TunerLoop loop(space, objective, budget_s, seed);
  const std::vector<HPConfig> configs = enumerate_space(space);
  const std::vector<std::size_t> order = shuffled_order(configs.size(), seed);

  std::size_t i = 0;
  while (loop.budget_left() && i < order.size()) {
    loop.evaluate(configs[order[i]], loop.full());
    loop.record_recommendation();
    ++i;
  }
  if (i == order.size() && loop.budget_left())
    loop.state().space_exhausted = true;
  return std::move(loop.state());
}

TunerState bo_ei(const SearchSpace& space, const Objective& objective,
                 double budget_s, std::uint64_t seed, const BoOptions& opts) {
  if (opts.init_design < 2)
    throw ConfigError("bo_ei: init_design must be >= 2");
  TunerLoop loop(space, objective, budget_s, seed);
  const std::vector<HPConfig> configs = enumerate_space(space);
  const std::vector<std::size_t> order = shuffled_order(configs.size(), seed);
  const SpaceEncoder encoder(space);
  Rng round_rng(mix_seed(seed, kRoundStream));

  std::set<std::size_t> observed;
  std::size_t stream_pos = 0;
  auto next_unobserved_from_stream = [&]() -> std::optional<std::size_t> {
    while (stream_pos < order.size()) {
      const std::size_t idx = order[stream_pos++];
      if (!observed.count(idx)) return idx;
    }
    return std::nullopt;
  };

  // Random design phase, identical picks to random_search for this seed.
  while (loop.budget_left() &&
         observed.size() < static_cast<std::size_t>(opts.init_design)) {
    auto idx = next_unobserved_from_stream();
    if (!idx) {
      loop.state().space_exhausted = true;
      return std::move(loop.state());
    }
    observed.insert(*idx);
    loop.evaluate(configs[*idx], loop.full());
    loop.record_recommendation();
  }

  GPKernelParams warm;
  bool have_warm = false;
  int round = 0;
  while (loop.budget_left()) {
    if (observed.size() == configs.size()) {
      loop.state().space_exhausted = true;
      break;
    }

    std::vector<std::size_t> candidates;
    candidates.reserve(configs.size() - observed.size());
    for (std::size_t i = 0; i < configs.size(); ++i)
      if (!observed.count(i)) candidates.push_back(i);
    if (candidates.size() > static_cast<std::size_t>(opts.max_candidates)) {
      Rng sub(round_rng.u64());
      sub.shuffle(candidates);
      candidates.resize(static_cast<std::size_t>(opts.max_candidates));
      std::sort(candidates.begin(), candidates.end());
    }

    std::optional<std::size_t> pick;
    try {
      std::vector<std::vector<double>> points;
      std::vector<double> targets;
      points.reserve(loop.state().history.size());
      for (const HistoryEntry& h : loop.state().history) {
        points.push_back(encoder.encode(h.config, h.fidelity));
        targets.push_back(h.objective);
      }
      GPFitOptions fit_opts;
      fit_opts.seed = mix_seed(seed, 0xB0E1 + static_cast<std::uint64_t>(round));
      if (have_warm && round % 10 != 0) {
        fit_opts.restarts = 1;
        fit_opts.max_iters = 25;
        fit_opts.warm_start = &warm;
      }
      const GPModel gp =
          fit_gp(std::move(points), std::move(targets), opts.noise_floor,
                 fit_opts);
      warm = gp.params();
      have_warm = true;

      double best_ei = -1.0;
      for (std::size_t idx : candidates) {
        const auto pred =
            gp.predict(encoder.encode(configs[idx], loop.full()));
        const double ei = expected_improvement(pred.mean, pred.variance,
                                               loop.state().incumbent_value);
        if (ei > best_ei) {  // strict: ties keep the lowest enumeration index
          best_ei = ei;
          pick = idx;
        }
      }
    } catch (const FitError&) {
      ++loop.state().surrogate_failures;
      pick = next_unobserved_from_stream();
    }
    if (!pick) pick = next_unobserved_from_stream();
    if (!pick) {
      loop.state().space_exhausted = true;
      break;
    }
    observed.insert(*pick);
    loop.evaluate(configs[*pick], loop.full());
    loop.record_recommendation();
    ++round;
  }
  return std::move(loop.state());
}

std::vector<Bracket> hyperband_schedule(int R, int eta) {
  if (R < 1 || eta < 2) throw ConfigError("hyperband needs R >= 1, eta >= 2");
  const int s_max = static_cast<int>(
      std::floor(std::log(static_cast<double>(R)) / std::log(static_cast<double>(eta)) +
                 1e-12));
  std::vector<Bracket> brackets;
  for (int s = s_max; s >= 0; --s) {
    Bracket b;
    b.s = s;
    const double eta_s = std::pow(static_cast<double>(eta), s);
    const int n = static_cast<int>(
        std::ceil(static_cast<double>(s_max + 1) / (s + 1) * eta_s - 1e-12));
    const double r = R / eta_s;
    for (int i = 0; i <= s; ++i) {
      BracketRung rung;
      rung.n = static_cast<int>(n / std::pow(static_cast<double>(eta), i));
      rung.r = r * std::pow(static_cast<double>(eta), i);
      b.rungs.push_back(rung);
    }
    brackets.push_back(std::move(b));
  }
  return brackets;
}

TunerState hyperband(const SearchSpace& space, const Objective& objective,
                     const HyperBandOptions& opts, double budget_s,
                     std::uint64_t seed) {
  TunerLoop loop(space, objective, budget_s, seed);
  const std::vector<HPConfig> configs = enumerate_space(space);
  const std::vector<Bracket> schedule = hyperband_schedule(opts.R, opts.eta);
  const int max_iters = space.max_attack_iters();
  std::vector<int> epoch_grid = space.epochs;
  std::sort(epoch_grid.begin(), epoch_grid.end());

  Rng rng(mix_seed(seed, kPickStream));
  std::vector<std::size_t> all(configs.size());
  std::iota(all.begin(), all.end(), std::size_t{0});

  while (loop.budget_left()) {
    for (const Bracket& bracket : schedule) {
      if (!loop.budget_left()) break;
      // Fresh sample of n0 distinct configs for this bracket.
      std::vector<std::size_t> pool = all;
      rng.shuffle(pool);
      const std::size_t n0 = std::min<std::size_t>(
          static_cast<std::size_t>(bracket.rungs.front().n), pool.size());
      std::vector<std::size_t> current(pool.begin(),
                                       pool.begin() + static_cast<std::ptrdiff_t>(n0));

      for (std::size_t rung_i = 0; rung_i < bracket.rungs.size(); ++rung_i) {
        if (current.empty() || !loop.budget_left()) break;
        const FidelityPoint fid{
            snap_to_grid(bracket.rungs[rung_i].r, epoch_grid), max_iters};
        std::vector<std::pair<double, std::size_t>> scored;  // (value, pos)
        scored.reserve(current.size());
        for (std::size_t pos = 0; pos < current.size(); ++pos) {
          if (!loop.budget_left()) break;
          const HistoryEntry& e = loop.evaluate(configs[current[pos]], fid);
          loop.record_recommendation();
          scored.emplace_back(e.objective, pos);
        }
        // Top floor(n_i / eta) by objective; stable sort keeps insertion
        // order on ties.
        std::stable_sort(scored.begin(), scored.end(),
                         [](const auto& a, const auto& b) {
                           return a.first < b.first;
                         });
        const std::size_t keep = scored.size() / static_cast<std::size_t>(opts.eta);
        std::vector<std::size_t> survivors;
        survivors.reserve(keep);
        for (std::size_t i = 0; i < keep; ++i)
          survivors.push_back(current[scored[i].second]);
        current = std::move(survivors);
      }
    }
  }
  return std::move(loop.state());
}

namespace {

struct MfCandidate {
  std::size_t config_idx;
  FidelityPoint fidelity;
};

double prior_cost(const HPConfig& c, const FidelityPoint& f, double c0) {
  return f.epochs *
         (c0 + c.rat_pct / 100.0 * c.ae_pct / 100.0 * f.attack_iters);
}

}  // namespace

TunerState mf_costaware(const SearchSpace& space, const Objective& objective,
                        const MfOptions& opts, double budget_s,
                        std::uint64_t seed) {
  if (opts.dims.empty())
    throw ConfigError("mf_costaware needs at least one fidelity dimension");
  const bool use_epochs =
      std::find(opts.dims.begin(), opts.dims.end(), FidelityDim::Epochs) !=
      opts.dims.end();
  const bool use_iters =
      std::find(opts.dims.begin(), opts.dims.end(),
                FidelityDim::AttackIters) != opts.dims.end();

  TunerLoop loop(space, objective, budget_s, seed);
  const std::vector<HPConfig> configs = enumerate_space(space);
  const SpaceEncoder encoder(space);
  Rng round_rng(mix_seed(seed, kRoundStream));

  // Fidelity candidates: pinned dimensions stay at their maxima.
  std::vector<int> epoch_levels =
      use_epochs ? space.epochs : std::vector<int>{space.max_epochs()};
  std::vector<int> iter_levels = use_iters
                                     ? space.attack_iters
                                     : std::vector<int>{space.max_attack_iters()};
  std::sort(epoch_levels.begin(), epoch_levels.end());
  std::sort(iter_levels.begin(), iter_levels.end());
  std::vector<FidelityPoint> fid_levels;
  for (int e : epoch_levels)
    for (int k : iter_levels) fid_levels.push_back(FidelityPoint{e, k});
  const FidelityPoint cheapest{epoch_levels.front(), iter_levels.front()};

  // Candidate configs for the acquisition argmax.
  std::vector<std::size_t> cand_configs(configs.size());
  std::iota(cand_configs.begin(), cand_configs.end(), std::size_t{0});
  if (cand_configs.size() > static_cast<std::size_t>(opts.max_candidates)) {
    Rng sub(mix_seed(seed, 0xCA4D));
    sub.shuffle(cand_configs);
    cand_configs.resize(static_cast<std::size_t>(opts.max_candidates));
    std::sort(cand_configs.begin(), cand_configs.end());
  }
  // Inner full-fidelity set scored during fantasies.
  std::vector<std::size_t> inner = cand_configs;
  if (inner.size() > static_cast<std::size_t>(opts.inner_candidates)) {
    Rng sub(mix_seed(seed, 0x1A4E));
    sub.shuffle(inner);
    inner.resize(static_cast<std::size_t>(opts.inner_candidates));
    std::sort(inner.begin(), inner.end());
  }
  std::vector<std::vector<double>> inner_enc;
  inner_enc.reserve(inner.size());
  for (std::size_t idx : inner)
    inner_enc.push_back(encoder.encode(configs[idx], loop.full()));

  const std::vector<std::size_t> order = shuffled_order(configs.size(), seed);
  std::size_t stream_pos = 0;
  std::set<std::pair<std::size_t, FidelityPoint>> observed;

  auto next_from_stream = [&](const FidelityPoint& fid)
      -> std::optional<std::size_t> {
    while (stream_pos < order.size()) {
      const std::size_t idx = order[stream_pos++];
      if (!observed.count({idx, fid})) return idx;
    }
    return std::nullopt;
  };

  // Init design: random configs at the cheapest available fidelity.
  while (loop.budget_left() &&
         loop.state().history.size() <
             static_cast<std::size_t>(opts.init_design)) {
    auto idx = next_from_stream(cheapest);
    if (!idx) break;
    observed.insert({*idx, cheapest});
    loop.evaluate(configs[*idx], cheapest);
    loop.record_recommendation(loop.state().incumbent);
  }

  GPKernelParams warm;
  bool have_warm = false;
  int round = 0;
  std::optional<HPConfig> recommendation = loop.state().incumbent;

  while (loop.budget_left()) {
    // Fit (or rebuild) the joint GP over (config, fidelity).
    std::vector<std::vector<double>> points;
    std::vector<double> targets;
    points.reserve(loop.state().history.size());
    for (const HistoryEntry& h : loop.state().history) {
      points.push_back(encoder.encode(h.config, h.fidelity));
      targets.push_back(h.objective);
    }

    std::optional<GPModel> gp;
    try {
      if (points.size() >= 2) {
        GPFitOptions fit_opts;
        fit_opts.seed =
            mix_seed(seed, 0x4D46 + static_cast<std::uint64_t>(round));
        if (!have_warm) {
          // first full fit uses the default multi-start budget
        } else if (round % 5 == 0) {
          fit_opts.restarts = 1;
          fit_opts.max_iters = 25;
          fit_opts.warm_start = &warm;
        } else {
          // keep the previous hyper-parameters, refactorize with new data
          fit_opts.restarts = 1;
          fit_opts.max_iters = 0;
          fit_opts.warm_start = &warm;
        }
        gp.emplace(fit_gp(std::move(points), std::move(targets),
                          opts.noise_floor, fit_opts));
        warm = gp->params();
        have_warm = true;
      }
    } catch (const FitError&) {
      gp.reset();
    }

    if (!gp) {
      // Surrogate unavailable: random full-fidelity evaluation.
      ++loop.state().surrogate_failures;
      auto idx = next_from_stream(loop.full());
      if (!idx) {
        loop.state().space_exhausted = true;
        break;
      }
      observed.insert({*idx, loop.full()});
      loop.evaluate(configs[*idx], loop.full());
      loop.record_recommendation(loop.state().incumbent);
      ++round;
      continue;
    }

    // Posterior mean over the inner full-fidelity set.
    std::vector<double> mu(inner.size());
    std::vector<std::vector<double>> white(inner.size());
    double current_min = std::numeric_limits<double>::infinity();
    std::size_t rec_idx = 0;
    for (std::size_t i = 0; i < inner.size(); ++i) {
      const auto pred = gp->predict(inner_enc[i]);
      mu[i] = pred.mean;
      white[i] = gp->whitened_cross(inner_enc[i]);
      if (pred.mean < current_min) {
        current_min = pred.mean;
        rec_idx = i;
      }
    }
    recommendation = configs[inner[rec_idx]];

    // Cost model: observed mean per fidelity level, calibrated prior where
    // no data exists yet.
    std::map<FidelityPoint, std::pair<double, int>> level_cost;
    double obs_cost_sum = 0.0, prior_cost_sum = 0.0;
    for (const HistoryEntry& h : loop.state().history) {
      auto& [sum, count] = level_cost[h.fidelity];
      sum += h.cost_s;
      ++count;
      obs_cost_sum += h.cost_s;
      prior_cost_sum += prior_cost(h.config, h.fidelity, opts.cost_c0);
    }
    const double calibration =
        prior_cost_sum > 0.0 ? obs_cost_sum / prior_cost_sum : 1.0;
    auto predicted_cost = [&](const HPConfig& c, const FidelityPoint& f) {
      auto it = level_cost.find(f);
      if (it != level_cost.end() && it->second.second > 0)
        return std::max(it->second.first / it->second.second, 1e-9);
      return std::max(prior_cost(c, f, opts.cost_c0) * calibration, 1e-9);
    };

    // One shared set of fantasy draws per round.
    std::vector<double> z(static_cast<std::size_t>(opts.fantasies));
    for (double& v : z) v = round_rng.normal();

    const double gp_noise = gp->noise_variance();
    double best_score = 0.0;
    std::optional<MfCandidate> best;
    std::optional<MfCandidate> cheapest_unobserved;
    double cheapest_cost = std::numeric_limits<double>::infinity();

    for (std::size_t ci : cand_configs) {
      for (const FidelityPoint& fid : fid_levels) {
        if (observed.count({ci, fid})) continue;
        const double pc = predicted_cost(configs[ci], fid);
        if (pc < cheapest_cost) {
          cheapest_cost = pc;
          cheapest_unobserved = MfCandidate{ci, fid};
        }

        const std::vector<double> enc = encoder.encode(configs[ci], fid);
        const auto pred = gp->predict(enc);
        const double var_obs = pred.variance + gp_noise;
        if (var_obs < 1e-16) continue;  // zero-variance: no information
        const std::vector<double> w = gp->whitened_cross(enc);

        // Conditioning coefficients for every inner point.
        const double sd_obs = std::sqrt(var_obs);
        double kg = 0.0;
        std::vector<double> coef(inner.size());
        for (std::size_t i = 0; i < inner.size(); ++i) {
          double cov = gp->kernel(inner_enc[i], enc);
          const auto& wi = white[i];
          for (std::size_t t = 0; t < wi.size(); ++t) cov -= wi[t] * w[t];
          coef[i] = cov / var_obs;
        }
        for (double zj : z) {
          const double shift = sd_obs * zj;
          double fmin = std::numeric_limits<double>::infinity();
          for (std::size_t i = 0; i < inner.size(); ++i)
            fmin = std::min(fmin, mu[i] + coef[i] * shift);
          kg += std::max(0.0, current_min - fmin);
        }
        kg /= static_cast<double>(opts.fantasies);

        const double score = kg / pc;
        if (score > best_score) {  // strict: ties keep enumeration order
          best_score = score;
          best = MfCandidate{ci, fid};
        }
      }
    }

    std::optional<MfCandidate> chosen =
        best_score > 0.0 && best ? best : cheapest_unobserved;
    if (!chosen) {
      loop.state().space_exhausted = true;
      break;
    }
    observed.insert({chosen->config_idx, chosen->fidelity});
    loop.evaluate(configs[chosen->config_idx], chosen->fidelity);
    loop.record_recommendation(recommendation);
    ++round;
  }

  loop.state().recommendation = recommendation;
  if (!loop.state().recommendation)
    loop.state().recommendation = loop.state().incumbent;
  return std::move(loop.state());
}

}  // namespace athpo
