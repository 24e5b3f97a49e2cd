#include "athpo/toytrain.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>
#include <tuple>

#include "athpo/errors.hpp"

namespace athpo {

namespace {

constexpr double kDivergenceCap = 1e6;
constexpr double kPi = 3.14159265358979323846;

double activate(double z, Activation a) {
  return a == Activation::Tanh ? std::tanh(z) : (z > 0.0 ? z : 0.0);
}

// Derivative expressed through the activation value (tanh) or
// pre-activation (relu); relu'(0) = 0.
double activate_grad(double z, double a_val, Activation a) {
  return a == Activation::Tanh ? 1.0 - a_val * a_val : (z > 0.0 ? 1.0 : 0.0);
}

}  // namespace

ToyMLP::ToyMLP(std::size_t input_dim, std::size_t hidden, std::size_t classes,
               Activation act, Rng& rng)
    : in_(input_dim), hidden_(hidden), classes_(classes), act_(act) {
  if (input_dim == 0 || hidden == 0 || classes < 2)
    throw ConfigError("ToyMLP needs input_dim >= 1, hidden >= 1, classes >= 2");
  params_.assign(hidden_ * in_ + hidden_ + classes_ * hidden_ + classes_, 0.0);
  const double s1 = std::sqrt(6.0 / static_cast<double>(in_ + hidden_));
  const double s2 = std::sqrt(6.0 / static_cast<double>(hidden_ + classes_));
  for (std::size_t i = 0; i < hidden_ * in_; ++i)
    params_[w1_off() + i] = rng.uniform(-s1, s1);
  for (std::size_t i = 0; i < classes_ * hidden_; ++i)
    params_[w2_off() + i] = rng.uniform(-s2, s2);
  // biases start at zero
}

Matrix ToyMLP::forward(const Matrix& x) const {
  const double* w1 = params_.data() + w1_off();
  const double* b1 = params_.data() + b1_off();
  const double* w2 = params_.data() + w2_off();
  const double* b2 = params_.data() + b2_off();

  Matrix probs(x.rows, classes_);
  std::vector<double> a1(hidden_), z2(classes_);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const double* xr = x.row(r);
    for (std::size_t h = 0; h < hidden_; ++h) {
      double z = b1[h];
      const double* w1h = w1 + h * in_;
      for (std::size_t j = 0; j < in_; ++j) z += w1h[j] * xr[j];
      a1[h] = activate(z, act_);
    }
    double zmax = -1e300;
    for (std::size_t c = 0; c < classes_; ++c) {
      double z = b2[c];
      const double* w2c = w2 + c * hidden_;
      for (std::size_t h = 0; h < hidden_; ++h) z += w2c[h] * a1[h];
      z2[c] = z;
      zmax = std::max(zmax, z);
    }
    double denom = 0.0;
    for (std::size_t c = 0; c < classes_; ++c) {
      z2[c] = std::exp(z2[c] - zmax);
      denom += z2[c];
    }
    for (std::size_t c = 0; c < classes_; ++c) probs(r, c) = z2[c] / denom;
  }
  return probs;
}

std::vector<int> ToyMLP::predict(const Matrix& x) const {
  const Matrix probs = forward(x);
  std::vector<int> out(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes_; ++c)
      if (probs(r, c) > probs(r, best)) best = c;  // ties keep lowest index
    out[r] = static_cast<int>(best);
  }
  return out;
}

double ToyMLP::loss(const Matrix& x, std::span<const int> y) const {
  const double* w1 = params_.data() + w1_off();
  const double* b1 = params_.data() + b1_off();
  const double* w2 = params_.data() + w2_off();
  const double* b2 = params_.data() + b2_off();

  double total = 0.0;
  std::vector<double> a1(hidden_), z2(classes_);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const double* xr = x.row(r);
    for (std::size_t h = 0; h < hidden_; ++h) {
      double z = b1[h];
      const double* w1h = w1 + h * in_;
      for (std::size_t j = 0; j < in_; ++j) z += w1h[j] * xr[j];
      a1[h] = activate(z, act_);
    }
    double zmax = -1e300;
    for (std::size_t c = 0; c < classes_; ++c) {
      double z = b2[c];
      const double* w2c = w2 + c * hidden_;
      for (std::size_t h = 0; h < hidden_; ++h) z += w2c[h] * a1[h];
      z2[c] = z;
      zmax = std::max(zmax, z);
    }
    double lse = 0.0;
    for (std::size_t c = 0; c < classes_; ++c) lse += std::exp(z2[c] - zmax);
    total += zmax + std::log(lse) - z2[static_cast<std::size_t>(y[r])];
  }
  return total / static_cast<double>(x.rows);
}

Matrix ToyMLP::input_gradient(const Matrix& x, std::span<const int> y) const {
  const double* w1 = params_.data() + w1_off();
  const double* b1 = params_.data() + b1_off();
  const double* w2 = params_.data() + w2_off();
  const double* b2 = params_.data() + b2_off();
  const double inv_b = 1.0 / static_cast<double>(x.rows);

  Matrix grad(x.rows, in_);
  std::vector<double> z1(hidden_), a1(hidden_), z2(classes_), dz1(hidden_);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const double* xr = x.row(r);
    for (std::size_t h = 0; h < hidden_; ++h) {
      double z = b1[h];
      const double* w1h = w1 + h * in_;
      for (std::size_t j = 0; j < in_; ++j) z += w1h[j] * xr[j];
      z1[h] = z;
      a1[h] = activate(z, act_);
    }
    double zmax = -1e300;
    for (std::size_t c = 0; c < classes_; ++c) {
      double z = b2[c];
      const double* w2c = w2 + c * hidden_;
      for (std::size_t h = 0; h < hidden_; ++h) z += w2c[h] * a1[h];
      z2[c] = z;
      zmax = std::max(zmax, z);
    }
    double denom = 0.0;
    for (std::size_t c = 0; c < classes_; ++c) {
      z2[c] = std::exp(z2[c] - zmax);
      denom += z2[c];
    }
    // dz2 = softmax - onehot, folded directly into the hidden backprop
    for (std::size_t h = 0; h < hidden_; ++h) {
      double da1 = 0.0;
      for (std::size_t c = 0; c < classes_; ++c) {
        const double dz2 =
            z2[c] / denom - (static_cast<int>(c) == y[r] ? 1.0 : 0.0);
        da1 += w2[c * hidden_ + h] * dz2;
      }
      dz1[h] = da1 * activate_grad(z1[h], a1[h], act_);
    }
    double* gr = grad.row(r);
    for (std::size_t j = 0; j < in_; ++j) {
      double g = 0.0;
      for (std::size_t h = 0; h < hidden_; ++h) g += w1[h * in_ + j] * dz1[h];
      gr[j] = g * inv_b;
    }
  }
  return grad;
}

std::vector<double> ToyMLP::param_gradient(const Matrix& x,
                                           std::span<const int> y) const {
  const double* w1 = params_.data() + w1_off();
  const double* b1 = params_.data() + b1_off();
  const double* w2 = params_.data() + w2_off();
  const double* b2 = params_.data() + b2_off();
  const double inv_b = 1.0 / static_cast<double>(x.rows);

  std::vector<double> grad(params_.size(), 0.0);
  double* gw1 = grad.data() + w1_off();
  double* gb1 = grad.data() + b1_off();
  double* gw2 = grad.data() + w2_off();
  double* gb2 = grad.data() + b2_off();

  std::vector<double> z1(hidden_), a1(hidden_), z2(classes_), dz2(classes_),
      dz1(hidden_);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const double* xr = x.row(r);
    for (std::size_t h = 0; h < hidden_; ++h) {
      double z = b1[h];
      const double* w1h = w1 + h * in_;
      for (std::size_t j = 0; j < in_; ++j) z += w1h[j] * xr[j];
      z1[h] = z;
      a1[h] = activate(z, act_);
    }
    double zmax = -1e300;
    for (std::size_t c = 0; c < classes_; ++c) {
      double z = b2[c];
      const double* w2c = w2 + c * hidden_;
      for (std::size_t h = 0; h < hidden_; ++h) z += w2c[h] * a1[h];
      z2[c] = z;
      zmax = std::max(zmax, z);
    }
    double denom = 0.0;
    for (std::size_t c = 0; c < classes_; ++c) {
      z2[c] = std::exp(z2[c] - zmax);
      denom += z2[c];
    }
    for (std::size_t c = 0; c < classes_; ++c) {
      dz2[c] = (z2[c] / denom -
                (static_cast<int>(c) == y[r] ? 1.0 : 0.0)) *
               inv_b;
      gb2[c] += dz2[c];
      double* gw2c = gw2 + c * hidden_;
      for (std::size_t h = 0; h < hidden_; ++h) gw2c[h] += dz2[c] * a1[h];
    }
    for (std::size_t h = 0; h < hidden_; ++h) {
      double da1 = 0.0;
      for (std::size_t c = 0; c < classes_; ++c)
        da1 += w2[c * hidden_ + h] * dz2[c];
      dz1[h] = da1 * activate_grad(z1[h], a1[h], act_);
      gb1[h] += dz1[h];
      double* gw1h = gw1 + h * in_;
      for (std::size_t j = 0; j < in_; ++j) gw1h[j] += dz1[h] * xr[j];
    }
  }
  return grad;
}

ToyDataset make_toy_dataset(const ToyDataSpec& spec) {
  if (spec.dim < 1 || spec.classes < 2)
    throw ConfigError("toy dataset needs dim >= 1 and classes >= 2");
  if (spec.train_size < spec.classes || spec.test_size < spec.classes)
    throw ConfigError("both splits must cover every class");
  if (spec.kind == ToyDataKind::Rings && spec.dim < 2)
    throw ConfigError("rings need dim >= 2");

  Rng rng(mix_seed(spec.seed, 0xDA7A));
  const int d = spec.dim, C = spec.classes;

  std::vector<std::vector<double>> means;
  if (spec.kind == ToyDataKind::Blobs) {
    means.resize(C, std::vector<double>(d));
    for (auto& m : means)
      for (double& v : m) v = rng.uniform(0.25, 0.75);
    // Spread overlapping centers apart so classes stay separable-ish.
    for (int c = 1; c < C; ++c) {
      for (int tries = 0; tries < 64; ++tries) {
        double min_dist = 1e300;
        for (int o = 0; o < c; ++o) {
          double dist = 0.0;
          for (int j = 0; j < d; ++j) {
            const double diff = means[c][j] - means[o][j];
            dist += diff * diff;
          }
          min_dist = std::min(min_dist, std::sqrt(dist));
        }
        if (min_dist > 0.25) break;
        for (double& v : means[c]) v = rng.uniform(0.25, 0.75);
      }
    }
  }

  auto sample_split = [&](int n, Matrix& x, std::vector<int>& y) {
    x = Matrix(static_cast<std::size_t>(n), static_cast<std::size_t>(d));
    y.resize(n);
    for (int i = 0; i < n; ++i) {
      const int c = i % C;  // round-robin keeps every class represented
      y[i] = c;
      double* xr = x.row(static_cast<std::size_t>(i));
      if (spec.kind == ToyDataKind::Blobs) {
        for (int j = 0; j < d; ++j)
          xr[j] = std::clamp(means[c][j] + spec.noise * rng.normal(), 0.0, 1.0);
      } else {
        const double radius = 0.1 + 0.3 * (c + 1.0) / C + spec.noise * rng.normal();
        const double angle = rng.uniform(0.0, 2.0 * kPi);
        xr[0] = std::clamp(0.5 + radius * std::cos(angle), 0.0, 1.0);
        xr[1] = std::clamp(0.5 + radius * std::sin(angle), 0.0, 1.0);
        for (int j = 2; j < d; ++j)
          xr[j] = std::clamp(0.5 + spec.noise * rng.normal(), 0.0, 1.0);
      }
    }
  };

  ToyDataset out;
  sample_split(spec.train_size, out.train_x, out.train_y);
  sample_split(spec.test_size, out.test_x, out.test_y);
  return out;
}

int st_epochs(const TrainPlan& plan) {
  const double frac = 1.0 - plan.config.rat_pct / 100.0;
  return static_cast<int>(std::llround(plan.fidelity.epochs * frac));
}

int at_epochs(const TrainPlan& plan) {
  return plan.fidelity.epochs - st_epochs(plan);
}

namespace {

struct BatchView {
  Matrix x;
  std::vector<int> y;
};

BatchView gather_batch(const Matrix& x, std::span<const int> y,
                       std::span<const std::size_t> idx) {
  BatchView b;
  b.x = Matrix(idx.size(), x.cols);
  b.y.resize(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const double* src = x.row(idx[i]);
    std::copy(src, src + x.cols, b.x.row(i));
    b.y[i] = y[idx[i]];
  }
  return b;
}

void momentum_step(ToyMLP& model, const std::vector<double>& grad, double lr,
                   double momentum, std::vector<double>& velocity) {
  auto& params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i] = momentum * velocity[i] - lr * grad[i];
    params[i] += velocity[i];
  }
}

void check_loss(double loss, std::size_t batch_idx) {
  if (!std::isfinite(loss) || loss > kDivergenceCap)
    throw DivergenceError("training diverged at batch " +
                          std::to_string(batch_idx));
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  rng.shuffle(idx);
  return idx;
}

}  // namespace

double sgd_epoch(ToyMLP& model, const Matrix& x, std::span<const int> y,
                 int batch, double lr, double momentum,
                 std::vector<double>& velocity, Rng& rng) {
  if (lr < 0.0 || momentum < 0.0 || momentum >= 1.0)
    throw ConfigError("sgd_epoch: lr must be >= 0 and momentum in [0,1)");
  const auto idx = shuffled_indices(x.rows, rng);
  const std::size_t bsz = static_cast<std::size_t>(std::max(batch, 1));

  double loss_sum = 0.0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < idx.size(); start += bsz) {
    const std::size_t count = std::min(bsz, idx.size() - start);
    const BatchView b =
        gather_batch(x, y, std::span(idx.data() + start, count));
    const double batch_loss = model.loss(b.x, b.y);
    check_loss(batch_loss, batches);
    momentum_step(model, model.param_gradient(b.x, b.y), lr, momentum,
                  velocity);
    loss_sum += batch_loss;
    ++batches;
  }
  return loss_sum / static_cast<double>(batches);
}

std::size_t adversarial_rows(std::size_t batch_rows, int ae_pct) {
  return static_cast<std::size_t>(
      std::llround(static_cast<double>(batch_rows) * ae_pct / 100.0));
}

Matrix perturb_batch_prefix(const ToyMLP& model, Matrix batch_x,
                            std::span<const int> batch_y,
                            const AttackSpec& attack, int ae_pct, Rng& rng) {
  const std::size_t n_adv = adversarial_rows(batch_x.rows, ae_pct);
  if (n_adv == 0 || attack.epsilon <= 0.0) return batch_x;
  Matrix head(n_adv, batch_x.cols);
  std::copy(
      batch_x.data.begin(),
      batch_x.data.begin() + static_cast<std::ptrdiff_t>(n_adv * batch_x.cols),
      head.data.begin());
  const Matrix delta = pgd(model, head, batch_y.subspan(0, n_adv), attack,
                           PgdInit::Zero, rng);
  for (std::size_t i = 0; i < n_adv * batch_x.cols; ++i)
    batch_x.data[i] += delta.data[i];
  return batch_x;
}

double adversarial_epoch(ToyMLP& model, const Matrix& x,
                         std::span<const int> y, const TrainPlan& plan,
                         std::vector<double>& velocity, Rng& rng) {
  if (plan.config.rat_pct <= 0)
    throw ConfigError("adversarial_epoch requires rat_pct > 0");
  const auto idx = shuffled_indices(x.rows, rng);
  const std::size_t bsz =
      static_cast<std::size_t>(std::max(plan.config.at_batch, 1));

  double loss_sum = 0.0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < idx.size(); start += bsz) {
    const std::size_t count = std::min(bsz, idx.size() - start);
    BatchView b = gather_batch(x, y, std::span(idx.data() + start, count));
    b.x = perturb_batch_prefix(model, std::move(b.x), b.y, plan.attack,
                               plan.config.ae_pct, rng);
    const double batch_loss = model.loss(b.x, b.y);
    check_loss(batch_loss, batches);
    momentum_step(model, model.param_gradient(b.x, b.y), plan.config.at_lr,
                  plan.config.at_momentum, velocity);
    loss_sum += batch_loss;
    ++batches;
  }
  return loss_sum / static_cast<double>(batches);
}

TrainResult train_two_phase(const TrainPlan& plan, const ToyDataset& data,
                            const ModelSpec& model_spec) {
  validate(plan.config);
  validate(plan.fidelity);
  validate(plan.attack);

  const auto t0 = std::chrono::steady_clock::now();
  Rng init_rng(mix_seed(plan.seed, 0));
  Rng epoch_rng(mix_seed(plan.seed, 1));

  ToyMLP model(data.train_x.cols, static_cast<std::size_t>(model_spec.hidden),
               static_cast<std::size_t>(
                   1 + *std::max_element(data.train_y.begin(),
                                         data.train_y.end())),
               model_spec.activation, init_rng);

  const int n_st = st_epochs(plan);
  const int n_at = at_epochs(plan);
  TrainResult result{std::move(model), 0.0, {}};
  result.epoch_losses.reserve(static_cast<std::size_t>(plan.fidelity.epochs));

  std::vector<double> velocity(result.model.parameters().size(), 0.0);
  for (int e = 0; e < n_st; ++e) {
    try {
      result.epoch_losses.push_back(
          sgd_epoch(result.model, data.train_x, data.train_y,
                    plan.config.st_batch, plan.config.st_lr,
                    plan.config.st_momentum, velocity, epoch_rng));
    } catch (const DivergenceError& e_div) {
      throw DivergenceError("ST phase, epoch " + std::to_string(e) + ": " +
                            e_div.what());
    }
  }
  std::fill(velocity.begin(), velocity.end(), 0.0);
  for (int e = 0; e < n_at; ++e) {
    try {
      result.epoch_losses.push_back(adversarial_epoch(
          result.model, data.train_x, data.train_y, plan, velocity,
          epoch_rng));
    } catch (const DivergenceError& e_div) {
      throw DivergenceError("AT phase, epoch " + std::to_string(e) + ": " +
                            e_div.what());
    }
  }

  for (double p : result.model.parameters())
    if (!std::isfinite(p))
      throw DivergenceError("post-training parameters non-finite (phase " +
                            std::string(n_at > 0 ? "AT" : "ST") + ")");

  result.train_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return result;
}

EvalErrors evaluate(const ToyMLP& model, const Matrix& test_x,
                    std::span<const int> test_y, const AttackSpec& attack) {
  const std::vector<int> clean = model.predict(test_x);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < clean.size(); ++i)
    if (clean[i] != test_y[i]) ++wrong;
  const double std_error = static_cast<double>(wrong) / test_x.rows;

  if (attack.epsilon == 0.0) return {std_error, std_error};

  Rng attack_rng(0);  // zero init consumes no randomness
  const Matrix delta =
      pgd(model, test_x, test_y, attack, PgdInit::Zero, attack_rng);
  Matrix adv_x = test_x;
  for (std::size_t i = 0; i < adv_x.data.size(); ++i)
    adv_x.data[i] += delta.data[i];
  const std::vector<int> adv = model.predict(adv_x);
  std::size_t adv_wrong = 0;
  for (std::size_t i = 0; i < adv.size(); ++i)
    if (adv[i] != test_y[i]) ++adv_wrong;
  return {std_error, static_cast<double>(adv_wrong) / test_x.rows};
}

namespace {

struct SweepCell {
  HPConfig config;
  FidelityPoint fidelity;
  double epsilon;
  std::int64_t seed;
};

struct CellValue {
  double std_error, adv_error, train_time_s;
};

// Cells that provably train identically share one key: the canonical twin
// of the config, with attack_iters collapsed when the AT phase is empty.
using CacheKey = std::tuple<HPConfig, FidelityPoint, double, std::int64_t>;

CacheKey cache_key_of(const SweepCell& cell, const SearchSpace& space) {
  const HPConfig canon = canonicalize(cell.config, space);
  FidelityPoint fid = cell.fidelity;
  if (cell.config.rat_pct == 0) fid.attack_iters = space.attack_iters.front();
  return {canon, fid, cell.epsilon, cell.seed};
}

}  // namespace

TabularDataset grid_sweep(const SearchSpace& space, const ToyDataset& data,
                          const SweepOptions& opts) {
  validate(space);
  if (opts.seeds.empty()) throw ConfigError("grid_sweep: no seeds given");

  const std::vector<HPConfig> configs = enumerate_space(space);
  std::vector<SweepCell> cells;
  cells.reserve(configs.size() * space.epochs.size() *
                space.attack_iters.size() * space.epsilon.size() *
                opts.seeds.size());
  for (const HPConfig& c : configs)
    for (int e : space.epochs)
      for (int k : space.attack_iters)
        for (double eps : space.epsilon)
          for (std::int64_t seed : opts.seeds)
            cells.push_back({c, FidelityPoint{e, k}, eps, seed});

  std::vector<EvalRecord> out;
  if (opts.existing) out = opts.existing->records();

  // Drop cells already present, then group by canonical cache key so inert
  // duplicates cost one training run.
  std::vector<SweepCell> todo;
  for (const SweepCell& cell : cells) {
    const RecordKey k{cell.config, cell.fidelity, cell.epsilon, cell.seed};
    if (opts.existing && opts.existing->contains(k)) continue;
    todo.push_back(cell);
  }
  std::map<CacheKey, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < todo.size(); ++i)
    groups[cache_key_of(todo[i], space)].push_back(i);

  std::vector<const std::vector<std::size_t>*> group_list;
  group_list.reserve(groups.size());
  for (const auto& [key, members] : groups) group_list.push_back(&members);

  std::vector<CellValue> values(todo.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex emit_mutex;
  std::exception_ptr first_error;

  auto worker = [&]() {
    for (;;) {
      const std::size_t gi = next.fetch_add(1);
      if (gi >= group_list.size()) return;
      const std::vector<std::size_t>& members = *group_list[gi];
      const SweepCell& rep = todo[members.front()];
      const HPConfig canon = canonicalize(rep.config, space);

      TrainPlan plan;
      plan.config = canon;
      plan.fidelity = rep.fidelity;
      plan.attack = AttackSpec{rep.epsilon, rep.fidelity.attack_iters,
                               canon.pgd_alpha};
      plan.seed = static_cast<std::uint64_t>(rep.seed);

      CellValue v{};
      const auto t0 = std::chrono::steady_clock::now();
      bool diverged = false;
      try {
        TrainResult trained = train_two_phase(plan, data, opts.model);
        const AttackSpec eval_attack{rep.epsilon, opts.eval_iters,
                                     canon.pgd_alpha};
        const EvalErrors errs =
            evaluate(trained.model, data.test_x, data.test_y, eval_attack);
        v = {errs.std_error, errs.adv_error, trained.train_time_s};
      } catch (const DivergenceError&) {
        diverged = true;
      } catch (const AttackError&) {
        diverged = true;  // non-finite gradients are a divergence symptom
      } catch (...) {
        std::lock_guard<std::mutex> lock(emit_mutex);
        if (!first_error) first_error = std::current_exception();
        next.store(group_list.size());
        return;
      }
      if (diverged) {
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                          t0)
                .count();
        v = {1.0, 1.0, elapsed};
      }

      std::lock_guard<std::mutex> lock(emit_mutex);
      for (std::size_t mi : members) {
        values[mi] = v;
        if (opts.on_record) {
          const SweepCell& cell = todo[mi];
          opts.on_record(EvalRecord{cell.config, cell.fidelity, cell.epsilon,
                                    v.std_error, v.adv_error, v.train_time_s,
                                    cell.seed});
        }
        const std::size_t d = done.fetch_add(1) + 1;
        if (opts.progress) opts.progress(d, todo.size());
      }
    }
  };

  const int jobs = std::max(1, opts.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(jobs));
    for (int i = 0; i < jobs; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  out.reserve(out.size() + todo.size());
  for (std::size_t i = 0; i < todo.size(); ++i)
    out.push_back(EvalRecord{todo[i].config, todo[i].fidelity, todo[i].epsilon,
                             values[i].std_error, values[i].adv_error,
                             values[i].train_time_s, todo[i].seed});
  return TabularDataset(std::move(out));
}

}  // namespace athpo
