#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "athpo/attacks.hpp"
#include "athpo/domain.hpp"
#include "athpo/matrix.hpp"
#include "athpo/rng.hpp"

namespace athpo {

enum class Activation { Tanh, Relu };

// One-hidden-layer softmax classifier with hand-written backpropagation.
// Parameters live in a single flat vector laid out as
// [W1 (hidden x in), b1, W2 (classes x hidden), b2] so that optimizer
// state and finite-difference probes can address them uniformly.
class ToyMLP final : public GradientModel {
 public:
  ToyMLP(std::size_t input_dim, std::size_t hidden, std::size_t classes,
         Activation act, Rng& rng);  // Glorot-uniform init

  std::size_t input_dim() const { return in_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t classes() const { return classes_; }
  Activation activation() const { return act_; }

  std::vector<double>& parameters() { return params_; }
  const std::vector<double>& parameters() const { return params_; }

  // Row-wise softmax probabilities; each row sums to 1 within 1e-9.
  Matrix forward(const Matrix& x) const;
  std::vector<int> predict(const Matrix& x) const;

  // Mean cross-entropy over the batch, computed in log-sum-exp form.
  double loss(const Matrix& x, std::span<const int> y) const override;
  Matrix input_gradient(const Matrix& x, std::span<const int> y) const override;

  // Gradient of the mean loss w.r.t. the flat parameter vector.
  std::vector<double> param_gradient(const Matrix& x,
                                     std::span<const int> y) const;

 private:
  std::size_t in_, hidden_, classes_;
  Activation act_;
  std::vector<double> params_;

  std::size_t w1_off() const { return 0; }
  std::size_t b1_off() const { return hidden_ * in_; }
  std::size_t w2_off() const { return b1_off() + hidden_; }
  std::size_t b2_off() const { return w2_off() + classes_ * hidden_; }
};

enum class ToyDataKind { Blobs, Rings };

struct ToyDataSpec {
  ToyDataKind kind = ToyDataKind::Blobs;
  int dim = 2;       // rings require dim == 2
  int classes = 3;   // rings require classes == 2
  int train_size = 256;
  int test_size = 256;
  double noise = 0.08;
  std::uint64_t seed = 1;
};

struct ToyDataset {
  Matrix train_x;
  std::vector<int> train_y;
  Matrix test_x;
  std::vector<int> test_y;
};

// Seeded synthetic classification data in [0,1]^d with balanced classes in
// both splits.
ToyDataset make_toy_dataset(const ToyDataSpec& spec);

struct ModelSpec {
  int hidden = 16;
  Activation activation = Activation::Tanh;
};

struct TrainPlan {
  HPConfig config;
  FidelityPoint fidelity;
  AttackSpec attack;
  std::uint64_t seed = 0;
};

// Epoch split: st + at always equals fidelity.epochs; the split uses
// round-half-up on epochs * (1 - rat_pct/100).
int st_epochs(const TrainPlan& plan);
int at_epochs(const TrainPlan& plan);

// One shuffled pass of momentum SGD (v <- m v - lr g; theta <- theta + v).
// Returns the mean batch loss. Throws DivergenceError when the loss goes
// non-finite or above the divergence cap.
double sgd_epoch(ToyMLP& model, const Matrix& x, std::span<const int> y,
                 int batch, double lr, double momentum,
                 std::vector<double>& velocity, Rng& rng);

// Rows of a batch that get replaced by adversarial examples:
// round(rows * ae_pct/100), the same formula for partial batches.
std::size_t adversarial_rows(std::size_t batch_rows, int ae_pct);

// Returns batch_x with its first adversarial_rows(...) rows moved to
// x + delta, delta from pgd against the current model state.
Matrix perturb_batch_prefix(const ToyMLP& model, Matrix batch_x,
                            std::span<const int> batch_y,
                            const AttackSpec& attack, int ae_pct, Rng& rng);

// Same pass, but the first round(B * ae_pct/100) rows of every batch are
// replaced by PGD perturbations computed against the current model state.
double adversarial_epoch(ToyMLP& model, const Matrix& x,
                         std::span<const int> y, const TrainPlan& plan,
                         std::vector<double>& velocity, Rng& rng);

struct TrainResult {
  ToyMLP model;
  double train_time_s = 0.0;
  std::vector<double> epoch_losses;
};

// st_epochs of clean SGD followed by at_epochs of adversarial training,
// fully reproducible per plan.seed. Divergence errors name the phase.
TrainResult train_two_phase(const TrainPlan& plan, const ToyDataset& data,
                            const ModelSpec& model_spec = {});

struct EvalErrors {
  double std_error = 0.0;
  double adv_error = 0.0;
};

// Misclassification rates on the clean and per-example-attacked test set.
// The attack spec is fixed by the caller, independent of training fidelity.
EvalErrors evaluate(const ToyMLP& model, const Matrix& test_x,
                    std::span<const int> test_y, const AttackSpec& attack);

struct SweepOptions {
  std::vector<std::int64_t> seeds = {1};
  int eval_iters = 20;  // evaluation is full-strength PGD regardless of cell
  int jobs = 1;
  ModelSpec model;
  // Keys already present are skipped (resume contract).
  const TabularDataset* existing = nullptr;
  // Invoked under a single-writer lock as each cell lands; used by the CLI
  // for crash-safe progress appends.
  std::function<void(const EvalRecord&)> on_record;
  std::function<void(std::size_t done, std::size_t total)> progress;
};

// One EvalRecord per (config, fidelity, epsilon, seed). Cells that differ
// only in inert dimensions share one training run via canonical-twin
// caching. Divergent cells record std_error = adv_error = 1.0.
TabularDataset grid_sweep(const SearchSpace& space, const ToyDataset& data,
                          const SweepOptions& opts);

}  // namespace athpo
