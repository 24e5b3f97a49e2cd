#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <numeric>
#include <set>

#include "athpo/errors.hpp"
#include "athpo/toytrain.hpp"

using namespace athpo;

namespace {

ToyDataset small_data(std::uint64_t seed = 1, int train = 64, int test = 64,
                      int classes = 2, int dim = 2) {
  ToyDataSpec spec;
  spec.seed = seed;
  spec.train_size = train;
  spec.test_size = test;
  spec.classes = classes;
  spec.dim = dim;
  return make_toy_dataset(spec);
}

HPConfig base_config() {
  HPConfig c;
  c.st_lr = 0.2;
  c.st_momentum = 0.9;
  c.st_batch = 16;
  c.at_lr = 0.1;
  c.at_momentum = 0.9;
  c.at_batch = 16;
  c.pgd_alpha = 0.01;
  c.rat_pct = 50;
  c.ae_pct = 100;
  return c;
}

}  // namespace

TEST_CASE("softmax rows are normalized probabilities") {
  Rng rng(1);
  const ToyMLP model(3, 8, 4, Activation::Tanh, rng);
  Matrix x(32, 3);
  Rng data_rng(2);
  for (double& v : x.data) v = data_rng.uniform();
  const Matrix probs = model.forward(x);
  for (std::size_t r = 0; r < probs.rows; ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < probs.cols; ++c) {
      CHECK(probs(r, c) >= 0.0);
      sum += probs(r, c);
    }
    CHECK(std::fabs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("parameter gradients match central finite differences") {
  // central-difference oracle
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 2 + rng.below(2);
    Rng model_rng(rng.u64());
    // tanh only: a relu kink inside the 1e-3 probe breaks the central
    // difference regardless of backprop correctness
    ToyMLP model(d, 4, 3, Activation::Tanh, model_rng);
    Matrix x(6, d);
    for (double& v : x.data) v = rng.uniform(0.1, 0.9);
    std::vector<int> y(6);
    for (int& v : y) v = static_cast<int>(rng.below(3));

    const std::vector<double> grad = model.param_gradient(x, y);
    auto& params = model.parameters();
    const double h = 1e-3;
    for (std::size_t i = 0; i < params.size(); i += 7) {  // sampled probes
      const double saved = params[i];
      params[i] = saved + h;
      const double fp = model.loss(x, y);
      params[i] = saved - h;
      const double fm = model.loss(x, y);
      params[i] = saved;
      const double fd = (fp - fm) / (2 * h);
      const double scale = std::max({std::fabs(fd), std::fabs(grad[i]), 1e-6});
      CHECK(std::fabs(fd - grad[i]) / scale <= 1e-4);
    }
  }
}

TEST_CASE("sgd_epoch with lr zero is the identity on parameters") {
  const ToyDataset data = small_data();
  Rng model_rng(4);
  ToyMLP model(2, 6, 2, Activation::Tanh, model_rng);
  const std::vector<double> before = model.parameters();
  std::vector<double> velocity(before.size(), 0.0);
  Rng rng(5);
  sgd_epoch(model, data.train_x, data.train_y, 16, 0.0, 0.9, velocity, rng);
  CHECK(model.parameters() == before);
  for (double v : velocity) CHECK(v == 0.0);
}

TEST_CASE("a full-batch sgd step applies exactly minus lr times gradient") {
  const ToyDataset data = small_data();
  Rng model_rng(6);
  ToyMLP model(2, 6, 2, Activation::Tanh, model_rng);
  const std::vector<double> before = model.parameters();
  const std::vector<double> grad =
      model.param_gradient(data.train_x, data.train_y);

  std::vector<double> velocity(before.size(), 0.0);
  Rng rng(7);
  // batch >= n means one batch per epoch; the shuffle cannot change it
  sgd_epoch(model, data.train_x, data.train_y,
            static_cast<int>(data.train_x.rows), 0.1, 0.0, velocity, rng);

  // the shuffled batch has the same rows in a different order, so the mean
  // gradient is permutation-invariant up to fp association; compare loosely
  for (std::size_t i = 0; i < before.size(); ++i)
    CHECK(model.parameters()[i] ==
          doctest::Approx(before[i] - 0.1 * grad[i]).epsilon(1e-9));
}

TEST_CASE("divergent training raises a phase-tagged error") {
  const ToyDataset data = small_data();
  TrainPlan plan;
  plan.config = base_config();
  plan.config.st_lr = 1e8;  // blows up immediately
  plan.fidelity = {4, 1};
  plan.attack = {0.1, 1, 0.01};
  plan.seed = 1;
  try {
    train_two_phase(plan, data);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(std::string(e.what()).find("ST phase") != std::string::npos);
  }
}

TEST_CASE("adversarial row counts follow the rounding rule") {
  CHECK(adversarial_rows(128, 50) == 64);
  CHECK(adversarial_rows(128, 0) == 0);
  CHECK(adversarial_rows(128, 100) == 128);
  CHECK(adversarial_rows(10, 25) == 3);   // round-half-up on 2.5
  CHECK(adversarial_rows(10, 35) == 4);   // 3.5 rounds up
  CHECK(adversarial_rows(3, 50) == 2);    // 1.5 rounds up
  CHECK(adversarial_rows(1, 49) == 0);
  CHECK(adversarial_rows(1, 50) == 1);
}

TEST_CASE("perturb_batch_prefix touches exactly the adversarial prefix") {
  // row-count oracle: count rows whose delta is nonzero
  Rng model_rng(8);
  const ToyMLP model(2, 8, 2, Activation::Tanh, model_rng);
  Matrix batch(128, 2);
  Rng data_rng(9);
  for (double& v : batch.data) v = data_rng.uniform(0.2, 0.8);
  std::vector<int> y(128);
  for (int& v : y) v = static_cast<int>(data_rng.below(2));

  Rng attack_rng(0);
  const Matrix out = perturb_batch_prefix(
      model, batch, y, AttackSpec{0.05, 3, 0.02}, 50, attack_rng);

  std::size_t changed = 0;
  for (std::size_t r = 0; r < out.rows; ++r) {
    bool row_changed = false;
    for (std::size_t c = 0; c < out.cols; ++c)
      if (out(r, c) != batch(r, c)) row_changed = true;
    if (row_changed) ++changed;
  }
  // tanh models almost surely have no exactly-zero input gradients
  CHECK(changed == 64);
  for (std::size_t r = 64; r < out.rows; ++r)
    for (std::size_t c = 0; c < out.cols; ++c)
      CHECK(out(r, c) == batch(r, c));
}

TEST_CASE("ae_pct zero makes the adversarial epoch identical to sgd") {
  const ToyDataset data = small_data();
  TrainPlan plan;
  plan.config = base_config();
  plan.config.ae_pct = 0;
  plan.attack = {0.1, 5, 0.01};

  Rng m1(10), m2(10);
  ToyMLP a(2, 6, 2, Activation::Tanh, m1);
  ToyMLP b(2, 6, 2, Activation::Tanh, m2);
  std::vector<double> va(a.parameters().size(), 0.0), vb = va;
  Rng r1(11), r2(11);
  adversarial_epoch(a, data.train_x, data.train_y, plan, va, r1);
  sgd_epoch(b, data.train_x, data.train_y, plan.config.at_batch,
            plan.config.at_lr, plan.config.at_momentum, vb, r2);
  CHECK(a.parameters() == b.parameters());
}

TEST_CASE("epsilon zero makes the adversarial epoch identical to sgd") {
  const ToyDataset data = small_data();
  TrainPlan plan;
  plan.config = base_config();
  plan.config.ae_pct = 70;
  plan.attack = {0.0, 5, 0.01};

  Rng m1(12), m2(12);
  ToyMLP a(2, 6, 2, Activation::Tanh, m1);
  ToyMLP b(2, 6, 2, Activation::Tanh, m2);
  std::vector<double> va(a.parameters().size(), 0.0), vb = va;
  Rng r1(13), r2(13);
  adversarial_epoch(a, data.train_x, data.train_y, plan, va, r1);
  sgd_epoch(b, data.train_x, data.train_y, plan.config.at_batch,
            plan.config.at_lr, plan.config.at_momentum, vb, r2);
  CHECK(a.parameters() == b.parameters());
}

TEST_CASE("phase accounting splits epochs with round-half-up") {
  TrainPlan plan;
  plan.fidelity.epochs = 16;
  for (int rat : {0, 30, 50, 70, 100}) {
    plan.config.rat_pct = rat;
    // independent recomputation of round-half-up
    const double exact = 16.0 * (1.0 - rat / 100.0);
    const int expect_st = static_cast<int>(std::floor(exact + 0.5));
    CHECK(st_epochs(plan) == expect_st);
    CHECK(st_epochs(plan) + at_epochs(plan) == 16);
  }
  plan.config.rat_pct = 50;
  plan.fidelity.epochs = 16;
  CHECK(st_epochs(plan) == 8);
  CHECK(at_epochs(plan) == 8);
  // odd split: 5 epochs at 30% -> 3.5 ST rounds up to 4
  plan.config.rat_pct = 30;
  plan.fidelity.epochs = 5;
  CHECK(st_epochs(plan) == 4);
  CHECK(at_epochs(plan) == 1);
}

TEST_CASE("same plan and seed reproduce bit-identical parameters") {
  const ToyDataset data = small_data();
  TrainPlan plan;
  plan.config = base_config();
  plan.fidelity = {4, 3};
  plan.attack = {0.05, 3, 0.01};
  plan.seed = 42;
  const TrainResult r1 = train_two_phase(plan, data);
  const TrainResult r2 = train_two_phase(plan, data);
  CHECK(r1.model.parameters() == r2.model.parameters());
  CHECK(r1.epoch_losses == r2.epoch_losses);
}

TEST_CASE("rat zero ignores the attack-iterations fidelity entirely") {
  const ToyDataset data = small_data();
  TrainPlan plan;
  plan.config = base_config();
  plan.config.rat_pct = 0;
  plan.seed = 3;
  plan.attack = {0.1, 1, 0.01};
  plan.fidelity = {4, 1};
  const TrainResult r1 = train_two_phase(plan, data);
  plan.fidelity = {4, 20};
  plan.attack = {0.1, 20, 0.01};
  const TrainResult r20 = train_two_phase(plan, data);
  CHECK(r1.model.parameters() == r20.model.parameters());
}

TEST_CASE("two-phase training runs the declared number of epochs") {
  const ToyDataset data = small_data();
  TrainPlan plan;
  plan.config = base_config();
  plan.fidelity = {6, 2};
  plan.attack = {0.05, 2, 0.01};
  plan.seed = 9;
  const TrainResult r = train_two_phase(plan, data);
  CHECK(r.epoch_losses.size() == 6);
  CHECK(r.train_time_s > 0.0);
}

TEST_CASE("evaluate with epsilon zero returns equal errors") {
  const ToyDataset data = small_data();
  TrainPlan plan;
  plan.config = base_config();
  plan.fidelity = {2, 1};
  plan.attack = {0.0, 1, 0.01};
  plan.seed = 5;
  const TrainResult r = train_two_phase(plan, data);
  const EvalErrors e =
      evaluate(r.model, data.test_x, data.test_y, AttackSpec{0.0, 20, 0.01});
  CHECK(e.std_error == e.adv_error);
}

TEST_CASE("an uninformative model has half error on balanced binary data") {
  const ToyDataset data = small_data(2, 64, 64, 2, 2);
  Rng rng(14);
  ToyMLP model(2, 4, 2, Activation::Tanh, rng);
  // zero weights give a uniform softmax; ties resolve to class 0
  std::fill(model.parameters().begin(), model.parameters().end(), 0.0);
  const EvalErrors e =
      evaluate(model, data.test_x, data.test_y, AttackSpec{0.0, 1, 0.01});
  CHECK(e.std_error == doctest::Approx(0.5));
}

TEST_CASE("adversarial misclassifications are a superset on a linear model") {
  // exhaustive small-instance check on an exactly-affine ToyMLP: relu with
  // large positive bias keeps every hidden unit in its linear regime
  Rng rng(15);
  ToyMLP model(2, 2, 2, Activation::Relu, rng);
  auto& p = model.parameters();
  std::fill(p.begin(), p.end(), 0.0);
  // W1 = I, b1 = 10 -> a1 = x + 10 (affine, always active)
  p[0] = 1.0;  // W1(0,0)
  p[3] = 1.0;  // W1(1,1)
  p[4] = 10.0;
  p[5] = 10.0;
  // W2 rows separate the classes along x0 - x1
  p[6] = 2.0;
  p[7] = -2.0;
  p[8] = -2.0;
  p[9] = 2.0;

  Matrix x(64, 2);
  std::vector<int> y(64);
  Rng data_rng(16);
  for (std::size_t i = 0; i < 64; ++i) {
    x(i, 0) = data_rng.uniform(0.2, 0.8);
    x(i, 1) = data_rng.uniform(0.2, 0.8);
    y[i] = static_cast<int>(data_rng.below(2));
  }

  const std::vector<int> clean = model.predict(x);
  Rng attack_rng(0);
  const AttackSpec attack{0.05, 10, 0.01};
  const Matrix delta = pgd(model, x, y, attack, PgdInit::Zero, attack_rng);
  Matrix adv = x;
  for (std::size_t i = 0; i < adv.data.size(); ++i)
    adv.data[i] += delta.data[i];
  const std::vector<int> advp = model.predict(adv);

  for (std::size_t i = 0; i < 64; ++i) {
    // per-example loss may only grow on a convex objective
    Matrix xi(1, 2), ai(1, 2);
    xi(0, 0) = x(i, 0);
    xi(0, 1) = x(i, 1);
    ai(0, 0) = adv(i, 0);
    ai(0, 1) = adv(i, 1);
    const std::vector<int> yi{y[i]};
    CHECK(model.loss(ai, yi) >= model.loss(xi, yi) - 1e-12);
    if (clean[i] != y[i]) CHECK(advp[i] != y[i]);
  }

  const EvalErrors e = evaluate(model, x, y, attack);
  CHECK(e.adv_error >= e.std_error);
}

TEST_CASE("grid_sweep emits one record per cell") {
  SearchSpace s;
  s.st_lr = {0.2, 0.05};
  s.st_momentum = {0.9};
  s.st_batch = {16};
  s.at_lr = {0.1};
  s.at_momentum = {0.9};
  s.at_batch = {16};
  s.pgd_alpha = {0.01};
  s.rat_pct = {50};
  s.ae_pct = {100};
  s.epochs = {1, 2};
  s.attack_iters = {1};
  s.epsilon = {0.05};

  const ToyDataset data = small_data();
  SweepOptions opts;
  opts.seeds = {1};
  opts.eval_iters = 5;
  const TabularDataset ds = grid_sweep(s, data, opts);
  CHECK(ds.size() == 4);  // 2 configs x 2 fidelities x 1 eps x 1 seed
}

TEST_CASE("grid_sweep record count matches the enumeration oracle") {
  SearchSpace s;
  s.st_lr = {0.2, 0.05};
  s.st_momentum = {0.0, 0.9};
  s.st_batch = {16};
  s.at_lr = {0.1, 0.02};
  s.at_momentum = {0.9};
  s.at_batch = {16};
  s.pgd_alpha = {0.01, 0.001};
  s.rat_pct = {30, 70};
  s.ae_pct = {50, 100};
  s.epochs = {1, 2};
  s.attack_iters = {1, 5};
  s.epsilon = {0.05};

  const ToyDataset data = small_data(3, 32, 32);
  SweepOptions opts;
  opts.seeds = {1, 2};
  opts.eval_iters = 5;
  opts.jobs = 4;
  const TabularDataset ds = grid_sweep(s, data, opts);
  const std::size_t expect = enumerate_space(s).size() * s.epochs.size() *
                             s.attack_iters.size() * s.epsilon.size() *
                             opts.seeds.size();
  CHECK(ds.size() == expect);
}

TEST_CASE("grid_sweep resumes by skipping present keys") {
  SearchSpace s;
  s.st_lr = {0.2, 0.05};
  s.st_momentum = {0.9};
  s.st_batch = {16};
  s.at_lr = {0.1};
  s.at_momentum = {0.9};
  s.at_batch = {16};
  s.pgd_alpha = {0.01};
  s.rat_pct = {50};
  s.ae_pct = {100};
  s.epochs = {1, 2};
  s.attack_iters = {1};
  s.epsilon = {0.05};

  const ToyDataset data = small_data();
  SweepOptions opts;
  opts.seeds = {1};
  opts.eval_iters = 5;
  const TabularDataset first = grid_sweep(s, data, opts);

  std::size_t new_records = 0;
  opts.existing = &first;
  opts.on_record = [&](const EvalRecord&) { ++new_records; };
  const TabularDataset second = grid_sweep(s, data, opts);
  CHECK(new_records == 0);
  CHECK(second.size() == first.size());
  for (std::size_t i = 0; i < first.size(); ++i)
    CHECK(second.records()[i].std_error == first.records()[i].std_error);
}

TEST_CASE("inert-dimension twins share one training result") {
  SearchSpace s;
  s.st_lr = {0.2};
  s.st_momentum = {0.9};
  s.st_batch = {16};
  s.at_lr = {0.1, 0.02};  // inert at rat 0
  s.at_momentum = {0.9};
  s.at_batch = {16};
  s.pgd_alpha = {0.01, 0.001};
  s.rat_pct = {0};
  s.ae_pct = {50, 100};
  s.epochs = {2};
  s.attack_iters = {1, 20};
  s.epsilon = {0.05};

  const ToyDataset data = small_data();
  SweepOptions opts;
  opts.seeds = {7};
  opts.eval_iters = 5;
  const TabularDataset ds = grid_sweep(s, data, opts);
  CHECK(ds.size() == 16);  // 8 configs x 2 iters levels
  // every record of this rat=0 slice carries identical measurements
  const EvalRecord& first = ds.records().front();
  for (const EvalRecord& r : ds.records()) {
    CHECK(r.std_error == first.std_error);
    CHECK(r.adv_error == first.adv_error);
    CHECK(r.train_time_s == first.train_time_s);
  }
}

TEST_CASE("diverging cells are recorded as total error") {
  SearchSpace s;
  s.st_lr = {1e9};  // diverges
  s.st_momentum = {0.9};
  s.st_batch = {16};
  s.at_lr = {0.1};
  s.at_momentum = {0.9};
  s.at_batch = {16};
  s.pgd_alpha = {0.01};
  s.rat_pct = {0};
  s.ae_pct = {100};
  s.epochs = {2};
  s.attack_iters = {1};
  s.epsilon = {0.05};

  const ToyDataset data = small_data();
  SweepOptions opts;
  opts.seeds = {1};
  const TabularDataset ds = grid_sweep(s, data, opts);
  REQUIRE(ds.size() == 1);
  CHECK(ds.records()[0].std_error == 1.0);
  CHECK(ds.records()[0].adv_error == 1.0);
}

TEST_CASE("training cost grows with attack iterations") {
  // statistical check over 5 repetitions
  const ToyDataset data = small_data(4, 128, 32);
  TrainPlan plan;
  plan.config = base_config();
  plan.fidelity = {4, 1};
  plan.seed = 1;

  auto mean_time = [&](int iters) {
    double total = 0.0;
    for (int rep = 0; rep < 5; ++rep) {
      plan.fidelity.attack_iters = iters;
      plan.attack = {0.05, iters, 0.01};
      total += train_two_phase(plan, data).train_time_s;
    }
    return total / 5.0;
  };
  const double t1 = mean_time(1);
  const double t20 = mean_time(20);
  CHECK(t20 > t1);
}
