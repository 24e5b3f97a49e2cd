#include "athpo/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "athpo/errors.hpp"

namespace athpo {

namespace {

double sign(double v) {
  if (v > 0.0) return 1.0;
  if (v < 0.0) return -1.0;
  return 0.0;
}

}  // namespace

void project_linf(Matrix& delta, double epsilon) {
  for (double& v : delta.data) v = std::clamp(v, -epsilon, epsilon);
}

void clip_to_unit_box(Matrix& delta, const Matrix& x) {
  for (std::size_t i = 0; i < delta.data.size(); ++i)
    delta.data[i] = std::clamp(delta.data[i], -x.data[i], 1.0 - x.data[i]);
}

Matrix fgsm(const GradientModel& model, const Matrix& x,
            std::span<const int> y, double epsilon) {
  Matrix grad = model.input_gradient(x, y);
  if (!grad.all_finite())
    throw AttackError("fgsm: non-finite input gradient over a batch of " +
                      std::to_string(x.rows) + " examples");
  Matrix delta(x.rows, x.cols);
  for (std::size_t i = 0; i < delta.data.size(); ++i)
    delta.data[i] = epsilon * sign(grad.data[i]);
  clip_to_unit_box(delta, x);
  return delta;
}

Matrix pgd(const GradientModel& model, const Matrix& x, std::span<const int> y,
           const AttackSpec& spec, PgdInit init, Rng& rng, PgdStep step) {
  validate(spec);
  Matrix delta(x.rows, x.cols);
  if (init == PgdInit::UniformRandom && spec.epsilon > 0.0) {
    for (double& v : delta.data) v = rng.uniform(-spec.epsilon, spec.epsilon);
    clip_to_unit_box(delta, x);
  }
  Matrix perturbed = x;
  for (int it = 0; it < spec.iters; ++it) {
    for (std::size_t i = 0; i < perturbed.data.size(); ++i)
      perturbed.data[i] = x.data[i] + delta.data[i];
    Matrix grad = model.input_gradient(perturbed, y);
    if (!grad.all_finite())
      throw AttackError("pgd: non-finite input gradient at iteration " +
                        std::to_string(it));
    if (step == PgdStep::Sign) {
      for (std::size_t i = 0; i < delta.data.size(); ++i)
        delta.data[i] += spec.alpha * sign(grad.data[i]);
    } else {
      for (std::size_t i = 0; i < delta.data.size(); ++i)
        delta.data[i] += spec.alpha * grad.data[i];
    }
    project_linf(delta, spec.epsilon);
    clip_to_unit_box(delta, x);
  }
  return delta;
}

}  // namespace athpo
