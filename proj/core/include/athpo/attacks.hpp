#pragma once

#include <span>

#include "athpo/domain.hpp"
#include "athpo/matrix.hpp"
#include "athpo/rng.hpp"

namespace athpo {

// Loss-gradient view of a classifier: loss() is the mean loss over the
// batch and input_gradient() its gradient w.r.t. every input component.
class GradientModel {
 public:
  virtual ~GradientModel() = default;
  virtual double loss(const Matrix& inputs,
                      std::span<const int> labels) const = 0;
  virtual Matrix input_gradient(const Matrix& inputs,
                                std::span<const int> labels) const = 0;
};

enum class PgdInit { Zero, UniformRandom };

// Step rule for the inner ascent. Sign is the standard L-inf
// instantiation and the default; RawGradient is kept as a sensitivity
// switch only.
enum class PgdStep { Sign, RawGradient };

// Componentwise clamp of delta to [-epsilon, +epsilon]; idempotent.
void project_linf(Matrix& delta, double epsilon);

// Clamp delta so that x + delta stays inside [0,1]^d.
void clip_to_unit_box(Matrix& delta, const Matrix& x);

// delta = epsilon * sign(grad L(x, y)) followed by unit-box clipping.
// sign(0) is 0. Throws AttackError on a non-finite gradient.
Matrix fgsm(const GradientModel& model, const Matrix& x,
            std::span<const int> y, double epsilon);

// spec.iters rounds of ascend-project-clip. Zero init with iters == 1 and
// alpha >= epsilon reproduces fgsm bit for bit.
Matrix pgd(const GradientModel& model, const Matrix& x, std::span<const int> y,
           const AttackSpec& spec, PgdInit init, Rng& rng,
           PgdStep step = PgdStep::Sign);

}  // namespace athpo
