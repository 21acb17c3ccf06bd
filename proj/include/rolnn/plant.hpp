#pragma once

#include <functional>
#include <vector>

#include "rolnn/common.hpp"

namespace rolnn::fomsim {

struct FullState {
  Vec q;
  Vec qd;
};

// Analytic Lagrangian plant: M(q) qdd + C(q,qd) qd + g(q) = -D(q) qd + B(q) u.
class Plant {
 public:
  virtual ~Plant() = default;

  virtual int n() const = 0;
  virtual int m() const = 0;

  virtual Mat mass(const Vec& q) const = 0;
  // dM/dq_k for k = 0..n-1.
  virtual std::vector<Mat> mass_partials(const Vec& q) const = 0;
  virtual double potential(const Vec& q) const = 0;
  virtual Vec gravity(const Vec& q) const = 0;  // dV/dq
  virtual Mat damping(const Vec& q) const = 0;
  virtual Mat actuation(const Vec& q) const = 0;  // n x m

  Mat coriolis(const Vec& q, const Vec& qd) const;
};

// C_ij = 1/2 sum_k (dM_ij/dq_k + dM_ik/dq_j - dM_jk/dq_i) qd_k.
Mat christoffel(const std::vector<Mat>& mass_partials, const Vec& qd);

// qdd = M^{-1}(B u - (C + D) qd - g), solved with an SPD factorization.
Vec forward_dynamics(const Plant& plant, const FullState& state, const Vec& u);

// One classical RK4 step with the control input held constant (zero-order
// hold over the step).
FullState step_rk4(const Plant& plant, const FullState& state, const Vec& u,
                   double dt);

double energy(const Plant& plant, const FullState& state);

// Rolls the plant forward; the controller is queried once per step at the
// step start (zero-order hold). Throws on non-finite states, reporting the
// step index.
using StepController = std::function<Vec(double t, const FullState&)>;
std::vector<FullState> rollout(const Plant& plant, const FullState& x0,
                               const StepController& u_fn, double dt,
                               int steps);

}  // namespace rolnn::fomsim
