#include "rolnn/plant.hpp"

#include <Eigen/Cholesky>

namespace rolnn::fomsim {

Mat christoffel(const std::vector<Mat>& dm, const Vec& qd) {
  const int n = static_cast<int>(qd.size());
  Mat c = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k)
        s += (dm[static_cast<std::size_t>(k)](i, j) +
              dm[static_cast<std::size_t>(j)](i, k) -
              dm[static_cast<std::size_t>(i)](j, k)) *
             qd[k];
      c(i, j) = 0.5 * s;
    }
  return c;
}

Mat Plant::coriolis(const Vec& q, const Vec& qd) const {
  return christoffel(mass_partials(q), qd);
}

Vec forward_dynamics(const Plant& plant, const FullState& state, const Vec& u) {
  const Mat m = plant.mass(state.q);
  const Mat c = plant.coriolis(state.q, state.qd);
  const Mat d = plant.damping(state.q);
  const Vec g = plant.gravity(state.q);
  const Vec rhs = plant.actuation(state.q) * u - (c + d) * state.qd - g;
  Eigen::LLT<Mat> llt(m);
  if (llt.info() != Eigen::Success) {
    throw NumericError("forward_dynamics: mass matrix not SPD at q = [" +
                       std::to_string(state.q[0]) + ", ...]");
  }
  return llt.solve(rhs);
}

FullState step_rk4(const Plant& plant, const FullState& state, const Vec& u,
                   double dt) {
  auto f = [&](const FullState& x) -> FullState {
    return {x.qd, forward_dynamics(plant, x, u)};
  };
  FullState k1 = f(state);
  FullState k2 = f({state.q + 0.5 * dt * k1.q, state.qd + 0.5 * dt * k1.qd});
  FullState k3 = f({state.q + 0.5 * dt * k2.q, state.qd + 0.5 * dt * k2.qd});
  FullState k4 = f({state.q + dt * k3.q, state.qd + dt * k3.qd});
  FullState out;
  out.q = state.q + (dt / 6.0) * (k1.q + 2.0 * k2.q + 2.0 * k3.q + k4.q);
  out.qd = state.qd + (dt / 6.0) * (k1.qd + 2.0 * k2.qd + 2.0 * k3.qd + k4.qd);
  return out;
}

double energy(const Plant& plant, const FullState& state) {
  return 0.5 * state.qd.dot(plant.mass(state.q) * state.qd) +
         plant.potential(state.q);
}

std::vector<FullState> rollout(const Plant& plant, const FullState& x0,
                               const StepController& u_fn, double dt,
                               int steps) {
  std::vector<FullState> traj;
  traj.reserve(static_cast<std::size_t>(steps) + 1);
  traj.push_back(x0);
  FullState x = x0;
  for (int k = 0; k < steps; ++k) {
    Vec u = u_fn(k * dt, x);
    x = step_rk4(plant, x, u, dt);
    if (!all_finite(x.q) || !all_finite(x.qd))
      throw NumericError("integration blow-up at step " + std::to_string(k));
    traj.push_back(x);
  }
  return traj;
}

}  // namespace rolnn::fomsim
