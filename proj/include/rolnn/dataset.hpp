#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "rolnn/common.hpp"
#include "rolnn/pendulum.hpp"

namespace rolnn::fomsim {

// One recorded rollout. Row k holds the state at t_k and the control
// generalized force applied over [t_k, t_k + dt) (zero-order hold), so a
// replay of the tau rows through step_rk4 reproduces the states.
struct Trajectory {
  Vec t;
  Mat q, qd, tau;  // K x n
  Mat u;           // K x m (equals tau when fully actuated)
};

struct Dataset {
  int n = 0, m = 0;
  double dt = 0.0;
  std::vector<Trajectory> trajectories;
  nlohmann::json metadata;

  long total_samples() const {
    long s = 0;
    for (const auto& tr : trajectories) s += tr.t.size();
    return s;
  }
};

struct DatasetSpec {
  int n_unforced = 10;
  int n_regulation = 10;
  int n_tracking = 10;
  double duration = 5.0;  // s
  double dt = 1e-3;       // s
  std::uint64_t seed = 0;

  // Initial-condition ranges (augmented coordinates).
  double pend_q0 = M_PI / 2.0;            // rad, U(-x, x)
  double pend_qd0 = 23.0 * M_PI / 180.0;  // rad/s
  double mesh_q0 = 1e-2;                  // m
  double mesh_qd0 = 2e-3;                 // m/s

  // Sine-tracking sampling ranges.
  double pend_amp_min_deg = 1.0, pend_amp_max_deg = 40.0;
  double pend_freq_min = 0.1, pend_freq_max = 3.0;
  double mesh_amp = 1e-2;  // amplitude U(-x, x)
  double mesh_freq_min = 0.2, mesh_freq_max = 3.0;

  // PD gains of the analytic PD+ law used to generate the controlled
  // trajectories (pendulum entries, then uniform mesh entries).
  std::vector<double> kp_pend{25.0, 15.0, 10.0};
  std::vector<double> kd_pend{2.0, 1.5, 1.0};
  double kp_mesh = 1.5;
  double kd_mesh = 0.15;
};

// Reproduces the benchmark recipe: unforced, regulation, and sine-tracking
// trajectories with seeded initial conditions; controlled torques come from
// the analytic PD+ law on the true plant. Pure function of (plant, spec).
Dataset generate_dataset(const AugmentedPendulum& plant, const DatasetSpec& spec);

void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);
void export_dataset_csv(const std::string& prefix, const Dataset& ds);

nlohmann::json dataset_spec_to_json(const DatasetSpec& spec);

}  // namespace rolnn::fomsim
