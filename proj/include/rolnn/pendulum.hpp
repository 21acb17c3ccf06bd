#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "rolnn/common.hpp"
#include "rolnn/dual.hpp"
#include "rolnn/plant.hpp"

namespace rolnn::fomsim {

// --- Configuration diffeomorphism ----------------------------------------
//
// Triangular coupling flow q_i = qa_i + eps * tanh(sum_{j<i} c_ij qa_j).
// Unit-lower-triangular Jacobian; the inverse is exact by forward
// substitution (coordinate i depends only on already-recovered entries).
class TriangularDiffeo {
 public:
  TriangularDiffeo() = default;
  TriangularDiffeo(int n, double eps, std::uint64_t seed);

  int n() const { return static_cast<int>(c_.rows()); }
  double eps() const { return eps_; }
  const Mat& coupling() const { return c_; }

  template <typename T>
  std::vector<T> forward(const std::vector<T>& qa) const {
    const int n = this->n();
    std::vector<T> q(qa);
    for (int i = 0; i < n; ++i) {
      T s(0.0);
      for (int j = 0; j < i; ++j) s += c_(i, j) * qa[static_cast<std::size_t>(j)];
      q[static_cast<std::size_t>(i)] += eps_ * tanh(s);
    }
    return q;
  }

  template <typename T>
  std::vector<T> inverse(const std::vector<T>& q) const {
    const int n = this->n();
    std::vector<T> qa(q);
    for (int i = 0; i < n; ++i) {
      T s(0.0);
      for (int j = 0; j < i; ++j) s += c_(i, j) * qa[static_cast<std::size_t>(j)];
      qa[static_cast<std::size_t>(i)] = q[static_cast<std::size_t>(i)] - eps_ * tanh(s);
    }
    return qa;
  }

  // J_ij = d h_i / d qa_j, unit lower triangular.
  template <typename T>
  std::vector<std::vector<T>> jacobian(const std::vector<T>& qa) const {
    const int n = this->n();
    std::vector<std::vector<T>> jac(static_cast<std::size_t>(n),
                                    std::vector<T>(static_cast<std::size_t>(n), T(0.0)));
    for (int i = 0; i < n; ++i) {
      jac[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = T(1.0);
      T s(0.0);
      for (int j = 0; j < i; ++j) s += c_(i, j) * qa[static_cast<std::size_t>(j)];
      T th = tanh(s);
      T sech2 = T(1.0) - th * th;
      for (int j = 0; j < i; ++j)
        jac[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = eps_ * sech2 * c_(i, j);
    }
    return jac;
  }

  // Second derivative along v: (d2h)[v, v].
  template <typename T>
  std::vector<T> second_directional(const std::vector<T>& qa, const std::vector<T>& v) const {
    const int n = this->n();
    std::vector<T> out(static_cast<std::size_t>(n), T(0.0));
    for (int i = 0; i < n; ++i) {
      T s(0.0), sv(0.0);
      for (int j = 0; j < i; ++j) {
        s += c_(i, j) * qa[static_cast<std::size_t>(j)];
        sv += c_(i, j) * v[static_cast<std::size_t>(j)];
      }
      T th = tanh(s);
      T sech2 = T(1.0) - th * th;
      out[static_cast<std::size_t>(i)] = eps_ * (-2.0) * th * sech2 * sv * sv;
    }
    return out;
  }

  // Double-precision Eigen conveniences.
  Vec forward(const Vec& qa) const;
  Vec inverse(const Vec& q) const;
  Mat jacobian_mat(const Vec& qa) const;
  Vec second_directional(const Vec& qa, const Vec& v) const;

 private:
  Mat c_;  // strictly lower triangular coupling coefficients in [-1, 1]
  double eps_ = 0.2;
};

// --- Planar pendulum arm (point masses at link ends) ----------------------

struct ArmParams {
  std::vector<double> lengths{1.0, 1.0, 1.0};
  std::vector<double> masses{1.0, 1.0, 1.0};
  double gravity = 9.81;
};

// Mass matrix, potential (zero at the hanging rest), gravity vector, forward
// kinematics and task Jacobian of an n-link planar arm with relative joint
// angles measured from the downward vertical.
template <typename T>
std::vector<std::vector<T>> arm_mass(const ArmParams& p, const std::vector<T>& q) {
  const int nl = static_cast<int>(p.lengths.size());
  std::vector<T> a(q);
  for (int i = 1; i < nl; ++i) a[static_cast<std::size_t>(i)] += a[static_cast<std::size_t>(i - 1)];
  std::vector<T> ca(static_cast<std::size_t>(nl)), sa(static_cast<std::size_t>(nl));
  for (int i = 0; i < nl; ++i) {
    ca[static_cast<std::size_t>(i)] = cos(a[static_cast<std::size_t>(i)]);
    sa[static_cast<std::size_t>(i)] = sin(a[static_cast<std::size_t>(i)]);
  }
  std::vector<std::vector<T>> m(static_cast<std::size_t>(nl),
                                std::vector<T>(static_cast<std::size_t>(nl), T(0.0)));
  // Position Jacobian of mass i: dx_i/dq_k = sum_{j=k..i} l_j cos a_j (k <= i).
  std::vector<T> jx(static_cast<std::size_t>(nl)), jz(static_cast<std::size_t>(nl));
  for (int i = 0; i < nl; ++i) {
    for (int k = 0; k <= i; ++k) {
      T sx(0.0), sz(0.0);
      for (int j = k; j <= i; ++j) {
        sx += p.lengths[static_cast<std::size_t>(j)] * ca[static_cast<std::size_t>(j)];
        sz += p.lengths[static_cast<std::size_t>(j)] * sa[static_cast<std::size_t>(j)];
      }
      jx[static_cast<std::size_t>(k)] = sx;
      jz[static_cast<std::size_t>(k)] = sz;
    }
    for (int k = 0; k <= i; ++k)
      for (int l = 0; l <= i; ++l)
        m[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)] +=
            p.masses[static_cast<std::size_t>(i)] *
            (jx[static_cast<std::size_t>(k)] * jx[static_cast<std::size_t>(l)] +
             jz[static_cast<std::size_t>(k)] * jz[static_cast<std::size_t>(l)]);
  }
  return m;
}

template <typename T>
T arm_potential(const ArmParams& p, const std::vector<T>& q) {
  const int nl = static_cast<int>(p.lengths.size());
  std::vector<T> a(q);
  for (int i = 1; i < nl; ++i) a[static_cast<std::size_t>(i)] += a[static_cast<std::size_t>(i - 1)];
  T v(0.0);
  for (int i = 0; i < nl; ++i)
    for (int j = 0; j <= i; ++j)
      v += p.masses[static_cast<std::size_t>(i)] * p.gravity *
           p.lengths[static_cast<std::size_t>(j)] *
           (T(1.0) - cos(a[static_cast<std::size_t>(j)]));
  return v;
}

// End-effector position (x, z) with z measured upward from the pivot.
template <typename T>
std::vector<T> arm_fk(const ArmParams& p, const std::vector<T>& q) {
  const int nl = static_cast<int>(p.lengths.size());
  T a(0.0), x(0.0), z(0.0);
  for (int i = 0; i < nl; ++i) {
    a += q[static_cast<std::size_t>(i)];
    x += p.lengths[static_cast<std::size_t>(i)] * sin(a);
    z -= p.lengths[static_cast<std::size_t>(i)] * cos(a);
  }
  return {x, z};
}

Mat arm_task_jacobian(const ArmParams& p, const Vec& q);
Mat arm_task_jacobian_dot(const ArmParams& p, const Vec& q, const Vec& qd);

// n-link planar arm as a standalone plant (used by the intrusive reduced
// model and by unit tests).
class ArmPlant : public Plant {
 public:
  ArmPlant(ArmParams params, double joint_damping = 0.0)
      : p_(std::move(params)), damping_(joint_damping) {}

  int n() const override { return static_cast<int>(p_.lengths.size()); }
  int m() const override { return n(); }
  Mat mass(const Vec& q) const override;
  std::vector<Mat> mass_partials(const Vec& q) const override;
  double potential(const Vec& q) const override;
  Vec gravity(const Vec& q) const override;
  Mat damping(const Vec&) const override {
    return damping_ * Mat::Identity(n(), n());
  }
  Mat actuation(const Vec&) const override { return Mat::Identity(n(), n()); }

  const ArmParams& params() const { return p_; }

 private:
  ArmParams p_;
  double damping_;
};

// --- Augmented pendulum benchmark -----------------------------------------

struct AugPendulumParams {
  ArmParams arm;
  int mesh_rows = 4, mesh_cols = 3;  // 12 scalar displacement DoFs
  double mesh_mass = 0.1;            // kg
  double mesh_stiffness = 50.0;      // N/m, to rest position and grid neighbors
  double damping_pend = 0.1;
  double damping_mesh = 0.01;
  bool damped = true;
  bool underactuated = false;  // m = 3, only pendulum joints driven
  double diffeo_eps = 0.2;
  std::uint64_t diffeo_seed = 2024;
};

// 15-DoF plant: 3-link planar pendulum (+) 12-DoF mass-spring mesh, with all
// quantities expressed in the nonlinearly-transformed coordinates q = h(qa).
// The two subsystems are exactly decoupled in the augmented coordinates.
class AugmentedPendulum : public Plant {
 public:
  explicit AugmentedPendulum(const AugPendulumParams& params);

  int n() const override { return n_; }
  int m() const override { return params_.underactuated ? 3 : n_; }
  Mat mass(const Vec& q) const override;
  std::vector<Mat> mass_partials(const Vec& q) const override;
  double potential(const Vec& q) const override;
  Vec gravity(const Vec& q) const override;
  Mat damping(const Vec& q) const override;
  Mat actuation(const Vec& q) const override;

  const AugPendulumParams& params() const { return params_; }
  const TriangularDiffeo& diffeo() const { return diffeo_; }
  const ArmPlant& arm() const { return arm_; }
  int n_pend() const { return arm_.n(); }
  int n_mesh() const { return n_ - arm_.n(); }
  const Mat& mesh_stiffness() const { return k_mesh_; }

  // Block-diagonal mass in the augmented coordinates (structural tests).
  Mat mass_augmented(const Vec& qa) const;

  // Generalized-force components on the mesh DoFs in augmented coordinates:
  // (J_h^T tau)_{4..15}.
  Vec mesh_torque_components(const Vec& q, const Vec& tau) const;

 private:
  template <typename T>
  std::vector<std::vector<T>> mass_t_(const std::vector<T>& q) const;
  template <typename T>
  T potential_t_(const std::vector<T>& q) const;

  AugPendulumParams params_;
  ArmPlant arm_;
  TriangularDiffeo diffeo_;
  Mat k_mesh_;  // mesh stiffness matrix (rest + neighbor springs)
  Vec damping_diag_aug_;
  int n_;
};

std::shared_ptr<AugmentedPendulum> build_augmented_pendulum(
    const AugPendulumParams& params = {});
std::shared_ptr<AugmentedPendulum> build_underactuated_pendulum(
    AugPendulumParams params = {});

// --- Reference trajectories ------------------------------------------------

struct ReferencePoint {
  Vec q_d, qd_d, qdd_d;
  double t = 0.0;
};

class ReferenceGenerator {
 public:
  virtual ~ReferenceGenerator() = default;
  virtual ReferencePoint at(double t) = 0;
  virtual int n() const = 0;
};

// Static set point given in augmented coordinates, emitted in transformed
// coordinates.
class RegulationReference : public ReferenceGenerator {
 public:
  RegulationReference(const AugmentedPendulum& plant, const Vec& qa_target);
  ReferencePoint at(double) override { return point_; }
  int n() const override { return static_cast<int>(point_.q_d.size()); }

 private:
  ReferencePoint point_;
};

struct SineSpec {
  double amplitude = 0.0;
  double freq_hz = 0.0;
  double phase = 0.0;
};

// Per-joint sinusoids q_ref,i = A_i sin(2 pi f_i t + phi_i) in augmented
// coordinates, transformed through the diffeomorphism.
class SineReference : public ReferenceGenerator {
 public:
  SineReference(const AugmentedPendulum& plant, std::vector<SineSpec> specs);
  ReferencePoint at(double t) override;
  int n() const override;

 private:
  const AugmentedPendulum& plant_;
  std::vector<SineSpec> specs_;
};

struct CircleSpec {
  double cx = 0.8, cz = 0.0;  // center in the arm x-z plane, meters
  double radius = 0.4;
  double freq_hz = 1.0;
  std::vector<SineSpec> mesh_refs;  // one per mesh DoF
};

// Damped-least-squares IK for positions, Jacobian pseudoinverse for
// velocities, and qdd = J+ (xdd - Jdot qd) for accelerations; mesh DoFs
// follow sine references. Output is in transformed coordinates.
class CircleReferenceGenerator : public ReferenceGenerator {
 public:
  CircleReferenceGenerator(const AugmentedPendulum& plant, CircleSpec spec);
  ReferencePoint at(double t) override;
  int n() const override { return plant_.n(); }

  // First joint solution (used to start episodes on the reference).
  Vec initial_arm_configuration();

 private:
  Vec task_point_(double t, Vec* vel, Vec* acc) const;

  const AugmentedPendulum& plant_;
  CircleSpec spec_;
  Vec warm_q_;
  bool warm_valid_ = false;
};

// Damped least-squares IK for the planar arm. Throws on non-convergence.
Vec dls_ik(const ArmParams& arm, const Vec& target_xz, const Vec& q0,
           double lambda = 1e-3, int max_iters = 200, double tol = 1e-8);

}  // namespace rolnn::fomsim
