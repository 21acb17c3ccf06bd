#include "rolnn/pendulum.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "rolnn/diff.hpp"

namespace rolnn::fomsim {

namespace {

std::vector<double> to_std(const Vec& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}
Vec to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

using D1 = Dual<double>;

std::vector<D1> dual_seed(const Vec& v, int dir) {
  std::vector<D1> x(static_cast<std::size_t>(v.size()));
  for (int i = 0; i < v.size(); ++i)
    x[static_cast<std::size_t>(i)] = D1(v[i], i == dir ? 1.0 : 0.0);
  return x;
}

// Inverse of a unit-lower-triangular matrix given as nested vectors.
template <typename T>
std::vector<std::vector<T>> unit_lower_inverse(const std::vector<std::vector<T>>& l) {
  const int n = static_cast<int>(l.size());
  std::vector<std::vector<T>> inv(static_cast<std::size_t>(n),
                                  std::vector<T>(static_cast<std::size_t>(n), T(0.0)));
  for (int j = 0; j < n; ++j) {
    inv[static_cast<std::size_t>(j)][static_cast<std::size_t>(j)] = T(1.0);
    for (int i = j + 1; i < n; ++i) {
      T s(0.0);
      for (int k = j; k < i; ++k)
        s += l[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] *
             inv[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
      inv[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = -s;
    }
  }
  return inv;
}

}  // namespace

// --- TriangularDiffeo -------------------------------------------------------

TriangularDiffeo::TriangularDiffeo(int n, double eps, std::uint64_t seed)
    : eps_(eps) {
  CounterRng rng(seed, 77);
  c_ = Mat::Zero(n, n);
  for (int i = 1; i < n; ++i)
    for (int j = 0; j < i; ++j) c_(i, j) = rng.uniform(-1.0, 1.0);
}

Vec TriangularDiffeo::forward(const Vec& qa) const {
  return to_eigen(forward(to_std(qa)));
}
Vec TriangularDiffeo::inverse(const Vec& q) const {
  return to_eigen(inverse(to_std(q)));
}
Mat TriangularDiffeo::jacobian_mat(const Vec& qa) const {
  auto j = jacobian(to_std(qa));
  const int n = this->n();
  Mat out(n, n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k)
      out(i, k) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
  return out;
}
Vec TriangularDiffeo::second_directional(const Vec& qa, const Vec& v) const {
  return to_eigen(second_directional(to_std(qa), to_std(v)));
}

// --- Arm helpers -------------------------------------------------------------

Mat arm_task_jacobian(const ArmParams& p, const Vec& q) {
  const int nl = static_cast<int>(p.lengths.size());
  Vec a(nl);
  a[0] = q[0];
  for (int i = 1; i < nl; ++i) a[i] = a[i - 1] + q[i];
  Mat jac(2, nl);
  for (int k = 0; k < nl; ++k) {
    double jx = 0.0, jz = 0.0;
    for (int j = k; j < nl; ++j) {
      jx += p.lengths[static_cast<std::size_t>(j)] * std::cos(a[j]);
      jz += p.lengths[static_cast<std::size_t>(j)] * std::sin(a[j]);
    }
    jac(0, k) = jx;
    jac(1, k) = jz;
  }
  return jac;
}

Mat arm_task_jacobian_dot(const ArmParams& p, const Vec& q, const Vec& qd) {
  const int nl = static_cast<int>(p.lengths.size());
  Vec a(nl), ad(nl);
  a[0] = q[0];
  ad[0] = qd[0];
  for (int i = 1; i < nl; ++i) {
    a[i] = a[i - 1] + q[i];
    ad[i] = ad[i - 1] + qd[i];
  }
  Mat jd(2, nl);
  for (int k = 0; k < nl; ++k) {
    double jx = 0.0, jz = 0.0;
    for (int j = k; j < nl; ++j) {
      jx -= p.lengths[static_cast<std::size_t>(j)] * std::sin(a[j]) * ad[j];
      jz += p.lengths[static_cast<std::size_t>(j)] * std::cos(a[j]) * ad[j];
    }
    jd(0, k) = jx;
    jd(1, k) = jz;
  }
  return jd;
}

// --- ArmPlant ----------------------------------------------------------------

Mat ArmPlant::mass(const Vec& q) const {
  auto m = arm_mass(p_, to_std(q));
  const int nl = n();
  Mat out(nl, nl);
  for (int i = 0; i < nl; ++i)
    for (int j = 0; j < nl; ++j)
      out(i, j) = m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return out;
}

std::vector<Mat> ArmPlant::mass_partials(const Vec& q) const {
  const int nl = n();
  std::vector<Mat> out;
  out.reserve(static_cast<std::size_t>(nl));
  for (int k = 0; k < nl; ++k) {
    auto m = arm_mass(p_, dual_seed(q, k));
    Mat d(nl, nl);
    for (int i = 0; i < nl; ++i)
      for (int j = 0; j < nl; ++j)
        d(i, j) = m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].b;
    out.push_back(std::move(d));
  }
  return out;
}

double ArmPlant::potential(const Vec& q) const {
  return arm_potential(p_, to_std(q));
}

Vec ArmPlant::gravity(const Vec& q) const {
  const int nl = n();
  Vec g(nl);
  for (int k = 0; k < nl; ++k) g[k] = arm_potential(p_, dual_seed(q, k)).b;
  return g;
}

// --- AugmentedPendulum -------------------------------------------------------

AugmentedPendulum::AugmentedPendulum(const AugPendulumParams& params)
    : params_(params),
      arm_(params.arm, 0.0),
      diffeo_(static_cast<int>(params.arm.lengths.size()) +
                  params.mesh_rows * params.mesh_cols,
              params.diffeo_eps, params.diffeo_seed) {
  const int np = arm_.n();
  const int nm = params_.mesh_rows * params_.mesh_cols;
  n_ = np + nm;
  // Mesh stiffness: spring to the rest position plus nearest-neighbor springs
  // on the grid; K = k (I + L) with L the grid graph Laplacian.
  Mat lap = Mat::Zero(nm, nm);
  auto idx = [&](int r, int c) { return r * params_.mesh_cols + c; };
  for (int r = 0; r < params_.mesh_rows; ++r)
    for (int c = 0; c < params_.mesh_cols; ++c) {
      if (r + 1 < params_.mesh_rows) {
        int a = idx(r, c), b = idx(r + 1, c);
        lap(a, a) += 1;
        lap(b, b) += 1;
        lap(a, b) -= 1;
        lap(b, a) -= 1;
      }
      if (c + 1 < params_.mesh_cols) {
        int a = idx(r, c), b = idx(r, c + 1);
        lap(a, a) += 1;
        lap(b, b) += 1;
        lap(a, b) -= 1;
        lap(b, a) -= 1;
      }
    }
  k_mesh_ = params_.mesh_stiffness * (Mat::Identity(nm, nm) + lap);
  damping_diag_aug_ = Vec::Zero(n_);
  if (params_.damped) {
    for (int i = 0; i < np; ++i) damping_diag_aug_[i] = params_.damping_pend;
    for (int i = np; i < n_; ++i) damping_diag_aug_[i] = params_.damping_mesh;
  }
}

template <typename T>
std::vector<std::vector<T>> AugmentedPendulum::mass_t_(const std::vector<T>& q) const {
  const int n = n_;
  const int np = arm_.n();
  auto qa = diffeo_.inverse(q);
  std::vector<T> qp(qa.begin(), qa.begin() + np);
  auto mp = arm_mass(params_.arm, qp);
  auto jac = diffeo_.jacobian(qa);
  auto pinv = unit_lower_inverse(jac);  // P = J^{-1}
  // M = P^T M_a P with M_a = blkdiag(mp, mesh_mass I).
  // W = M_a P.
  std::vector<std::vector<T>> w(static_cast<std::size_t>(n),
                                std::vector<T>(static_cast<std::size_t>(n), T(0.0)));
  for (int i = 0; i < np; ++i)
    for (int j = 0; j < n; ++j) {
      T s(0.0);
      for (int k = 0; k < np; ++k)
        s += mp[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] *
             pinv[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
      w[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = s;
    }
  for (int i = np; i < n; ++i)
    for (int j = 0; j < n; ++j)
      w[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          params_.mesh_mass * pinv[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  std::vector<std::vector<T>> m(static_cast<std::size_t>(n),
                                std::vector<T>(static_cast<std::size_t>(n), T(0.0)));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      T s(0.0);
      for (int k = 0; k < n; ++k)
        s += pinv[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] *
             w[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
      m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = s;
    }
  return m;
}

template <typename T>
T AugmentedPendulum::potential_t_(const std::vector<T>& q) const {
  const int np = arm_.n();
  const int nm = n_ - np;
  auto qa = diffeo_.inverse(q);
  std::vector<T> qp(qa.begin(), qa.begin() + np);
  T v = arm_potential(params_.arm, qp);
  for (int i = 0; i < nm; ++i)
    for (int j = 0; j < nm; ++j)
      v += 0.5 * k_mesh_(i, j) * qa[static_cast<std::size_t>(np + i)] *
           qa[static_cast<std::size_t>(np + j)];
  return v;
}

Mat AugmentedPendulum::mass(const Vec& q) const {
  auto m = mass_t_(to_std(q));
  Mat out(n_, n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j)
      out(i, j) = m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return out;
}

std::vector<Mat> AugmentedPendulum::mass_partials(const Vec& q) const {
  std::vector<Mat> out;
  out.reserve(static_cast<std::size_t>(n_));
  for (int k = 0; k < n_; ++k) {
    auto m = mass_t_(dual_seed(q, k));
    Mat d(n_, n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j)
        d(i, j) = m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].b;
    out.push_back(std::move(d));
  }
  return out;
}

double AugmentedPendulum::potential(const Vec& q) const {
  return potential_t_(to_std(q));
}

Vec AugmentedPendulum::gravity(const Vec& q) const {
  Vec g(n_);
  for (int k = 0; k < n_; ++k) g[k] = potential_t_(dual_seed(q, k)).b;
  return g;
}

Mat AugmentedPendulum::damping(const Vec& q) const {
  const Vec qa = diffeo_.inverse(q);
  const Mat jinv = diffeo_.jacobian_mat(qa).inverse();
  return jinv.transpose() * damping_diag_aug_.asDiagonal() * jinv;
}

Mat AugmentedPendulum::actuation(const Vec& q) const {
  if (!params_.underactuated) return Mat::Identity(n_, n_);
  // Only the pendulum joints are driven: tau_aug = [u; 0], pulled forward to
  // the transformed coordinates as a covector.
  const Vec qa = diffeo_.inverse(q);
  const Mat jinv = diffeo_.jacobian_mat(qa).inverse();
  return jinv.transpose().leftCols(arm_.n());
}

Mat AugmentedPendulum::mass_augmented(const Vec& qa) const {
  const int np = arm_.n();
  Mat m = Mat::Zero(n_, n_);
  m.topLeftCorner(np, np) = arm_.mass(qa.head(np));
  m.bottomRightCorner(n_ - np, n_ - np) =
      params_.mesh_mass * Mat::Identity(n_ - np, n_ - np);
  return m;
}

Vec AugmentedPendulum::mesh_torque_components(const Vec& q, const Vec& tau) const {
  const Vec qa = diffeo_.inverse(q);
  const Mat j = diffeo_.jacobian_mat(qa);
  return (j.transpose() * tau).tail(n_ - arm_.n());
}

std::shared_ptr<AugmentedPendulum> build_augmented_pendulum(
    const AugPendulumParams& params) {
  return std::make_shared<AugmentedPendulum>(params);
}

std::shared_ptr<AugmentedPendulum> build_underactuated_pendulum(
    AugPendulumParams params) {
  params.underactuated = true;
  return std::make_shared<AugmentedPendulum>(params);
}

// --- References --------------------------------------------------------------

namespace {

ReferencePoint transform_reference(const AugmentedPendulum& plant, const Vec& qa,
                                   const Vec& qad, const Vec& qadd, double t) {
  const TriangularDiffeo& h = plant.diffeo();
  ReferencePoint r;
  r.t = t;
  r.q_d = h.forward(qa);
  const Mat j = h.jacobian_mat(qa);
  r.qd_d = j * qad;
  r.qdd_d = j * qadd + h.second_directional(qa, qad);
  return r;
}

}  // namespace

RegulationReference::RegulationReference(const AugmentedPendulum& plant,
                                         const Vec& qa_target) {
  point_ = transform_reference(plant, qa_target, Vec::Zero(plant.n()),
                               Vec::Zero(plant.n()), 0.0);
}

SineReference::SineReference(const AugmentedPendulum& plant,
                             std::vector<SineSpec> specs)
    : plant_(plant), specs_(std::move(specs)) {
  if (static_cast<int>(specs_.size()) != plant_.n())
    throw ConfigError("SineReference: one spec per DoF required");
}

int SineReference::n() const { return plant_.n(); }

ReferencePoint SineReference::at(double t) {
  const int n = plant_.n();
  Vec qa(n), qad(n), qadd(n);
  for (int i = 0; i < n; ++i) {
    const auto& s = specs_[static_cast<std::size_t>(i)];
    double w = 2.0 * M_PI * s.freq_hz;
    qa[i] = s.amplitude * std::sin(w * t + s.phase);
    qad[i] = s.amplitude * w * std::cos(w * t + s.phase);
    qadd[i] = -s.amplitude * w * w * std::sin(w * t + s.phase);
  }
  return transform_reference(plant_, qa, qad, qadd, t);
}

Vec dls_ik(const ArmParams& arm, const Vec& target_xz, const Vec& q0,
           double lambda, int max_iters, double tol) {
  Vec q = q0;
  for (int it = 0; it < max_iters; ++it) {
    auto fk = arm_fk(arm, std::vector<double>(q.data(), q.data() + q.size()));
    Vec e(2);
    e << target_xz[0] - fk[0], target_xz[1] - fk[1];
    if (e.norm() <= tol) return q;
    Mat j = arm_task_jacobian(arm, q);
    Mat a = j * j.transpose() + lambda * lambda * Mat::Identity(2, 2);
    q += j.transpose() * a.ldlt().solve(e);
  }
  throw NumericError("dls_ik: no convergence to target (" +
                     std::to_string(target_xz[0]) + ", " +
                     std::to_string(target_xz[1]) + ")");
}

CircleReferenceGenerator::CircleReferenceGenerator(const AugmentedPendulum& plant,
                                                   CircleSpec spec)
    : plant_(plant), spec_(std::move(spec)) {
  if (spec_.mesh_refs.empty())
    spec_.mesh_refs.assign(static_cast<std::size_t>(plant_.n_mesh()), SineSpec{});
  if (static_cast<int>(spec_.mesh_refs.size()) != plant_.n_mesh())
    throw ConfigError("CircleSpec: one mesh reference per mesh DoF required");
}

Vec CircleReferenceGenerator::task_point_(double t, Vec* vel, Vec* acc) const {
  const double w = 2.0 * M_PI * spec_.freq_hz;
  const double th = w * t;
  Vec p(2), v(2), a(2);
  p << spec_.cx + spec_.radius * std::cos(th), spec_.cz + spec_.radius * std::sin(th);
  v << -spec_.radius * w * std::sin(th), spec_.radius * w * std::cos(th);
  a << -spec_.radius * w * w * std::cos(th), -spec_.radius * w * w * std::sin(th);
  if (vel) *vel = v;
  if (acc) *acc = a;
  return p;
}

Vec CircleReferenceGenerator::initial_arm_configuration() {
  at(0.0);
  return warm_q_;
}

ReferencePoint CircleReferenceGenerator::at(double t) {
  const ArmParams& arm = plant_.arm().params();
  const int np = plant_.n_pend();
  const int nm = plant_.n_mesh();
  Vec v, a;
  Vec p = task_point_(t, &v, &a);

  Vec qp;
  if (warm_valid_) {
    qp = dls_ik(arm, p, warm_q_);
  } else {
    // First solve: try a few elbow seeds, keep the first that converges.
    const double seeds[][3] = {{0.4, 0.6, 0.5}, {-0.4, -0.6, -0.5},
                               {0.9, -0.8, 0.6}, {-0.9, 0.8, -0.6}};
    bool ok = false;
    for (const auto& s : seeds) {
      try {
        Vec q0(np);
        for (int i = 0; i < np; ++i) q0[i] = s[i];
        qp = dls_ik(arm, p, q0, 1e-3, 400);
        ok = true;
        break;
      } catch (const NumericError&) {
      }
    }
    if (!ok)
      throw NumericError("circle reference: target circle unreachable by the arm");
  }
  warm_q_ = qp;
  warm_valid_ = true;

  Mat j = arm_task_jacobian(arm, qp);
  Mat jjt = j * j.transpose();
  Eigen::LDLT<Mat> ldlt(jjt);
  if (ldlt.info() != Eigen::Success)
    throw NumericError("circle reference: singular task Jacobian");
  Vec qpd = j.transpose() * ldlt.solve(v);
  Mat jdot = arm_task_jacobian_dot(arm, qp, qpd);
  Vec qpdd = j.transpose() * ldlt.solve(a - jdot * qpd);

  Vec qa(np + nm), qad(np + nm), qadd(np + nm);
  qa.head(np) = qp;
  qad.head(np) = qpd;
  qadd.head(np) = qpdd;
  for (int i = 0; i < nm; ++i) {
    const auto& s = spec_.mesh_refs[static_cast<std::size_t>(i)];
    double w = 2.0 * M_PI * s.freq_hz;
    qa[np + i] = s.amplitude * std::sin(w * t + s.phase);
    qad[np + i] = s.amplitude * w * std::cos(w * t + s.phase);
    qadd[np + i] = -s.amplitude * w * w * std::sin(w * t + s.phase);
  }
  return transform_reference(plant_, qa, qad, qadd, t);
}

}  // namespace rolnn::fomsim
