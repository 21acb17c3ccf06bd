#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rolnn/dataset.hpp"
#include "rolnn/pendulum.hpp"
#include "rolnn/plant.hpp"

using namespace rolnn;
using namespace rolnn::fomsim;

namespace {

// Constant-mass plant with quadratic potential: M qdd + K q = B u - D qd.
class LinearPlant : public Plant {
 public:
  LinearPlant(Mat m, Mat k, Mat d) : m_(std::move(m)), k_(std::move(k)), d_(std::move(d)) {}
  int n() const override { return static_cast<int>(m_.rows()); }
  int m() const override { return n(); }
  Mat mass(const Vec&) const override { return m_; }
  std::vector<Mat> mass_partials(const Vec&) const override {
    return std::vector<Mat>(static_cast<std::size_t>(n()), Mat::Zero(n(), n()));
  }
  double potential(const Vec& q) const override { return 0.5 * q.dot(k_ * q); }
  Vec gravity(const Vec& q) const override { return k_ * q; }
  Mat damping(const Vec&) const override { return d_; }
  Mat actuation(const Vec&) const override { return Mat::Identity(n(), n()); }

 private:
  Mat m_, k_, d_;
};

}  // namespace

TEST_CASE("christoffel of a constant metric vanishes") {
  LinearPlant plant(Mat::Identity(3, 3), Mat::Zero(3, 3), Mat::Zero(3, 3));
  Vec q = Vec::Random(3), qd = Vec::Random(3);
  CHECK(plant.coriolis(q, qd).norm() == doctest::Approx(0.0));

  // 1-DoF pendulum: M = m l^2 constant.
  ArmPlant one_link({{1.3}, {0.7}, 9.81});
  Vec q1(1), qd1(1);
  q1 << 0.4;
  qd1 << -1.2;
  CHECK(one_link.coriolis(q1, qd1).norm() < 1e-14);
}

TEST_CASE("two-link coriolis matches the textbook closed form") {
  ArmPlant arm({{1.0, 1.0}, {1.0, 1.0}, 9.81});
  CounterRng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Vec q = rng.uniform_vec(2, -2.5, 2.5);
    Vec qd = rng.uniform_vec(2, -3.0, 3.0);
    const double m2 = 1.0, l1 = 1.0, l2 = 1.0;
    const double h = m2 * l1 * l2 * std::sin(q[1]);
    Mat c_ref(2, 2);
    c_ref << -h * qd[1], -h * (qd[0] + qd[1]), h * qd[0], 0.0;
    CHECK((arm.coriolis(q, qd) - c_ref).cwiseAbs().maxCoeff() < 1e-8);

    // Mass matrix closed form as well.
    const double c2 = std::cos(q[1]);
    Mat m_ref(2, 2);
    m_ref << 2.0 + 1.0 + 2.0 * c2, 1.0 + c2, 1.0 + c2, 1.0;
    CHECK((arm.mass(q) - m_ref).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("skew symmetry of Mdot - 2C") {
  auto plant = build_augmented_pendulum();
  CounterRng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    Vec q = rng.uniform_vec(15, -1.0, 1.0);
    Vec qd = rng.uniform_vec(15, -1.0, 1.0);
    auto dm = plant->mass_partials(q);
    Mat mdot = Mat::Zero(15, 15);
    for (int k = 0; k < 15; ++k) mdot += dm[static_cast<std::size_t>(k)] * qd[k];
    Mat c = plant->coriolis(q, qd);
    CHECK(std::abs(qd.dot((mdot - 2.0 * c) * qd)) < 1e-9);
    // The full matrix is skew, not just its quadratic form.
    Mat skew = mdot - 2.0 * c;
    CHECK((skew + skew.transpose()).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("forward dynamics basics") {
  SUBCASE("free particle") {
    LinearPlant plant(Mat::Identity(3, 3), Mat::Zero(3, 3), Mat::Zero(3, 3));
    Vec qdd = forward_dynamics(plant, {Vec::Random(3), Vec::Random(3)}, Vec::Zero(3));
    CHECK(qdd.norm() == doctest::Approx(0.0));
  }
  SUBCASE("mass-spring Hooke's law") {
    LinearPlant plant(Mat::Identity(1, 1), Mat::Identity(1, 1), Mat::Zero(1, 1));
    Vec q(1), qd(1);
    q << 1.0;
    qd << 0.0;
    Vec qdd = forward_dynamics(plant, {q, qd}, Vec::Zero(1));
    CHECK(qdd[0] == doctest::Approx(-1.0));
  }
  SUBCASE("plug-back residual on the augmented pendulum") {
    auto plant = build_augmented_pendulum();
    CounterRng rng(9);
    Vec q = rng.uniform_vec(15, -0.8, 0.8);
    Vec qd = rng.uniform_vec(15, -0.5, 0.5);
    Vec u = rng.uniform_vec(15, -2.0, 2.0);
    Vec qdd = forward_dynamics(*plant, {q, qd}, u);
    Vec resid = plant->mass(q) * qdd + plant->coriolis(q, qd) * qd +
                plant->damping(q) * qd + plant->gravity(q) - plant->actuation(q) * u;
    CHECK(resid.cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("rk4 integrator") {
  SUBCASE("constant velocity is exact") {
    LinearPlant plant(Mat::Identity(2, 2), Mat::Zero(2, 2), Mat::Zero(2, 2));
    Vec q0(2), v(2);
    q0 << 1.0, -2.0;
    v << 0.5, 0.25;
    FullState x1 = step_rk4(plant, {q0, v}, Vec::Zero(2), 0.125);
    CHECK((x1.q - (q0 + 0.125 * v)).norm() == doctest::Approx(0.0));
    CHECK((x1.qd - v).norm() == doctest::Approx(0.0));
  }
  SUBCASE("harmonic oscillator against the closed-form sinusoid") {
    LinearPlant plant(Mat::Identity(1, 1), Mat::Identity(1, 1), Mat::Zero(1, 1));
    Vec q0(1), qd0(1);
    q0 << 1.0;
    qd0 << 0.0;
    const double dt = 1e-3;
    const int steps = static_cast<int>(std::round(2.0 * M_PI / dt));
    FullState x{q0, qd0};
    for (int k = 0; k < steps; ++k) x = step_rk4(plant, x, Vec::Zero(1), dt);
    const double tf = steps * dt;
    CHECK(std::abs(x.q[0] - std::cos(tf)) < 1e-8);
    CHECK(std::abs(x.qd[0] + std::sin(tf)) < 1e-8);
  }
  SUBCASE("energy conservation over 5 s, undamped 3-link pendulum") {
    AugPendulumParams params;
    params.damped = false;
    ArmPlant arm(params.arm);
    Vec q0(3), qd0(3);
    q0 << 0.8, -0.5, 0.3;
    qd0 << 0.2, 0.1, -0.3;
    FullState x{q0, qd0};
    const double e0 = energy(arm, x);
    double max_drift = 0.0;
    for (int k = 0; k < 5000; ++k) {
      x = step_rk4(arm, x, Vec::Zero(3), 1e-3);
      max_drift = std::max(max_drift, std::abs(energy(arm, x) - e0));
    }
    CHECK(max_drift / std::abs(e0) <= 1e-6);
  }
  SUBCASE("energy conservation, full undamped augmented plant") {
    AugPendulumParams params;
    params.damped = false;
    auto plant = build_augmented_pendulum(params);
    CounterRng rng(10);
    Vec qa0(15), qad0(15);
    qa0.head(3) = rng.uniform_vec(3, -1.0, 1.0);
    qad0.head(3) = rng.uniform_vec(3, -0.4, 0.4);
    qa0.tail(12) = rng.uniform_vec(12, -1e-2, 1e-2);
    qad0.tail(12) = rng.uniform_vec(12, -2e-3, 2e-3);
    FullState x{plant->diffeo().forward(qa0), plant->diffeo().jacobian_mat(qa0) * qad0};
    const double e0 = energy(*plant, x);
    for (int k = 0; k < 5000; ++k) x = step_rk4(*plant, x, Vec::Zero(15), 1e-3);
    CHECK(std::abs(energy(*plant, x) - e0) / std::abs(e0) <= 1e-6);
  }
  SUBCASE("damped unforced energy is non-increasing") {
    auto plant = build_augmented_pendulum();
    CounterRng rng(11);
    Vec qa0(15), qad0(15);
    qa0.head(3) = rng.uniform_vec(3, -1.0, 1.0);
    qad0.head(3) = rng.uniform_vec(3, -0.4, 0.4);
    qa0.tail(12) = rng.uniform_vec(12, -1e-2, 1e-2);
    qad0.tail(12) = rng.uniform_vec(12, -2e-3, 2e-3);
    FullState x{plant->diffeo().forward(qa0), plant->diffeo().jacobian_mat(qa0) * qad0};
    double prev = energy(*plant, x);
    for (int k = 0; k < 2000; ++k) {
      x = step_rk4(*plant, x, Vec::Zero(15), 1e-3);
      double e = energy(*plant, x);
      CHECK(e <= prev + 1e-8);
      prev = e;
    }
  }
}

TEST_CASE("augmented pendulum structure") {
  auto plant = build_augmented_pendulum();
  CounterRng rng(12);

  SUBCASE("damping diagonal in augmented coordinates") {
    Vec q = rng.uniform_vec(15, -1.0, 1.0);
    Vec qa = plant->diffeo().inverse(q);
    Mat j = plant->diffeo().jacobian_mat(qa);
    Mat d_aug = j.transpose() * plant->damping(q) * j;
    Vec expect(15);
    expect << 0.1, 0.1, 0.1, Vec::Constant(12, 0.01);
    CHECK((d_aug.diagonal() - expect).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((d_aug - Mat(expect.asDiagonal())).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("diffeomorphism round trip") {
    for (int trial = 0; trial < 50; ++trial) {
      Vec q = rng.uniform_vec(15, -2.0, 2.0);
      CHECK((plant->diffeo().forward(plant->diffeo().inverse(q)) - q)
                .cwiseAbs()
                .maxCoeff() < 1e-10);
    }
  }
  SUBCASE("mass block-diagonal in augmented coordinates") {
    Vec q = rng.uniform_vec(15, -1.0, 1.0);
    Vec qa = plant->diffeo().inverse(q);
    Mat j = plant->diffeo().jacobian_mat(qa);
    Mat m_aug = j.transpose() * plant->mass(q) * j;
    CHECK((m_aug.topRightCorner(3, 12)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((m_aug - plant->mass_augmented(qa)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((m_aug.bottomRightCorner(12, 12) - 0.1 * Mat::Identity(12, 12))
              .cwiseAbs()
              .maxCoeff() < 1e-12);
  }
  SUBCASE("coriolis blocks never couple in augmented coordinates") {
    // C transforms with an extra dJ term, so check the augmented-coordinate
    // plant directly: pendulum C from the arm, mesh C = 0.
    Vec qa = rng.uniform_vec(15, -0.8, 0.8);
    Vec qad = rng.uniform_vec(15, -0.5, 0.5);
    ArmPlant arm(plant->params().arm);
    Mat c_p = arm.coriolis(qa.head(3), qad.head(3));
    CHECK(c_p.allFinite());
    // Mesh mass is constant, so its Christoffel block vanishes identically.
    LinearPlant mesh(0.1 * Mat::Identity(12, 12), plant->mesh_stiffness(),
                     Mat::Zero(12, 12));
    CHECK(mesh.coriolis(qa.tail(12), qad.tail(12)).norm() == doctest::Approx(0.0));
  }
}

TEST_CASE("underactuated pendulum") {
  auto plant = build_underactuated_pendulum();
  CHECK(plant->m() == 3);
  CounterRng rng(13);
  Vec q = rng.uniform_vec(15, -1.0, 1.0);
  Mat b = plant->actuation(q);
  CHECK(b.cols() == 3);
  Eigen::JacobiSVD<Mat> svd(b);
  CHECK(svd.singularValues().minCoeff() > 1e-6);

  // u = 0 reproduces the unforced fully-actuated plant trajectory.
  auto full = build_augmented_pendulum();
  Vec qa0 = rng.uniform_vec(15, -0.5, 0.5);
  FullState x_u{full->diffeo().forward(qa0), Vec::Zero(15)};
  FullState x_f = x_u;
  for (int k = 0; k < 200; ++k) {
    x_u = step_rk4(*plant, x_u, Vec::Zero(3), 1e-3);
    x_f = step_rk4(*full, x_f, Vec::Zero(15), 1e-3);
  }
  CHECK((x_u.q - x_f.q).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("circle reference via damped least-squares IK") {
  auto plant = build_augmented_pendulum();
  CircleSpec spec;
  spec.cx = 0.8;
  spec.cz = -0.4;
  spec.radius = 0.5;
  spec.freq_hz = 0.8;
  CircleReferenceGenerator gen(*plant, spec);
  const auto& arm = plant->arm().params();
  for (int k = 0; k <= 40; ++k) {
    double t = 0.025 * k;
    ReferencePoint rp = gen.at(t);
    Vec qa = plant->diffeo().inverse(rp.q_d);
    auto fk = arm_fk(arm, std::vector<double>(qa.data(), qa.data() + 3));
    double px = spec.cx + spec.radius * std::cos(2.0 * M_PI * spec.freq_hz * t);
    double pz = spec.cz + spec.radius * std::sin(2.0 * M_PI * spec.freq_hz * t);
    CHECK(std::hypot(fk[0] - px, fk[1] - pz) < 1e-6);
  }

  // Reference velocity consistency: FD in time of q_d matches qd_d up to
  // IK-tolerance noise. The acceleration is defined through the task
  // constraint (J qdd = xdd - Jdot qd), not as the time derivative of the
  // minimum-norm velocity, so check that defining relation instead.
  double t0 = 0.31, h = 1e-5;
  ReferencePoint rm = gen.at(t0 - h), r0 = gen.at(t0), rp2 = gen.at(t0 + h);
  CHECK(((rp2.q_d - rm.q_d) / (2.0 * h) - r0.qd_d).cwiseAbs().maxCoeff() < 1e-4);
  {
    Vec qa = plant->diffeo().inverse(r0.q_d);
    Vec qad = plant->diffeo().jacobian_mat(qa).inverse() * r0.qd_d;
    Vec qadd = plant->diffeo().jacobian_mat(qa).inverse() *
               (r0.qdd_d - plant->diffeo().second_directional(qa, qad));
    Mat j = arm_task_jacobian(arm, qa.head(3));
    Mat jd = arm_task_jacobian_dot(arm, qa.head(3), qad.head(3));
    const double w = 2.0 * M_PI * spec.freq_hz;
    Vec xdd(2);
    xdd << -spec.radius * w * w * std::cos(w * t0),
        -spec.radius * w * w * std::sin(w * t0);
    CHECK((j * qadd.head(3) + jd * qad.head(3) - xdd).cwiseAbs().maxCoeff() < 1e-7);
  }

  // IK at the current pose returns immediately.
  Vec q_now = plant->diffeo().inverse(gen.at(0.0).q_d).head(3);
  auto fk0 = arm_fk(arm, std::vector<double>(q_now.data(), q_now.data() + 3));
  Vec target(2);
  target << fk0[0], fk0[1];
  Vec q_ik = dls_ik(arm, target, q_now);
  CHECK((q_ik - q_now).norm() < 1e-10);

  // Unreachable circle errors out.
  CircleSpec bad;
  bad.cx = 5.0;
  bad.cz = 0.0;
  bad.radius = 0.3;
  CircleReferenceGenerator bad_gen(*plant, bad);
  CHECK_THROWS_AS(bad_gen.at(0.0), NumericError);
}

TEST_CASE("dataset generation") {
  auto plant = build_augmented_pendulum();
  DatasetSpec spec;
  spec.n_unforced = 1;
  spec.n_regulation = 1;
  spec.n_tracking = 1;
  spec.duration = 0.2;
  spec.seed = 99;

  Dataset ds = generate_dataset(*plant, spec);
  CHECK(ds.trajectories.size() == 3);
  CHECK(ds.trajectories[0].t.size() == 200);
  CHECK(ds.n == 15);

  SUBCASE("determinism") {
    Dataset ds2 = generate_dataset(*plant, spec);
    for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
      CHECK((ds.trajectories[i].q - ds2.trajectories[i].q).cwiseAbs().maxCoeff() == 0.0);
      CHECK((ds.trajectories[i].tau - ds2.trajectories[i].tau).cwiseAbs().maxCoeff() == 0.0);
    }
  }
  SUBCASE("replay oracle") {
    for (const auto& tr : ds.trajectories) {
      FullState x{Vec(tr.q.row(0).transpose()), Vec(tr.qd.row(0).transpose())};
      double worst = 0.0;
      for (int k = 0; k + 1 < tr.t.size(); ++k) {
        x = step_rk4(*plant, x, Vec(tr.u.row(k).transpose()), ds.dt);
        worst = std::max(worst, (x.q - Vec(tr.q.row(k + 1).transpose())).cwiseAbs().maxCoeff());
      }
      CHECK(worst < 1e-8);
    }
  }
  SUBCASE("container round trip and csv export") {
    std::string path = "/tmp/rolnn_test_dataset.bin";
    save_dataset(path, ds);
    Dataset loaded = load_dataset(path);
    CHECK(loaded.n == ds.n);
    CHECK(loaded.dt == ds.dt);
    REQUIRE(loaded.trajectories.size() == ds.trajectories.size());
    for (std::size_t i = 0; i < ds.trajectories.size(); ++i)
      CHECK((loaded.trajectories[i].q - ds.trajectories[i].q).cwiseAbs().maxCoeff() == 0.0);
    std::remove(path.c_str());
    std::remove((path + ".json").c_str());
  }
  SUBCASE("invalid ranges rejected") {
    DatasetSpec bad = spec;
    bad.dt = -1.0;
    CHECK_THROWS_AS(generate_dataset(*plant, bad), ConfigError);
  }
}

TEST_CASE("paper-scale dataset dimensions") {
  // Shape-only check at full scale is too slow for unit tests; verify the
  // sample count arithmetic instead.
  DatasetSpec spec;
  CHECK(spec.n_unforced + spec.n_regulation + spec.n_tracking == 30);
  CHECK(static_cast<int>(std::llround(spec.duration / spec.dt)) == 5000);
}
