#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cstdio>

#include "rolnn/manifolds.hpp"

using namespace rolnn;
using namespace rolnn::manifolds;

namespace {

Mat random_symmetric(CounterRng& rng, int d, double scale) {
  Mat a = rng.normal_mat(d, d);
  Mat s = 0.5 * (a + a.transpose());
  double r = s.cwiseAbs().rowwise().sum().maxCoeff();
  if (r > scale) s *= scale / r;
  return s;
}

}  // namespace

TEST_CASE("sym_expm basics") {
  CHECK((sym_expm(Mat::Zero(3, 3)) - Mat::Identity(3, 3)).norm() ==
        doctest::Approx(0.0).epsilon(1e-15));

  Mat d = Mat::Zero(2, 2);
  d(0, 0) = std::log(2.0);
  d(1, 1) = std::log(3.0);
  Mat e = sym_expm(d);
  CHECK(e(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(e(1, 1) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(std::abs(e(0, 1)) < 1e-14);

  Mat asym(2, 2);
  asym << 0.0, 1.0, -1.0, 0.0;
  CHECK_THROWS_AS(sym_expm(asym), NumericError);
}

TEST_CASE("sym_expm matches the explicit eigendecomposition oracle") {
  CounterRng rng(11);
  Mat s = random_symmetric(rng, 3, 5.0);
  Eigen::SelfAdjointEigenSolver<Mat> es(s);
  Mat oracle = es.eigenvectors() *
               es.eigenvalues().array().exp().matrix().asDiagonal() *
               es.eigenvectors().transpose();
  CHECK((sym_expm(s) - oracle).cwiseAbs().maxCoeff() < 1e-10);

  // The Taylor scaling-and-squaring route used inside the networks agrees.
  Mat t;
  expm_taylor(s, &t);
  CHECK((sym_expm(s) - t).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("expm Frechet derivative matches finite differences") {
  CounterRng rng(12);
  Mat s = random_symmetric(rng, 3, 2.0);
  Mat e = random_symmetric(rng, 3, 1.0);
  Mat val, dval;
  expm_taylor_frechet(s, e, &val, &dval);
  double h = 1e-6;
  Mat p, m;
  expm_taylor(s + h * e, &p);
  expm_taylor(s - h * e, &m);
  Mat fd = (p - m) / (2.0 * h);
  CHECK((dval - fd).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("sym_logm and round trips") {
  Mat d = Mat::Zero(2, 2);
  d(0, 0) = 4.0;
  d(1, 1) = 9.0;
  Mat l = sym_logm(d);
  CHECK(l(0, 0) == doctest::Approx(std::log(4.0)));
  CHECK(l(1, 1) == doctest::Approx(std::log(9.0)));
  CHECK((sym_logm(Mat::Identity(3, 3))).norm() == doctest::Approx(0.0));

  Mat neg = Mat::Identity(2, 2);
  neg(1, 1) = -0.5;
  CHECK_THROWS_AS(sym_logm(neg), NumericError);

  CounterRng rng(13);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    int dd = 2 + static_cast<int>(rng.uniform(0, 3));
    Mat s = random_symmetric(rng, dd, 5.0);
    Mat p = sym_expm(s);
    // Positive-definiteness witness.
    Eigen::LLT<Mat> llt(p);
    CHECK(llt.info() == Eigen::Success);
    worst = std::max(worst, (sym_expm(sym_logm(p)) - p).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("biorthogonal retraction") {
  CounterRng rng(21);
  Mat o = rng.haar_orthogonal(6);
  Mat phi = o.leftCols(3);

  SUBCASE("already biorthogonal is a fixed point") {
    BiorthogonalPair p{phi, phi, Vec::Zero(6)};
    auto r = biorthogonal_retract(p);
    CHECK((r.psi - phi).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("scalar rescale undone") {
    BiorthogonalPair p{phi, 2.0 * phi, Vec::Zero(6)};
    auto r = biorthogonal_retract(p);
    CHECK((r.psi - phi).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("random perturbation restored") {
    Mat psi = phi + 0.05 * rng.normal_mat(6, 3);
    BiorthogonalPair p{phi, psi, Vec::Zero(6)};
    auto r = biorthogonal_retract(p);
    CHECK(r.constraint_residual() < 1e-12);
    // Least-change sanity: the retraction stays near the perturbed point.
    CHECK((r.psi - psi).norm() < 10.0 * (psi - phi).norm());
  }
  SUBCASE("rank-deficient pair rejected") {
    Mat psi = Mat::Zero(6, 3);
    BiorthogonalPair p{phi, psi, Vec::Zero(6)};
    CHECK_THROWS_AS(biorthogonal_retract(p), NumericError);
  }
}

TEST_CASE("riemannian adam") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    ParamVector params;
    params.add("w", Mat::Constant(2, 2, 1.5));
    RiemannianAdam opt;
    std::vector<Mat> g{Mat::Zero(2, 2)};
    opt.step(params, g, {{"lnn", 0.1}});
    CHECK((params.at("w") - Mat::Constant(2, 2, 1.5)).norm() == doctest::Approx(0.0));
  }
  SUBCASE("first-step closed form") {
    ParamVector params;
    params.add("w", Mat::Constant(1, 1, 2.0));
    RiemannianAdam opt;
    std::vector<Mat> g{Mat::Constant(1, 1, 1.0)};
    opt.step(params, g, {{"lnn", 0.1}});
    // theta <- theta - lr * mhat / (sqrt(vhat) + eps) = 2 - 0.1/(1 + 1e-8)
    CHECK(params.at("w")(0, 0) == doctest::Approx(2.0 - 0.1 / (1.0 + 1e-8)).epsilon(1e-12));
  }
  SUBCASE("lr = 0 is the identity") {
    ParamVector params;
    params.add("w", Mat::Random(3, 2));
    Mat before = params.at("w");
    RiemannianAdam opt;
    std::vector<Mat> g{Mat::Random(3, 2)};
    opt.step(params, g, {{"lnn", 0.0}});
    CHECK((params.at("w") - before).norm() == doctest::Approx(0.0));
  }
  SUBCASE("nan gradient aborts with block name") {
    ParamVector params;
    params.add("w", Mat::Zero(1, 1));
    RiemannianAdam opt;
    std::vector<Mat> g{Mat::Constant(1, 1, std::nan(""))};
    CHECK_THROWS_WITH_AS(opt.step(params, g, {{"lnn", 0.1}}),
                         doctest::Contains("w"), NumericError);
  }
  SUBCASE("constrained least squares decreases with constraint held") {
    CounterRng rng(31);
    Mat o = rng.haar_orthogonal(8);
    Mat phi = o.leftCols(3);
    ParamVector params;
    int phi_idx = params.add("phi", phi, ManifoldTag::kBiorthPhi, "ae");
    int psi_idx = params.add("psi", phi + 0.2 * rng.normal_mat(8, 3),
                             ManifoldTag::kBiorthPsi, "ae");
    params.blocks[static_cast<std::size_t>(psi_idx)].pair = phi_idx;
    // Re-biorthogonalize the starting point.
    params.blocks[1].value =
        biorthogonal_retract({params.blocks[0].value, params.blocks[1].value, Vec()}).psi;

    Vec x = rng.normal_vec(8);
    Vec y = rng.normal_vec(3);
    auto loss = [&](const Mat& psi) { return 0.5 * (psi.transpose() * x - y).squaredNorm(); };
    auto grad = [&](const Mat& psi) { return Mat(x * (psi.transpose() * x - y).transpose()); };

    RiemannianAdam opt;
    std::vector<double> history;
    for (int it = 0; it < 100; ++it) {
      history.push_back(loss(params.blocks[1].value));
      std::vector<Mat> g{Mat::Zero(8, 3), grad(params.blocks[1].value)};
      opt.step(params, g, {{"ae", 0.02}});
      CHECK(params.max_constraint_residual() <= 1e-10);
    }
    double head = 0, tail = 0;
    for (int i = 0; i < 10; ++i) {
      head += history[static_cast<std::size_t>(i)];
      tail += history[history.size() - 10 + static_cast<std::size_t>(i)];
    }
    CHECK(tail < head);
  }
}

TEST_CASE("checkpoint round trip") {
  ParamVector params;
  CounterRng rng(41);
  params.add("ae.l0.phi", rng.normal_mat(6, 3), ManifoldTag::kBiorthPhi, "ae");
  int psi = params.add("ae.l0.psi", rng.normal_mat(6, 3), ManifoldTag::kBiorthPsi, "ae");
  params.blocks[static_cast<std::size_t>(psi)].pair = 0;
  params.add("mass.w0", rng.normal_mat(32, 3), ManifoldTag::kEuclidean, "lnn");

  std::string path = "/tmp/rolnn_test_ckpt.bin";
  save_checkpoint(path, params);
  ParamVector loaded = load_checkpoint(path);
  REQUIRE(loaded.blocks.size() == params.blocks.size());
  for (std::size_t i = 0; i < params.blocks.size(); ++i) {
    CHECK(loaded.blocks[i].name == params.blocks[i].name);
    CHECK(loaded.blocks[i].tag == params.blocks[i].tag);
    CHECK(loaded.blocks[i].group == params.blocks[i].group);
    CHECK(loaded.blocks[i].pair == params.blocks[i].pair);
    CHECK((loaded.blocks[i].value - params.blocks[i].value).cwiseAbs().maxCoeff() == 0.0);
  }
  std::remove(path.c_str());
}
