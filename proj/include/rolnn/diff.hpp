#pragma once

#include <functional>
#include <string>

#include "rolnn/common.hpp"
#include "rolnn/dual.hpp"

namespace rolnn::diff {

// Callables evaluable on dual scalars. Models expose adapters of these types.
using D1 = Dual<double>;
using D2 = Dual<Dual<double>>;
using ScalarFnD = std::function<D1(const std::vector<D1>&)>;
using VecFnD = std::function<std::vector<D1>(const std::vector<D1>&)>;
using VecFnD2 = std::function<std::vector<D2>(const std::vector<D2>&)>;
using ScalarFn = std::function<double(const Vec&)>;
using VecFn = std::function<Vec(const Vec&)>;

inline constexpr double kFdStep = 1e-6;
inline constexpr double kEpsDenom = 1e-12;

struct DiffReport {
  Mat analytic;
  Mat numeric;
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
  bool pass = true;
};

// dl/dx of a scalar map, exact via forward duals (one pass per coordinate).
inline Vec gradient(const ScalarFnD& f, const Vec& at) {
  const int n = static_cast<int>(at.size());
  Vec g(n);
  std::vector<D1> x(n);
  for (int i = 0; i < n; ++i) x[i] = D1(at[i]);
  for (int k = 0; k < n; ++k) {
    x[k].b = 1.0;
    D1 y = f(x);
    if (!std::isfinite(y.a))
      throw NumericError("gradient: non-finite value at coordinate " + std::to_string(k));
    g[k] = y.b;
    x[k].b = 0.0;
  }
  return g;
}

// J[i][j] = df_i/dx_j, exact via forward duals.
inline Mat jacobian(const VecFnD& f, const Vec& at) {
  const int n = static_cast<int>(at.size());
  std::vector<D1> x(n);
  for (int i = 0; i < n; ++i) x[i] = D1(at[i]);
  Mat jac;
  for (int k = 0; k < n; ++k) {
    x[k].b = 1.0;
    std::vector<D1> y = f(x);
    if (jac.size() == 0) jac.resize(static_cast<int>(y.size()), n);
    if (static_cast<int>(y.size()) != jac.rows())
      throw NumericError("jacobian: output dimension changed between evaluations");
    for (int i = 0; i < jac.rows(); ++i) jac(i, k) = y[i].b;
    x[k].b = 0.0;
  }
  return jac;
}

// d^2 f [dir, dir]: the curvature contraction, via nested duals.
inline Vec second_directional(const VecFnD2& f, const Vec& at, const Vec& dir) {
  const int n = static_cast<int>(at.size());
  std::vector<D2> x(n);
  for (int i = 0; i < n; ++i) {
    x[i].a = D1(at[i], dir[i]);
    x[i].b = D1(dir[i], 0.0);
  }
  std::vector<D2> y = f(x);
  Vec out(static_cast<int>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) out[static_cast<int>(i)] = y[i].b.b;
  return out;
}

// Central finite differences, the independent oracle for all analytic paths.
inline Vec fd_gradient(const ScalarFn& f, const Vec& at, double h = kFdStep) {
  Vec g(at.size());
  Vec x = at;
  for (int k = 0; k < at.size(); ++k) {
    x[k] = at[k] + h;
    double fp = f(x);
    x[k] = at[k] - h;
    double fm = f(x);
    x[k] = at[k];
    g[k] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline Mat fd_jacobian(const VecFn& f, const Vec& at, double h = kFdStep) {
  Vec x = at;
  Mat jac;
  for (int k = 0; k < at.size(); ++k) {
    x[k] = at[k] + h;
    Vec fp = f(x);
    x[k] = at[k] - h;
    Vec fm = f(x);
    x[k] = at[k];
    if (jac.size() == 0) jac.resize(fp.size(), at.size());
    jac.col(k) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

// FD of the Jacobian-vector product along dir: oracle for second_directional.
inline Vec fd_second_directional(const VecFn& f, const Vec& at, const Vec& dir,
                                 double h = 1e-5) {
  Vec fp = f(at + h * dir);
  Vec f0 = f(at);
  Vec fm = f(at - h * dir);
  return (fp - 2.0 * f0 + fm) / (h * h);
}

// Relative error uses the array magnitude as denominator so exact zeros in
// otherwise O(1) objects are not amplified by FD roundoff.
inline DiffReport check(const Mat& analytic, const Mat& numeric, double tol) {
  DiffReport r;
  r.analytic = analytic;
  r.numeric = numeric;
  r.max_abs_err = (analytic - numeric).cwiseAbs().maxCoeff();
  double denom = std::max({analytic.cwiseAbs().maxCoeff(),
                           numeric.cwiseAbs().maxCoeff(), kEpsDenom});
  r.max_rel_err = r.max_abs_err / denom;
  r.pass = r.max_rel_err <= tol;
  return r;
}

inline DiffReport check(const Vec& analytic, const Vec& numeric, double tol) {
  return check(Mat(analytic), Mat(numeric), tol);
}

}  // namespace rolnn::diff
