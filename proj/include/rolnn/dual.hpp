#pragma once

#include <cmath>
#include <vector>

namespace rolnn {

// Forward-mode dual number carrying one tangent. Nest as Dual<Dual<double>>
// for second-order directional derivatives.
template <typename T>
struct Dual {
  T a{};  // value
  T b{};  // tangent

  Dual() = default;
  Dual(T value) : a(value), b(T(0)) {}  // NOLINT: implicit from value
  Dual(T value, T tangent) : a(value), b(tangent) {}

  Dual& operator+=(const Dual& o) {
    a += o.a;
    b += o.b;
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    a -= o.a;
    b -= o.b;
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    b = b * o.a + a * o.b;
    a = a * o.a;
    return *this;
  }
};

template <typename T>
Dual<T> operator+(Dual<T> x, const Dual<T>& y) { return x += y; }
template <typename T>
Dual<T> operator-(Dual<T> x, const Dual<T>& y) { return x -= y; }
template <typename T>
Dual<T> operator-(const Dual<T>& x) { return {-x.a, -x.b}; }
template <typename T>
Dual<T> operator*(Dual<T> x, const Dual<T>& y) { return x *= y; }
template <typename T>
Dual<T> operator/(const Dual<T>& x, const Dual<T>& y) {
  T inv = T(1) / y.a;
  return {x.a * inv, (x.b - x.a * inv * y.b) * inv};
}

template <typename T>
Dual<T> operator+(Dual<T> x, double c) { return {x.a + T(c), x.b}; }
template <typename T>
Dual<T> operator+(double c, Dual<T> x) { return {x.a + T(c), x.b}; }
template <typename T>
Dual<T> operator-(Dual<T> x, double c) { return {x.a - T(c), x.b}; }
template <typename T>
Dual<T> operator-(double c, const Dual<T>& x) { return {T(c) - x.a, -x.b}; }
template <typename T>
Dual<T> operator*(Dual<T> x, double c) { return {x.a * T(c), x.b * T(c)}; }
template <typename T>
Dual<T> operator*(double c, Dual<T> x) { return x * c; }
template <typename T>
Dual<T> operator/(Dual<T> x, double c) { return x * (1.0 / c); }
template <typename T>
Dual<T> operator/(double c, const Dual<T>& x) {
  return Dual<T>(T(c)) / x;
}

using std::cos;
using std::cosh;
using std::exp;
using std::log;
using std::sin;
using std::sinh;
using std::sqrt;
using std::tanh;

template <typename T>
Dual<T> sin(const Dual<T>& x) { return {sin(x.a), cos(x.a) * x.b}; }
template <typename T>
Dual<T> cos(const Dual<T>& x) { return {cos(x.a), -sin(x.a) * x.b}; }
template <typename T>
Dual<T> tanh(const Dual<T>& x) {
  T t = tanh(x.a);
  return {t, (T(1) - t * t) * x.b};
}
template <typename T>
Dual<T> exp(const Dual<T>& x) {
  T e = exp(x.a);
  return {e, e * x.b};
}
template <typename T>
Dual<T> log(const Dual<T>& x) { return {log(x.a), x.b / x.a}; }
template <typename T>
Dual<T> sqrt(const Dual<T>& x) {
  T s = sqrt(x.a);
  return {s, x.b / (T(2) * s)};
}

inline double value_of(double x) { return x; }
template <typename T>
double value_of(const Dual<T>& x) { return value_of(x.a); }

// Numerically stable softplus, generic over the scalar type.
inline double softplus(double x) {
  return x > 30.0 ? x : std::log1p(std::exp(x));
}
inline double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}
template <typename T>
Dual<T> softplus(const Dual<T>& x) {
  return {softplus(x.a), sigmoid(x.a) * x.b};
}
template <typename T>
Dual<T> sigmoid(const Dual<T>& x) {
  T s = sigmoid(x.a);
  return {s, s * (T(1) - s) * x.b};
}

template <typename T>
using DVec = std::vector<T>;

}  // namespace rolnn
