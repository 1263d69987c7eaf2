#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "ckm/numerics.hpp"

namespace ckm {

/// Second-order forward-mode value: f, grad f, Hess f with respect to N
/// independent variables. Used to evaluate copula log-density derivative
/// bundles exactly from a single templated expression.
template <int N>
struct Dual2 {
  using Vec = Eigen::Matrix<double, N, 1>;
  using Mat = Eigen::Matrix<double, N, N>;

  double v = 0.0;
  Vec g = Vec::Zero();
  Mat h = Mat::Zero();

  Dual2() = default;
  explicit Dual2(double value) : v(value) {}

  static Dual2 variable(double value, int index) {
    Dual2 d(value);
    d.g[index] = 1.0;
    return d;
  }

  /// Composition with a scalar map given f(v), f'(v), f''(v).
  Dual2 chain(double f, double fp, double fpp) const {
    Dual2 r;
    r.v = f;
    r.g = fp * g;
    r.h = fp * h + fpp * (g * g.transpose());
    return r;
  }
};

template <int N>
Dual2<N> operator+(const Dual2<N>& a, const Dual2<N>& b) {
  Dual2<N> r;
  r.v = a.v + b.v;
  r.g = a.g + b.g;
  r.h = a.h + b.h;
  return r;
}
template <int N>
Dual2<N> operator-(const Dual2<N>& a, const Dual2<N>& b) {
  Dual2<N> r;
  r.v = a.v - b.v;
  r.g = a.g - b.g;
  r.h = a.h - b.h;
  return r;
}
template <int N>
Dual2<N> operator-(const Dual2<N>& a) {
  Dual2<N> r;
  r.v = -a.v;
  r.g = -a.g;
  r.h = -a.h;
  return r;
}
template <int N>
Dual2<N> operator*(const Dual2<N>& a, const Dual2<N>& b) {
  Dual2<N> r;
  r.v = a.v * b.v;
  r.g = a.v * b.g + b.v * a.g;
  r.h = a.v * b.h + b.v * a.h + a.g * b.g.transpose() + b.g * a.g.transpose();
  return r;
}
template <int N>
Dual2<N> operator/(const Dual2<N>& a, const Dual2<N>& b) {
  const double iv = 1.0 / b.v;
  return a * b.chain(iv, -iv * iv, 2.0 * iv * iv * iv);
}

template <int N>
Dual2<N> operator+(const Dual2<N>& a, double s) {
  Dual2<N> r = a;
  r.v += s;
  return r;
}
template <int N>
Dual2<N> operator+(double s, const Dual2<N>& a) { return a + s; }
template <int N>
Dual2<N> operator-(const Dual2<N>& a, double s) { return a + (-s); }
template <int N>
Dual2<N> operator-(double s, const Dual2<N>& a) { return (-a) + s; }
template <int N>
Dual2<N> operator*(const Dual2<N>& a, double s) {
  Dual2<N> r;
  r.v = a.v * s;
  r.g = a.g * s;
  r.h = a.h * s;
  return r;
}
template <int N>
Dual2<N> operator*(double s, const Dual2<N>& a) { return a * s; }
template <int N>
Dual2<N> operator/(const Dual2<N>& a, double s) { return a * (1.0 / s); }
template <int N>
Dual2<N> operator/(double s, const Dual2<N>& b) {
  const double iv = 1.0 / b.v;
  return b.chain(s * iv, -s * iv * iv, 2.0 * s * iv * iv * iv);
}

template <int N>
Dual2<N> log(const Dual2<N>& a) {
  const double iv = 1.0 / a.v;
  return a.chain(std::log(a.v), iv, -iv * iv);
}
template <int N>
Dual2<N> log1p(const Dual2<N>& a) {
  const double iv = 1.0 / (1.0 + a.v);
  return a.chain(std::log1p(a.v), iv, -iv * iv);
}
template <int N>
Dual2<N> exp(const Dual2<N>& a) {
  const double e = std::exp(a.v);
  return a.chain(e, e, e);
}
template <int N>
Dual2<N> expm1(const Dual2<N>& a) {
  const double e = std::exp(a.v);
  return a.chain(std::expm1(a.v), e, e);
}
template <int N>
Dual2<N> sqrt(const Dual2<N>& a) {
  const double s = std::sqrt(a.v);
  return a.chain(s, 0.5 / s, -0.25 / (s * a.v));
}
template <int N>
Dual2<N> pow(const Dual2<N>& a, double p) {
  const double f = std::pow(a.v, p);
  return a.chain(f, p * f / a.v, p * (p - 1.0) * f / (a.v * a.v));
}
template <int N>
Dual2<N> pow(const Dual2<N>& a, const Dual2<N>& b) {
  return exp(b * log(a));
}
template <int N>
Dual2<N> atan(const Dual2<N>& a) {
  const double d = 1.0 + a.v * a.v;
  return a.chain(std::atan(a.v), 1.0 / d, -2.0 * a.v / (d * d));
}

/// Inverse standard normal CDF lifted to dual arguments
/// (dx/du = 1/phi(x), d2x/du2 = x/phi(x)^2).
template <int N>
Dual2<N> normal_quantile(const Dual2<N>& u) {
  const double x = normal_quantile(u.v);
  const double f = normal_pdf(x);
  return u.chain(x, 1.0 / f, x / (f * f));
}

/// Student-t quantile lifted to dual arguments; nu is a fixed scalar.
/// d2x/du2 = -f'(x)/f(x)^3 with f'(x) = -f(x)(nu+1)x/(nu+x^2).
template <int N>
Dual2<N> student_t_quantile(const Dual2<N>& u, double nu) {
  const double x = student_t_quantile(u.v, nu);
  const double f = student_t_pdf(x, nu);
  const double d2 = (nu + 1.0) * x / ((nu + x * x) * f * f);
  return u.chain(x, 1.0 / f, d2);
}

/// First-order-only companion of Dual2 for gradient hot paths.
template <int N>
struct Dual1 {
  using Vec = Eigen::Matrix<double, N, 1>;

  double v = 0.0;
  Vec g = Vec::Zero();

  Dual1() = default;
  explicit Dual1(double value) : v(value) {}

  static Dual1 variable(double value, int index) {
    Dual1 d(value);
    d.g[index] = 1.0;
    return d;
  }

  Dual1 chain(double f, double fp) const {
    Dual1 r;
    r.v = f;
    r.g = fp * g;
    return r;
  }
};

template <int N>
Dual1<N> operator+(const Dual1<N>& a, const Dual1<N>& b) {
  Dual1<N> r;
  r.v = a.v + b.v;
  r.g = a.g + b.g;
  return r;
}
template <int N>
Dual1<N> operator-(const Dual1<N>& a, const Dual1<N>& b) {
  Dual1<N> r;
  r.v = a.v - b.v;
  r.g = a.g - b.g;
  return r;
}
template <int N>
Dual1<N> operator-(const Dual1<N>& a) {
  Dual1<N> r;
  r.v = -a.v;
  r.g = -a.g;
  return r;
}
template <int N>
Dual1<N> operator*(const Dual1<N>& a, const Dual1<N>& b) {
  Dual1<N> r;
  r.v = a.v * b.v;
  r.g = a.v * b.g + b.v * a.g;
  return r;
}
template <int N>
Dual1<N> operator/(const Dual1<N>& a, const Dual1<N>& b) {
  const double iv = 1.0 / b.v;
  return a * b.chain(iv, -iv * iv);
}
template <int N>
Dual1<N> operator+(const Dual1<N>& a, double s) {
  Dual1<N> r = a;
  r.v += s;
  return r;
}
template <int N>
Dual1<N> operator+(double s, const Dual1<N>& a) { return a + s; }
template <int N>
Dual1<N> operator-(const Dual1<N>& a, double s) { return a + (-s); }
template <int N>
Dual1<N> operator-(double s, const Dual1<N>& a) { return (-a) + s; }
template <int N>
Dual1<N> operator*(const Dual1<N>& a, double s) {
  Dual1<N> r;
  r.v = a.v * s;
  r.g = a.g * s;
  return r;
}
template <int N>
Dual1<N> operator*(double s, const Dual1<N>& a) { return a * s; }
template <int N>
Dual1<N> operator/(const Dual1<N>& a, double s) { return a * (1.0 / s); }
template <int N>
Dual1<N> operator/(double s, const Dual1<N>& b) {
  const double iv = 1.0 / b.v;
  return b.chain(s * iv, -s * iv * iv);
}
template <int N>
Dual1<N> log(const Dual1<N>& a) {
  return a.chain(std::log(a.v), 1.0 / a.v);
}
template <int N>
Dual1<N> log1p(const Dual1<N>& a) {
  return a.chain(std::log1p(a.v), 1.0 / (1.0 + a.v));
}
template <int N>
Dual1<N> exp(const Dual1<N>& a) {
  const double e = std::exp(a.v);
  return a.chain(e, e);
}
template <int N>
Dual1<N> expm1(const Dual1<N>& a) {
  return a.chain(std::expm1(a.v), std::exp(a.v));
}
template <int N>
Dual1<N> sqrt(const Dual1<N>& a) {
  const double s = std::sqrt(a.v);
  return a.chain(s, 0.5 / s);
}
template <int N>
Dual1<N> pow(const Dual1<N>& a, double p) {
  const double f = std::pow(a.v, p);
  return a.chain(f, p * f / a.v);
}
template <int N>
Dual1<N> pow(const Dual1<N>& a, const Dual1<N>& b) {
  return exp(b * log(a));
}
template <int N>
Dual1<N> atan(const Dual1<N>& a) {
  return a.chain(std::atan(a.v), 1.0 / (1.0 + a.v * a.v));
}
template <int N>
Dual1<N> normal_quantile(const Dual1<N>& u) {
  const double x = normal_quantile(u.v);
  return u.chain(x, 1.0 / normal_pdf(x));
}
template <int N>
Dual1<N> student_t_quantile(const Dual1<N>& u, double nu) {
  const double x = student_t_quantile(u.v, nu);
  return u.chain(x, 1.0 / student_t_pdf(x, nu));
}

/// Plain value extraction usable in code templated over double/Dual1/Dual2.
inline double dual_value(double x) { return x; }
template <int N>
double dual_value(const Dual1<N>& d) { return d.v; }
template <int N>
double dual_value(const Dual2<N>& d) { return d.v; }

}  // namespace ckm
