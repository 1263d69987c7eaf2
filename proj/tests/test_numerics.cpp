#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "ckm/dual.hpp"
#include "ckm/numerics.hpp"

using namespace ckm;

namespace {
constexpr double kPi = 3.14159265358979323846;

// independent t CDF oracle: direct quadrature of the density mapped to (0,1)
// by x = m + s*t/(1-t^2) (rational stretch covering the whole line)
double t_cdf_by_quadrature(double x, double nu) {
  const QuadratureRule& r = gauss_legendre_unit(400);
  // integrate density from -inf to x via substitution t in (0,1):
  // s = x - (1-t)/t  maps t in (0,1] to (-inf, x]
  double acc = 0.0;
  for (int i = 0; i < r.order; ++i) {
    const double t = r.nodes[i];
    const double s = x - (1.0 - t) / t;
    const double jac = 1.0 / (t * t);
    acc += r.weights[i] * student_t_pdf(s, nu) * jac;
  }
  return acc;
}
}  // namespace

TEST_CASE("gauss-legendre basics") {
  auto r1 = gauss_legendre(1, 0.0, 1.0);
  CHECK(r1.nodes[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(r1.weights[0] == doctest::Approx(1.0).epsilon(1e-14));

  auto r2 = gauss_legendre(2, 0.0, 1.0);
  double lin = 0.0;
  for (int i = 0; i < 2; ++i) lin += r2.weights[i] * r2.nodes[i];
  CHECK(lin == doctest::Approx(0.5).epsilon(1e-14));

  auto r3 = gauss_legendre(3, 0.0, 1.0);
  double x5 = 0.0;
  for (int i = 0; i < 3; ++i) x5 += r3.weights[i] * std::pow(r3.nodes[i], 5);
  CHECK(x5 == doctest::Approx(1.0 / 6.0).epsilon(1e-13));
}

TEST_CASE("gauss-legendre exactness up to degree 2n-1") {
  for (int n : {2, 5, 16, 64}) {
    auto r = gauss_legendre(n, 0.0, 1.0);
    for (int d = 0; d <= 2 * n - 1; d += std::max(1, n / 3)) {
      double v = 0.0;
      for (int i = 0; i < n; ++i) v += r.weights[i] * std::pow(r.nodes[i], d);
      CHECK(std::abs(v - 1.0 / (d + 1.0)) < 1e-12);
    }
    double wsum = r.weights.sum();
    CHECK(wsum == doctest::Approx(1.0).epsilon(1e-13));
  }
}

TEST_CASE("gauss-legendre argument checks") {
  CHECK_THROWS_AS(gauss_legendre(0, 0.0, 1.0), domain_error);
  CHECK_THROWS_AS(gauss_legendre(4, 1.0, 0.0), domain_error);
}

TEST_CASE("brent_root") {
  CHECK(brent_root([](double x) { return x - 0.3; }, 0.0, 1.0) ==
        doctest::Approx(0.3).epsilon(1e-12));
  CHECK(brent_root([](double x) { return x * x * x - 2.0; }, 1.0, 2.0) ==
        doctest::Approx(1.2599210498948732).epsilon(1e-12));
  CHECK_THROWS_AS(brent_root([](double x) { return x + 2.0; }, 0.0, 1.0),
                  domain_error);
  // monotone quintic with a flat inflection still converges fast
  double root = brent_root([](double x) { return std::pow(x - 0.7, 5); }, 0.0,
                           1.0, 1e-13);
  CHECK(root == doctest::Approx(0.7).epsilon(1e-6));
}

TEST_CASE("normal distribution functions") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(normal_quantile(0.975) ==
        doctest::Approx(1.9599639845400536).epsilon(1e-12));
  CHECK(normal_quantile(0.3) ==
        doctest::Approx(-0.5244005127080407).epsilon(1e-12));
  CHECK(normal_quantile(1e-10) ==
        doctest::Approx(-6.361340902404056).epsilon(1e-10));
  for (double p : {1e-8, 1e-3, 0.2, 0.5, 0.77, 1.0 - 1e-6}) {
    CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-12));
  }
  CHECK_THROWS_AS(normal_quantile(0.0), domain_error);
}

TEST_CASE("student t cdf against independent oracles") {
  // closed form for nu=3: 1/2 + (1/pi)[ (x/sqrt3)/(1+x^2/3) + atan(x/sqrt3) ]
  const double x = 2.0;
  const double closed3 =
      0.5 + (1.0 / kPi) * ((x / std::sqrt(3.0)) / (1.0 + x * x / 3.0) +
                           std::atan(x / std::sqrt(3.0)));
  CHECK(closed3 == doctest::Approx(0.9303370157205785).epsilon(1e-14));
  CHECK(student_t_cdf(2.0, 3.0) == doctest::Approx(closed3).epsilon(1e-12));

  // Cauchy closed form
  CHECK(student_t_cdf(2.0, 1.0) ==
        doctest::Approx(0.8524163823495667).epsilon(1e-12));

  // density quadrature oracle, frozen spot value included
  CHECK(student_t_cdf(-1.3, 5.0) ==
        doctest::Approx(0.12515031708533861).epsilon(1e-9));
  for (double nu : {1.0, 2.0, 3.0, 5.0, 10.0}) {
    for (double xx : {-2.5, -0.4, 0.7, 3.1}) {
      CHECK(student_t_cdf(xx, nu) ==
            doctest::Approx(t_cdf_by_quadrature(xx, nu)).epsilon(1e-8));
    }
  }
  CHECK(student_t_cdf(0.0, 7.3) == 0.5);
}

TEST_CASE("student t quantile inverts the cdf") {
  CHECK(student_t_quantile(0.75, 1.0) == doctest::Approx(1.0).epsilon(1e-10));
  for (double nu : {1.0, 2.0, 3.0, 5.0, 10.0, 30.0}) {
    for (double x = -8.0; x <= 8.001; x += 1.0) {
      const double p = student_t_cdf(x, nu);
      CHECK(student_t_quantile(p, nu) == doctest::Approx(x).epsilon(1e-9));
    }
    for (double p : {1e-6, 1e-3, 0.31, 0.5, 0.62, 1.0 - 1e-4}) {
      CHECK(student_t_cdf(student_t_quantile(p, nu), nu) ==
            doctest::Approx(p).epsilon(1e-10));
    }
  }
  CHECK_THROWS_AS(student_t_quantile(0.4, -1.0), domain_error);
}

TEST_CASE("beta function") {
  CHECK(beta_fn(1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(beta_fn(0.5, 0.5) == doctest::Approx(kPi).epsilon(1e-13));
  // quadrature oracle for B(3/4,3/4) = int t^(-1/4)(1-t)^(-1/4) dt: fold the
  // symmetric halves and substitute t = w^4 so the integrand is analytic
  const QuadratureRule r = gauss_legendre(64, 0.0, std::pow(0.5, 0.25));
  double acc = 0.0;
  for (int i = 0; i < r.order; ++i) {
    const double w = r.nodes[i];
    acc += r.weights[i] * 2.0 * 4.0 * w * w *
           std::pow(1.0 - w * w * w * w, -0.25);
  }
  CHECK(acc == doctest::Approx(1.6944261695879588).epsilon(1e-11));
  CHECK(beta_fn(0.75, 0.75) == doctest::Approx(acc).epsilon(1e-11));
  CHECK_THROWS_AS(beta_fn(-0.5, 1.0), domain_error);
}

TEST_CASE("polylog2") {
  CHECK(polylog2(0.0) == 0.0);
  CHECK(polylog2(1.0) == doctest::Approx(kPi * kPi / 6.0).epsilon(1e-14));
  CHECK(polylog2(0.5) ==
        doctest::Approx(0.5822405264650126).epsilon(1e-13));
  CHECK(polylog2(-1.0) == doctest::Approx(-kPi * kPi / 12.0).epsilon(1e-13));
  // brute-force series at a point needing the reflection branch
  double s = 0.0;
  for (int k = 1; k <= 4000; ++k) s += std::pow(0.9, k) / (static_cast<double>(k) * k);
  CHECK(polylog2(0.9) == doctest::Approx(s).epsilon(1e-12));
  s = 0.0;
  for (int k = 1; k <= 4000; ++k) s += std::pow(-0.8, k) / (static_cast<double>(k) * k);
  CHECK(polylog2(-0.8) == doctest::Approx(s).epsilon(1e-12));
  CHECK_THROWS_AS(polylog2(1.2), domain_error);
}

TEST_CASE("ks statistics") {
  // exactly uniform grid has statistic 1/(2n) when centered
  std::vector<double> grid;
  const int n = 100;
  for (int i = 0; i < n; ++i) grid.push_back((i + 0.5) / n);
  CHECK(ks_statistic_uniform(grid) == doctest::Approx(0.005).epsilon(1e-12));
  CHECK(ks_pvalue(0.005, n) == doctest::Approx(1.0));

  // shifted sample fails hard
  std::vector<double> bad;
  for (int i = 0; i < n; ++i) bad.push_back(0.5 + 0.5 * (i + 0.5) / n);
  CHECK(ks_pvalue(ks_statistic_uniform(bad), n) < 1e-6);

  // two-sample statistic on disjoint supports is 1
  std::vector<double> a{0.1, 0.2, 0.3}, b{0.7, 0.8, 0.9};
  CHECK(ks_statistic_two_sample(a, b) == doctest::Approx(1.0));
}

TEST_CASE("ranks and empirical kendall tau") {
  std::vector<double> xs{3.0, 1.0, 4.0, 1.0, 5.0};
  auto r = average_ranks(xs);
  CHECK(r[0] == doctest::Approx(3.0));
  CHECK(r[1] == doctest::Approx(1.5));
  CHECK(r[2] == doctest::Approx(4.0));
  CHECK(r[3] == doctest::Approx(1.5));
  CHECK(r[4] == doctest::Approx(5.0));

  std::vector<double> inc{1.0, 2.0, 3.0, 4.0};
  std::vector<double> dec{4.0, 3.0, 2.0, 1.0};
  CHECK(empirical_kendall_tau(inc, inc) == doctest::Approx(1.0));
  CHECK(empirical_kendall_tau(inc, dec) == doctest::Approx(-1.0));
  std::vector<double> y2{1.0, 3.0, 2.0, 4.0};
  // 5 concordant, 1 discordant pairs out of 6
  CHECK(empirical_kendall_tau(inc, y2) == doctest::Approx(4.0 / 6.0));
}

TEST_CASE("rng stream determinism and range") {
  RngStream s1(42, 7), s2(42, 7), s3(42, 8);
  bool identical = true, all_inside = true;
  double mean = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double a = s1.uniform(), b = s2.uniform(), c = s3.uniform();
    identical = identical && (a == b);
    all_inside = all_inside && a > 0.0 && a < 1.0 && c > 0.0 && c < 1.0;
    mean += a;
  }
  CHECK(identical);
  CHECK(all_inside);
  CHECK(mean / 10000.0 == doctest::Approx(0.5).epsilon(0.02));

  // different stream ids decorrelate
  RngStream t1(42, 0), t2(42, 1);
  std::vector<double> u1, u2;
  for (int i = 0; i < 2000; ++i) {
    u1.push_back(t1.uniform());
    u2.push_back(t2.uniform());
  }
  CHECK(std::abs(empirical_kendall_tau(u1, u2)) < 0.05);
}

TEST_CASE("dual numbers against finite differences") {
  // f(x,y) = log(x^2 + exp(y)/x) * y^1.3 + sqrt(x*y)
  auto f = [](double x, double y) {
    return std::log(x * x + std::exp(y) / x) * std::pow(y, 1.3) +
           std::sqrt(x * y);
  };
  auto fd = [&](double x, double y) {
    using D = Dual2<2>;
    D dx = D::variable(x, 0), dy = D::variable(y, 1);
    return log(dx * dx + exp(dy) / dx) * pow(dy, 1.3) + sqrt(dx * dy);
  };
  const double x0 = 1.3, y0 = 0.8, h = 1e-5;
  auto d = fd(x0, y0);
  CHECK(d.v == doctest::Approx(f(x0, y0)).epsilon(1e-14));
  const double gx = (f(x0 + h, y0) - f(x0 - h, y0)) / (2 * h);
  const double gy = (f(x0, y0 + h) - f(x0, y0 - h)) / (2 * h);
  CHECK(d.g[0] == doctest::Approx(gx).epsilon(1e-8));
  CHECK(d.g[1] == doctest::Approx(gy).epsilon(1e-8));
  const double hxx = (f(x0 + h, y0) - 2 * f(x0, y0) + f(x0 - h, y0)) / (h * h);
  const double hyy = (f(x0, y0 + h) - 2 * f(x0, y0) + f(x0, y0 - h)) / (h * h);
  const double hxy = (f(x0 + h, y0 + h) - f(x0 + h, y0 - h) -
                      f(x0 - h, y0 + h) + f(x0 - h, y0 - h)) /
                     (4 * h * h);
  CHECK(d.h(0, 0) == doctest::Approx(hxx).epsilon(1e-5));
  CHECK(d.h(1, 1) == doctest::Approx(hyy).epsilon(1e-5));
  CHECK(d.h(0, 1) == doctest::Approx(hxy).epsilon(1e-5));
  CHECK(d.h(0, 1) == doctest::Approx(d.h(1, 0)).epsilon(1e-14));
}

TEST_CASE("dual quantile primitives") {
  {
    using D = Dual2<1>;
    const double u0 = 0.73, h = 1e-6;
    D q = normal_quantile(D::variable(u0, 0));
    CHECK(q.v == doctest::Approx(normal_quantile(u0)).epsilon(1e-13));
    const double g =
        (normal_quantile(u0 + h) - normal_quantile(u0 - h)) / (2 * h);
    const double hh = (normal_quantile(u0 + h) - 2 * normal_quantile(u0) +
                       normal_quantile(u0 - h)) /
                      (h * h);
    CHECK(q.g[0] == doctest::Approx(g).epsilon(1e-7));
    CHECK(q.h(0, 0) == doctest::Approx(hh).epsilon(1e-3));
  }
  {
    using D = Dual2<1>;
    const double u0 = 0.23, nu = 3.0, h = 1e-6;
    D q = student_t_quantile(D::variable(u0, 0), nu);
    CHECK(q.v == doctest::Approx(student_t_quantile(u0, nu)).epsilon(1e-13));
    const double g = (student_t_quantile(u0 + h, nu) -
                      student_t_quantile(u0 - h, nu)) /
                     (2 * h);
    const double hh =
        (student_t_quantile(u0 + h, nu) - 2 * student_t_quantile(u0, nu) +
         student_t_quantile(u0 - h, nu)) /
        (h * h);
    CHECK(q.g[0] == doctest::Approx(g).epsilon(1e-7));
    CHECK(q.h(0, 0) == doctest::Approx(hh).epsilon(1e-3));
  }
}

TEST_CASE("logistic helpers") {
  CHECK(logistic_cdf(0.0) == doctest::Approx(0.5));
  for (double p : {0.05, 0.4, 0.77}) {
    CHECK(logistic_cdf(logistic_quantile(p)) == doctest::Approx(p).epsilon(1e-12));
  }
  // pdf is the derivative of the cdf
  const double x = 0.37, h = 1e-6;
  CHECK(logistic_pdf(x) ==
        doctest::Approx((logistic_cdf(x + h) - logistic_cdf(x - h)) / (2 * h))
            .epsilon(1e-8));
}
