#include "ckm/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>

namespace ckm {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

// ---------------------------------------------------------------- quadrature

QuadratureRule gauss_legendre(int order, double a, double b) {
  if (order < 1) throw domain_error("gauss_legendre: order must be >= 1");
  if (!(a < b)) throw domain_error("gauss_legendre: need a < b");
  const int n = order;
  QuadratureRule rule;
  rule.order = n;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double xm = 0.5 * (a + b);
  const double xl = 0.5 * (b - a);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    // Newton iteration on P_n from the Chebyshev initial guess
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) < 1e-15) break;
    }
    rule.nodes[i] = xm - xl * z;
    rule.nodes[n - 1 - i] = xm + xl * z;
    const double w = 2.0 * xl / ((1.0 - z * z) * pp * pp);
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

const QuadratureRule& gauss_legendre_unit(int order) {
  static std::map<int, QuadratureRule> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(order);
  if (it == cache.end())
    it = cache.emplace(order, gauss_legendre(order, 0.0, 1.0)).first;
  return it->second;
}

double integrate_unit_square(const std::function<double(double, double)>& f,
                             int order) {
  const QuadratureRule& r = gauss_legendre_unit(order);
  double s = 0.0;
  for (int i = 0; i < r.order; ++i) {
    double row = 0.0;
    for (int j = 0; j < r.order; ++j) row += r.weights[j] * f(r.nodes[i], r.nodes[j]);
    s += r.weights[i] * row;
  }
  return s;
}

// -------------------------------------------------------------- root finding

double brent_root(const std::function<double(double)>& f, double lo, double hi,
                  double xtol, double ftol, int max_iter) {
  if (!(xtol > 0.0)) throw domain_error("brent_root: xtol must be positive");
  double a = lo, b = hi, c = hi;
  double fa = f(a), fb = f(b), fc = fb;
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if ((fa > 0.0) == (fb > 0.0))
    throw domain_error("brent_root: interval does not bracket a root");
  double d = b - a, e = d;
  for (int it = 0; it < max_iter; ++it) {
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a;
      fc = fa;
      e = d = b - a;
    }
    if (std::abs(fc) < std::abs(fb)) {
      a = b; b = c; c = a;
      fa = fb; fb = fc; fc = fa;
    }
    const double tol1 =
        2.0 * std::numeric_limits<double>::epsilon() * std::abs(b) + 0.5 * xtol;
    const double xm = 0.5 * (c - b);
    if (std::abs(xm) <= tol1 || fb == 0.0 || std::abs(fb) <= ftol) return b;
    if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
      // inverse quadratic / secant step
      const double s = fb / fa;
      double p, q;
      if (a == c) {
        p = 2.0 * xm * s;
        q = 1.0 - s;
      } else {
        const double qq = fa / fc, r = fb / fc;
        p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
        q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q;
      p = std::abs(p);
      if (2.0 * p < std::min(3.0 * xm * q - std::abs(tol1 * q), std::abs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = xm;
        e = d;
      }
    } else {
      d = xm;
      e = d;
    }
    a = b;
    fa = fb;
    b += (std::abs(d) > tol1) ? d : (xm >= 0.0 ? tol1 : -tol1);
    fb = f(b);
  }
  throw convergence_error("brent_root: no convergence within max_iter");
}

// ---------------------------------------------------------- special functions

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw domain_error("normal_quantile: p must be in (0,1)");
  // Acklam's rational approximation, then one Halley step
  static const double A[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double B[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double C[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double D[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5]) /
        ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5, r = q * q;
    x = (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q /
        (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5]) /
        ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * kPi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double log_gamma(double x) {
  if (!(x > 0.0)) throw domain_error("log_gamma: argument must be positive");
  return std::lgamma(x);
}

double beta_fn(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0))
    throw domain_error("beta_fn: arguments must be positive");
  return std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
}

namespace {
// continued fraction for the incomplete beta (modified Lentz)
double betacf(double a, double b, double x) {
  const int max_it = 300;
  const double eps = 3e-16, fpmin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_it; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) return h;
  }
  throw convergence_error("reg_inc_beta: continued fraction stalled");
}
}  // namespace

double reg_inc_beta(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0))
    throw domain_error("reg_inc_beta: shape parameters must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double lbt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                     a * std::log(x) + b * std::log1p(-x);
  const double bt = std::exp(lbt);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

double student_t_pdf(double x, double nu) {
  if (!(nu > 0.0)) throw domain_error("student_t_pdf: nu must be positive");
  const double lg = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                    0.5 * std::log(nu * kPi);
  return std::exp(lg - 0.5 * (nu + 1.0) * std::log1p(x * x / nu));
}

double student_t_cdf(double x, double nu) {
  if (!(nu > 0.0)) throw domain_error("student_t_cdf: nu must be positive");
  if (x == 0.0) return 0.5;
  const double tail = 0.5 * reg_inc_beta(nu / (nu + x * x), 0.5 * nu, 0.5);
  return x > 0.0 ? 1.0 - tail : tail;
}

double student_t_quantile(double p, double nu) {
  if (!(nu > 0.0)) throw domain_error("student_t_quantile: nu must be positive");
  if (!(p > 0.0 && p < 1.0))
    throw domain_error("student_t_quantile: p must be in (0,1)");
  if (p == 0.5) return 0.0;
  // bracket on the half line holding the root, then Brent on the CDF
  const bool lower = p < 0.5;
  double hi = 1.0;
  int guard = 0;
  if (lower) {
    while (student_t_cdf(-hi, nu) > p) {
      hi *= 2.0;
      if (++guard > 300)
        throw convergence_error("student_t_quantile: bracket expansion failed");
    }
  } else {
    while (student_t_cdf(hi, nu) < p) {
      hi *= 2.0;
      if (++guard > 300)
        throw convergence_error("student_t_quantile: bracket expansion failed");
    }
  }
  auto g = [&](double t) { return student_t_cdf(t, nu) - p; };
  double x = lower ? brent_root(g, -hi, 0.0, 1e-13, 0.0, 300)
                   : brent_root(g, 0.0, hi, 1e-13, 0.0, 300);
  const double f = student_t_pdf(x, nu);
  if (f > 0.0) x -= (student_t_cdf(x, nu) - p) / f;  // Newton polish
  return x;
}

double logistic_pdf(double x) {
  const double e = std::exp(-std::abs(x));
  const double d = 1.0 + e;
  return e / (d * d);
}

double logistic_cdf(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logistic_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw domain_error("logistic_quantile: p must be in (0,1)");
  return std::log(p / (1.0 - p));
}

double polylog2(double z) {
  if (!(z >= -1.0 && z <= 1.0)) throw domain_error("polylog2: need |z| <= 1");
  if (z == 0.0) return 0.0;
  if (z == 1.0) return kPi * kPi / 6.0;
  if (z == -1.0) return -kPi * kPi / 12.0;
  if (z > 0.5)  // reflection Li2(z) + Li2(1-z) = pi^2/6 - ln z ln(1-z)
    return kPi * kPi / 6.0 - std::log(z) * std::log1p(-z) - polylog2(1.0 - z);
  if (z < -0.5) {  // Landen: Li2(z) = -Li2(z/(z-1)) - ln^2(1-z)/2
    const double l = std::log1p(-z);
    return -polylog2(z / (z - 1.0)) - 0.5 * l * l;
  }
  double term = z, sum = z;
  for (int k = 2; k < 200; ++k) {
    term *= z;
    const double inc = term / (static_cast<double>(k) * k);
    sum += inc;
    if (std::abs(inc) < 1e-17 * std::abs(sum)) break;
  }
  return sum;
}

// ------------------------------------------------------------------ KS tests

double ks_statistic_uniform(std::vector<double> xs) {
  if (xs.empty()) throw domain_error("ks_statistic_uniform: empty sample");
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    d = std::max(d, (i + 1.0) / n - xs[i]);
    d = std::max(d, xs[i] - i / n);
  }
  return d;
}

double ks_statistic_two_sample(std::vector<double> xs, std::vector<double> ys) {
  if (xs.empty() || ys.empty())
    throw domain_error("ks_statistic_two_sample: empty sample");
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  const double nx = static_cast<double>(xs.size());
  const double ny = static_cast<double>(ys.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < xs.size() && j < ys.size()) {
    const double v = std::min(xs[i], ys[j]);
    while (i < xs.size() && xs[i] <= v) ++i;
    while (j < ys.size() && ys[j] <= v) ++j;
    d = std::max(d, std::abs(i / nx - j / ny));
  }
  return d;
}

double ks_pvalue(double stat, double n_effective) {
  if (!(n_effective > 0.0)) throw domain_error("ks_pvalue: n must be positive");
  const double sn = std::sqrt(n_effective);
  const double lambda = (sn + 0.12 + 0.11 / sn) * stat;
  if (lambda < 0.2) return 1.0;  // series converges too slowly; p is 1 anyway
  double p = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 1000; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    p += 2.0 * sign * term;
    sign = -sign;
    if (term < 1e-12) break;
  }
  return std::clamp(p, 0.0, 1.0);
}

// ------------------------------------------------------------------- ranking

std::vector<double> average_ranks(const std::vector<double>& xs) {
  const std::size_t n = xs.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && xs[idx[j + 1]] == xs[idx[i]]) ++j;
    const double r = 0.5 * (i + j) + 1.0;  // mean of ranks i+1..j+1
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double empirical_kendall_tau(const std::vector<double>& xs,
                             const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw domain_error("empirical_kendall_tau: need two equal samples, n >= 2");
  const std::size_t n = xs.size();
  long long s = 0;
  for (std::size_t i = 0; i + 1 < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double a = xs[i] - xs[j], b = ys[i] - ys[j];
      const double prod = a * b;
      if (prod > 0.0) ++s;
      else if (prod < 0.0) --s;
    }
  return 2.0 * static_cast<double>(s) / (static_cast<double>(n) * (n - 1));
}

// ----------------------------------------------------------------------- RNG

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
  std::seed_seq ss{static_cast<std::uint32_t>(seed & 0xffffffffu),
                   static_cast<std::uint32_t>(seed >> 32),
                   static_cast<std::uint32_t>(stream_id & 0xffffffffu),
                   static_cast<std::uint32_t>(stream_id >> 32)};
  gen_.seed(ss);
}

std::uint64_t RngStream::next_u64() { return gen_(); }

double RngStream::uniform() {
  // 53 random bits centered in (0,1); never returns an endpoint
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
}

}  // namespace ckm
