#include "ckm/marginal.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "ckm/numerics.hpp"

namespace ckm {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

// ------------------------------------------------------------- parametric

std::string marginal_family_name(MarginalFamily f) {
  switch (f) {
    case MarginalFamily::student_t: return "student_t";
    case MarginalFamily::normal: return "normal";
    case MarginalFamily::extreme_value: return "extreme_value";
  }
  throw domain_error("marginal_family_name: unknown family tag");
}

MarginalFamily marginal_family_from_name(const std::string& name) {
  if (name == "student_t" || name == "t") return MarginalFamily::student_t;
  if (name == "normal") return MarginalFamily::normal;
  if (name == "extreme_value" || name == "ev")
    return MarginalFamily::extreme_value;
  throw domain_error("marginal_family_from_name: unknown family '" + name +
                     "'");
}

int marginal_param_dim(MarginalFamily f) {
  return f == MarginalFamily::student_t ? 1 : 2;
}

ParametricMarginal student_t_marginal(double nu) {
  ParametricMarginal m{MarginalFamily::student_t,
                       Eigen::VectorXd::Constant(1, nu)};
  validate(m);
  return m;
}

ParametricMarginal normal_marginal(double mu, double sigma) {
  ParametricMarginal m{MarginalFamily::normal, Eigen::VectorXd(2)};
  m.theta << mu, sigma;
  validate(m);
  return m;
}

ParametricMarginal extreme_value_marginal(double loc, double scale) {
  ParametricMarginal m{MarginalFamily::extreme_value, Eigen::VectorXd(2)};
  m.theta << loc, scale;
  validate(m);
  return m;
}

void validate(const ParametricMarginal& m) {
  if (m.theta.size() != marginal_param_dim(m.family))
    throw domain_error("validate: marginal theta dimension mismatch");
  if (!m.theta.allFinite())
    throw domain_error("validate: non-finite marginal parameter");
  switch (m.family) {
    case MarginalFamily::student_t:
      if (!(m.theta[0] > 0.0))
        throw domain_error("validate: student_t needs nu > 0");
      break;
    case MarginalFamily::normal:
      if (!(m.theta[1] > 0.0))
        throw domain_error("validate: normal needs sigma > 0");
      break;
    case MarginalFamily::extreme_value:
      if (!(m.theta[1] > 0.0))
        throw domain_error("validate: extreme_value needs scale > 0");
      break;
  }
}

double parametric_log_pdf(const ParametricMarginal& m, double y) {
  validate(m);
  switch (m.family) {
    case MarginalFamily::student_t: {
      const double nu = m.theta[0];
      return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
             0.5 * std::log(nu * kPi) -
             0.5 * (nu + 1.0) * std::log1p(y * y / nu);
    }
    case MarginalFamily::normal: {
      const double z = (y - m.theta[0]) / m.theta[1];
      return -0.5 * z * z - 0.5 * std::log(2.0 * kPi) - std::log(m.theta[1]);
    }
    case MarginalFamily::extreme_value: {
      const double z = (y - m.theta[0]) / m.theta[1];
      return -z - std::exp(-z) - std::log(m.theta[1]);
    }
  }
  throw domain_error("parametric_log_pdf: unknown family tag");
}

double parametric_pdf(const ParametricMarginal& m, double y) {
  return std::exp(parametric_log_pdf(m, y));
}

double parametric_cdf(const ParametricMarginal& m, double y) {
  validate(m);
  switch (m.family) {
    case MarginalFamily::student_t:
      return student_t_cdf(y, m.theta[0]);
    case MarginalFamily::normal:
      return normal_cdf((y - m.theta[0]) / m.theta[1]);
    case MarginalFamily::extreme_value:
      return std::exp(-std::exp(-(y - m.theta[0]) / m.theta[1]));
  }
  throw domain_error("parametric_cdf: unknown family tag");
}

PdfCdf parametric_eval(const ParametricMarginal& m, double y) {
  return {parametric_pdf(m, y), parametric_cdf(m, y)};
}

double parametric_quantile(const ParametricMarginal& m, double p) {
  validate(m);
  if (!(p > 0.0 && p < 1.0))
    throw domain_error("parametric_quantile: p must lie inside (0,1)");
  switch (m.family) {
    case MarginalFamily::student_t:
      return student_t_quantile(p, m.theta[0]);
    case MarginalFamily::normal:
      return m.theta[0] + m.theta[1] * normal_quantile(p);
    case MarginalFamily::extreme_value:
      return m.theta[0] - m.theta[1] * std::log(-std::log(p));
  }
  throw domain_error("parametric_quantile: unknown family tag");
}

// ------------------------------------------------------------------ sieve

std::string basis_name(SieveBasis b) {
  switch (b) {
    case SieveBasis::polynomial: return "polynomial";
    case SieveBasis::cubic_spline: return "cubic-spline";
    case SieveBasis::cosine: return "cosine";
  }
  throw domain_error("basis_name: unknown basis tag");
}

SieveBasis basis_from_name(const std::string& name) {
  if (name == "polynomial") return SieveBasis::polynomial;
  if (name == "cubic-spline" || name == "cubic_spline")
    return SieveBasis::cubic_spline;
  if (name == "cosine") return SieveBasis::cosine;
  throw domain_error("basis_from_name: unknown basis '" + name + "'");
}

std::string reference_name(Reference r) {
  switch (r) {
    case Reference::student_t4: return "student_t4";
    case Reference::student_t3: return "student_t3";
    case Reference::student_t2: return "student_t2";
    case Reference::cauchy: return "cauchy";
    case Reference::logistic: return "logistic";
  }
  throw domain_error("reference_name: unknown reference tag");
}

Reference reference_from_name(const std::string& name) {
  if (name == "student_t4" || name == "t4") return Reference::student_t4;
  if (name == "student_t3" || name == "t3") return Reference::student_t3;
  if (name == "student_t2" || name == "t2") return Reference::student_t2;
  if (name == "cauchy" || name == "t1") return Reference::cauchy;
  if (name == "logistic") return Reference::logistic;
  throw domain_error("reference_from_name: unknown reference '" + name + "'");
}

double reference_pdf(Reference r, double y) {
  switch (r) {
    case Reference::student_t4: return student_t_pdf(y, 4.0);
    case Reference::student_t3: return student_t_pdf(y, 3.0);
    case Reference::student_t2: return student_t_pdf(y, 2.0);
    case Reference::cauchy: return 1.0 / (kPi * (1.0 + y * y));
    case Reference::logistic: return logistic_pdf(y);
  }
  throw domain_error("reference_pdf: unknown reference tag");
}

double reference_log_pdf(Reference r, double y) {
  switch (r) {
    case Reference::student_t3:
      return std::lgamma(2.0) - std::lgamma(1.5) - 0.5 * std::log(3.0 * kPi) -
             2.0 * std::log1p(y * y / 3.0);
    case Reference::student_t2:
      return -std::log(2.0 * std::sqrt(2.0)) - 1.5 * std::log1p(y * y / 2.0);
    case Reference::cauchy:
      return -std::log(kPi) - std::log1p(y * y);
    case Reference::logistic: {
      const double a = std::abs(y);
      return -a - 2.0 * std::log1p(std::exp(-a));
    }
    case Reference::student_t4:
      break;
  }
  return std::lgamma(2.5) - std::lgamma(2.0) - 0.5 * std::log(4.0 * kPi) -
         2.5 * std::log1p(y * y / 4.0);
}

double reference_cdf(Reference r, double y) {
  switch (r) {
    case Reference::student_t4: return student_t_cdf(y, 4.0);
    case Reference::student_t3: return student_t_cdf(y, 3.0);
    case Reference::student_t2:
      return 0.5 * (1.0 + y / std::sqrt(2.0 + y * y));
    case Reference::cauchy: return 0.5 + std::atan(y) / kPi;
    case Reference::logistic: return logistic_cdf(y);
  }
  throw domain_error("reference_cdf: unknown reference tag");
}

double reference_quantile(Reference r, double s) {
  switch (r) {
    case Reference::student_t4: return student_t_quantile(s, 4.0);
    case Reference::student_t3: return student_t_quantile(s, 3.0);
    case Reference::student_t2: {
      const double a = 2.0 * s - 1.0;
      return a * std::sqrt(2.0 / (1.0 - a * a));
    }
    case Reference::cauchy: return std::tan(kPi * (s - 0.5));
    case Reference::logistic: return logistic_quantile(s);
  }
  throw domain_error("reference_quantile: unknown reference tag");
}

namespace {

void check_basis(SieveBasis basis, int K) {
  if (K < 1) throw domain_error("sieve basis: K must be positive");
  if (basis == SieveBasis::cubic_spline && K < 4)
    throw domain_error("sieve basis: cubic-spline needs K >= 4");
}

// clamped uniform cubic B-splines of dimension K on [0,1], Cox-de Boor
Eigen::VectorXd bspline_all(int K, double s) {
  const int m = K - 4;  // interior knots
  std::vector<double> knots(K + 4);
  for (int i = 0; i < 4; ++i) knots[i] = 0.0;
  for (int i = 0; i < m; ++i) knots[4 + i] = (i + 1.0) / (m + 1.0);
  for (int i = 0; i < 4; ++i) knots[K + i] = 1.0;

  Eigen::VectorXd out = Eigen::VectorXd::Zero(K);
  const double x = std::clamp(s, 0.0, 1.0);
  // find the knot span [knots[j], knots[j+1]) containing x
  int j = 3;
  while (j < K - 1 && x >= knots[j + 1]) ++j;
  double N[4] = {1.0, 0.0, 0.0, 0.0};
  for (int deg = 1; deg <= 3; ++deg) {
    double saved = 0.0;
    for (int r = 0; r < deg; ++r) {
      const double left = knots[j - deg + 1 + r];
      const double right = knots[j + 1 + r];
      const double denom = right - left;
      const double term = denom > 0.0 ? N[r] / denom : 0.0;
      N[r] = saved + (right - x) * term;
      saved = (x - left) * term;
    }
    N[deg] = saved;
  }
  for (int r = 0; r <= 3; ++r) out[j - 3 + r] = N[r];
  return out;
}

}  // namespace

Eigen::VectorXd sieve_basis_all(SieveBasis basis, int K, double s) {
  check_basis(basis, K);
  Eigen::VectorXd out(K);
  switch (basis) {
    case SieveBasis::cosine:
      for (int k = 1; k <= K; ++k)
        out[k - 1] = std::sqrt(2.0) * std::cos(k * kPi * s);
      return out;
    case SieveBasis::polynomial: {
      // orthonormal shifted Legendre, constant excluded
      const double x = 2.0 * s - 1.0;
      double pm1 = 1.0, p = x;
      for (int k = 1; k <= K; ++k) {
        out[k - 1] = std::sqrt(2.0 * k + 1.0) * p;
        const double pn = ((2.0 * k + 1.0) * x * p - k * pm1) / (k + 1.0);
        pm1 = p;
        p = pn;
      }
      return out;
    }
    case SieveBasis::cubic_spline:
      return bspline_all(K, s);
  }
  throw domain_error("sieve_basis_all: unknown basis tag");
}

double sieve_basis_eval(SieveBasis basis, int K, int k, double s) {
  if (k < 1 || k > K) throw domain_error("sieve_basis_eval: k out of range");
  return sieve_basis_all(basis, K, s)[k - 1];
}

SieveDensity sieve_density(SieveBasis basis, int K,
                           const Eigen::VectorXd& coeffs, Reference reference,
                           SieveForm form, int quad_order) {
  SieveDensity d;
  d.basis = basis;
  d.K = K;
  d.coeffs = coeffs;
  d.reference = reference;
  d.form = form;
  d.quad_order = quad_order;
  return sieve_normalize(std::move(d));
}

namespace {

double sieve_Q(const SieveDensity& d, double s) {
  return d.coeffs.dot(sieve_basis_all(d.basis, d.K, s));
}

}  // namespace

SieveDensity sieve_normalize(SieveDensity d) {
  check_basis(d.basis, d.K);
  if (d.coeffs.size() != d.K)
    throw domain_error("sieve_normalize: coefficient count differs from K");
  if (!d.coeffs.allFinite())
    throw domain_error("sieve_normalize: non-finite coefficients");
  if (d.quad_order < 8)
    throw domain_error("sieve_normalize: quadrature order too small");

  const QuadratureRule& r = gauss_legendre_unit(d.quad_order);
  if (d.form == SieveForm::log_density) {
    Eigen::VectorXd q(r.order);
    for (int i = 0; i < r.order; ++i) q[i] = sieve_Q(d, r.nodes[i]);
    const double qmax = q.maxCoeff();
    double z = 0.0;
    for (int i = 0; i < r.order; ++i)
      z += r.weights[i] * std::exp(q[i] - qmax);
    d.log_Z = qmax + std::log(z);
  } else {
    double z = 0.0;
    for (int i = 0; i < r.order; ++i) {
      const double q = sieve_Q(d, r.nodes[i]);
      z += r.weights[i] * q * q;
    }
    if (!(z > 0.0))
      throw domain_error("sieve_normalize: square-root form needs a nonzero "
                         "coefficient vector");
    d.log_Z = std::log(z);
  }
  if (!std::isfinite(d.log_Z))
    throw domain_error("sieve_normalize: normalization overflowed");
  d.normalized = true;
  return d;
}

namespace {

void require_normalized(const SieveDensity& d) {
  if (!d.normalized || !std::isfinite(d.log_Z))
    throw error("sieve density: call sieve_normalize first");
}

}  // namespace

double sieve_log_pdf(const SieveDensity& d, double y) {
  require_normalized(d);
  const double s = reference_cdf(d.reference, y);
  const double q = sieve_Q(d, s);
  const double base = reference_log_pdf(d.reference, y) - d.log_Z;
  if (d.form == SieveForm::log_density) return base + q;
  return base + 2.0 * std::log(std::abs(q));
}

double sieve_pdf(const SieveDensity& d, double y) {
  return std::exp(sieve_log_pdf(d, y));
}

double sieve_cdf(const SieveDensity& d, double y) {
  require_normalized(d);
  const double s = reference_cdf(d.reference, y);
  // integrate the mapped density over [0, s] in panels
  const int panels = 8;
  const QuadratureRule& r = gauss_legendre_unit(32);
  double acc = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double lo = s * p / panels, w = s / panels;
    for (int i = 0; i < r.order; ++i) {
      const double q = sieve_Q(d, lo + w * r.nodes[i]);
      const double e = d.form == SieveForm::log_density
                           ? std::exp(q - d.log_Z)
                           : q * q * std::exp(-d.log_Z);
      acc += w * r.weights[i] * e;
    }
  }
  return std::clamp(acc, 0.0, 1.0);
}

double sieve_quantile(const SieveDensity& d, double p) {
  require_normalized(d);
  if (!(p > 0.0 && p < 1.0))
    throw domain_error("sieve_quantile: p must lie inside (0,1)");
  // invert in the mapped coordinate, then pull back
  auto cdf_s = [&](double s) {
    return sieve_cdf(d, reference_quantile(d.reference, s)) - p;
  };
  const double s = brent_root(cdf_s, 1e-13, 1.0 - 1e-13, 1e-13, 0.0, 200);
  return reference_quantile(d.reference, s);
}

SieveDensity sieve_fit_iid(const Eigen::VectorXd& y, SieveBasis basis, int K,
                           Reference reference, int quad_order) {
  check_basis(basis, K);
  const int n = static_cast<int>(y.size());
  if (n < 2) throw domain_error("sieve_fit_iid: need at least two points");

  // sufficient statistic: mean of A(T(y_i))
  Eigen::VectorXd abar = Eigen::VectorXd::Zero(K);
  for (int i = 0; i < n; ++i)
    abar += sieve_basis_all(basis, K, reference_cdf(reference, y[i]));
  abar /= n;

  const QuadratureRule& r = gauss_legendre_unit(quad_order);
  Eigen::MatrixXd A(r.order, K);
  for (int i = 0; i < r.order; ++i)
    A.row(i) = sieve_basis_all(basis, K, r.nodes[i]).transpose();

  // Newton on the concave map a -> a'abar - log Z(a)
  Eigen::VectorXd a = Eigen::VectorXd::Zero(K);
  for (int iter = 0; iter < 100; ++iter) {
    const Eigen::VectorXd q = A * a;
    const double qmax = q.maxCoeff();
    Eigen::VectorXd w(r.order);
    double z = 0.0;
    for (int i = 0; i < r.order; ++i) {
      w[i] = r.weights[i] * std::exp(q[i] - qmax);
      z += w[i];
    }
    w /= z;
    const Eigen::VectorXd mean = A.transpose() * w;
    Eigen::MatrixXd cov = A.transpose() * w.asDiagonal() * A -
                          mean * mean.transpose();
    const Eigen::VectorXd grad = abar - mean;
    cov.diagonal().array() += 1e-10;
    const Eigen::VectorXd step = cov.ldlt().solve(grad);
    double scale = 1.0;
    if (step.lpNorm<Eigen::Infinity>() > 2.0)
      scale = 2.0 / step.lpNorm<Eigen::Infinity>();
    a += scale * step;
    for (int k = 0; k < K; ++k) a[k] = std::clamp(a[k], -30.0, 30.0);
    if (grad.lpNorm<Eigen::Infinity>() < 1e-10 && scale == 1.0) break;
  }

  SieveDensity d;
  d.basis = basis;
  d.K = K;
  d.coeffs = a;
  d.reference = reference;
  d.quad_order = quad_order;
  return sieve_normalize(std::move(d));
}

}  // namespace ckm
