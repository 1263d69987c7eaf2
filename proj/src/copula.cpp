#include "ckm/copula.hpp"

#include <algorithm>
#include <cmath>

#include "ckm/dual.hpp"
#include "ckm/numerics.hpp"

namespace ckm {

namespace {
constexpr double kPi = 3.14159265358979323846;

// endpoint-clustering map u = (1 - cos(pi s))/2; clusters quadrature nodes
// quadratically at both ends so corner-singular copula integrands behave
struct MappedRule {
  std::vector<double> u, w;
  int order = 0;
};

MappedRule cosine_mapped(int order) {
  const QuadratureRule& r = gauss_legendre_unit(order);
  MappedRule m;
  m.order = r.order;
  m.u.resize(r.order);
  m.w.resize(r.order);
  for (int i = 0; i < r.order; ++i) {
    const double s = r.nodes[i];
    m.u[i] = 0.5 * (1.0 - std::cos(kPi * s));
    m.w[i] = r.weights[i] * 0.5 * kPi * std::sin(kPi * s);
  }
  return m;
}

}  // namespace

// ------------------------------------------------------------------- family

std::string family_name(Family f) {
  switch (f) {
    case Family::clayton: return "clayton";
    case Family::gumbel: return "gumbel";
    case Family::frank: return "frank";
    case Family::gaussian: return "gaussian";
    case Family::efgm: return "efgm";
    case Family::student_t: return "student_t";
  }
  throw domain_error("family_name: unknown family tag");
}

Family family_from_name(const std::string& name) {
  if (name == "clayton") return Family::clayton;
  if (name == "gumbel") return Family::gumbel;
  if (name == "frank") return Family::frank;
  if (name == "gaussian") return Family::gaussian;
  if (name == "efgm") return Family::efgm;
  if (name == "student_t" || name == "t") return Family::student_t;
  throw domain_error("family_from_name: unknown family '" + name + "'");
}

int param_dim(Family f) { return f == Family::student_t ? 2 : 1; }

CopulaSpec copula_spec(Family f, double alpha, bool survival) {
  if (f == Family::student_t)
    throw domain_error("copula_spec: student_t needs (rho, nu)");
  CopulaSpec s;
  s.family = f;
  s.theta = Eigen::VectorXd::Constant(1, alpha);
  s.survival = survival;
  validate(s);
  return s;
}

CopulaSpec student_t_spec(double rho, double nu, bool survival) {
  CopulaSpec s;
  s.family = Family::student_t;
  s.theta.resize(2);
  s.theta << rho, nu;
  s.survival = survival;
  validate(s);
  return s;
}

void validate(const CopulaSpec& spec) {
  if (spec.theta.size() != param_dim(spec.family))
    throw domain_error("validate: theta dimension mismatch for family " +
                       family_name(spec.family));
  const double a = spec.theta[0];
  if (!std::isfinite(a)) throw domain_error("validate: non-finite parameter");
  switch (spec.family) {
    case Family::clayton:
      if (!(a > 0.0)) throw domain_error("validate: clayton needs alpha > 0");
      break;
    case Family::gumbel:
      if (!(a >= 1.0)) throw domain_error("validate: gumbel needs alpha >= 1");
      break;
    case Family::frank:
      if (a == 0.0) throw domain_error("validate: frank needs alpha != 0");
      break;
    case Family::gaussian:
      if (!(std::abs(a) < 1.0))
        throw domain_error("validate: gaussian needs |alpha| < 1");
      break;
    case Family::efgm:
      if (!(a >= -1.0 && a <= 1.0))
        throw domain_error("validate: efgm needs alpha in [-1,1]");
      break;
    case Family::student_t: {
      const double nu = spec.theta[1];
      if (!(std::abs(a) < 1.0))
        throw domain_error("validate: student_t needs |rho| < 1");
      if (!(std::isfinite(nu) && nu >= 2.0))
        throw domain_error("validate: student_t needs nu >= 2");
      break;
    }
  }
}

double clamp_unit(double u, int n) {
  if (n < 1) throw domain_error("clamp_unit: n must be positive");
  const double lo = 0.5 / n;
  return std::clamp(u, lo, 1.0 - lo);
}

// --------------------------------------------------- templated log densities
//
// Each family's log density is written once over a generic scalar type so
// that plain evaluation, gradient, and Hessian all come from the same
// expression (double / Dual1 / Dual2).

namespace {

template <class T>
T clayton_logc(const T& a, const T& u1, const T& u2) {
  using std::exp;
  using std::log;
  using std::log1p;
  const T l1 = log(u1), l2 = log(u2);
  const T a1 = -1.0 * (a * l1), a2 = -1.0 * (a * l2);  // both >= 0
  const double m = std::max(dual_value(a1), dual_value(a2));
  const T lS = m + log(exp(a1 - m) + exp(a2 - m) - std::exp(-m));
  return log1p(a) - (1.0 + a) * (l1 + l2) - (2.0 + 1.0 / a) * lS;
}

template <class T>
T gumbel_logc(const T& a, const T& u1, const T& u2) {
  using std::exp;
  using std::log;
  const T l1 = log(u1), l2 = log(u2);  // negative
  const T lx = log(-l1), ly = log(-l2);
  const T ax = a * lx, ay = a * ly;
  const double m = std::max(dual_value(ax), dual_value(ay));
  const T lA = m + log(exp(ax - m) + exp(ay - m));
  const T A1a = exp(lA / a);
  return -A1a + (a - 1.0) * (lx + ly) - (l1 + l2) + (1.0 / a - 2.0) * lA +
         log(A1a + a - 1.0);
}

template <class T>
T frank_logc(const T& a, const T& u1, const T& u2) {
  using std::expm1;
  using std::log;
  const T em = -expm1(-1.0 * a);  // 1 - e^{-a}, sign of a
  const T e1 = -expm1(-1.0 * (a * u1));
  const T e2 = -expm1(-1.0 * (a * u2));
  const T D = em - e1 * e2;
  return log(a * em) - a * (u1 + u2) - log(D * D);
}

template <class T>
T gaussian_logc(const T& a, const T& u1, const T& u2) {
  using std::log;
  const T x1 = normal_quantile(u1), x2 = normal_quantile(u2);
  const T omr = 1.0 - a * a;
  return -0.5 * log(omr) -
         (a * (a * (x1 * x1 + x2 * x2) - 2.0 * (x1 * x2))) / (2.0 * omr);
}

template <class T>
T efgm_logc(const T& a, const T& u1, const T& u2) {
  using std::log;
  return log(1.0 + a * ((1.0 - 2.0 * u1) * (1.0 - 2.0 * u2)));
}

template <class T>
T studentt_logc(const T& rho, const T& u1, const T& u2, double nu) {
  using std::log;
  using std::log1p;
  const T x1 = student_t_quantile(u1, nu), x2 = student_t_quantile(u2, nu);
  const T omr = 1.0 - rho * rho;
  const T q = (x1 * x1 - 2.0 * (rho * (x1 * x2)) + x2 * x2) / omr;
  const double cst = std::lgamma(0.5 * (nu + 2.0)) + std::lgamma(0.5 * nu) -
                     2.0 * std::lgamma(0.5 * (nu + 1.0));
  return cst - 0.5 * log(omr) - (0.5 * (nu + 2.0)) * log1p(q / nu) +
         (0.5 * (nu + 1.0)) * (log1p(x1 * x1 / nu) + log1p(x2 * x2 / nu));
}

/// Dispatch on family; the survival transform reflects both arguments.
/// `nu` overrides theta[1] for the Student-t family (used by the
/// finite-difference nu derivatives).
template <class T>
T logc_eval(const CopulaSpec& s, const T& p0, const T& u1, const T& u2,
            double nu) {
  const T v1 = s.survival ? 1.0 - u1 : u1;
  const T v2 = s.survival ? 1.0 - u2 : u2;
  switch (s.family) {
    case Family::clayton: return clayton_logc(p0, v1, v2);
    case Family::gumbel: return gumbel_logc(p0, v1, v2);
    case Family::frank: return frank_logc(p0, v1, v2);
    case Family::gaussian: return gaussian_logc(p0, v1, v2);
    case Family::efgm: return efgm_logc(p0, v1, v2);
    case Family::student_t: return studentt_logc(p0, v1, v2, nu);
  }
  throw domain_error("logc_eval: unknown family tag");
}

void require_interior(double u1, double u2) {
  if (!(u1 > 0.0 && u1 < 1.0 && u2 > 0.0 && u2 < 1.0))
    throw domain_error("copula density: arguments must lie inside (0,1)^2");
}

}  // namespace

double log_density(const CopulaSpec& spec, double u1, double u2) {
  validate(spec);
  require_interior(u1, u2);
  const double nu = spec.family == Family::student_t ? spec.theta[1] : 0.0;
  return logc_eval<double>(spec, spec.theta[0], u1, u2, nu);
}

double density(const CopulaSpec& spec, double u1, double u2) {
  return std::exp(log_density(spec, u1, u2));
}

ScoreGrad log_density_grad(const CopulaSpec& spec, double u1, double u2) {
  validate(spec);
  require_interior(u1, u2);
  using D = Dual1<3>;
  const D p0 = D::variable(spec.theta[0], 0);
  const D U1 = D::variable(u1, 1), U2 = D::variable(u2, 2);
  ScoreGrad out;
  if (spec.family != Family::student_t) {
    const D r = logc_eval(spec, p0, U1, U2, 0.0);
    out.log_c = r.v;
    out.d_alpha = Eigen::VectorXd::Constant(1, r.g[0]);
    out.d_u1 = r.g[1];
    out.d_u2 = r.g[2];
  } else {
    const double nu = spec.theta[1];
    const double h = 1e-4 * std::max(1.0, nu);
    const D r = logc_eval(spec, p0, U1, U2, nu);
    const double vp = logc_eval<double>(spec, spec.theta[0], u1, u2, nu + h);
    const double vm = logc_eval<double>(spec, spec.theta[0], u1, u2, nu - h);
    out.log_c = r.v;
    out.d_alpha.resize(2);
    out.d_alpha << r.g[0], (vp - vm) / (2.0 * h);
    out.d_u1 = r.g[1];
    out.d_u2 = r.g[2];
  }
  return out;
}

ScoreBundle score_bundle(const CopulaSpec& spec, double u1, double u2) {
  validate(spec);
  require_interior(u1, u2);
  using D = Dual2<3>;
  ScoreBundle out;
  if (spec.family != Family::student_t) {
    const D r = logc_eval(spec, D::variable(spec.theta[0], 0),
                          D::variable(u1, 1), D::variable(u2, 2), 0.0);
    out.log_c = r.v;
    out.d_alpha = Eigen::VectorXd::Constant(1, r.g[0]);
    out.d_u1 = r.g[1];
    out.d_u2 = r.g[2];
    out.d2_alpha = Eigen::MatrixXd::Constant(1, 1, r.h(0, 0));
    out.d2_u1_alpha = Eigen::VectorXd::Constant(1, r.h(1, 0));
    out.d2_u2_alpha = Eigen::VectorXd::Constant(1, r.h(2, 0));
    out.d2_u_u << r.h(1, 1), r.h(1, 2), r.h(2, 1), r.h(2, 2);
    return out;
  }
  // Student-t: exact in (rho, u1, u2); nu derivatives by central differences
  // of the whole bundle
  const double nu = spec.theta[1];
  const double h = 1e-4 * std::max(1.0, nu);
  auto eval = [&](double nn) {
    return logc_eval(spec, D::variable(spec.theta[0], 0), D::variable(u1, 1),
                     D::variable(u2, 2), nn);
  };
  const D r0 = eval(nu), rp = eval(nu + h), rm = eval(nu - h);
  const double dv_dnu = (rp.v - rm.v) / (2.0 * h);
  const double d2v_dnu2 = (rp.v - 2.0 * r0.v + rm.v) / (h * h);
  const Eigen::Vector3d dg_dnu = (rp.g - rm.g) / (2.0 * h);
  out.log_c = r0.v;
  out.d_alpha.resize(2);
  out.d_alpha << r0.g[0], dv_dnu;
  out.d_u1 = r0.g[1];
  out.d_u2 = r0.g[2];
  out.d2_alpha.resize(2, 2);
  out.d2_alpha << r0.h(0, 0), dg_dnu[0], dg_dnu[0], d2v_dnu2;
  out.d2_u1_alpha.resize(2);
  out.d2_u1_alpha << r0.h(1, 0), dg_dnu[1];
  out.d2_u2_alpha.resize(2);
  out.d2_u2_alpha << r0.h(2, 0), dg_dnu[2];
  out.d2_u_u << r0.h(1, 1), r0.h(1, 2), r0.h(2, 1), r0.h(2, 2);
  return out;
}

// -------------------------------------------------------------- copula CDF

namespace {

// base-family CDF at interior arguments, survival excluded
double base_cdf(const CopulaSpec& s, double u1, double u2);

double base_conditional_cdf(const CopulaSpec& s, double w, double u);

double base_cdf(const CopulaSpec& s, double u1, double u2) {
  const double a = s.theta[0];
  switch (s.family) {
    case Family::clayton: {
      const double a1 = -a * std::log(u1), a2 = -a * std::log(u2);
      const double m = std::max(a1, a2);
      const double lS =
          m + std::log(std::exp(a1 - m) + std::exp(a2 - m) - std::exp(-m));
      return std::exp(-lS / a);
    }
    case Family::gumbel: {
      const double lx = std::log(-std::log(u1)), ly = std::log(-std::log(u2));
      const double ax = a * lx, ay = a * ly;
      const double m = std::max(ax, ay);
      const double lA = m + std::log(std::exp(ax - m) + std::exp(ay - m));
      return std::exp(-std::exp(lA / a));
    }
    case Family::frank: {
      const double e1 = std::expm1(-a * u1), e2 = std::expm1(-a * u2);
      const double em = std::expm1(-a);
      return -std::log1p(e1 * e2 / em) / a;
    }
    case Family::efgm:
      return u1 * u2 * (1.0 + a * (1.0 - u1) * (1.0 - u2));
    case Family::gaussian:
    case Family::student_t: {
      // C(u1,u2) = int_0^{u1} C_{2|1}(u2 | p) dp
      const MappedRule m = cosine_mapped(128);
      double acc = 0.0;
      for (int i = 0; i < m.order; ++i)
        acc += m.w[i] * base_conditional_cdf(s, u2, u1 * m.u[i]);
      return u1 * acc;
    }
  }
  throw domain_error("copula_cdf: unknown family tag");
}

double base_conditional_cdf(const CopulaSpec& s, double w, double u) {
  const double a = s.theta[0];
  switch (s.family) {
    case Family::clayton: {
      const double a1 = -a * std::log(u), a2 = -a * std::log(w);
      const double m = std::max(a1, a2);
      const double lS =
          m + std::log(std::exp(a1 - m) + std::exp(a2 - m) - std::exp(-m));
      return std::exp(-(1.0 + 1.0 / a) * lS - (1.0 + a) * std::log(u));
    }
    case Family::gumbel: {
      const double lx = std::log(-std::log(u)), ly = std::log(-std::log(w));
      const double ax = a * lx, ay = a * ly;
      const double m = std::max(ax, ay);
      const double lA = m + std::log(std::exp(ax - m) + std::exp(ay - m));
      const double A1a = std::exp(lA / a);
      return std::exp(-A1a + (1.0 / a - 1.0) * lA + (a - 1.0) * lx -
                      std::log(u));
    }
    case Family::frank: {
      const double ew = std::expm1(-a * w);
      const double eu = std::expm1(-a * u);
      const double em = std::expm1(-a);
      return std::exp(-a * u) * ew / (em + eu * ew);
    }
    case Family::efgm:
      return w * (1.0 + a * (1.0 - 2.0 * u) * (1.0 - w));
    case Family::gaussian: {
      const double x = normal_quantile(u), y = normal_quantile(w);
      return normal_cdf((y - a * x) / std::sqrt(1.0 - a * a));
    }
    case Family::student_t: {
      const double nu = s.theta[1];
      const double x = student_t_quantile(u, nu);
      const double y = student_t_quantile(w, nu);
      const double scale =
          std::sqrt((nu + x * x) * (1.0 - a * a) / (nu + 1.0));
      return student_t_cdf((y - a * x) / scale, nu + 1.0);
    }
  }
  throw domain_error("conditional_cdf: unknown family tag");
}

double base_conditional_quantile(const CopulaSpec& s, double q, double u) {
  const double a = s.theta[0];
  switch (s.family) {
    case Family::clayton: {
      // [(q^{-a/(1+a)} - 1) u^{-a} + 1]^{-1/a}, kept in logs
      const double lx =
          std::log(std::expm1(-a / (1.0 + a) * std::log(q))) - a * std::log(u);
      const double l1px = lx > 36.0 ? lx : std::log1p(std::exp(lx));
      return std::exp(-l1px / a);
    }
    case Family::gaussian: {
      const double x = normal_quantile(u);
      return normal_cdf(a * x + std::sqrt(1.0 - a * a) * normal_quantile(q));
    }
    case Family::student_t: {
      const double nu = s.theta[1];
      const double x = student_t_quantile(u, nu);
      const double scale =
          std::sqrt((nu + x * x) * (1.0 - a * a) / (nu + 1.0));
      return student_t_cdf(a * x + scale * student_t_quantile(q, nu + 1.0), nu);
    }
    case Family::efgm: {
      const double b = a * (1.0 - 2.0 * u);
      if (std::abs(b) < 1e-12) return q;
      const double disc = (1.0 + b) * (1.0 + b) - 4.0 * b * q;
      return 2.0 * q / (1.0 + b + std::sqrt(disc));
    }
    case Family::gumbel:
    case Family::frank: {
      // monotone in w: bisection to localize, then Brent
      double lo = 1e-12, hi = 1.0 - 1e-12;
      auto g = [&](double w) { return base_conditional_cdf(s, w, u) - q; };
      double flo = g(lo), fhi = g(hi);
      if (flo >= 0.0) return lo;
      if (fhi <= 0.0) return hi;
      for (int i = 0; i < 12; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double fm = g(mid);
        if (fm < 0.0) { lo = mid; flo = fm; }
        else { hi = mid; fhi = fm; }
      }
      return brent_root(g, lo, hi, 1e-15, 1e-12, 300);
    }
  }
  throw domain_error("conditional_quantile: unknown family tag");
}

}  // namespace

double copula_cdf(const CopulaSpec& spec, double u1, double u2) {
  validate(spec);
  if (!(u1 >= 0.0 && u1 <= 1.0 && u2 >= 0.0 && u2 <= 1.0))
    throw domain_error("copula_cdf: arguments must lie in [0,1]^2");
  double r;
  if (u1 == 0.0 || u2 == 0.0) r = 0.0;
  else if (u1 == 1.0) r = u2;
  else if (u2 == 1.0) r = u1;
  else if (spec.survival) {
    CopulaSpec base = spec;
    base.survival = false;
    r = u1 + u2 - 1.0 + base_cdf(base, 1.0 - u1, 1.0 - u2);
  } else {
    r = base_cdf(spec, u1, u2);
  }
  return std::clamp(r, std::max(u1 + u2 - 1.0, 0.0), std::min(u1, u2));
}

double conditional_cdf(const CopulaSpec& spec, double w, double u) {
  validate(spec);
  if (!(u > 0.0 && u < 1.0))
    throw domain_error("conditional_cdf: u must lie inside (0,1)");
  if (!(w >= 0.0 && w <= 1.0))
    throw domain_error("conditional_cdf: w must lie in [0,1]");
  if (w == 0.0) return 0.0;
  if (w == 1.0) return 1.0;
  double r;
  if (spec.survival) {
    CopulaSpec base = spec;
    base.survival = false;
    r = 1.0 - base_conditional_cdf(base, 1.0 - w, 1.0 - u);
  } else {
    r = base_conditional_cdf(spec, w, u);
  }
  return std::clamp(r, 0.0, 1.0);
}

double conditional_quantile(const CopulaSpec& spec, double q, double u) {
  validate(spec);
  if (!(q > 0.0 && q < 1.0))
    throw domain_error("conditional_quantile: q must lie inside (0,1)");
  if (!(u > 0.0 && u < 1.0))
    throw domain_error("conditional_quantile: u must lie inside (0,1)");
  if (spec.survival) {
    CopulaSpec base = spec;
    base.survival = false;
    return 1.0 - base_conditional_quantile(base, 1.0 - q, 1.0 - u);
  }
  return base_conditional_quantile(spec, q, u);
}

// ------------------------------------------------------------- dependence

double kendall_tau(const CopulaSpec& spec) {
  validate(spec);
  // tau is invariant under the survival transform
  const double a = spec.theta[0];
  switch (spec.family) {
    case Family::clayton: return a / (a + 2.0);
    case Family::gumbel: return 1.0 - 1.0 / a;
    case Family::student_t: return 2.0 / kPi * std::asin(a);
    case Family::frank: {
      // 1 - 4/a (1 - D_1(a)) with the Debye function by quadrature
      const double aa = std::abs(a);
      const QuadratureRule r = gauss_legendre(128, 0.0, aa);
      double d1 = 0.0;
      for (int i = 0; i < r.order; ++i) {
        const double t = r.nodes[i];
        d1 += r.weights[i] * t / std::expm1(t);
      }
      d1 /= aa;
      const double tau = 1.0 - 4.0 / aa * (1.0 - d1);
      return a > 0.0 ? tau : -tau;
    }
    case Family::gaussian:
    case Family::efgm:
      return kendall_tau_quadrature(spec, 128);
  }
  throw domain_error("kendall_tau: unknown family tag");
}

double kendall_tau_quadrature(const CopulaSpec& spec, int order) {
  validate(spec);
  // tau = 1 - 4 int dC/du1 * dC/du2 du  (exchangeable families)
  const MappedRule m = cosine_mapped(order);
  double acc = 0.0;
  for (int i = 0; i < m.order; ++i) {
    const double u = m.u[i];
    double row = 0.0;
    for (int j = 0; j < m.order; ++j) {
      const double v = m.u[j];
      row += m.w[j] * conditional_cdf(spec, v, u) * conditional_cdf(spec, u, v);
    }
    acc += m.w[i] * row;
  }
  return 1.0 - 4.0 * acc;
}

TailDependence tail_dependence(const CopulaSpec& spec) {
  validate(spec);
  const double a = spec.theta[0];
  TailDependence td;
  switch (spec.family) {
    case Family::clayton:
      td.lambda_lower = std::pow(2.0, -1.0 / a);
      break;
    case Family::gumbel:
      td.lambda_upper = 2.0 - std::pow(2.0, 1.0 / a);
      break;
    case Family::student_t: {
      const double nu = spec.theta[1];
      const double lam = 2.0 * student_t_cdf(
          -std::sqrt((nu + 1.0) * (1.0 - a) / (1.0 + a)), nu + 1.0);
      td.lambda_lower = td.lambda_upper = lam;
      break;
    }
    case Family::frank:
    case Family::gaussian:
    case Family::efgm:
      break;  // no tail dependence
  }
  if (spec.survival) std::swap(td.lambda_lower, td.lambda_upper);
  return td;
}

CopulaSpec survival_transform(const CopulaSpec& spec) {
  validate(spec);
  CopulaSpec s = spec;
  s.survival = !s.survival;
  return s;
}

// ------------------------------------------------------------- information

double clayton_int_alpha(double alpha, int order) {
  if (!(alpha > 0.0))
    throw domain_error("clayton_int_alpha: alpha must be positive");
  // x = 1/(1-s), y = 1/(1-t) maps (1,inf)^2 onto the unit square; the mapped
  // integrand is unbounded at the (1,1) corner and its far tail decays like
  // x^{-1/alpha}, so the panels refine geometrically up to x ~ 2^53
  const double ex = 4.0 + 1.0 / alpha;
  const int per = std::clamp(order / 8, 8, 16);
  const QuadratureRule& g = gauss_legendre_unit(per);
  std::vector<double> xs, lxs, jac;
  double lo = 0.0;
  for (int k = 0; k <= 52; ++k) {
    const double hi = 1.0 - std::ldexp(1.0, -(k + 1));
    for (int i = 0; i < per; ++i) {
      const double s = lo + (hi - lo) * g.nodes[i];
      const double x = 1.0 / (1.0 - s);
      xs.push_back(x);
      lxs.push_back(-std::log1p(-s));
      jac.push_back((hi - lo) * g.weights[i] * x * x);
    }
    lo = hi;
  }
  const int n = static_cast<int>(xs.size());
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = xs[i], lx = lxs[i];
    double row = 0.0;
    for (int j = 0; j < n; ++j) {
      const double y = xs[j], ly = lxs[j];
      const double num =
          x * y * (lx - ly) * (lx - ly) - x * lx * lx - y * ly * ly;
      row += jac[j] * num * std::pow(x + y - 1.0, -ex);
    }
    acc += jac[i] * row;
  }
  return acc;
}

double sigma_ideal_closed_form(const CopulaSpec& spec) {
  validate(spec);
  const double a = spec.theta[0];
  switch (spec.family) {
    case Family::gaussian:
      return (1.0 + a * a) / ((1.0 - a * a) * (1.0 - a * a));
    case Family::efgm: {
      const double m = std::abs(a);
      if (m < 0.05) {
        // leading terms of sum_k a^{2k-2}/(2k+1)^2
        const double a2 = a * a;
        return 1.0 / 9.0 + a2 / 25.0 + a2 * a2 / 49.0 + a2 * a2 * a2 / 81.0;
      }
      return (polylog2(m) - 0.25 * polylog2(a * a) - m) / (m * m * m);
    }
    case Family::clayton: {
      const double t1 = 1.0 / (a * (1.0 + a));
      const double t2 = 1.0 / (a * (1.0 + a) * (1.0 + a) * (1.0 + 2.0 * a));
      const double t3 = (1.0 + a) * (1.0 + 2.0 * a) / std::pow(a, 5) *
                        clayton_int_alpha(a);
      return t1 + t2 + t3;
    }
    default:
      throw domain_error(
          "sigma_ideal_closed_form: unsupported family " +
          family_name(spec.family));
  }
}

Eigen::MatrixXd sigma_ideal_quadrature(const CopulaSpec& spec, int order) {
  validate(spec);
  const int d = param_dim(spec.family);
  const MappedRule m = cosine_mapped(order);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < m.order; ++i)
    for (int j = 0; j < m.order; ++j) {
      const ScoreGrad g = log_density_grad(spec, m.u[i], m.u[j]);
      acc += m.w[i] * m.w[j] * std::exp(g.log_c) *
             (g.d_alpha * g.d_alpha.transpose());
    }
  return acc;
}

// -------------------------------------------------------- reparameterization

Eigen::VectorXd to_unconstrained(const CopulaSpec& spec) {
  validate(spec);
  const double a = spec.theta[0];
  Eigen::VectorXd v(param_dim(spec.family));
  switch (spec.family) {
    case Family::clayton: v[0] = std::log(a); break;
    case Family::gumbel: v[0] = std::log(std::max(a - 1.0, 1e-300)); break;
    case Family::frank: v[0] = a; break;
    case Family::gaussian:
    case Family::efgm: v[0] = std::atanh(std::clamp(a, -1.0 + 1e-12, 1.0 - 1e-12)); break;
    case Family::student_t:
      v[0] = std::atanh(a);
      v[1] = std::log(std::max(spec.theta[1] - 2.0, 1e-300));
      break;
  }
  return v;
}

CopulaSpec from_unconstrained(Family f, bool survival,
                              const Eigen::VectorXd& v) {
  if (v.size() != param_dim(f))
    throw domain_error("from_unconstrained: wrong dimension");
  CopulaSpec s;
  s.family = f;
  s.survival = survival;
  s.theta.resize(param_dim(f));
  switch (f) {
    case Family::clayton: s.theta[0] = std::exp(v[0]); break;
    case Family::gumbel: s.theta[0] = 1.0 + std::exp(v[0]); break;
    case Family::frank: s.theta[0] = v[0]; break;
    case Family::gaussian:
    case Family::efgm: s.theta[0] = std::tanh(v[0]); break;
    case Family::student_t:
      s.theta[0] = std::tanh(v[0]);
      s.theta[1] = 2.0 + std::exp(v[1]);
      break;
  }
  return s;
}

Eigen::VectorXd unconstrained_jacobian(const CopulaSpec& spec) {
  validate(spec);
  const double a = spec.theta[0];
  Eigen::VectorXd j(param_dim(spec.family));
  switch (spec.family) {
    case Family::clayton: j[0] = a; break;
    case Family::gumbel: j[0] = a - 1.0; break;
    case Family::frank: j[0] = 1.0; break;
    case Family::gaussian:
    case Family::efgm: j[0] = 1.0 - a * a; break;
    case Family::student_t:
      j[0] = 1.0 - a * a;
      j[1] = spec.theta[1] - 2.0;
      break;
  }
  return j;
}

}  // namespace ckm
