#include "ckm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ckm/error.hpp"
#include "ckm/numerics.hpp"

namespace ckm {

namespace {

constexpr double kRidge = 1e-10;
constexpr double kPi = 3.14159265358979323846;

double marginal_cdf_hat(const FitResult& fit, double y) {
  switch (fit.marginal_kind) {
    case MarginalKind::sieve: return sieve_cdf(fit.sieve_hat, y);
    case MarginalKind::parametric: return parametric_cdf(fit.parametric_hat, y);
    case MarginalKind::empirical: return empirical_cdf_eval(fit.ecdf_hat, y);
    case MarginalKind::known:
      throw domain_error("inference: fit carries no marginal estimate");
  }
  throw domain_error("inference: bad marginal kind");
}

double marginal_quantile_hat(const FitResult& fit, double p) {
  switch (fit.marginal_kind) {
    case MarginalKind::sieve: return sieve_quantile(fit.sieve_hat, p);
    case MarginalKind::parametric:
      return parametric_quantile(fit.parametric_hat, p);
    case MarginalKind::empirical: return empirical_quantile(fit.ecdf_hat, p);
    case MarginalKind::known:
      throw domain_error("inference: fit carries no marginal estimate");
  }
  throw domain_error("inference: bad marginal kind");
}

Eigen::VectorXd uhat_series(const FitResult& fit, const Eigen::VectorXd& y) {
  const int n = int(y.size());
  Eigen::VectorXd u(n);
  for (int t = 0; t < n; ++t)
    u[t] = std::clamp(marginal_cdf_hat(fit, y[t]), 1e-12, 1.0 - 1e-12);
  return u;
}

double cos_basis(int k, double u) {
  return std::sqrt(2.0) * std::cos(double(k) * kPi * u);
}

// Antiderivative of the basis on [0, v].
double cos_basis_int(int k, double v) {
  return std::sqrt(2.0) * std::sin(double(k) * kPi * v) / (double(k) * kPi);
}

struct ScoreDesign {
  Eigen::MatrixXd S;  ///< (n-1) x d copula scores per pair
  Eigen::MatrixXd X;  ///< (n-1) x K nuisance-direction design
};

// Pair t carries the score at (u_{t-1}, u_t); the nuisance direction b acts
// through the observation density at u_t and through both copula arguments
// via its antiderivative.
ScoreDesign score_design(const CopulaSpec& spec, const Eigen::VectorXd& u,
                         int K) {
  const int n = int(u.size());
  const int d = int(spec.theta.size());
  ScoreDesign sd;
  sd.S.resize(n - 1, d);
  sd.X.resize(n - 1, K);
  for (int t = 1; t < n; ++t) {
    const ScoreGrad g = log_density_grad(spec, u[t - 1], u[t]);
    sd.S.row(t - 1) = g.d_alpha.transpose();
    for (int k = 1; k <= K; ++k)
      sd.X(t - 1, k - 1) = cos_basis(k, u[t]) +
                           g.d_u1 * cos_basis_int(k, u[t - 1]) +
                           g.d_u2 * cos_basis_int(k, u[t]);
  }
  return sd;
}

void check_fitted(const FitResult& fit, const char* what) {
  if (!fit.converged)
    throw domain_error(std::string(what) + ": fit did not converge");
}

}  // namespace

// ------------------------------------------------------ efficient information

InfoEstimate efficient_info(const FitResult& fit, const Eigen::VectorXd& y,
                            int K_nalpha) {
  check_fitted(fit, "efficient_info");
  if (K_nalpha < 1)
    throw domain_error("efficient_info: K_nalpha must be positive");
  if (y.size() < K_nalpha + 2)
    throw domain_error("efficient_info: series too short");
  const Eigen::VectorXd u = uhat_series(fit, y);
  const int m = int(u.size()) - 1;
  const ScoreDesign sd = score_design(fit.copula_hat, u, K_nalpha);

  Eigen::MatrixXd G = sd.X.transpose() * sd.X / double(m);
  G.diagonal().array() += kRidge;
  const Eigen::MatrixXd A =
      G.ldlt().solve(sd.X.transpose() * sd.S / double(m));

  const Eigen::MatrixXd R = sd.S - sd.X * A;
  InfoEstimate out;
  out.K_nalpha = K_nalpha;
  out.e_star_coeffs = A.transpose();
  out.I_star_hat = R.transpose() * R / double(m);
  out.I_star_hat = ((out.I_star_hat + out.I_star_hat.transpose()) / 2.0).eval();
  return out;
}

double sigma_G(const FitResult& fit, const Eigen::VectorXd& y, double y0,
               int K_nalpha) {
  check_fitted(fit, "sigma_G");
  if (K_nalpha < 1) throw domain_error("sigma_G: K_nalpha must be positive");
  const int n = int(y.size());
  if (n < K_nalpha + 2) throw domain_error("sigma_G: series too short");
  const Eigen::VectorXd u = uhat_series(fit, y);
  const double g0 = marginal_cdf_hat(fit, y0);
  const ScoreDesign sd = score_design(fit.copula_hat, u, K_nalpha);
  const int d = int(sd.S.cols());

  Eigen::VectorXd c = Eigen::VectorXd::Zero(d + K_nalpha);
  for (int t = 0; t < n; ++t) {
    if (u[t] > g0) continue;
    for (int k = 1; k <= K_nalpha; ++k)
      c[d + k - 1] += cos_basis(k, u[t]) / double(n);
  }

  Eigen::MatrixXd Z(n - 1, d + K_nalpha);
  Z.leftCols(d) = sd.S;
  Z.rightCols(K_nalpha) = sd.X;
  Eigen::MatrixXd M = Z.transpose() * Z / double(n - 1);
  M.diagonal().array() += kRidge;
  const double out = c.dot(M.ldlt().solve(c));
  return std::max(out, 0.0);
}

// ----------------------------------------------------------------- profile LR

double chi2_1_quantile(double level) {
  if (!(level > 0.0 && level < 1.0))
    throw domain_error("chi2_1_quantile: level must lie in (0, 1)");
  const double z = normal_quantile((1.0 + level) / 2.0);
  return z * z;
}

double profile_lr_stat(const Eigen::VectorXd& y, const FitResult& fit,
                       double alpha) {
  check_fitted(fit, "profile_lr_stat");
  if (fit.marginal_kind != MarginalKind::sieve)
    throw domain_error("profile_lr_stat: needs a sieve fit");
  if (fit.copula_hat.theta.size() != 1)
    throw domain_error("profile_lr_stat: scalar copula parameter required");
  CopulaSpec spec = fit.copula_hat;
  spec.theta[0] = alpha;
  validate(spec);
  FitResult prof;
  try {
    prof = sieve_profile(y, spec, fit.sieve_hat);
  } catch (const convergence_error& e) {
    throw convergence_error("profile refit failed at alpha = " +
                            std::to_string(alpha) + ": " + e.what());
  }
  const double lr = 2.0 * double(y.size()) * (fit.loglik - prof.loglik);
  return (lr < 0.0 && lr > -1e-6) ? 0.0 : lr;
}

LRInterval profile_lr_ci(const Eigen::VectorXd& y, Family family,
                         const SieveConfig& cfg, double level, bool survival) {
  if (param_dim(family) != 1)
    throw domain_error("profile_lr_ci: scalar copula parameter required");
  const double crit = chi2_1_quantile(level);
  const FitResult fit = sieve_mle(y, family, cfg, survival);
  const double vhat = to_unconstrained(fit.copula_hat)[0];

  const auto lr_of = [&](double v) {
    Eigen::VectorXd vv(1);
    vv[0] = v;
    const CopulaSpec s = from_unconstrained(family, survival, vv);
    return profile_lr_stat(y, fit, s.theta[0]);
  };

  const auto bound = [&](int dir) {
    double step = 0.25;
    double inner = vhat;
    double outer = vhat;
    double lr_outer = 0.0;
    bool bracketed = false;
    for (int j = 0; j < 60; ++j) {
      outer = inner + double(dir) * step;
      lr_outer = lr_of(outer);
      if (lr_outer >= crit) {
        bracketed = true;
        break;
      }
      inner = outer;
      step *= 2.0;
    }
    if (!bracketed)
      throw convergence_error("profile_lr_ci: level set is unbounded");
    const double lo = std::min(inner, outer);
    const double hi = std::max(inner, outer);
    const double v = brent_root([&](double x) { return lr_of(x) - crit; },
                                lo, hi, 1e-9, 1e-4);
    Eigen::VectorXd vv(1);
    vv[0] = v;
    const double alpha = from_unconstrained(family, survival, vv).theta[0];
    return std::pair<double, double>(alpha, lr_of(v));
  };

  const auto [a_lo, lr_lo] = bound(-1);
  const auto [a_hi, lr_hi] = bound(+1);
  LRInterval out;
  out.level = level;
  out.alpha_hat = fit.copula_hat.theta[0];
  out.lower = a_lo;
  out.upper = a_hi;
  out.lr_at_lower = lr_lo;
  out.lr_at_upper = lr_hi;
  return out;
}

// ------------------------------------------------------ conditional quantile

double conditional_quantile_hat(const FitResult& fit, double q, double y) {
  if (!(q > 0.0 && q < 1.0))
    throw domain_error("conditional_quantile_hat: q must lie in (0, 1)");
  double u = marginal_cdf_hat(fit, y);
  if (fit.marginal_kind == MarginalKind::empirical)
    u = clamp_unit(u, int(fit.ecdf_hat.sorted.size()));
  u = std::clamp(u, 1e-12, 1.0 - 1e-12);
  const double w = conditional_quantile(fit.copula_hat, q, u);
  return marginal_quantile_hat(fit, std::clamp(w, 1e-12, 1.0 - 1e-12));
}

}  // namespace ckm
