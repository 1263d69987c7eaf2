#include "ckm/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ckm/numerics.hpp"

namespace ckm {

namespace {

constexpr double kUnitEps = 1e-15;

double clamp_open_unit(double u) {
  return std::clamp(u, kUnitEps, 1.0 - kUnitEps);
}

SeriesSample pack_sample(const SimConfig& cfg, Eigen::VectorXd&& u,
                         bool keep_u) {
  SeriesSample out;
  out.config = cfg;
  out.values.resize(cfg.n);
  for (int i = 0; i < cfg.n; ++i)
    out.values[i] = parametric_quantile(cfg.marginal, u[i]);
  if (keep_u) out.u_values = std::move(u);
  return out;
}

Eigen::VectorXd student_t_ar_uniforms(const SimConfig& cfg) {
  const double rho = cfg.copula.theta[0];
  const double nu = cfg.copula.theta[1];
  const double scale = (1.0 - rho * rho) / (nu + 1.0);
  RngStream rng(cfg.seed, cfg.stream_id);
  Eigen::VectorXd u(cfg.n);
  double x = student_t_quantile(rng.uniform(), nu);
  if (cfg.burn_in == 0) u[0] = clamp_open_unit(student_t_cdf(x, nu));
  const int total = cfg.burn_in + cfg.n;
  for (int t = 1; t < total; ++t) {
    const double e = student_t_quantile(rng.uniform(), nu + 1.0);
    x = rho * x + e * std::sqrt((nu + x * x) * scale);
    if (t >= cfg.burn_in)
      u[t - cfg.burn_in] = clamp_open_unit(student_t_cdf(x, nu));
  }
  return u;
}

Eigen::VectorXd quantile_path_uniforms(const SimConfig& cfg) {
  RngStream rng(cfg.seed, cfg.stream_id);
  Eigen::VectorXd u(cfg.n);
  double prev = clamp_open_unit(rng.uniform());
  if (cfg.burn_in == 0) u[0] = prev;
  const int total = cfg.burn_in + cfg.n;
  for (int t = 1; t < total; ++t) {
    const double v = rng.uniform();
    double next;
    try {
      next = conditional_quantile(cfg.copula, v, prev);
    } catch (const std::exception& e) {
      throw error("simulation failed at step " + std::to_string(t) + ": " +
                  e.what());
    }
    prev = clamp_open_unit(next);
    if (t >= cfg.burn_in) u[t - cfg.burn_in] = prev;
  }
  return u;
}

double clayton_drift_statistic(double alpha) {
  const double p = 1.0 / (2.0 * alpha);
  const double expo = alpha / (1.0 + alpha);
  auto f = [&](double v) { return std::pow(std::pow(v, -expo) - 1.0, p); };
  const QuadratureRule& gl = gauss_legendre_unit(16);
  std::vector<double> cuts;
  for (int k = 52; k >= 1; --k) cuts.push_back(std::ldexp(1.0, -k));
  for (int k = 2; k <= 52; ++k) cuts.push_back(1.0 - std::ldexp(1.0, -k));
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i], w = cuts[i + 1] - cuts[i];
    for (int j = 0; j < gl.nodes.size(); ++j)
      total += w * gl.weights[j] * f(a + w * gl.nodes[j]);
  }
  return total;
}

DriftReport trivial_report(Family f) {
  DriftReport r;
  r.family = f;
  r.applicable = true;
  r.statistic = 0.0;
  r.passes = true;
  r.note = "trivially ergodic (i.i.d.)";
  return r;
}

}  // namespace

void validate(const SimConfig& cfg) {
  validate(cfg.copula);
  validate(cfg.marginal);
  if (cfg.n < 2) throw domain_error("simulate: n must be >= 2");
  if (cfg.burn_in < 0) throw domain_error("simulate: burn_in must be >= 0");
}

SeriesSample simulate_chain(const SimConfig& cfg, bool keep_u) {
  validate(cfg);
  if (cfg.copula.family == Family::student_t && !cfg.copula.survival)
    return pack_sample(cfg, student_t_ar_uniforms(cfg), keep_u);
  return pack_sample(cfg, quantile_path_uniforms(cfg), keep_u);
}

SeriesSample simulate_chain_quantile(const SimConfig& cfg, bool keep_u) {
  validate(cfg);
  return pack_sample(cfg, quantile_path_uniforms(cfg), keep_u);
}

DriftReport drift_diagnostic(const CopulaSpec& spec) {
  DriftReport r;
  r.family = spec.family;
  switch (spec.family) {
    case Family::clayton:
      if (spec.theta.size() == 1 && spec.theta[0] >= 0.0 &&
          spec.theta[0] < 1e-10)
        return trivial_report(spec.family);
      validate(spec);
      r.applicable = true;
      r.statistic = clayton_drift_statistic(spec.theta[0]);
      r.note = "moment contraction E[(V^(-a/(1+a)) - 1)^p], p = 1/(2a)";
      break;
    case Family::gumbel:
      validate(spec);
      if (spec.theta[0] < 1.0 + 1e-10) return trivial_report(spec.family);
      r.applicable = true;
      {
        const double a = spec.theta[0];
        r.statistic =
            (1.0 - 1.0 / a) * beta_fn(1.0 - 0.5 / a, 1.0 - 0.5 / a);
      }
      r.note = "(1 - 1/a) B(1 - 1/(2a), 1 - 1/(2a))";
      break;
    case Family::student_t: {
      validate(spec);
      const double rho = spec.theta[0], nu = spec.theta[1];
      r.applicable = true;
      r.statistic = std::sqrt(rho * rho + (1.0 - rho * rho) / (nu - 1.0));
      r.note = "sqrt(rho^2 + (1 - rho^2)/(nu - 1))";
      break;
    }
    default:
      validate(spec);
      r.applicable = false;
      r.statistic = std::numeric_limits<double>::quiet_NaN();
      r.passes = true;
      r.note =
          "no drift certificate needed: family has no tail dependence and "
          "its chains mix under standard positivity arguments";
      return r;
  }
  r.passes = r.statistic < r.threshold;
  return r;
}

}  // namespace ckm
