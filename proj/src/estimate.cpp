#include "ckm/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "ckm/numerics.hpp"

namespace ckm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kUClamp = 1e-12;

double clamp_u(double u) { return std::clamp(u, kUClamp, 1.0 - kUClamp); }

// --------------------------------------------------------------- optimizer

using GradFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

struct OptResult {
  Eigen::VectorXd x;
  double value = -kInf;
  bool converged = false;
  int iterations = 0;
  double grad_norm = kInf;
};

/// Quasi-Newton (BFGS, inverse-Hessian form) ascent with backtracking.
/// The objective returns -inf outside the admissible region.
OptResult maximize_bfgs(const GradFn& f, const Eigen::VectorXd& x0,
                        int max_iter = 500, double gtol = 1e-6,
                        double ftol = 1e-10) {
  const int d = int(x0.size());
  OptResult out;
  out.x = x0;
  Eigen::VectorXd g(d);
  double val = f(out.x, &g);
  if (!std::isfinite(val)) return out;
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(d, d);
  bool scaled = false;
  for (int it = 0; it < max_iter; ++it) {
    out.grad_norm = g.lpNorm<Eigen::Infinity>();
    out.value = val;
    if (out.grad_norm < gtol) {
      out.converged = true;
      return out;
    }
    Eigen::VectorXd dir = H * g;
    double slope = dir.dot(g);
    if (slope <= 0.0) {
      H.setIdentity();
      dir = g;
      slope = dir.dot(g);
    }
    double step = 1.0;
    double cand_val = 0.0;
    Eigen::VectorXd cand_x, cand_g(d);
    bool accepted = false, have_grad = false;
    for (int ls = 0; ls < 60; ++ls) {
      cand_x = out.x + step * dir;
      if (ls == 0) {
        cand_val = f(cand_x, &cand_g);
        have_grad = true;
      } else {
        cand_val = f(cand_x, nullptr);
        have_grad = false;
      }
      if (std::isfinite(cand_val) &&
          cand_val >= val + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    ++out.iterations;
    if (!accepted) {
      out.converged = out.grad_norm < 1e-5;
      return out;
    }
    if (!have_grad) f(cand_x, &cand_g);
    const Eigen::VectorXd s = cand_x - out.x;
    const Eigen::VectorXd yv = g - cand_g;  // gradient drop of the ascent
    const double rel = std::abs(cand_val - val) / std::max(1.0, std::abs(val));
    out.x = cand_x;
    val = cand_val;
    g = cand_g;
    if (rel < ftol && g.lpNorm<Eigen::Infinity>() < 1e-5) {
      out.value = val;
      out.grad_norm = g.lpNorm<Eigen::Infinity>();
      out.converged = true;
      return out;
    }
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      if (!scaled) {
        H = Eigen::MatrixXd::Identity(d, d) * (sy / yv.squaredNorm());
        scaled = true;
      }
      const Eigen::VectorXd Hy = H * yv;
      const double yHy = yv.dot(Hy);
      H += ((sy + yHy) / (sy * sy)) * (s * s.transpose()) -
           (Hy * s.transpose() + s * Hy.transpose()) / sy;
    }
  }
  out.value = val;
  out.grad_norm = g.lpNorm<Eigen::Infinity>();
  return out;
}

// ----------------------------------------------- fitting parameterization

// nu runs through a scaled logistic onto (2.01, 50) so the bound holds
// inside the search; other families reuse the library charts.
constexpr double kNuLo = 2.01, kNuHi = 50.0;

Eigen::VectorXd fit_v(const CopulaSpec& spec) {
  if (spec.family != Family::student_t) return to_unconstrained(spec);
  Eigen::VectorXd v(2);
  const double rho = std::clamp(spec.theta[0], -0.999999, 0.999999);
  v[0] = std::atanh(rho);
  const double p =
      std::clamp((spec.theta[1] - kNuLo) / (kNuHi - kNuLo), 1e-4, 1.0 - 1e-4);
  v[1] = std::log(p / (1.0 - p));
  return v;
}

CopulaSpec fit_spec(Family f, bool survival, const Eigen::VectorXd& v) {
  if (f != Family::student_t) return from_unconstrained(f, survival, v);
  const double sig = 1.0 / (1.0 + std::exp(-v[1]));
  return student_t_spec(std::tanh(v[0]), kNuLo + (kNuHi - kNuLo) * sig,
                        survival);
}

Eigen::VectorXd fit_jacobian(const CopulaSpec& spec) {
  if (spec.family != Family::student_t) return unconstrained_jacobian(spec);
  Eigen::VectorXd j(2);
  j[0] = 1.0 - spec.theta[0] * spec.theta[0];
  const double sig = (spec.theta[1] - kNuLo) / (kNuHi - kNuLo);
  j[1] = (kNuHi - kNuLo) * sig * (1.0 - sig);
  return j;
}

// ------------------------------------------------------- moment-type starts

double lag_tau(const Eigen::VectorXd& u) {
  const int n = int(u.size());
  std::vector<double> a(u.data(), u.data() + n - 1);
  std::vector<double> b(u.data() + 1, u.data() + n);
  return empirical_kendall_tau(a, b);
}

CopulaSpec mom_spec(Family f, bool survival, double tau) {
  switch (f) {
    case Family::clayton: {
      const double t = std::clamp(tau, 0.02, 0.93);
      return copula_spec(f, 2.0 * t / (1.0 - t), survival);
    }
    case Family::gumbel: {
      const double t = std::clamp(tau, 0.01, 0.93);
      return copula_spec(f, 1.0 / (1.0 - t), survival);
    }
    case Family::frank: {
      const double t = std::clamp(tau, -0.95, 0.95);
      if (std::abs(t) < 0.01) return copula_spec(f, 0.1, survival);
      auto gap = [&](double a) {
        return kendall_tau(copula_spec(Family::frank, a)) - std::abs(t);
      };
      double a = brent_root(gap, 1e-3, 90.0, 1e-9);
      return copula_spec(f, t < 0.0 ? -a : a, survival);
    }
    case Family::gaussian:
      return copula_spec(
          f, std::clamp(std::sin(1.5707963267948966 * tau), -0.99, 0.99),
          survival);
    case Family::efgm:
      return copula_spec(f, std::clamp(4.5 * tau, -0.99, 0.99), survival);
    case Family::student_t:
      return student_t_spec(
          std::clamp(std::sin(1.5707963267948966 * tau), -0.99, 0.99), 5.0,
          survival);
  }
  throw domain_error("mom_spec: unknown family");
}

CopulaSpec neutral_spec(Family f, bool survival, double tau) {
  switch (f) {
    case Family::clayton:
      return copula_spec(f, 1.0, survival);
    case Family::gumbel:
      return copula_spec(f, 1.5, survival);
    case Family::frank:
      return copula_spec(f, tau < 0.0 ? -2.0 : 2.0, survival);
    case Family::gaussian:
      return copula_spec(f, tau < 0.0 ? -0.3 : 0.3, survival);
    case Family::efgm:
      return copula_spec(f, tau < 0.0 ? -0.3 : 0.3, survival);
    case Family::student_t:
      return student_t_spec(tau < 0.0 ? -0.3 : 0.3, 8.0, survival);
  }
  throw domain_error("neutral_spec: unknown family");
}

// --------------------------------------------------- copula-only objective

double copula_objective(const Eigen::VectorXd& u, Family f, bool survival,
                        const Eigen::VectorXd& v, Eigen::VectorXd* grad) {
  const int n = int(u.size());
  CopulaSpec spec;
  try {
    spec = fit_spec(f, survival, v);
    validate(spec);
  } catch (const std::exception&) {
    return -kInf;
  }
  double acc = 0.0;
  Eigen::VectorXd gt = Eigen::VectorXd::Zero(spec.theta.size());
  try {
    for (int t = 1; t < n; ++t) {
      if (grad) {
        const ScoreGrad sg = log_density_grad(spec, u[t - 1], u[t]);
        acc += sg.log_c;
        gt += sg.d_alpha;
      } else {
        acc += log_density(spec, u[t - 1], u[t]);
      }
    }
  } catch (const std::exception&) {
    return -kInf;
  }
  if (!std::isfinite(acc)) return -kInf;
  if (grad) {
    *grad = (gt / double(n)).cwiseProduct(fit_jacobian(spec));
    if (!grad->allFinite()) return -kInf;
  }
  return acc / double(n);
}

struct StartSet {
  std::vector<Eigen::VectorXd> points;
};

StartSet copula_starts(Family f, bool survival, double tau) {
  StartSet s;
  const Eigen::VectorXd warm = fit_v(mom_spec(f, survival, tau));
  s.points.push_back(warm);
  Eigen::VectorXd perturbed = warm * 1.25;
  perturbed.array() += 0.15;
  s.points.push_back(perturbed);
  s.points.push_back(fit_v(neutral_spec(f, survival, tau)));
  return s;
}

OptResult best_of(const GradFn& fn, const StartSet& starts,
                  const char* what) {
  OptResult best;
  bool any = false;
  for (const Eigen::VectorXd& x0 : starts.points) {
    const OptResult r = maximize_bfgs(fn, x0);
    if (r.converged && (!any || r.value > best.value)) {
      best = r;
      any = true;
    }
  }
  if (!any)
    throw convergence_error(std::string(what) + ": no start converged");
  return best;
}

FitResult copula_only_fit(const Eigen::VectorXd& u, Family f, bool survival,
                          FitMethod method, const char* what) {
  GradFn fn = [&](const Eigen::VectorXd& v, Eigen::VectorXd* g) {
    return copula_objective(u, f, survival, v, g);
  };
  const OptResult r = best_of(fn, copula_starts(f, survival, lag_tau(u)), what);
  FitResult fit;
  fit.method = method;
  fit.copula_hat = fit_spec(f, survival, r.x);
  fit.loglik = r.value;
  fit.converged = r.converged;
  fit.iterations = r.iterations;
  fit.gradient_norm = r.grad_norm;
  return fit;
}

// -------------------------------------------------------------- sieve sweep

/// Joint sieve machinery: basis values cached at the data points and at a
/// composite GL-8 sweep over the gaps of the sorted mapped data, so each
/// objective pass costs one matrix-vector product plus the copula scores.
struct SieveEngine {
  Family fam;
  bool survival;
  int n = 0, K = 0;
  SieveBasis basis;
  Reference ref;
  Eigen::VectorXd log_ref;           // log ref_pdf(y_t)
  Eigen::MatrixXd B;                 // n x K basis at s_t
  std::vector<int> pos;              // data index -> sorted slot
  int slots = 0;
  Eigen::MatrixXd A;                 // sweep-node x K basis values
  Eigen::VectorXd wq;                // sweep-node weights
  std::vector<int> node_end;         // slot -> one-past node index

  SieveEngine(const Eigen::VectorXd& y, Family family, bool surv,
              SieveBasis b, Reference r, int k)
      : fam(family), survival(surv), n(int(y.size())), K(k), basis(b), ref(r) {
    Eigen::VectorXd s(n);
    log_ref.resize(n);
    for (int t = 0; t < n; ++t) {
      s[t] = reference_cdf(ref, y[t]);
      log_ref[t] = reference_log_pdf(ref, y[t]);
    }
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a2, int b2) { return s[a2] < s[b2]; });
    std::vector<double> ss;
    pos.assign(n, 0);
    for (int i = 0; i < n; ++i) {
      const double v = s[order[i]];
      if (ss.empty() || v > ss.back()) ss.push_back(v);
      pos[order[i]] = int(ss.size()) - 1;
    }
    slots = int(ss.size());
    B.resize(n, K);
    for (int t = 0; t < n; ++t)
      B.row(t) = sieve_basis_all(basis, K, s[t]).transpose();

    const QuadratureRule& gl = gauss_legendre_unit(8);
    std::vector<double> edges;
    edges.push_back(0.0);
    edges.insert(edges.end(), ss.begin(), ss.end());
    edges.push_back(1.0);
    const int nseg = int(edges.size()) - 1;
    A.resize(nseg * gl.order, K);
    wq.resize(nseg * gl.order);
    node_end.assign(slots, 0);
    int row = 0;
    for (int i = 0; i < nseg; ++i) {
      const double a2 = edges[i], w = edges[i + 1] - edges[i];
      for (int j = 0; j < gl.order; ++j, ++row) {
        const double x = a2 + w * gl.nodes[j];
        A.row(row) = sieve_basis_all(basis, K, x).transpose();
        wq[row] = w * gl.weights[j];
      }
      if (i < slots) node_end[i] = row;
    }
    A.conservativeResize(row, K);
    wq.conservativeResize(row);
  }

  /// v = [copula params (unconstrained); sieve coefficients]
  double eval(const Eigen::VectorXd& v, Eigen::VectorXd* grad,
              const CopulaSpec* fixed_copula = nullptr) const {
    const int dc = fixed_copula ? 0 : param_dim(fam);
    CopulaSpec spec;
    try {
      spec = fixed_copula ? *fixed_copula
                          : fit_spec(fam, survival, v.head(dc));
      validate(spec);
    } catch (const std::exception&) {
      return -kInf;
    }
    const Eigen::VectorXd a = v.tail(K);
    if (a.lpNorm<Eigen::Infinity>() > 40.0) return -kInf;

    const Eigen::VectorXd qn = A * a;
    const Eigen::VectorXd qd = B * a;
    const double mx = qn.maxCoeff();
    const Eigen::VectorXd w = wq.array() * (qn.array() - mx).exp();
    Eigen::VectorXd cumF(slots);
    {
      double run = 0.0;
      int row = 0;
      for (int i = 0; i < slots; ++i) {
        for (; row < node_end[i]; ++row) run += w[row];
        cumF[i] = run;
      }
    }
    const double Ztot = w.sum();
    if (!(Ztot > 0.0) || !std::isfinite(Ztot)) return -kInf;
    const double logZ = mx + std::log(Ztot);

    Eigen::MatrixXd cumN;
    Eigen::VectorXd mbar;
    if (grad) {
      cumN.resize(slots, K);
      const Eigen::MatrixXd Aw = A.array().colwise() * w.array();
      Eigen::VectorXd run = Eigen::VectorXd::Zero(K);
      int row = 0;
      for (int i = 0; i < slots; ++i) {
        for (; row < node_end[i]; ++row) run += Aw.row(row).transpose();
        cumN.row(i) = run.transpose();
      }
      Eigen::VectorXd total = run;
      for (; row < A.rows(); ++row) total += Aw.row(row).transpose();
      mbar = total / Ztot;
      cumN /= Ztot;
    }

    double acc = 0.0;
    for (int t = 0; t < n; ++t) acc += log_ref[t] + qd[t] - logZ;

    Eigen::VectorXd uvals(n);
    for (int t = 0; t < n; ++t) uvals[t] = clamp_u(cumF[pos[t]] / Ztot);

    Eigen::VectorXd gc = Eigen::VectorXd::Zero(spec.theta.size());
    Eigen::VectorXd ga = Eigen::VectorXd::Zero(K);
    if (grad) {
      for (int t = 0; t < n; ++t)
        ga += (B.row(t).transpose() - mbar);
    }
    try {
      for (int t = 1; t < n; ++t) {
        if (grad) {
          const ScoreGrad sg = log_density_grad(spec, uvals[t - 1], uvals[t]);
          acc += sg.log_c;
          gc += sg.d_alpha;
          const auto dU = [&](int i) {
            return (cumN.row(pos[i]).transpose() -
                    (cumF[pos[i]] / Ztot) * mbar)
                .eval();
          };
          ga += sg.d_u1 * dU(t - 1) + sg.d_u2 * dU(t);
        } else {
          acc += log_density(spec, uvals[t - 1], uvals[t]);
        }
      }
    } catch (const std::exception&) {
      return -kInf;
    }
    if (!std::isfinite(acc)) return -kInf;
    if (grad) {
      grad->resize(dc + K);
      if (dc > 0)
        grad->head(dc) =
            (gc / double(n)).cwiseProduct(fit_jacobian(spec));
      grad->tail(K) = ga / double(n);
      if (!grad->allFinite()) return -kInf;
    }
    return acc / double(n);
  }
};

SieveDensity make_sieve(const SieveEngine& eng, const Eigen::VectorXd& coeffs,
                        int quad_order) {
  return sieve_density(eng.basis, eng.K, coeffs, eng.ref,
                       SieveForm::log_density, quad_order);
}

void require_finite(const Eigen::VectorXd& y, const char* what) {
  if (!y.allFinite())
    throw domain_error(std::string(what) + ": non-finite observation");
}

}  // namespace

// ---------------------------------------------------------------- empirical

EmpiricalCDF empirical_cdf(const Eigen::VectorXd& sample) {
  EmpiricalCDF e;
  e.sorted = sample;
  std::sort(e.sorted.data(), e.sorted.data() + e.sorted.size());
  return e;
}

double empirical_cdf_eval(const EmpiricalCDF& ecdf, double y) {
  const double* b = ecdf.sorted.data();
  const double* e = b + ecdf.sorted.size();
  return double(std::upper_bound(b, e, y) - b) /
         double(ecdf.sorted.size() + 1);
}

double empirical_quantile(const EmpiricalCDF& ecdf, double p) {
  const int n = int(ecdf.sorted.size());
  if (n == 0) throw domain_error("empirical_quantile: empty sample");
  if (!(p > 0.0 && p < 1.0))
    throw domain_error("empirical_quantile: p must lie in (0, 1)");
  const double r = p * double(n + 1);
  if (r <= 1.0) return ecdf.sorted[0];
  if (r >= double(n)) return ecdf.sorted[n - 1];
  const int i = int(std::floor(r));
  const double w = r - double(i);
  return (1.0 - w) * ecdf.sorted[i - 1] + w * ecdf.sorted[i];
}

Eigen::VectorXd pseudo_observations(const Eigen::VectorXd& sample) {
  const int n = int(sample.size());
  std::vector<double> xs(sample.data(), sample.data() + n);
  const std::vector<double> r = average_ranks(xs);
  Eigen::VectorXd u(n);
  for (int i = 0; i < n; ++i) u[i] = r[i] / double(n + 1);
  return u;
}

// ------------------------------------------------------------------- names

std::string fit_method_name(FitMethod m) {
  switch (m) {
    case FitMethod::sieve: return "sieve";
    case FitMethod::two_step: return "two-step";
    case FitMethod::ideal: return "ideal";
    case FitMethod::parametric: return "parametric";
  }
  throw domain_error("fit_method_name: unknown method");
}

FitMethod fit_method_from_name(const std::string& name) {
  if (name == "sieve") return FitMethod::sieve;
  if (name == "two-step" || name == "two_step") return FitMethod::two_step;
  if (name == "ideal") return FitMethod::ideal;
  if (name == "parametric") return FitMethod::parametric;
  throw domain_error("fit_method_from_name: unknown method '" + name + "'");
}

// -------------------------------------------------------------- likelihood

double copula_loglik(const Eigen::VectorXd& u, const CopulaSpec& spec) {
  validate(spec);
  const int n = int(u.size());
  if (n < 2) throw domain_error("copula_loglik: need at least 2 points");
  double acc = 0.0;
  for (int t = 1; t < n; ++t) {
    if (!(u[t - 1] > 0.0 && u[t - 1] < 1.0 && u[t] > 0.0 && u[t] < 1.0))
      throw domain_error("copula_loglik: u outside (0,1) at t = " +
                         std::to_string(t + 1));
    acc += log_density(spec, u[t - 1], u[t]);
  }
  return acc / double(n);
}

namespace {

template <class LogPdf, class Cdf>
double joint_loglik_impl(const Eigen::VectorXd& y, const CopulaSpec& spec,
                         const LogPdf& lp, const Cdf& cdf) {
  validate(spec);
  const int n = int(y.size());
  if (n < 2) throw domain_error("joint_loglik: need at least 2 points");
  double acc = 0.0;
  double u_prev = 0.0;
  for (int t = 0; t < n; ++t) {
    const double lg = lp(y[t]);
    if (!std::isfinite(lg))
      throw error("joint_loglik: non-finite marginal term at t = " +
                  std::to_string(t + 1));
    acc += lg;
    const double u = cdf(y[t]);
    if (t > 0) {
      double lc;
      try {
        lc = log_density(spec, u_prev, u);
      } catch (const std::exception&) {
        lc = std::numeric_limits<double>::quiet_NaN();
      }
      if (!std::isfinite(lc))
        throw error("joint_loglik: non-finite copula term at t = " +
                    std::to_string(t + 1));
      acc += lc;
    }
    u_prev = u;
  }
  return acc / double(n);
}

}  // namespace

double joint_loglik(const Eigen::VectorXd& y, const CopulaSpec& spec,
                    const SieveDensity& g) {
  return joint_loglik_impl(
      y, spec, [&](double yy) { return sieve_log_pdf(g, yy); },
      [&](double yy) { return sieve_cdf(g, yy); });
}

double joint_loglik(const Eigen::VectorXd& y, const CopulaSpec& spec,
                    const ParametricMarginal& g) {
  validate(g);
  return joint_loglik_impl(
      y, spec, [&](double yy) { return parametric_log_pdf(g, yy); },
      [&](double yy) { return parametric_cdf(g, yy); });
}

// -------------------------------------------------------------- estimators

FitResult two_step(const Eigen::VectorXd& y, Family family, bool survival) {
  require_finite(y, "two-step");
  if (y.size() < 10) throw domain_error("two-step: need n >= 10");
  const Eigen::VectorXd u = pseudo_observations(y);
  FitResult fit = copula_only_fit(u, family, survival, FitMethod::two_step,
                                  "two-step");
  fit.marginal_kind = MarginalKind::empirical;
  fit.ecdf_hat = empirical_cdf(y);
  return fit;
}

FitResult ideal_mle(const Eigen::VectorXd& u, Family family, bool survival) {
  require_finite(u, "ideal");
  if (u.size() < 10) throw domain_error("ideal: need n >= 10");
  if (u.minCoeff() <= 0.0 || u.maxCoeff() >= 1.0)
    throw domain_error("ideal: latent uniforms must lie in (0,1)");
  FitResult fit =
      copula_only_fit(u, family, survival, FitMethod::ideal, "ideal");
  fit.marginal_kind = MarginalKind::known;
  return fit;
}

namespace {

ParametricMarginal marg_from_v(MarginalFamily mf, const Eigen::VectorXd& vm) {
  switch (mf) {
    case MarginalFamily::student_t:
      return student_t_marginal(std::exp(vm[0]));
    case MarginalFamily::normal:
      return normal_marginal(vm[0], std::exp(vm[1]));
    case MarginalFamily::extreme_value:
      return extreme_value_marginal(vm[0], std::exp(vm[1]));
  }
  throw domain_error("marg_from_v: unknown family");
}

Eigen::VectorXd marg_start(MarginalFamily mf, const Eigen::VectorXd& y) {
  const double mean = y.mean();
  const double sd = std::sqrt(
      (y.array() - mean).square().sum() / double(y.size() - 1));
  Eigen::VectorXd v(marginal_param_dim(mf));
  switch (mf) {
    case MarginalFamily::student_t:
      v[0] = std::log(5.0);
      break;
    case MarginalFamily::normal:
      v[0] = mean;
      v[1] = std::log(sd);
      break;
    case MarginalFamily::extreme_value: {
      const double scale = sd * std::sqrt(6.0) / 3.14159265358979323846;
      v[0] = mean - 0.5772156649015329 * scale;
      v[1] = std::log(scale);
      break;
    }
  }
  return v;
}

double parametric_objective(const Eigen::VectorXd& y, Family f, bool survival,
                            MarginalFamily mf, const Eigen::VectorXd& v,
                            Eigen::VectorXd* grad) {
  const int dc = param_dim(f);
  const int dm = marginal_param_dim(mf);
  const int n = int(y.size());
  CopulaSpec spec;
  ParametricMarginal marg;
  try {
    spec = fit_spec(f, survival, v.head(dc));
    validate(spec);
    marg = marg_from_v(mf, v.tail(dm));
    validate(marg);
  } catch (const std::exception&) {
    return -kInf;
  }
  Eigen::VectorXd u(n);
  double acc = 0.0;
  for (int t = 0; t < n; ++t) {
    const PdfCdf pc = parametric_eval(marg, y[t]);
    if (!(pc.pdf > 0.0) || !std::isfinite(pc.pdf)) return -kInf;
    acc += std::log(pc.pdf);
    u[t] = clamp_u(pc.cdf);
  }
  Eigen::VectorXd gc = Eigen::VectorXd::Zero(dc);
  try {
    for (int t = 1; t < n; ++t) {
      if (grad) {
        const ScoreGrad sg = log_density_grad(spec, u[t - 1], u[t]);
        acc += sg.log_c;
        gc += sg.d_alpha;
      } else {
        acc += log_density(spec, u[t - 1], u[t]);
      }
    }
  } catch (const std::exception&) {
    return -kInf;
  }
  if (!std::isfinite(acc)) return -kInf;
  if (grad) {
    grad->resize(dc + dm);
    grad->head(dc) = (gc / double(n)).cwiseProduct(fit_jacobian(spec));
    // marginal block by central differences of the full objective
    for (int j = 0; j < dm; ++j) {
      const double h = 1e-6 * (1.0 + std::abs(v[dc + j]));
      Eigen::VectorXd vp = v, vmn = v;
      vp[dc + j] += h;
      vmn[dc + j] -= h;
      const double fp = parametric_objective(y, f, survival, mf, vp, nullptr);
      const double fm = parametric_objective(y, f, survival, mf, vmn, nullptr);
      if (!std::isfinite(fp) || !std::isfinite(fm)) return -kInf;
      (*grad)[dc + j] = (fp - fm) / (2.0 * h);
    }
    if (!grad->allFinite()) return -kInf;
  }
  return acc / double(n);
}

}  // namespace

FitResult parametric_mle(const Eigen::VectorXd& y, Family family,
                         MarginalFamily marginal_family, bool survival) {
  require_finite(y, "parametric");
  if (y.size() < 10) throw domain_error("parametric: need n >= 10");
  const int dc = param_dim(family);
  const int dm = marginal_param_dim(marginal_family);
  const Eigen::VectorXd vm0 = marg_start(marginal_family, y);
  const double tau = lag_tau(pseudo_observations(y));

  std::vector<Eigen::VectorXd> starts;
  Eigen::VectorXd s0(dc + dm);
  s0 << fit_v(mom_spec(family, survival, tau)), vm0;
  starts.push_back(s0);
  Eigen::VectorXd s1 = s0;
  s1.head(dc) = s0.head(dc) * 1.25;
  s1.head(dc).array() += 0.15;
  s1.tail(dm).array() += 0.1;
  starts.push_back(s1);
  Eigen::VectorXd s2(dc + dm);
  s2 << fit_v(two_step(y, family, survival).copula_hat), vm0;
  starts.push_back(s2);

  GradFn fn = [&](const Eigen::VectorXd& v, Eigen::VectorXd* g) {
    return parametric_objective(y, family, survival, marginal_family, v, g);
  };
  OptResult best;
  bool any = false;
  for (const Eigen::VectorXd& x0 : starts) {
    const OptResult r = maximize_bfgs(fn, x0);
    if (r.converged && (!any || r.value > best.value)) {
      best = r;
      any = true;
    }
  }
  if (!any) throw convergence_error("parametric: no start converged");

  FitResult fit;
  fit.method = FitMethod::parametric;
  fit.copula_hat = fit_spec(family, survival, best.x.head(dc));
  fit.marginal_kind = MarginalKind::parametric;
  fit.parametric_hat = marg_from_v(marginal_family, best.x.tail(dm));
  fit.loglik = best.value;
  fit.converged = best.converged;
  fit.iterations = best.iterations;
  fit.gradient_norm = best.grad_norm;
  return fit;
}

FitResult parametric_mle_fixed(const Eigen::VectorXd& y, Family family,
                               const ParametricMarginal& known,
                               bool survival) {
  require_finite(y, "parametric");
  if (y.size() < 10) throw domain_error("parametric: need n >= 10");
  validate(known);
  const int n = int(y.size());
  Eigen::VectorXd u(n);
  double marg_term = 0.0;
  for (int t = 0; t < n; ++t) {
    marg_term += parametric_log_pdf(known, y[t]);
    u[t] = clamp_u(parametric_cdf(known, y[t]));
  }
  marg_term /= double(n);
  GradFn fn = [&](const Eigen::VectorXd& v, Eigen::VectorXd* g) {
    const double val = copula_objective(u, family, survival, v, g);
    return std::isfinite(val) ? val + marg_term : val;
  };
  const OptResult best =
      best_of(fn, copula_starts(family, survival, lag_tau(u)), "parametric");
  FitResult fit;
  fit.method = FitMethod::parametric;
  fit.copula_hat = fit_spec(family, survival, best.x);
  fit.marginal_kind = MarginalKind::parametric;
  fit.parametric_hat = known;
  fit.loglik = best.value;
  fit.converged = best.converged;
  fit.iterations = best.iterations;
  fit.gradient_norm = best.grad_norm;
  return fit;
}

FitResult sieve_mle(const Eigen::VectorXd& y, Family family,
                    const SieveConfig& cfg, bool survival) {
  require_finite(y, "sieve");
  const int n = int(y.size());
  if (n < 50) throw domain_error("sieve: need n >= 50");
  if (cfg.K_grid.empty()) throw domain_error("sieve: empty K grid");
  std::vector<int> grid = cfg.K_grid;
  std::sort(grid.begin(), grid.end());

  const FitResult ts = two_step(y, family, survival);
  const Eigen::VectorXd vc_warm = fit_v(ts.copula_hat);
  const int dc = param_dim(family);

  struct PerK {
    OptResult opt;
    bool ok = false;
  };
  std::vector<PerK> results(grid.size());
  std::vector<SieveKDiag> diags;
  Eigen::VectorXd prev_x;
  int prev_K = 0;

  for (std::size_t i = 0; i < grid.size(); ++i) {
    const int K = grid[i];
    const SieveEngine eng(y, family, survival, cfg.basis, cfg.reference, K);
    GradFn fn = [&](const Eigen::VectorXd& v, Eigen::VectorXd* g) {
      return eng.eval(v, g);
    };
    std::vector<Eigen::VectorXd> starts;
    if (prev_x.size() > 0) {
      Eigen::VectorXd chained = Eigen::VectorXd::Zero(dc + K);
      chained.head(dc) = prev_x.head(dc);
      chained.segment(dc, std::min(prev_K, K)) =
          prev_x.segment(dc, std::min(prev_K, K));
      starts.push_back(chained);
    }
    {
      Eigen::VectorXd cold(dc + K);
      cold << vc_warm,
          sieve_fit_iid(y, cfg.basis, K, cfg.reference, cfg.quad_order).coeffs;
      starts.push_back(cold);
      Eigen::VectorXd pert = cold;
      pert.head(dc) = vc_warm * 1.25;
      pert.head(dc).array() += 0.15;
      starts.push_back(pert);
    }
    PerK& pk = results[i];
    for (const Eigen::VectorXd& x0 : starts) {
      const OptResult r = maximize_bfgs(fn, x0);
      if (r.converged && (!pk.ok || r.value > pk.opt.value)) {
        pk.opt = r;
        pk.ok = true;
      }
      if (pk.ok && &x0 == &starts.front()) break;  // chained start sufficed
    }
    SieveKDiag d;
    d.K = K;
    d.converged = pk.ok;
    if (pk.ok) {
      d.loglik = pk.opt.value;
      d.criterion = pk.opt.value - double(K) / double(n - K - 1);
      prev_x = pk.opt.x;
      prev_K = K;
    }
    diags.push_back(d);
  }

  int best = -1;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!results[i].ok) continue;
    if (best < 0 || diags[i].criterion > diags[best].criterion)
      best = int(i);
  }
  if (best < 0) throw convergence_error("sieve: no K converged");

  const int K = grid[best];
  const OptResult& opt = results[best].opt;
  const SieveEngine eng(y, family, survival, cfg.basis, cfg.reference, K);

  FitResult fit;
  fit.method = FitMethod::sieve;
  fit.copula_hat = fit_spec(family, survival, opt.x.head(dc));
  fit.marginal_kind = MarginalKind::sieve;
  fit.sieve_hat = make_sieve(eng, opt.x.tail(K), cfg.quad_order);
  fit.loglik = joint_loglik(y, fit.copula_hat, fit.sieve_hat);
  fit.K_selected = K;
  fit.k_diagnostics = diags;
  fit.converged = true;
  fit.iterations = opt.iterations;
  fit.gradient_norm = opt.grad_norm;
  return fit;
}

FitResult sieve_profile(const Eigen::VectorXd& y, const CopulaSpec& fixed,
                        const SieveDensity& warm) {
  require_finite(y, "sieve");
  validate(fixed);
  if (warm.K < 1) throw domain_error("sieve profile: empty basis");
  const SieveEngine eng(y, fixed.family, fixed.survival, warm.basis,
                        warm.reference, warm.K);
  GradFn fn = [&](const Eigen::VectorXd& a, Eigen::VectorXd* g) {
    return eng.eval(a, g, &fixed);
  };
  OptResult r = maximize_bfgs(fn, warm.coeffs);
  if (!r.converged) {
    const OptResult retry = maximize_bfgs(
        fn, sieve_fit_iid(y, warm.basis, warm.K, warm.reference,
                          warm.quad_order)
                .coeffs);
    if (retry.converged || retry.value > r.value) r = retry;
  }
  if (!r.converged)
    throw convergence_error("sieve profile: coefficient refit did not "
                            "converge");
  FitResult fit;
  fit.method = FitMethod::sieve;
  fit.copula_hat = fixed;
  fit.marginal_kind = MarginalKind::sieve;
  fit.sieve_hat = make_sieve(eng, r.x, warm.quad_order);
  fit.loglik = joint_loglik(y, fixed, fit.sieve_hat);
  fit.K_selected = warm.K;
  fit.converged = r.converged;
  fit.iterations = r.iterations;
  fit.gradient_norm = r.grad_norm;
  return fit;
}

}  // namespace ckm
