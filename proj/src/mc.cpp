#include "ckm/mc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <thread>

#include "json.hpp"

#include "ckm/inference.hpp"

namespace ckm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double clamp01(double u) {
  return std::clamp(u, 1e-12, 1.0 - 1e-12);
}

int worker_count(int reps) {
  int w = int(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CKM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) w = int(std::min(v, 256L));
  }
  return std::clamp(w, 1, std::max(1, reps));
}

/// Run work(0..reps-1) on a pool; slot-indexed writes keep the result
/// independent of the worker count.
void parallel_reps(int reps, const std::function<void(int)>& work) {
  const int workers = worker_count(reps);
  if (workers == 1) {
    for (int r = 0; r < reps; ++r) work(r);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex err_mutex;
  auto loop = [&] {
    for (;;) {
      const int r = next.fetch_add(1);
      if (r >= reps) return;
      try {
        work(r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int i = 0; i < workers; ++i) pool.emplace_back(loop);
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

FitResult fit_one(Estimator e, const SeriesSample& s, const MCConfig& cfg) {
  const Family fam = cfg.copula.family;
  const bool surv = cfg.copula.survival;
  switch (e) {
    case Estimator::sieve:
      return sieve_mle(s.values, fam, cfg.sieve, surv);
    case Estimator::ideal:
      return ideal_mle(*s.u_values, fam, surv);
    case Estimator::two_step:
      return two_step(s.values, fam, surv);
    case Estimator::parametric:
      return parametric_mle(s.values, fam, cfg.marginal.family, surv);
    case Estimator::mis_normal:
      return parametric_mle(s.values, fam, MarginalFamily::normal, surv);
    case Estimator::mis_ev:
      return parametric_mle(s.values, fam, MarginalFamily::extreme_value,
                            surv);
  }
  throw domain_error("mc: unknown estimator tag");
}

double fitted_cdf(const FitResult& fit, const MCConfig& cfg, double y) {
  switch (fit.marginal_kind) {
    case MarginalKind::known: return parametric_cdf(cfg.marginal, y);
    case MarginalKind::sieve: return sieve_cdf(fit.sieve_hat, y);
    case MarginalKind::parametric: return parametric_cdf(fit.parametric_hat, y);
    case MarginalKind::empirical: return empirical_cdf_eval(fit.ecdf_hat, y);
  }
  throw domain_error("mc: unknown marginal kind");
}

/// Mapped-domain CDF table of a log-form sieve density: trapezoid cumulative
/// of exp(q(s) - log_Z) on a uniform s grid, rescaled to end at exactly 1.
struct SieveTable {
  const SieveDensity* d;
  std::vector<double> cum;

  explicit SieveTable(const SieveDensity& density, int panels = 4096)
      : d(&density), cum(panels + 1) {
    std::vector<double> h(panels + 1);
    for (int j = 0; j <= panels; ++j) {
      const double s = double(j) / panels;
      const double q = d->coeffs.dot(sieve_basis_all(d->basis, d->K, s));
      h[j] = std::exp(q - d->log_Z);
    }
    cum[0] = 0.0;
    for (int j = 1; j <= panels; ++j)
      cum[j] = cum[j - 1] + 0.5 * (h[j - 1] + h[j]) / panels;
    const double total = cum[panels];
    for (double& c : cum) c /= total;
  }

  double cdf_s(double s) const {
    const int m = int(cum.size()) - 1;
    const double x = std::clamp(s, 0.0, 1.0) * m;
    const int j = std::min(int(x), m - 1);
    const double w = x - j;
    return (1.0 - w) * cum[j] + w * cum[j + 1];
  }

  double quantile_s(double p) const {
    const int m = int(cum.size()) - 1;
    const auto it = std::lower_bound(cum.begin(), cum.end(), p);
    int j = std::clamp(int(it - cum.begin()) - 1, 0, m - 1);
    const double lo = cum[j], hi = cum[j + 1];
    const double w = hi > lo ? (p - lo) / (hi - lo) : 0.0;
    return (j + w) / m;
  }

  double cdf(double y) const { return cdf_s(reference_cdf(d->reference, y)); }
  double quantile(double p) const {
    return reference_quantile(d->reference, quantile_s(clamp01(p)));
  }
};

Eigen::VectorXd cond_quantile_curve(const FitResult& fit, const MCConfig& cfg,
                                    double q, const Eigen::VectorXd& grid) {
  const int m = int(grid.size());
  Eigen::VectorXd out(m);
  if (fit.marginal_kind == MarginalKind::known) {
    for (int i = 0; i < m; ++i) {
      const double u = clamp01(parametric_cdf(cfg.marginal, grid[i]));
      const double w = conditional_quantile(fit.copula_hat, q, u);
      out[i] = parametric_quantile(cfg.marginal, clamp01(w));
    }
    return out;
  }
  if (fit.marginal_kind == MarginalKind::sieve &&
      fit.sieve_hat.form == SieveForm::log_density) {
    const SieveTable table(fit.sieve_hat);
    for (int i = 0; i < m; ++i) {
      const double u = clamp01(table.cdf(grid[i]));
      const double w = conditional_quantile(fit.copula_hat, q, u);
      out[i] = table.quantile(w);
    }
    return out;
  }
  for (int i = 0; i < m; ++i)
    out[i] = conditional_quantile_hat(fit, q, grid[i]);
  return out;
}

double percentile(std::vector<double> vals, double p) {
  std::sort(vals.begin(), vals.end());
  Eigen::VectorXd v = Eigen::Map<Eigen::VectorXd>(vals.data(), vals.size());
  return empirical_quantile(EmpiricalCDF{std::move(v)}, p);
}

SummaryCell summarize(const std::vector<double>& vals, double truth) {
  const int m = int(vals.size());
  SummaryCell c;
  double acc = 0.0;
  for (double v : vals) acc += v;
  c.mean = acc / m;
  double ss = 0.0;
  for (double v : vals) ss += (v - c.mean) * (v - c.mean);
  const double var = ss / m;
  c.bias = c.mean - truth;
  c.bias2_e3 = c.bias * c.bias * 1e3;
  c.var_e3 = var * 1e3;
  c.mse_e3 = c.bias2_e3 + c.var_e3;
  c.p2_5 = percentile(vals, 0.025);
  c.p97_5 = percentile(vals, 0.975);
  return c;
}

std::vector<double> successes(const std::vector<double>& per_rep) {
  std::vector<double> out;
  out.reserve(per_rep.size());
  for (double v : per_rep)
    if (!std::isnan(v)) out.push_back(v);
  return out;
}

}  // namespace

// ----------------------------------------------------------------- plumbing

std::string estimator_name(Estimator e) {
  switch (e) {
    case Estimator::sieve: return "sieve";
    case Estimator::ideal: return "ideal";
    case Estimator::two_step: return "two_step";
    case Estimator::parametric: return "parametric";
    case Estimator::mis_normal: return "mis_normal";
    case Estimator::mis_ev: return "mis_ev";
  }
  throw domain_error("estimator_name: unknown estimator tag");
}

Estimator estimator_from_name(const std::string& name) {
  if (name == "sieve") return Estimator::sieve;
  if (name == "ideal") return Estimator::ideal;
  if (name == "two_step" || name == "two-step") return Estimator::two_step;
  if (name == "parametric") return Estimator::parametric;
  if (name == "mis_normal" || name == "mis-normal")
    return Estimator::mis_normal;
  if (name == "mis_ev" || name == "mis-ev") return Estimator::mis_ev;
  throw domain_error("estimator_from_name: unknown estimator '" + name + "'");
}

void validate(const MCConfig& cfg) {
  validate(cfg.copula);
  validate(cfg.marginal);
  if (cfg.n < 2) throw domain_error("mc: n must be at least 2");
  if (cfg.reps < 1) throw domain_error("mc: reps must be at least 1");
  if (cfg.burn_in < 0) throw domain_error("mc: burn_in must be nonnegative");
  if (cfg.estimators.empty())
    throw domain_error("mc: estimator list must be nonempty");
  for (double p : cfg.quantile_probs)
    if (!(p > 0.0 && p < 1.0))
      throw domain_error("mc: quantile probabilities must lie in (0, 1)");
  if (cfg.cond_quantile) {
    if (!(cfg.cond_quantile->q > 0.0 && cfg.cond_quantile->q < 1.0))
      throw domain_error("mc: conditional quantile level must lie in (0, 1)");
    const std::vector<double>& g = cfg.cond_quantile->y_grid;
    for (std::size_t i = 1; i < g.size(); ++i)
      if (!(g[i] > g[i - 1]))
        throw domain_error("mc: y_grid must be strictly increasing");
  }
}

// ---------------------------------------------------------------- experiment

double true_conditional_quantile(const CopulaSpec& copula,
                                 const ParametricMarginal& marginal, double q,
                                 double y) {
  if (!(q > 0.0 && q < 1.0))
    throw domain_error("true_conditional_quantile: q must lie in (0, 1)");
  const double u = clamp01(parametric_cdf(marginal, y));
  const double w = conditional_quantile(copula, q, u);
  return parametric_quantile(marginal, clamp01(w));
}

Eigen::VectorXd common_support_grid(const Eigen::VectorXd& mins,
                                    const Eigen::VectorXd& maxes,
                                    int points) {
  if (mins.size() == 0 || mins.size() != maxes.size())
    throw domain_error("common_support_grid: need matching nonempty ranges");
  if (points < 2) throw domain_error("common_support_grid: need >= 2 points");
  const double lo = mins.maxCoeff();
  const double hi = maxes.minCoeff();
  if (!(hi > lo))
    throw error("mc: common support of the replications is empty");
  return Eigen::VectorXd::LinSpaced(points, lo, hi);
}

CondQuantCell integrated_quantile_metrics(
    const Eigen::VectorXd& y_grid, const std::vector<Eigen::VectorXd>& curves,
    const Eigen::VectorXd& truth) {
  const int m = int(y_grid.size());
  if (m < 2) throw domain_error("integrated_quantile_metrics: short grid");
  if (truth.size() != m)
    throw domain_error("integrated_quantile_metrics: truth/grid mismatch");
  if (curves.empty())
    throw domain_error("integrated_quantile_metrics: no curves");
  for (const Eigen::VectorXd& c : curves)
    if (c.size() != m)
      throw domain_error("integrated_quantile_metrics: curve/grid mismatch");

  const int R = int(curves.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(m);
  for (const Eigen::VectorXd& c : curves) mean += c;
  mean /= R;
  Eigen::VectorXd var = Eigen::VectorXd::Zero(m);
  for (const Eigen::VectorXd& c : curves)
    var += (c - mean).cwiseProduct(c - mean);
  var /= R;
  const Eigen::VectorXd bias2 = (mean - truth).cwiseProduct(mean - truth);

  auto trapz = [&](const Eigen::VectorXd& f) {
    double acc = 0.0;
    for (int i = 1; i < m; ++i)
      acc += 0.5 * (f[i] + f[i - 1]) * (y_grid[i] - y_grid[i - 1]);
    return acc;
  };
  CondQuantCell cell;
  cell.int_bias2_e3 = trapz(bias2) * 1e3;
  cell.int_var_e3 = trapz(var) * 1e3;
  cell.int_mse_e3 = cell.int_bias2_e3 + cell.int_var_e3;
  return cell;
}

MCReport run_experiment(const MCConfig& cfg) {
  validate(cfg);
  const int reps = cfg.reps;
  const int ne = int(cfg.estimators.size());
  const int np = int(cfg.quantile_probs.size());

  std::vector<double> yq(np);
  for (int p = 0; p < np; ++p)
    yq[p] = parametric_quantile(cfg.marginal, cfg.quantile_probs[p]);

  const bool want_cq = cfg.cond_quantile.has_value();

  // phase 1: simulate and fit, one slot per replication
  std::vector<std::vector<double>> alpha(ne, std::vector<double>(reps, kNaN));
  std::vector<std::vector<std::vector<double>>> gcell(
      ne, std::vector<std::vector<double>>(np, std::vector<double>(reps, kNaN)));
  std::vector<std::vector<std::optional<FitResult>>> fits;
  if (want_cq)
    fits.assign(ne, std::vector<std::optional<FitResult>>(reps));
  Eigen::VectorXd smin(reps), smax(reps);

  parallel_reps(reps, [&](int r) {
    SimConfig sim;
    sim.copula = cfg.copula;
    sim.marginal = cfg.marginal;
    sim.n = cfg.n;
    sim.burn_in = cfg.burn_in;
    sim.seed = cfg.base_seed;
    sim.stream_id = std::uint64_t(r);
    const SeriesSample s = simulate_chain(sim);
    smin[r] = s.values.minCoeff();
    smax[r] = s.values.maxCoeff();
    for (int e = 0; e < ne; ++e) {
      try {
        FitResult fit = fit_one(cfg.estimators[e], s, cfg);
        alpha[e][r] = fit.copula_hat.theta[0];
        for (int p = 0; p < np; ++p)
          gcell[e][p][r] = fitted_cdf(fit, cfg, yq[p]);
        if (want_cq) fits[e][r] = std::move(fit);
      } catch (const error&) {
        // dropped and counted below
      }
    }
  });

  MCReport report;
  report.config = cfg;
  report.alpha_true = cfg.copula.theta[0];

  // conditional-quantile grid and truth
  Eigen::VectorXd grid;
  if (want_cq) {
    if (!cfg.cond_quantile->y_grid.empty()) {
      const std::vector<double>& g = cfg.cond_quantile->y_grid;
      grid = Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
    } else {
      grid = common_support_grid(smin, smax);
    }
    report.y_grid.assign(grid.data(), grid.data() + grid.size());
    report.cond_quantile_truth.resize(grid.size());
    for (int i = 0; i < grid.size(); ++i)
      report.cond_quantile_truth[i] = true_conditional_quantile(
          cfg.copula, cfg.marginal, cfg.cond_quantile->q, grid[i]);
  }

  // phase 2: quantile curves on the common grid
  std::vector<std::vector<std::optional<Eigen::VectorXd>>> curves;
  if (want_cq) {
    curves.assign(ne, std::vector<std::optional<Eigen::VectorXd>>(reps));
    parallel_reps(reps, [&](int r) {
      for (int e = 0; e < ne; ++e) {
        if (!fits[e][r]) continue;
        curves[e][r] = cond_quantile_curve(*fits[e][r], cfg,
                                           cfg.cond_quantile->q, grid);
      }
    });
  }

  for (int e = 0; e < ne; ++e) {
    EstimatorReport er;
    er.estimator = cfg.estimators[e];
    er.estimates = alpha[e];
    const std::vector<double> ok = successes(alpha[e]);
    er.failures = reps - int(ok.size());
    if (er.failures * 5 > reps)
      throw error("mc: estimator " + estimator_name(er.estimator) +
                  " failed in " + std::to_string(er.failures) + " of " +
                  std::to_string(reps) + " replications");
    er.alpha = summarize(ok, report.alpha_true);
    for (int p = 0; p < np; ++p) {
      CdfCell cell;
      cell.prob = cfg.quantile_probs[p];
      cell.true_quantile = yq[p];
      const SummaryCell s = summarize(successes(gcell[e][p]), cell.prob);
      cell.mean = s.mean;
      cell.bias2_e3 = s.bias2_e3;
      cell.var_e3 = s.var_e3;
      cell.mse_e3 = s.mse_e3;
      er.cdf.push_back(cell);
    }
    if (want_cq) {
      std::vector<Eigen::VectorXd> cc;
      cc.reserve(reps);
      for (int r = 0; r < reps; ++r)
        if (curves[e][r]) cc.push_back(std::move(*curves[e][r]));
      const Eigen::VectorXd truth = Eigen::Map<const Eigen::VectorXd>(
          report.cond_quantile_truth.data(), grid.size());
      er.cond_quantile = integrated_quantile_metrics(grid, cc, truth);
    }
    report.estimators.push_back(std::move(er));
  }
  return report;
}

// ----------------------------------------------------------------- equality

namespace {

bool eq_nan(double a, double b) {
  return (std::isnan(a) && std::isnan(b)) || a == b;
}

bool eq(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!eq_nan(a[i], b[i])) return false;
  return true;
}

bool eq(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

bool eq(const SummaryCell& a, const SummaryCell& b) {
  return a.mean == b.mean && a.bias == b.bias && a.bias2_e3 == b.bias2_e3 &&
         a.var_e3 == b.var_e3 && a.mse_e3 == b.mse_e3 && a.p2_5 == b.p2_5 &&
         a.p97_5 == b.p97_5;
}

bool eq(const MCConfig& a, const MCConfig& b) {
  return a.copula.family == b.copula.family && eq(a.copula.theta, b.copula.theta) &&
         a.copula.survival == b.copula.survival &&
         a.marginal.family == b.marginal.family &&
         eq(a.marginal.theta, b.marginal.theta) && a.n == b.n &&
         a.reps == b.reps && a.burn_in == b.burn_in &&
         a.base_seed == b.base_seed && a.estimators == b.estimators &&
         a.quantile_probs == b.quantile_probs &&
         a.cond_quantile.has_value() == b.cond_quantile.has_value() &&
         (!a.cond_quantile ||
          (a.cond_quantile->q == b.cond_quantile->q &&
           a.cond_quantile->y_grid == b.cond_quantile->y_grid)) &&
         a.sieve.basis == b.sieve.basis && a.sieve.K_grid == b.sieve.K_grid &&
         a.sieve.reference == b.sieve.reference &&
         a.sieve.quad_order == b.sieve.quad_order;
}

}  // namespace

bool operator==(const MCReport& a, const MCReport& b) {
  if (!(eq(a.config, b.config) && a.alpha_true == b.alpha_true &&
        a.y_grid == b.y_grid &&
        a.cond_quantile_truth == b.cond_quantile_truth &&
        a.estimators.size() == b.estimators.size()))
    return false;
  for (std::size_t e = 0; e < a.estimators.size(); ++e) {
    const EstimatorReport& x = a.estimators[e];
    const EstimatorReport& y = b.estimators[e];
    if (!(x.estimator == y.estimator && x.failures == y.failures &&
          eq(x.estimates, y.estimates) && eq(x.alpha, y.alpha) &&
          x.cdf.size() == y.cdf.size() &&
          x.cond_quantile.has_value() == y.cond_quantile.has_value()))
      return false;
    for (std::size_t p = 0; p < x.cdf.size(); ++p) {
      const CdfCell& c = x.cdf[p];
      const CdfCell& d = y.cdf[p];
      if (!(c.prob == d.prob && c.true_quantile == d.true_quantile &&
            c.mean == d.mean && c.bias2_e3 == d.bias2_e3 &&
            c.var_e3 == d.var_e3 && c.mse_e3 == d.mse_e3))
        return false;
    }
    if (x.cond_quantile &&
        !(x.cond_quantile->int_bias2_e3 == y.cond_quantile->int_bias2_e3 &&
          x.cond_quantile->int_var_e3 == y.cond_quantile->int_var_e3 &&
          x.cond_quantile->int_mse_e3 == y.cond_quantile->int_mse_e3))
      return false;
  }
  return true;
}

// --------------------------------------------------------------------- json

namespace {

using nlohmann::json;

json to_json(double v) { return std::isnan(v) ? json() : json(v); }

double from_json_double(const json& j) {
  return j.is_null() ? kNaN : j.get<double>();
}

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd json_vec(const json& a) {
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[int(i)] = a[i].get<double>();
  return v;
}

json config_json(const MCConfig& c) {
  json j;
  j["copula"] = {{"family", family_name(c.copula.family)},
                 {"theta", vec_json(c.copula.theta)},
                 {"survival", c.copula.survival}};
  j["marginal"] = {{"family", marginal_family_name(c.marginal.family)},
                   {"theta", vec_json(c.marginal.theta)}};
  j["n"] = c.n;
  j["reps"] = c.reps;
  j["burn_in"] = c.burn_in;
  j["base_seed"] = c.base_seed;
  json est = json::array();
  for (Estimator e : c.estimators) est.push_back(estimator_name(e));
  j["estimators"] = est;
  j["quantile_probs"] = c.quantile_probs;
  if (c.cond_quantile)
    j["cond_quantile"] = {{"q", c.cond_quantile->q},
                          {"y_grid", c.cond_quantile->y_grid}};
  else
    j["cond_quantile"] = nullptr;
  j["sieve"] = {{"basis", basis_name(c.sieve.basis)},
                {"K_grid", c.sieve.K_grid},
                {"reference", reference_name(c.sieve.reference)},
                {"quad_order", c.sieve.quad_order}};
  return j;
}

MCConfig config_from_json(const json& j) {
  MCConfig c;
  c.copula.family = family_from_name(j.at("copula").at("family"));
  c.copula.theta = json_vec(j.at("copula").at("theta"));
  c.copula.survival = j.at("copula").at("survival").get<bool>();
  c.marginal.family = marginal_family_from_name(j.at("marginal").at("family"));
  c.marginal.theta = json_vec(j.at("marginal").at("theta"));
  c.n = j.at("n").get<int>();
  c.reps = j.at("reps").get<int>();
  c.burn_in = j.at("burn_in").get<int>();
  c.base_seed = j.at("base_seed").get<std::uint64_t>();
  c.estimators.clear();
  for (const json& e : j.at("estimators"))
    c.estimators.push_back(estimator_from_name(e.get<std::string>()));
  c.quantile_probs = j.at("quantile_probs").get<std::vector<double>>();
  if (!j.at("cond_quantile").is_null()) {
    CondQuantileConfig cq;
    cq.q = j.at("cond_quantile").at("q").get<double>();
    cq.y_grid = j.at("cond_quantile").at("y_grid").get<std::vector<double>>();
    c.cond_quantile = cq;
  }
  c.sieve.basis = basis_from_name(j.at("sieve").at("basis"));
  c.sieve.K_grid = j.at("sieve").at("K_grid").get<std::vector<int>>();
  c.sieve.reference = reference_from_name(j.at("sieve").at("reference"));
  c.sieve.quad_order = j.at("sieve").at("quad_order").get<int>();
  return c;
}

json summary_json(const SummaryCell& s) {
  return {{"mean", s.mean},     {"bias", s.bias},ateral
          {"bias2_e3", s.bias2_e3}, {"var_e3", s.var_e3},
          {"mse_e3", s.mse_e3}, {"p2_5", s.p2_5},
          {"p97_5", s.p97_5}};
}

}  // namespace

std::string mc_report_to_json(const MCReport& report) {
  json j;
  j["config"] = config_json(report.config);
  j["alpha_true"] = report.alpha_true;
  j["y_grid"] = report.y_grid;
  j["cond_quantile_truth"] = report.cond_quantile_truth;
  json ests = json::array();
  for (const EstimatorReport& er : report.estimators) {
    json e;
    e["name"] = estimator_name(er.estimator);
    e["failures"] = er.failures;
    json vals = json::array();
    for (double v : er.estimates) vals.push_back(to_json(v));
    e["estimates"] = vals;
    e["alpha"] = summary_json(er.alpha);
    json cdf = json::array();
    for (const CdfCell& c : er.cdf)
      cdf.push_back({{"prob", c.prob},
                     {"true_quantile", c.true_quantile},
                     {"mean", c.mean},
                     {"bias2_e3", c.bias2_e3},
                     {"var_e3", c.var_e3},
                     {"mse_e3", c.mse_e3}});
    e["cdf"] = cdf;
    if (er.cond_quantile)
      e["cond_quantile"] = {{"int_bias2_e3", er.cond_quantile->int_bias2_e3},
                            {"int_var_e3", er.cond_quantile->int_var_e3},
                            {"int_mse_e3", er.cond_quantile->int_mse_e3}};
    else
      e["cond_quantile"] = nullptr;
    ests.push_back(e);
  }
  j["estimators"] = ests;
  return j.dump(2) + "\n";
}

MCReport mc_report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& ex) {
    throw io_error(std::string("mc report: malformed JSON: ") + ex.what());
  }
  MCReport r;
  try {
    r.config = config_from_json(j.at("config"));
    r.alpha_true = j.at("alpha_true").get<double>();
    r.y_grid = j.at("y_grid").get<std::vector<double>>();
    r.cond_quantile_truth =
        j.at("cond_quantile_truth").get<std::vector<double>>();
    for (const json& e : j.at("estimators")) {
      EstimatorReport er;
      er.estimator = estimator_from_name(e.at("name").get<std::string>());
      er.failures = e.at("failures").get<int>();
      for (const json& v : e.at("estimates"))
        er.estimates.push_back(from_json_double(v));
      const json& a = e.at("alpha");
      er.alpha = {a.at("mean"),    a.at("bias"),  a.at("bias2_e3"),
                  a.at("var_e3"),  a.at("mse_e3"), a.at("p2_5"),
                  a.at("p97_5")};
      for (const json& c : e.at("cdf"))
        er.cdf.push_back({c.at("prob"), c.at("true_quantile"), c.at("mean"),
                          c.at("bias2_e3"), c.at("var_e3"), c.at("mse_e3")});
      if (!e.at("cond_quantile").is_null()) {
        const json& cq = e.at("cond_quantile");
        er.cond_quantile = CondQuantCell{cq.at("int_bias2_e3"),
                                         cq.at("int_var_e3"),
                                         cq.at("int_mse_e3")};
      }
      r.estimators.push_back(std::move(er));
    }
  } catch (const json::exception& ex) {
    throw io_error(std::string("mc report: missing or mistyped field: ") +
                   ex.what());
  }
  return r;
}

// ---------------------------------------------------------------- csv files

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("mc: cannot open " + path.string() + " for writing");
  out << body;
  if (!out) throw io_error("mc: write failed for " + path.string());
}

}  // namespace

void write_report(const MCReport& report, const std::string& out_dir,
                  bool traces) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw io_error("mc: cannot create directory " + out_dir);

  std::string alpha = "estimator,mean,bias,bias2_e3,var_e3,mse_e3,p2_5,p97_5,"
                      "failures\n";
  for (const EstimatorReport& er : report.estimators) {
    const SummaryCell& s = er.alpha;
    alpha += estimator_name(er.estimator) + "," + fmt(s.mean) + "," +
             fmt(s.bias) + "," + fmt(s.bias2_e3) + "," + fmt(s.var_e3) + "," +
             fmt(s.mse_e3) + "," + fmt(s.p2_5) + "," + fmt(s.p97_5) + "," +
             std::to_string(er.failures) + "\n";
  }
  write_file(fs::path(out_dir) / "alpha_table.csv", alpha);

  std::string cdf = "estimator,prob,true_quantile,mean,bias2_e3,var_e3,"
                    "mse_e3\n";
  for (const EstimatorReport& er : report.estimators)
    for (const CdfCell& c : er.cdf)
      cdf += estimator_name(er.estimator) + "," + fmt(c.prob) + "," +
             fmt(c.true_quantile) + "," + fmt(c.mean) + "," +
             fmt(c.bias2_e3) + "," + fmt(c.var_e3) + "," + fmt(c.mse_e3) +
             "\n";
  write_file(fs::path(out_dir) / "cdf_table.csv", cdf);

  std::string quant = "estimator,int_bias2_e3,int_var_e3,int_mse_e3\n";
  for (const EstimatorReport& er : report.estimators)
    if (er.cond_quantile)
      quant += estimator_name(er.estimator) + "," +
               fmt(er.cond_quantile->int_bias2_e3) + "," +
               fmt(er.cond_quantile->int_var_e3) + "," +
               fmt(er.cond_quantile->int_mse_e3) + "\n";
  write_file(fs::path(out_dir) / "quantile_table.csv", quant);

  write_file(fs::path(out_dir) / "report.json", mc_report_to_json(report));

  if (traces) {
    const fs::path tdir = fs::path(out_dir) / "traces";
    fs::create_directories(tdir, ec);
    if (ec) throw io_error("mc: cannot create directory " + tdir.string());
    for (int r = 0; r < report.config.reps; ++r) {
      SimConfig sim;
      sim.copula = report.config.copula;
      sim.marginal = report.config.marginal;
      sim.n = report.config.n;
      sim.burn_in = report.config.burn_in;
      sim.seed = report.config.base_seed;
      sim.stream_id = std::uint64_t(r);
      const SeriesSample s = simulate_chain(sim, false);
      std::string body = "t,y\n";
      for (int t = 0; t < s.values.size(); ++t)
        body += std::to_string(t + 1) + "," + fmt(s.values[t]) + "\n";
      char name[32];
      std::snprintf(name, sizeof name, "rep%04d.csv", r);
      write_file(tdir / name, body);
    }
  }
}

}  // namespace ckm
