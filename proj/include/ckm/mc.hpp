#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ckm/estimate.hpp"
#include "ckm/simulate.hpp"

namespace ckm {

// ---------------------------------------------------------------- experiment

enum class Estimator { sieve, ideal, two_step, parametric, mis_normal, mis_ev };

std::string estimator_name(Estimator e);
Estimator estimator_from_name(const std::string& name);

/// Conditional-quantile study: level q, evaluation grid over the common
/// support of the replications (empty y_grid = 100 equally spaced points on
/// the intersection of per-replication sample ranges).
struct CondQuantileConfig {
  double q = 0.01;
  std::vector<double> y_grid;
};

struct MCConfig {
  CopulaSpec copula;
  ParametricMarginal marginal;
  int n = 1000;
  int reps = 200;
  int burn_in = 2000;
  std::uint64_t base_seed = 0;
  std::vector<Estimator> estimators = {Estimator::sieve, Estimator::ideal,
                                       Estimator::two_step,
                                       Estimator::parametric};
  std::vector<double> quantile_probs = {1.0 / 3.0, 2.0 / 3.0};
  std::optional<CondQuantileConfig> cond_quantile;
  SieveConfig sieve;
};

void validate(const MCConfig& cfg);

// ------------------------------------------------------------------- report

/// Location summary of one scalar estimate over the successful replications.
/// var is the population variance, so mse_e3 = bias2_e3 + var_e3 exactly.
struct SummaryCell {
  double mean = 0.0;
  double bias = 0.0;
  double bias2_e3 = 0.0;
  double var_e3 = 0.0;
  double mse_e3 = 0.0;
  double p2_5 = 0.0;
  double p97_5 = 0.0;
};

/// Fitted marginal CDF evaluated at the true p-quantile of the data law.
struct CdfCell {
  double prob = 0.0;
  double true_quantile = 0.0;
  double mean = 0.0;
  double bias2_e3 = 0.0;
  double var_e3 = 0.0;
  double mse_e3 = 0.0;
};

struct CondQuantCell {
  double int_bias2_e3 = 0.0;
  double int_var_e3 = 0.0;
  double int_mse_e3 = 0.0;
};

struct EstimatorReport {
  Estimator estimator = Estimator::sieve;
  int failures = 0;
  std::vector<double> estimates;  ///< per replication; NaN marks a failure
  SummaryCell alpha;
  std::vector<CdfCell> cdf;  ///< aligned with MCConfig::quantile_probs
  std::optional<CondQuantCell> cond_quantile;
};

struct MCReport {
  MCConfig config;
  double alpha_true = 0.0;  ///< leading copula parameter
  std::vector<EstimatorReport> estimators;
  std::vector<double> y_grid;  ///< conditional-quantile grid (when engaged)
  std::vector<double> cond_quantile_truth;
};

bool operator==(const MCReport& a, const MCReport& b);

// --------------------------------------------------------------- operations

/// Run the full experiment. Replication r simulates with stream_id = r, all
/// estimators see the same series, failed fits are dropped and counted. The
/// worker count comes from CKM_THREADS (default: hardware concurrency); the
/// report is identical for any worker count. Throws when one estimator
/// fails in more than 20% of the replications.
MCReport run_experiment(const MCConfig& cfg);

/// Exact conditional q-quantile of Y_t given Y_{t-1} = y under the true
/// model: G^{-1}(C^{-1}_{2|1}(q | G(y))).
double true_conditional_quantile(const CopulaSpec& copula,
                                 const ParametricMarginal& marginal, double q,
                                 double y);

/// Trapezoid-integrated bias^2 / variance / MSE (each x 1000) of fitted
/// quantile curves against the truth on a common grid. `curves` holds one
/// grid-aligned curve per successful replication.
CondQuantCell integrated_quantile_metrics(
    const Eigen::VectorXd& y_grid, const std::vector<Eigen::VectorXd>& curves,
    const Eigen::VectorXd& truth);

/// 100-point equally spaced grid on [max(mins), min(maxes)]; throws when the
/// intersection is empty.
Eigen::VectorXd common_support_grid(const Eigen::VectorXd& mins,
                                    const Eigen::VectorXd& maxes,
                                    int points = 100);

// ------------------------------------------------------------------ artifacts

/// Write alpha_table.csv, cdf_table.csv, quantile_table.csv and report.json
/// into out_dir (created when missing). alpha_table has one row per
/// estimator; cdf_table one row per estimator x probability; quantile_table
/// one row per estimator when the conditional-quantile study ran. With
/// traces = true the simulated series are regenerated from the config and
/// written to out_dir/traces/rep####.csv.
void write_report(const MCReport& report, const std::string& out_dir,
                  bool traces = false);

std::string mc_report_to_json(const MCReport& report);
MCReport mc_report_from_json(const std::string& text);

}  // namespace ckm
