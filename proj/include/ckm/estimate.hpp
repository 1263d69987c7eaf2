#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "ckm/copula.hpp"
#include "ckm/marginal.hpp"
#include "ckm/simulate.hpp"

namespace ckm {

// --------------------------------------------------------- empirical marginal

/// Rescaled empirical CDF G_n(y) = #{Y_t <= y}/(n+1).
struct EmpiricalCDF {
  Eigen::VectorXd sorted;
};

EmpiricalCDF empirical_cdf(const Eigen::VectorXd& sample);
double empirical_cdf_eval(const EmpiricalCDF& ecdf, double y);

/// Interpolated inverse of the rescaled empirical CDF: linear between order
/// statistics, clamped to the sample range.
double empirical_quantile(const EmpiricalCDF& ecdf, double p);

/// On-sample pseudo-observations rank/(n+1); ties get the average rank.
Eigen::VectorXd pseudo_observations(const Eigen::VectorXd& sample);

// ------------------------------------------------------------------- results

enum class FitMethod { sieve, two_step, ideal, parametric };

std::string fit_method_name(FitMethod m);
FitMethod fit_method_from_name(const std::string& name);

enum class MarginalKind { sieve, parametric, empirical, known };

struct SieveKDiag {
  int K = 0;
  double loglik = 0.0;
  double criterion = 0.0;
  bool converged = false;
};

struct FitResult {
  FitMethod method = FitMethod::two_step;
  CopulaSpec copula_hat;
  MarginalKind marginal_kind = MarginalKind::known;
  SieveDensity sieve_hat;              ///< marginal_kind == sieve
  ParametricMarginal parametric_hat;   ///< marginal_kind == parametric
  EmpiricalCDF ecdf_hat;               ///< marginal_kind == empirical
  double loglik = 0.0;
  std::optional<int> K_selected;
  std::vector<SieveKDiag> k_diagnostics;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
};

// ---------------------------------------------------------------- likelihood

/// Mean copula log-likelihood (1/n) sum_{t>=2} log c(u_{t-1}, u_t).
double copula_loglik(const Eigen::VectorXd& u, const CopulaSpec& spec);

/// Mean joint log-likelihood
/// (1/n)[sum_{t>=2} {log g(y_t) + log c(G(y_{t-1}), G(y_t))} + log g(y_1)].
/// Throws on a non-finite term, naming the 1-based index t.
double joint_loglik(const Eigen::VectorXd& y, const CopulaSpec& spec,
                    const SieveDensity& g);
double joint_loglik(const Eigen::VectorXd& y, const CopulaSpec& spec,
                    const ParametricMarginal& g);

// ---------------------------------------------------------------- estimators

/// The reference map must have tails at least as heavy as the data: a
/// too-light map sends the sample's tail into a boundary sliver of [0,1]
/// that no moderate-K basis tilt can recalibrate, and the resulting CDF
/// distortion near 0/1 feeds straight into the dependence estimate. The
/// student_t3 default suits heavy-tailed (financial-returns-like) series.
struct SieveConfig {
  SieveBasis basis = SieveBasis::cosine;
  std::vector<int> K_grid = {3, 4, 5, 6, 7, 8, 9, 10};
  Reference reference = Reference::student_t3;
  int quad_order = 256;
};

/// Pseudo-likelihood fit on rank/(n+1) pseudo-observations; quasi-Newton in
/// unconstrained coordinates from 3 starts (warm, perturbed, moment-matched).
FitResult two_step(const Eigen::VectorXd& y, Family family,
                   bool survival = false);

/// Copula fit on the latent uniforms themselves (simulation benchmark).
FitResult ideal_mle(const Eigen::VectorXd& u, Family family,
                    bool survival = false);

/// Joint fit of the copula parameters and a parametric marginal.
FitResult parametric_mle(const Eigen::VectorXd& y, Family family,
                         MarginalFamily marginal_family,
                         bool survival = false);

/// Copula-only fit with the marginal fixed at a known parametric truth.
FitResult parametric_mle_fixed(const Eigen::VectorXd& y, Family family,
                               const ParametricMarginal& known,
                               bool survival = false);

/// Joint sieve MLE over (alpha, a_1..a_K) for each K in the grid, keeping the
/// K with the best small-sample AIC criterion L_n - K/(n-K-1).
FitResult sieve_mle(const Eigen::VectorXd& y, Family family,
                    const SieveConfig& cfg = {}, bool survival = false);

/// Maximize over the sieve coefficients only, the copula spec held fixed;
/// shape (basis, K, reference) and the start taken from `warm`.
FitResult sieve_profile(const Eigen::VectorXd& y, const CopulaSpec& fixed,
                        const SieveDensity& warm);

}  // namespace ckm
