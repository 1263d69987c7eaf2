#pragma once

#include <Eigen/Dense>

#include "ckm/estimate.hpp"

namespace ckm {

// ------------------------------------------------------ efficient information

struct InfoEstimate {
  Eigen::MatrixXd I_star_hat;     ///< d x d, symmetric PSD
  Eigen::MatrixXd e_star_coeffs;  ///< d x K_nalpha cosine coefficients of e
  int K_nalpha = 0;
};

/// Estimate the efficient information for the copula parameters: project each
/// copula score component onto the cosine-span nuisance directions
/// e(u) = sum_k a_k sqrt(2) cos(k pi u) (least squares over the fitted
/// pseudo-observations) and take the empirical outer product of the
/// projection residuals.  Normal equations carry a 1e-10 ridge.
InfoEstimate efficient_info(const FitResult& fit, const Eigen::VectorXd& y,
                            int K_nalpha = 6);

/// Variance bound estimate for the fitted marginal CDF at the point y0:
/// the ratio maximization over joint (copula, nuisance) directions, solved
/// in closed form as c' M^{-1} c.
double sigma_G(const FitResult& fit, const Eigen::VectorXd& y, double y0,
               int K_nalpha = 6);

// ------------------------------------------------------------ profile LR

struct LRInterval {
  double level = 0.95;
  double alpha_hat = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double lr_at_lower = 0.0;
  double lr_at_upper = 0.0;
};

/// chi-square(1) quantile via the normal quantile.
double chi2_1_quantile(double level);

/// 2n(L_n(gamma_hat) - L_n(alpha, profiled g)); the profile refit reuses the
/// unrestricted fit's coefficients as its warm start.
double profile_lr_stat(const Eigen::VectorXd& y, const FitResult& fit,
                       double alpha);

/// Connected level set {alpha : LR(alpha) <= chi2_1(level)} found by
/// bracketed root-finding outward from the sieve optimum.
LRInterval profile_lr_ci(const Eigen::VectorXd& y, Family family,
                         const SieveConfig& cfg = {}, double level = 0.95,
                         bool survival = false);

// ------------------------------------------------------ conditional quantile

/// Plug-in next-step conditional quantile
/// G^{-1}(C^{-1}_{2|1}[q | G(y)]) under the fitted model.
double conditional_quantile_hat(const FitResult& fit, double q, double y);

}  // namespace ckm
