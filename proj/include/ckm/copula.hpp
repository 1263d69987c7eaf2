#pragma once

#include <Eigen/Dense>
#include <string>

#include "ckm/error.hpp"

namespace ckm {

// ------------------------------------------------------------------- family

enum class Family { clayton, gumbel, frank, gaussian, efgm, student_t };

std::string family_name(Family f);
Family family_from_name(const std::string& name);
/// Number of copula parameters (1, or 2 for the Student-t family).
int param_dim(Family f);

/// Copula family tag plus parameter vector; `survival` evaluates the
/// survival transform of the base family.
struct CopulaSpec {
  Family family = Family::clayton;
  Eigen::VectorXd theta;
  bool survival = false;
};

CopulaSpec copula_spec(Family f, double alpha, bool survival = false);
CopulaSpec student_t_spec(double rho, double nu, bool survival = false);

/// Throws domain_error when theta violates the family's parameter domain.
void validate(const CopulaSpec& spec);

/// Clamp a pseudo-observation into [1/(2n), 1 - 1/(2n)].
double clamp_unit(double u, int n);

// ------------------------------------------------------------- evaluations

/// C(u1, u2); result lies in the Frechet-Hoeffding envelope.
double copula_cdf(const CopulaSpec& spec, double u1, double u2);

/// log copula density at an interior point.
double log_density(const CopulaSpec& spec, double u1, double u2);
double density(const CopulaSpec& spec, double u1, double u2);

/// log density with first derivatives (parameters, then both arguments).
struct ScoreGrad {
  double log_c = 0.0;
  Eigen::VectorXd d_alpha;
  double d_u1 = 0.0, d_u2 = 0.0;
};
ScoreGrad log_density_grad(const CopulaSpec& spec, double u1, double u2);

/// Full first/second derivative bundle of the log density.
struct ScoreBundle {
  double log_c = 0.0;
  Eigen::VectorXd d_alpha;
  double d_u1 = 0.0, d_u2 = 0.0;
  Eigen::MatrixXd d2_alpha;
  Eigen::VectorXd d2_u1_alpha, d2_u2_alpha;
  Eigen::Matrix2d d2_u_u = Eigen::Matrix2d::Zero();
};
ScoreBundle score_bundle(const CopulaSpec& spec, double u1, double u2);

/// Conditional CDF of the second coordinate given the first:
/// C_{2|1}(w | u) = dC(u, w)/du.
double conditional_cdf(const CopulaSpec& spec, double w, double u);

/// Inverse of conditional_cdf in w at fixed u.
double conditional_quantile(const CopulaSpec& spec, double q, double u);

// ------------------------------------------------------------- dependence

double kendall_tau(const CopulaSpec& spec);
/// Quadrature evaluation of tau (independent of the closed forms).
double kendall_tau_quadrature(const CopulaSpec& spec, int order = 64);

struct TailDependence {
  double lambda_lower = 0.0;
  double lambda_upper = 0.0;
};
TailDependence tail_dependence(const CopulaSpec& spec);

/// Survival copula of the given spec; an involution.
CopulaSpec survival_transform(const CopulaSpec& spec);

// ------------------------------------------------------------- information

/// Ideal (known-marginal) Fisher information for alpha; supported for
/// Gaussian, EFGM, and Clayton (the latter via 2-D quadrature of Int).
double sigma_ideal_closed_form(const CopulaSpec& spec);

/// Int(alpha) term of the Clayton ideal information, mapped from (1,inf)^2
/// to the unit square for quadrature.
double clayton_int_alpha(double alpha, int order = 128);

/// E[d_alpha d_alpha'] under the copula by quadrature; oracle companion of
/// sigma_ideal_closed_form, valid for any family.
Eigen::MatrixXd sigma_ideal_quadrature(const CopulaSpec& spec, int order = 128);

// -------------------------------------------------------- reparameterization

/// Map theta to unconstrained optimizer coordinates
/// (log / atanh / shifted-log per family).
Eigen::VectorXd to_unconstrained(const CopulaSpec& spec);
CopulaSpec from_unconstrained(Family f, bool survival, const Eigen::VectorXd& v);
/// Diagonal Jacobian d theta / d v at the spec's parameter value.
Eigen::VectorXd unconstrained_jacobian(const CopulaSpec& spec);

}  // namespace ckm
