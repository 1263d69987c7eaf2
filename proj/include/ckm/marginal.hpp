#pragma once

#include <Eigen/Core>
#include <limits>
#include <string>

#include "ckm/error.hpp"

namespace ckm {

/// Parametric marginal families for exact and misspecified fits.
enum class MarginalFamily { student_t, normal, extreme_value };

std::string marginal_family_name(MarginalFamily f);
MarginalFamily marginal_family_from_name(const std::string& name);
int marginal_param_dim(MarginalFamily f);

/// theta layout: StudentT (nu); Normal (mu, sigma); ExtremeValue (loc, scale).
struct ParametricMarginal {
  MarginalFamily family = MarginalFamily::normal;
  Eigen::VectorXd theta;
};

ParametricMarginal student_t_marginal(double nu);
ParametricMarginal normal_marginal(double mu, double sigma);
ParametricMarginal extreme_value_marginal(double loc, double scale);
void validate(const ParametricMarginal& m);

struct PdfCdf {
  double pdf = 0.0;
  double cdf = 0.0;
};

PdfCdf parametric_eval(const ParametricMarginal& m, double y);
double parametric_pdf(const ParametricMarginal& m, double y);
double parametric_log_pdf(const ParametricMarginal& m, double y);
double parametric_cdf(const ParametricMarginal& m, double y);
double parametric_quantile(const ParametricMarginal& m, double p);

// ---------------------------------------------------------------- sieve

enum class SieveBasis { polynomial, cubic_spline, cosine };
std::string basis_name(SieveBasis b);
SieveBasis basis_from_name(const std::string& name);

/// Fixed reference CDF mapping the real line to (0,1). Pick one with tails
/// at least as heavy as the data: a too-light reference pushes the sample
/// into a boundary layer of [0,1] that no moderate-K basis can resolve.
enum class Reference { student_t4, student_t3, student_t2, cauchy, logistic };
std::string reference_name(Reference r);
Reference reference_from_name(const std::string& name);

double reference_pdf(Reference r, double y);
double reference_log_pdf(Reference r, double y);
double reference_cdf(Reference r, double y);
double reference_quantile(Reference r, double s);

enum class SieveForm { log_density, sqrt_density };

/// Nonparametric density g(y) built on the mapped variable s = T(y):
/// log form  g(y) = ref_pdf(y) exp(sum_k a_k A_k(s)) / Z,
/// sqrt form g(y) = ref_pdf(y) (sum_k a_k A_k(s))^2 / Z.
/// Construct via sieve_density or set fields and call sieve_normalize.
struct SieveDensity {
  SieveBasis basis = SieveBasis::cosine;
  int K = 0;
  Eigen::VectorXd coeffs;
  Reference reference = Reference::student_t4;
  SieveForm form = SieveForm::log_density;
  int quad_order = 256;
  double log_Z = std::numeric_limits<double>::quiet_NaN();
  bool normalized = false;
};

/// Basis functions A_k, k = 1..K, on s in [0,1]. Cosine: sqrt(2) cos(k pi s).
/// Polynomial: orthonormal shifted Legendre. Cubic spline: clamped B-splines
/// on equally spaced knots (needs K >= 4).
Eigen::VectorXd sieve_basis_all(SieveBasis basis, int K, double s);
double sieve_basis_eval(SieveBasis basis, int K, int k, double s);

SieveDensity sieve_density(SieveBasis basis, int K,
                           const Eigen::VectorXd& coeffs,
                           Reference reference = Reference::student_t4,
                           SieveForm form = SieveForm::log_density,
                           int quad_order = 256);
SieveDensity sieve_normalize(SieveDensity d);

double sieve_log_pdf(const SieveDensity& d, double y);
double sieve_pdf(const SieveDensity& d, double y);
double sieve_cdf(const SieveDensity& d, double y);
double sieve_quantile(const SieveDensity& d, double p);

/// Maximum-likelihood fit of a log-form sieve to an i.i.d. sample
/// (Newton on the concave log likelihood).
SieveDensity sieve_fit_iid(const Eigen::VectorXd& y, SieveBasis basis, int K,
                           Reference reference = Reference::student_t4,
                           int quad_order = 256);

}  // namespace ckm
