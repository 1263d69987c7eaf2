#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "ckm/error.hpp"

namespace ckm {

// ---------------------------------------------------------------- quadrature

struct QuadratureRule {
  Eigen::VectorXd nodes;    ///< abscissae in (a,b)
  Eigen::VectorXd weights;  ///< positive weights, sum to b-a
  int order = 0;

  template <class F>
  double integrate(F&& f) const {
    double s = 0.0;
    for (int i = 0; i < nodes.size(); ++i) s += weights[i] * f(nodes[i]);
    return s;
  }
};

/// Gauss-Legendre rule with `order` nodes on (a,b).
/// Exact for polynomials of degree <= 2*order-1.
QuadratureRule gauss_legendre(int order, double a, double b);

/// Cached Gauss-Legendre rule on (0,1); shared, thread-safe.
const QuadratureRule& gauss_legendre_unit(int order);

/// Tensor-product integral of f(x,y) over (0,1)^2 at the given order per axis.
double integrate_unit_square(const std::function<double(double, double)>& f,
                             int order = 64);

// -------------------------------------------------------------- root finding

/// Brent's method on a bracketing interval [lo,hi] with f(lo)*f(hi) <= 0.
/// Stops when |f| <= ftol or the bracket width falls below
/// xtol*(1+|x|); throws convergence_error after max_iter iterations
/// and domain_error when the interval does not bracket a root.
double brent_root(const std::function<double(double)>& f, double lo, double hi,
                  double xtol = 1e-12, double ftol = 0.0, int max_iter = 200);

// ---------------------------------------------------------- special functions

double normal_pdf(double x);
double normal_cdf(double x);
/// Inverse standard normal CDF, accurate to full double precision.
double normal_quantile(double p);

/// log Gamma(x), x > 0.
double log_gamma(double x);
/// Beta function B(a,b) = Gamma(a)Gamma(b)/Gamma(a+b), a,b > 0.
double beta_fn(double a, double b);
/// Regularized incomplete beta I_x(a,b) by continued fraction.
double reg_inc_beta(double x, double a, double b);

double student_t_pdf(double x, double nu);
double student_t_cdf(double x, double nu);
double student_t_quantile(double p, double nu);

double logistic_pdf(double x);
double logistic_cdf(double x);
double logistic_quantile(double p);

/// Dilogarithm Li2(z) = sum_{k>=1} z^k/k^2 for z in [-1,1].
double polylog2(double z);

// ------------------------------------------------------------------ KS tests

/// One-sample Kolmogorov statistic sup_x |F_n(x) - x| against uniform(0,1).
double ks_statistic_uniform(std::vector<double> xs);

/// Two-sample Kolmogorov statistic sup_x |F_m(x) - G_n(x)|.
double ks_statistic_two_sample(std::vector<double> xs, std::vector<double> ys);

/// Asymptotic p-value for the one-sample statistic at sample size n
/// (for two samples pass the effective size n1*n2/(n1+n2)).
double ks_pvalue(double stat, double n_effective);

// ------------------------------------------------------------------- ranking

/// Average ranks in 1..n (ties share the mean rank).
std::vector<double> average_ranks(const std::vector<double>& xs);

/// Sample Kendall's tau of the paired sequences (tau-a, O(n^2)).
double empirical_kendall_tau(const std::vector<double>& xs,
                             const std::vector<double>& ys);

// ----------------------------------------------------------------------- RNG

/// Deterministic uniform(0,1) stream addressed by (seed, stream_id).
/// Identical configuration reproduces the identical sequence on any
/// platform; distinct stream ids give independent streams.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t next_u64();
  /// Strictly inside (0,1).
  double uniform();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 gen_;
};

}  // namespace ckm
