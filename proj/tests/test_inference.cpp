#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"

#include "ckm/copula.hpp"
#include "ckm/error.hpp"
#include "ckm/estimate.hpp"
#include "ckm/inference.hpp"
#include "ckm/numerics.hpp"
#include "ckm/simulate.hpp"

using namespace ckm;

namespace {

constexpr double kPi = 3.14159265358979323846;

SimConfig chain_config(const CopulaSpec& spec, int n, std::uint64_t seed,
                       std::uint64_t stream = 0) {
  SimConfig cfg;
  cfg.copula = spec;
  cfg.marginal = student_t_marginal(3.0);
  cfg.n = n;
  cfg.burn_in = 1000;
  cfg.seed = seed;
  cfg.stream_id = stream;
  return cfg;
}

double phi_k(int k, double u) {
  return std::sqrt(2.0) * std::cos(double(k) * kPi * u);
}

double phi_k_int(int k, double v) {
  return std::sqrt(2.0) * std::sin(double(k) * kPi * v) / (double(k) * kPi);
}

}  // namespace

TEST_CASE("independence data: information and CDF variance") {
  const auto ts = simulate_chain(
      chain_config(copula_spec(Family::efgm, 0.0), 2000, 901));
  const FitResult fit = sieve_mle(ts.values, Family::efgm);
  REQUIRE(fit.converged);

  const InfoEstimate info = efficient_info(fit, ts.values);
  CHECK(info.K_nalpha == 6);
  CHECK(info.e_star_coeffs.rows() == 1);
  CHECK(info.e_star_coeffs.cols() == 6);
  REQUIRE(info.I_star_hat.rows() == 1);
  const double ihat = info.I_star_hat(0, 0);

  // At the independence point the score is (1-2u)(1-2w) with ideal
  // information 1/9; the projection cannot push the estimate above that.
  CHECK(ihat >= 0.0);
  CHECK(ihat <= 1.0 / 9.0 + 0.02);
  CHECK(ihat >= 0.06);

  // Normal-equation residuals are orthogonal to the design columns.
  const int n = int(ts.values.size());
  Eigen::VectorXd u(n);
  for (int t = 0; t < n; ++t)
    u[t] = std::clamp(sieve_cdf(fit.sieve_hat, ts.values[t]), 1e-12,
                      1.0 - 1e-12);
  const Eigen::VectorXd a = info.e_star_coeffs.row(0);
  Eigen::VectorXd ortho = Eigen::VectorXd::Zero(6);
  for (int t = 1; t < n; ++t) {
    const ScoreGrad g = log_density_grad(fit.copula_hat, u[t - 1], u[t]);
    Eigen::VectorXd x(6);
    for (int k = 1; k <= 6; ++k)
      x[k - 1] = phi_k(k, u[t]) + g.d_u1 * phi_k_int(k, u[t - 1]) +
                 g.d_u2 * phi_k_int(k, u[t]);
    ortho += x * (g.d_alpha[0] - x.dot(a));
  }
  CHECK((ortho / double(n - 1)).lpNorm<Eigen::Infinity>() <= 1e-8);

  // CDF variance at the median: binomial value 1/4 (cosine span of order 6
  // carries 93% of it, the score block adds nothing under independence).
  const double med = sieve_quantile(fit.sieve_hat, 0.5);
  const double s2 = sigma_G(fit, ts.values, med);
  CHECK(s2 >= 0.20);
  CHECK(s2 <= 0.30);
  for (double p : {0.05, 0.25, 0.75, 0.95}) {
    const double s2p = sigma_G(fit, ts.values, sieve_quantile(fit.sieve_hat, p));
    CHECK(s2p >= 0.0);
    CHECK(s2p <= 0.27);
  }

  CHECK_THROWS_AS(efficient_info(fit, ts.values, 0), const domain_error&);
  CHECK_THROWS_AS(efficient_info(fit, ts.values.head(4), 6),
                  const domain_error&);
}

TEST_CASE("efficient information tracks the ideal bound") {
  SUBCASE("gaussian") {
    const auto ts = simulate_chain(
        chain_config(copula_spec(Family::gaussian, 0.5), 2000, 902));
    const FitResult fit = sieve_mle(ts.values, Family::gaussian);
    REQUIRE(fit.converged);
    const InfoEstimate info = efficient_info(fit, ts.values);
    const double ihat = info.I_star_hat(0, 0);
    // Efficient variance bound for the Gaussian parameter: 1 - alpha^2.
    CHECK(1.0 / ihat >= 0.60);
    CHECK(1.0 / ihat <= 0.90);
    const double ideal = sigma_ideal_closed_form(fit.copula_hat);
    CHECK(ihat <= ideal * 1.10 + 0.02);
  }
  SUBCASE("clayton") {
    const auto ts = simulate_chain(
        chain_config(copula_spec(Family::clayton, 2.0), 2000, 903));
    const FitResult fit = sieve_mle(ts.values, Family::clayton);
    REQUIRE(fit.converged);
    const double ihat = efficient_info(fit, ts.values).I_star_hat(0, 0);
    const double ideal = sigma_ideal_closed_form(fit.copula_hat);
    CHECK(ihat <= ideal * 1.10 + 0.02);
    CHECK(ihat >= 0.05 * ideal);
  }
  SUBCASE("student t gives a 2x2 psd matrix") {
    SieveConfig cfg;
    cfg.K_grid = {3, 4, 5};
    const auto ts = simulate_chain(
        chain_config(student_t_spec(0.5, 5.0), 800, 904));
    const FitResult fit = sieve_mle(ts.values, Family::student_t, cfg);
    REQUIRE(fit.converged);
    const InfoEstimate info = efficient_info(fit, ts.values);
    REQUIRE(info.I_star_hat.rows() == 2);
    REQUIRE(info.I_star_hat.cols() == 2);
    CHECK(info.I_star_hat(0, 1) == doctest::Approx(info.I_star_hat(1, 0)));
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info.I_star_hat);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("sigma_G brackets the Monte Carlo variance of the fitted CDF") {
  const CopulaSpec spec = copula_spec(Family::clayton, 2.0);
  const double ystar = parametric_quantile(student_t_marginal(3.0), 1.0 / 3.0);
  SieveConfig cfg;
  cfg.K_grid = {3, 4, 5};

  const int reps = 200;
  std::vector<double> ghat;
  double sig_sum = 0.0;
  int sig_count = 0;
  for (int r = 0; r < reps; ++r) {
    const auto ts = simulate_chain(chain_config(spec, 500, 905, r));
    FitResult fit;
    try {
      fit = sieve_mle(ts.values, Family::clayton, cfg);
    } catch (const convergence_error&) {
      continue;
    }
    ghat.push_back(sieve_cdf(fit.sieve_hat, ystar));
    if (sig_count < 10) {
      sig_sum += sigma_G(fit, ts.values, ystar);
      ++sig_count;
    }
  }
  REQUIRE(int(ghat.size()) >= 180);

  double mean = 0.0;
  for (double g : ghat) mean += g;
  mean /= double(ghat.size());
  double var = 0.0;
  for (double g : ghat) var += (g - mean) * (g - mean);
  var /= double(ghat.size() - 1);

  CHECK(std::abs(mean - 1.0 / 3.0) <= 0.05);
  const double sighat = sig_sum / double(sig_count);
  const double ratio = 500.0 * var / sighat;
  CHECK(ratio >= 0.5);
  CHECK(ratio <= 2.0);
}

TEST_CASE("joint score is a martingale difference at the truth") {
  // Truth: a normalized 4-term cosine tilt of the reference marginal.
  Eigen::VectorXd a(4);
  a << 0.3, -0.2, 0.15, -0.1;
  const SieveDensity g = sieve_density(SieveBasis::cosine, 4, a);
  const int K = 4;

  // In s-coordinates the tilted density is w(s) = exp(q(s))/Z on (0,1).
  const auto qs = [&](double s) {
    double q = 0.0;
    for (int k = 1; k <= K; ++k) q += a[k - 1] * sieve_basis_eval(g.basis, K, k, s);
    return q;
  };
  const QuadratureRule full = gauss_legendre(256, 0.0, 1.0);
  const double Z = full.integrate([&](double s) { return std::exp(qs(s)); });
  const auto cdf_s = [&](double s) {
    if (s <= 0.0) return 0.0;
    return gauss_legendre(64, 0.0, s).integrate(
               [&](double t) { return std::exp(qs(t)); }) / Z;
  };
  const auto inv_cdf = [&](double u) {
    return brent_root([&](double s) { return cdf_s(s) - u; }, 0.0, 1.0, 1e-13);
  };
  Eigen::VectorXd m(K);
  for (int k = 1; k <= K; ++k)
    m[k - 1] = full.integrate([&](double s) {
      return sieve_basis_eval(g.basis, K, k, s) * std::exp(qs(s));
    }) / Z;
  const auto Nk = [&](int k, double s) {
    if (s <= 0.0) return 0.0;
    return gauss_legendre(64, 0.0, s).integrate([&](double t) {
             return sieve_basis_eval(g.basis, K, k, t) * std::exp(qs(t));
           }) / Z;
  };

  // Dyadic panels toward both endpoints handle the copula tail behavior:
  // [2^-k-1, 2^-k] on the lower half, mirrored on the upper half.
  std::vector<double> un, uw;
  for (int k = 1; k <= 44; ++k) {
    const double lo = std::ldexp(1.0, -k - 1);
    const double hi = std::ldexp(1.0, -k);
    for (const double flip : {0.0, 1.0}) {
      const QuadratureRule r = gauss_legendre(16, lo, hi);
      for (int i = 0; i < r.nodes.size(); ++i) {
        un.push_back(flip == 0.0 ? r.nodes[i] : 1.0 - r.nodes[i]);
        uw.push_back(r.weights[i]);
      }
    }
  }
  const int nn = int(un.size());
  std::vector<double> sn(nn);
  Eigen::MatrixXd An(nn, K), Nn(nn, K);
  for (int i = 0; i < nn; ++i) {
    sn[i] = inv_cdf(un[i]);
    for (int k = 1; k <= K; ++k) {
      An(i, k - 1) = sieve_basis_eval(g.basis, K, k, sn[i]);
      Nn(i, k - 1) = Nk(k, sn[i]);
    }
  }

  const std::vector<CopulaSpec> specs = {
      copula_spec(Family::clayton, 2.0),  copula_spec(Family::gumbel, 2.0),
      copula_spec(Family::frank, 3.0),    copula_spec(Family::gaussian, 0.5),
      copula_spec(Family::efgm, 0.5),     student_t_spec(0.5, 5.0)};
  const std::vector<double> ux = {0.1, 0.3, 0.5, 0.7, 0.9};

  for (const CopulaSpec& spec : specs) {
    const int d = int(spec.theta.size());
    for (double x : ux) {
      const double sx = inv_cdf(x);
      Eigen::VectorXd dgx(K);
      for (int k = 1; k <= K; ++k) dgx[k - 1] = Nk(k, sx) - x * m[k - 1];

      Eigen::VectorXd I = Eigen::VectorXd::Zero(d + K);
      for (int i = 0; i < nn; ++i) {
        const ScoreGrad sg = log_density_grad(spec, x, un[i]);
        const double c = std::exp(sg.log_c);
        if (c == 0.0) continue;
        I.head(d) += uw[i] * c * sg.d_alpha;
        for (int k = 0; k < K; ++k) {
          const double dgy = Nn(i, k) - un[i] * m[k];
          const double term =
              (An(i, k) - m[k]) + sg.d_u1 * dgx[k] + sg.d_u2 * dgy;
          I[d + k] += uw[i] * c * term;
        }
      }

      for (int j = 0; j < 5; ++j) {
        Eigen::VectorXd v(d + K);
        for (int i = 0; i < d + K; ++i)
          v[i] = std::cos(0.7 * double(i + 1) * double(j + 1));
        v /= v.norm();
        CHECK(std::abs(v.dot(I)) <= 1e-6);
      }
    }
  }
}

TEST_CASE("profile likelihood ratio interval") {
  CHECK(chi2_1_quantile(0.95) ==
        doctest::Approx(3.841458820694124).epsilon(1e-9));
  CHECK(chi2_1_quantile(0.90) ==
        doctest::Approx(2.705543454095404).epsilon(1e-9));
  CHECK_THROWS_AS(chi2_1_quantile(1.0), const domain_error&);

  const auto ts = simulate_chain(
      chain_config(copula_spec(Family::clayton, 2.0), 400, 906));
  SieveConfig cfg;
  cfg.K_grid = {3, 4, 5};

  const LRInterval ci = profile_lr_ci(ts.values, Family::clayton, cfg, 0.95);
  CHECK(ci.level == 0.95);
  CHECK(ci.lower < ci.alpha_hat);
  CHECK(ci.alpha_hat < ci.upper);
  CHECK(std::abs(ci.lr_at_lower - 3.841458820694124) <= 1e-3);
  CHECK(std::abs(ci.lr_at_upper - 3.841458820694124) <= 1e-3);
  CHECK(ci.lower > 0.0);
  CHECK(ci.upper - ci.lower > 0.1);
  CHECK(ci.upper - ci.lower < 3.0);
  // This draw covers the truth.
  CHECK(ci.lower < 2.0);
  CHECK(ci.upper > 2.0);

  const FitResult fit = sieve_mle(ts.values, Family::clayton, cfg);
  CHECK(ci.alpha_hat == fit.copula_hat.theta[0]);
  CHECK(std::abs(profile_lr_stat(ts.values, fit, fit.copula_hat.theta[0])) <=
        1e-6);
  CHECK(profile_lr_stat(ts.values, fit, 1.3 * ci.alpha_hat) > 0.0);
  CHECK(profile_lr_stat(ts.values, fit, ci.lower) >= 0.0);

  const LRInterval again = profile_lr_ci(ts.values, Family::clayton, cfg, 0.95);
  CHECK(again.lower == ci.lower);
  CHECK(again.upper == ci.upper);

  CHECK_THROWS_AS(profile_lr_ci(ts.values, Family::student_t, cfg, 0.95),
                  const domain_error&);
}

TEST_CASE("conditional quantile plug-in") {
  const ParametricMarginal t3 = student_t_marginal(3.0);

  SUBCASE("closed-form oracle at the true parameters") {
    FitResult fit;
    fit.method = FitMethod::parametric;
    fit.copula_hat = copula_spec(Family::clayton, 5.0);
    fit.marginal_kind = MarginalKind::parametric;
    fit.parametric_hat = t3;
    fit.converged = true;
    const double w =
        std::pow((std::pow(0.01, -5.0 / 6.0) - 1.0) * std::pow(0.5, -5.0) + 1.0,
                 -1.0 / 5.0);
    const double expected = student_t_quantile(w, 3.0);
    CHECK(conditional_quantile_hat(fit, 0.01, 0.0) ==
          doctest::Approx(expected).epsilon(1e-9));
    CHECK(expected < 0.0);
    CHECK_THROWS_AS(conditional_quantile_hat(fit, 0.0, 0.0),
                    const domain_error&);
    CHECK_THROWS_AS(conditional_quantile_hat(fit, 1.0, 0.0),
                    const domain_error&);
  }

  SUBCASE("independence parameter reduces to the marginal quantile") {
    FitResult fit;
    fit.method = FitMethod::parametric;
    fit.copula_hat = copula_spec(Family::efgm, 0.0);
    fit.marginal_kind = MarginalKind::parametric;
    fit.parametric_hat = t3;
    fit.converged = true;
    for (double q : {0.05, 0.5, 0.9})
      for (double y : {-1.3, 0.4})
        CHECK(conditional_quantile_hat(fit, q, y) ==
              doctest::Approx(parametric_quantile(t3, q)).epsilon(1e-12));
  }

  SUBCASE("sieve fit: monotone in q and consistent with the composition") {
    const auto ts = simulate_chain(
        chain_config(copula_spec(Family::clayton, 2.0), 600, 907));
    const FitResult fit = sieve_mle(ts.values, Family::clayton);
    REQUIRE(fit.converged);
    const std::vector<double> qs = {0.01, 0.05, 0.5, 0.95, 0.99};
    for (double p : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      const double y = sieve_quantile(fit.sieve_hat, p);
      double prev = -1e300;
      for (double q : qs) {
        const double qhat = conditional_quantile_hat(fit, q, y);
        CHECK(qhat > prev);
        prev = qhat;
        const double u = std::clamp(sieve_cdf(fit.sieve_hat, y), 1e-12,
                                    1.0 - 1e-12);
        const double direct = sieve_quantile(
            fit.sieve_hat, conditional_quantile(fit.copula_hat, q, u));
        CHECK(qhat == doctest::Approx(direct).epsilon(1e-12));
      }
    }
    // Positive dependence pushes the conditional median up with y.
    const double lo = conditional_quantile_hat(
        fit, 0.5, sieve_quantile(fit.sieve_hat, 0.1));
    const double hi = conditional_quantile_hat(
        fit, 0.5, sieve_quantile(fit.sieve_hat, 0.9));
    CHECK(hi > lo);

    const FitResult tfit = two_step(ts.values, Family::clayton);
    double prev = -1e300;
    for (double q : {0.05, 0.5, 0.95}) {
      const double qhat = conditional_quantile_hat(tfit, q, 0.0);
      CHECK(qhat > prev);
      prev = qhat;
      CHECK(qhat >= ts.values.minCoeff());
      CHECK(qhat <= ts.values.maxCoeff());
    }

    FitResult none;
    none.converged = true;
    none.copula_hat = copula_spec(Family::clayton, 2.0);
    none.marginal_kind = MarginalKind::known;
    CHECK_THROWS_AS(conditional_quantile_hat(none, 0.5, 0.0),
                    const domain_error&);
  }
}
