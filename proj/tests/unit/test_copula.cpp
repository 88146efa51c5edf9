#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <doctest.h>

#include "caedp/constants.hpp"
#include "caedp/copula.hpp"
#include "caedp/random.hpp"
#include "test_support.hpp"

using namespace caedp;
using caedp::testing::ks_test;
using caedp::testing::ks_two_sample;

namespace {

Eigen::MatrixXd equicorr(int n, double g) {
  return (1.0 - g) * Eigen::MatrixXd::Identity(n, n) + g * Eigen::MatrixXd::Ones(n, n);
}

// Dense oracle of log N(z; 0, R) - log N(z; 0, I).
double dense_equicorr_loglik(const Eigen::VectorXd& z, double g) {
  const Eigen::MatrixXd r = equicorr(static_cast<int>(z.size()), g);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(r);
  const double logdet = ldlt.vectorD().array().log().sum();
  const double quad = z.dot(ldlt.solve(z)) - z.squaredNorm();
  return -0.5 * logdet - 0.5 * quad;
}

// K = M = 1 state whose y-classes carry confounder regressions with the given
// intercepts and sds (every other coefficient zero). Weights are set through
// the fractions so the stick identities hold.
CaEdpState mixture_state(const std::vector<double>& weights, const std::vector<double>& means,
                         const std::vector<double>& sds, const DesignSpec& design) {
  const int L = static_cast<int>(weights.size());
  CaEdpState s;
  s.weights = StickWeights(1, L, 1);
  double remaining = 1.0;
  for (int l = 0; l < L; ++l) {
    s.weights.v_theta(0, l) = remaining > 0.0 ? weights[l] / remaining : 1.0;
    remaining -= weights[l];
  }
  s.weights.s_star.setOnes();
  for (double& v : s.weights.v_phi) v = 1.0;
  s.weights.close_and_recompute();
  s.theta.resize(L);
  for (int l = 0; l < L; ++l) {
    s.theta[l].d.beta = Eigen::VectorXd::Zero(design.dim_d());
    s.theta[l].d.beta[0] = means[l];
    s.theta[l].d.sigma = sds[l];
  }
  return s;
}

double mixture_cdf_oracle(double d, const std::vector<double>& w, const std::vector<double>& mu,
                          const std::vector<double>& sd) {
  double total = 0.0;
  for (std::size_t c = 0; c < w.size(); ++c) total += w[c] * norm_cdf((d - mu[c]) / sd[c]);
  return total;
}

}  // namespace

TEST_SUITE("copula") {

TEST_CASE("omega for a singleton cluster is the 2x2 cross-world correlation") {
  const auto p = CopulaParams::make(0.8, 0.6, 0.5, 1);
  const OmegaBlocks b = build_omega(p);
  CHECK(b.omega.rows() == 2);
  CHECK(b.omega(0, 0) == doctest::Approx(1.0));
  CHECK(b.omega(1, 1) == doctest::Approx(1.0));
  CHECK(b.omega(0, 1) == doctest::Approx(0.5));
  CHECK(b.omega(1, 0) == doctest::Approx(0.5));
}

TEST_CASE("zero correlations give the identity") {
  const OmegaBlocks b = build_omega(CopulaParams::make(0.0, 0.0, 0.0, 4));
  CHECK(b.omega.isApprox(Eigen::MatrixXd::Identity(8, 8)));
}

TEST_CASE("rho_star is the mean same-world correlation times rho") {
  const auto p = CopulaParams::make(0.8, 0.6, 0.5, 3);
  CHECK(p.rho_star == doctest::Approx(0.35).epsilon(1e-14));
  const OmegaBlocks b = build_omega(p);
  CHECK(b.c10(0, 0) == doctest::Approx(0.5));
  CHECK(b.c10(0, 1) == doctest::Approx(0.35));
  CHECK(b.c11(0, 1) == doctest::Approx(0.8));
  CHECK(b.c00(2, 1) == doctest::Approx(0.6));
  CHECK(b.omega.isApprox(b.omega.transpose()));
  CHECK(b.omega.block(3, 0, 3, 3).isApprox(b.c10));
}

TEST_CASE("PD bounds") {
  const PdReport zero = check_pd_condition(0.0, 0.0, 0.0, 5);
  CHECK(zero.ok);
  CHECK(zero.within_bound == doctest::Approx(1.0));
  CHECK(zero.between_bound == doctest::Approx(1.0));
  const PdReport r = check_pd_condition(0.8, 0.6, 0.0, 2);
  CHECK(r.within_bound == doctest::Approx(4 * 0.2 * 0.4 / (0.6 * 0.6)));
  CHECK(r.between_bound == doctest::Approx(4 * 1.8 * 1.6 / (3.4 * 3.4)));
  CHECK(rho_upper_bound(0.8, 0.6, 2) == doctest::Approx(std::sqrt(0.32 / 0.36)).epsilon(1e-12));
  CHECK(rho_upper_bound(0.8, 0.6, 2) == doctest::Approx(0.9428).epsilon(1e-4));
}

TEST_CASE("PD violations are reported with the inequality") {
  CHECK_FALSE(check_pd_condition(1.0, 0.5, 0.0, 3).ok);
  CHECK_FALSE(check_pd_condition(-0.6, 0.5, 0.0, 3).ok);
  const PdReport r = check_pd_condition(0.9, 0.1, 0.95, 3);
  CHECK_FALSE(r.ok);
  CHECK_FALSE(r.reason.empty());
  CHECK_THROWS_AS(build_omega(CopulaParams{0.9, 0.1, 0.95, 0.475, 3}), std::domain_error);
  try {
    build_omega(CopulaParams{0.9, 0.1, 0.95, 0.475, 3});
  } catch (const std::domain_error& e) {
    CHECK(std::string(e.what()).find("rho^2") != std::string::npos);
  }
}

TEST_CASE("admissible parameters give a positive definite omega and the bound is tight") {
  Rng rng(31);
  for (int t = 0; t < 60; ++t) {
    const int N = 1 + static_cast<int>(rng.uniform() * 12);
    const double g1 = rng.uniform(), g0 = rng.uniform();
    const double upper = rho_upper_bound(g1, g0, N);
    const double rho = upper * (0.999 * rng.uniform());
    const OmegaBlocks b = build_omega(CopulaParams::make(g1, g0, rho, N));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b.omega);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
    // Just past the bound the unchecked matrix loses positive definiteness.
    const double over = upper * 1.001;
    if (over < 1.0) {
      const double rs = 0.5 * (g1 + g0) * over;
      const Eigen::MatrixXd c10 = (over - rs) * Eigen::MatrixXd::Identity(N, N) +
                                  rs * Eigen::MatrixXd::Ones(N, N);
      Eigen::MatrixXd omega(2 * N, 2 * N);
      omega << equicorr(N, g1), c10.transpose(), c10, equicorr(N, g0);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> bad(omega);
      CHECK(bad.eigenvalues().minCoeff() < 1e-12);
    }
  }
}

TEST_CASE("sample_rho stays under the bound and is uniform") {
  Rng rng(5);
  std::vector<double> draws;
  for (int t = 0; t < 4000; ++t) draws.push_back(sample_rho(0.8, 0.6, 2, rng));
  const double upper = rho_upper_bound(0.8, 0.6, 2);
  for (double r : draws) REQUIRE((r >= 0.0 && r < upper));
  CHECK(ks_test(draws, [upper](double x) { return std::clamp(x / upper, 0.0, 1.0); }) > 0.01);
  std::vector<double> unit;
  for (int t = 0; t < 2000; ++t) unit.push_back(sample_rho(0.0, 0.0, 5, rng));
  CHECK(ks_test(unit, [](double x) { return std::clamp(x, 0.0, 1.0); }) > 0.01);
}

TEST_CASE("equicorrelation log-likelihood") {
  // N = 3, gamma = 0.5: det R = 0.5^2 * 2 = 0.5, so at z = 0 the value is ln2 / 2.
  CHECK(equicorr_loglik(Eigen::VectorXd::Zero(3), 0.5) ==
        doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-14));
  CHECK(equicorr_loglik(Eigen::VectorXd::Constant(4, 1.3), 0.0) == 0.0);
  Rng rng(9);
  for (int t = 0; t < 40; ++t) {
    const int n = 1 + static_cast<int>(rng.uniform() * 10);
    Eigen::VectorXd z(n);
    for (int j = 0; j < n; ++j) z[j] = 2.0 * rng.normal();
    const double lower = n > 1 ? -1.0 / (n - 1) : -0.99;
    const double g = lower + (1.0 - lower) * (0.02 + 0.96 * rng.uniform());
    CHECK(equicorr_loglik(z, g) == doctest::Approx(dense_equicorr_loglik(z, g)).epsilon(1e-10));
    CHECK(equicorr_loglik(n, z.sum(), z.squaredNorm(), g) == equicorr_loglik(z, g));
  }
  CHECK(std::abs(equicorr_loglik(Eigen::VectorXd::Constant(5, 0.7), 1e-10)) < 1e-8);
  CHECK_THROWS_AS(equicorr_loglik(Eigen::VectorXd::Zero(3), 1.0), std::domain_error);
  CHECK_THROWS_AS(equicorr_loglik(Eigen::VectorXd::Zero(3), -0.5), std::domain_error);
}

TEST_CASE("gamma chain is uniform when every cluster is a singleton") {
  CopulaScores scores;
  Rng rng(11);
  for (int a = 0; a < 2; ++a) {
    for (int i = 0; i < 30; ++i) {
      const double z = rng.normal();
      scores.n[a].push_back(1);
      scores.s1[a].push_back(z);
      scores.s2[a].push_back(z * z);
    }
  }
  const GammaChain chain = mh_update_gammas(scores, 3000, rng);
  CHECK(chain.acceptance_rate == doctest::Approx(1.0));
  const auto uniform = [](double x) { return std::clamp(x, 0.0, 1.0); };
  CHECK(ks_test(chain.gamma1, uniform) > 0.01);
  CHECK(ks_test(chain.gamma0, uniform) > 0.01);
}

TEST_CASE("gamma chain recovers a known equicorrelation") {
  Rng rng(2024);
  CopulaScores scores;
  const double g = 0.5;
  for (int a = 0; a < 2; ++a) {
    for (int i = 0; i < 60; ++i) {
      const int n = 20;
      const double shared = rng.normal();
      double s1 = 0.0, s2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double z = std::sqrt(g) * shared + std::sqrt(1.0 - g) * rng.normal();
        s1 += z;
        s2 += z * z;
      }
      scores.n[a].push_back(n);
      scores.s1[a].push_back(s1);
      scores.s2[a].push_back(s2);
    }
  }
  const GammaChain chain = mh_update_gammas(scores, kGammaChainSteps, rng);
  const std::vector<double> g1(chain.gamma1.begin() + kGammaChainBurn, chain.gamma1.end());
  const std::vector<double> g0(chain.gamma0.begin() + kGammaChainBurn, chain.gamma0.end());
  CHECK(std::abs(caedp::testing::mean_of(g1) - g) < 0.1);
  CHECK(std::abs(caedp::testing::mean_of(g0) - g) < 0.1);
  CHECK(chain.acceptance_rate > 0.0);
  CHECK(chain.acceptance_rate < 1.0);
  CHECK_THROWS_AS(mh_update_gammas(scores, 0, rng), std::invalid_argument);
}

TEST_CASE("mixture marginal CDF examples") {
  const DesignSpec design{0, 0, false};
  const Eigen::VectorXd empty;
  const CaEdpState one = mixture_state({1.0}, {0.0}, {1.0}, design);
  CHECK(mixture_marginal_cdf(0.0, 1, 4, empty, empty, one, design) == doctest::Approx(0.5));
  const CaEdpState two = mixture_state({0.5, 0.5}, {-2.0, 2.0}, {1.0, 1.0}, design);
  CHECK(mixture_marginal_cdf(0.0, 0, 4, empty, empty, two, design) ==
        doctest::Approx(0.5).epsilon(1e-14));
  CHECK(mixture_marginal_cdf(2.0, 0, 4, empty, empty, two, design) ==
        doctest::Approx(0.5 * norm_cdf(4.0) + 0.25).epsilon(1e-14));
}

TEST_CASE("mixture CDF matches quadrature of its density") {
  const DesignSpec design{0, 0, false};
  const Eigen::VectorXd empty;
  const std::vector<double> w{0.1, 0.3, 0.2, 0.25, 0.15};
  const std::vector<double> mu{-3.0, -1.0, 0.5, 2.0, 6.0};
  const std::vector<double> sd{0.5, 1.0, 2.0, 0.7, 1.5};
  const CaEdpState s = mixture_state(w, mu, sd, design);
  const MixtureMarginal mix(marginal_theta_weights(s.weights), s, design, 1, 3, empty, empty);
  CHECK(mix.components() == 5);
  for (double d : {-4.0, -1.0, 0.0, 1.7, 5.0, 9.0}) {
    const double integral = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        [&mix](double t) { return mix.pdf(t); }, -60.0, d, 15, 1e-14);
    CHECK(mix.cdf(d) == doctest::Approx(integral).epsilon(1e-8));
    CHECK(mix.cdf(d) == doctest::Approx(mixture_cdf_oracle(d, w, mu, sd)).epsilon(1e-14));
  }
}

TEST_CASE("design coefficients shift the mixture location") {
  const DesignSpec design{1, 1, false};
  CaEdpState s = mixture_state({1.0}, {0.5}, {2.0}, design);
  s.theta[0].d.beta[design.idx_treatment()] = 1.0;
  s.theta[0].d.beta[design.idx_size()] = 0.1;
  s.theta[0].d.beta[design.idx_x(0)] = -1.0;
  s.theta[0].d.beta[design.idx_v(0)] = 2.0;
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.3);
  const Eigen::VectorXd v = Eigen::VectorXd::Constant(1, -0.2);
  const double mean1 = 0.5 + 1.0 + 0.1 * 10 - 0.3 - 0.4;
  CHECK(mixture_marginal_cdf(1.0, 1, 10, x, v, s, design) ==
        doctest::Approx(norm_cdf((1.0 - mean1) / 2.0)));
  CHECK(mixture_marginal_cdf(1.0, 0, 10, x, v, s, design) ==
        doctest::Approx(norm_cdf((1.0 - mean1 + 1.0) / 2.0)));
}

TEST_CASE("CDF inversion round-trips and is monotone") {
  const DesignSpec design{0, 0, false};
  const Eigen::VectorXd empty;
  const CaEdpState s =
      mixture_state({0.2, 0.5, 0.3}, {-4.0, 0.0, 7.0}, {0.3, 1.0, 2.5}, design);
  CHECK(std::abs(mixture_marginal_cdf(invert_marginal_cdf(0.5, 1, 2, empty, empty,
                                                          mixture_state({1.0}, {0.0}, {1.0}, design),
                                                          design, kCdfInversionTol),
                                      1, 2, empty, empty,
                                      mixture_state({1.0}, {0.0}, {1.0}, design), design) -
                 0.5) <= kCdfInversionTol);
  Rng rng(3);
  double prev = -1e300;
  std::vector<double> us;
  for (int t = 0; t < 200; ++t) us.push_back(rng.uniform());
  us.push_back(1e-12);
  us.push_back(1.0 - 1e-12);
  std::sort(us.begin(), us.end());
  for (double u : us) {
    const double d = invert_marginal_cdf(u, 1, 2, empty, empty, s, design, kCdfInversionTol);
    CHECK(std::abs(mixture_marginal_cdf(d, 1, 2, empty, empty, s, design) - u) <=
          kCdfInversionTol);
    CHECK(d >= prev);
    prev = d;
  }
  CHECK_THROWS_AS(invert_marginal_cdf(0.0, 1, 2, empty, empty, s, design, 1e-8),
                  std::domain_error);
  CHECK_THROWS_AS(invert_marginal_cdf(1.0, 1, 2, empty, empty, s, design, 1e-8),
                  std::domain_error);
}

TEST_CASE("negligible mixture components are pruned") {
  const DesignSpec design{0, 0, false};
  const CaEdpState s = mixture_state({1.0 - 1e-13, 1e-13}, {0.0, 50.0}, {1.0, 1.0}, design);
  const Eigen::VectorXd w = marginal_theta_weights(s.weights);
  CHECK(w[1] == 0.0);
  CHECK(w[0] > 0.0);
}

TEST_CASE("conditional of a singleton cluster") {
  const Eigen::VectorXd z1 = Eigen::VectorXd::Constant(1, 1.0);
  const CrossWorldConditional c = conditional_cross_world(z1, CopulaParams::make(0.3, 0.4, 0.5, 1));
  CHECK(c.mean[0] == doctest::Approx(0.5));
  CHECK(c.cov()(0, 0) == doctest::Approx(0.75));
  const CrossWorldConditional indep =
      conditional_cross_world(Eigen::VectorXd::Constant(3, 2.0), CopulaParams::make(0.3, 0.4, 0.0, 3));
  CHECK(indep.mean.norm() == doctest::Approx(0.0));
  CHECK(indep.cov().isApprox(equicorr(3, 0.4)));
  CHECK_THROWS_AS(conditional_cross_world(Eigen::VectorXd::Zero(2), CopulaParams::make(0.3, 0.4, 0.0, 3)),
                  std::invalid_argument);
}

TEST_CASE("closed-form conditional equals the dense Schur complement") {
  Rng rng(77);
  for (int t = 0; t < 20; ++t) {
    const int N = 6;
    const double g1 = rng.uniform(), g0 = rng.uniform();
    const double rho = rho_upper_bound(g1, g0, N) * 0.95 * rng.uniform();
    const auto p = CopulaParams::make(g1, g0, rho, N);
    Eigen::VectorXd z1(N);
    for (int j = 0; j < N; ++j) z1[j] = rng.normal();
    const OmegaBlocks b = build_omega(p);
    const Eigen::MatrixXd f = b.c10 * b.c11.inverse();
    const Eigen::VectorXd mean = f * z1;
    const Eigen::MatrixXd cov = b.c00 - f * b.c10.transpose();
    const CrossWorldConditional c = conditional_cross_world(z1, p);
    CHECK((c.mean - mean).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((c.cov() - cov).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("conditional mean is linear in z1 and the covariance does not depend on it") {
  const auto p = CopulaParams::make(0.4, 0.2, 0.3, 4);
  Eigen::VectorXd a(4), b(4);
  a << 1.0, -2.0, 0.5, 0.0;
  b << 0.3, 0.3, -1.0, 2.0;
  const auto ca = conditional_cross_world(a, p);
  const auto cb = conditional_cross_world(b, p);
  const auto cab = conditional_cross_world(2.0 * a - 3.0 * b, p);
  CHECK((cab.mean - (2.0 * ca.mean - 3.0 * cb.mean)).norm() < 1e-12);
  CHECK((ca.cov() - cb.cov()).norm() < 1e-14);
}

TEST_CASE("conditional draws have the stated covariance") {
  const auto p = CopulaParams::make(0.5, 0.3, 0.4, 3);
  const CrossWorldConditional c = conditional_cross_world(Eigen::VectorXd::Constant(3, 0.5), p);
  Rng rng(8);
  const int n = 40000;
  Eigen::MatrixXd draws(n, 3);
  for (int t = 0; t < n; ++t) draws.row(t) = c.sample(rng).transpose();
  const Eigen::RowVectorXd m = draws.colwise().mean();
  const Eigen::MatrixXd centred = draws.rowwise() - m;
  const Eigen::MatrixXd cov = centred.transpose() * centred / (n - 1);
  CHECK((m.transpose() - c.mean).cwiseAbs().maxCoeff() < 0.03);
  CHECK((cov - c.cov()).cwiseAbs().maxCoeff() < 0.03);
}

TEST_CASE("with rho = 0 the cross-world draw reproduces the control marginal") {
  const DesignSpec design{0, 0, false};
  const Eigen::VectorXd empty;
  const CaEdpState s = mixture_state({0.4, 0.6}, {-2.0, 1.5}, {0.7, 1.2}, design);
  const MixtureMarginal f0(marginal_theta_weights(s.weights), s, design, 0, 5, empty, empty);
  Rng rng(101);
  std::vector<double> via_copula, direct;
  const auto p = CopulaParams::make(0.6, 0.3, 0.0, 5);
  for (int t = 0; t < 2000; ++t) {
    Eigen::VectorXd z1(5);
    for (int j = 0; j < 5; ++j) z1[j] = rng.normal();
    const Eigen::VectorXd z0 = conditional_cross_world(z1, p).sample(rng);
    // One unit per draw keeps the pooled sample independent.
    via_copula.push_back(f0.quantile(norm_cdf(z0[0]), kCdfInversionTol));
    const int comp = rng.uniform() < 0.4 ? 0 : 1;
    direct.push_back(comp == 0 ? rng.normal(-2.0, 0.7) : rng.normal(1.5, 1.2));
  }
  CHECK(ks_two_sample(via_copula, direct) > 0.01);
}

}  // TEST_SUITE
