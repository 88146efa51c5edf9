#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "caedp/constants.hpp"
#include "caedp/dataset.hpp"
#include "caedp/hyperparameters.hpp"
#include "caedp/model.hpp"
#include "caedp/prior.hpp"
#include "caedp/properties.hpp"
#include "test_support.hpp"

using namespace caedp;
using doctest::Approx;

TEST_SUITE("model") {

TEST_CASE("tie probability of theta") {
  CHECK(tie_prob_theta(0, 0) == Approx(1.0).epsilon(1e-15));
  CHECK(tie_prob_theta(1, 1) == Approx(5.0 / 12.0).epsilon(1e-15));
  CHECK(tie_prob_theta(1, 0) == Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(tie_prob_theta(-1, 1), std::domain_error);
  CHECK_THROWS_AS(tie_prob_theta(1, std::nan("")), std::domain_error);
}

TEST_CASE("tie probability of phi and the joint tie") {
  CHECK(tie_prob_phi(0, 0, 0) == Approx(1.0));
  CHECK(tie_prob_phi(1, 1, 1) == Approx(0.375).epsilon(1e-15));
  CHECK(tie_prob_joint(0, 0, 0) == Approx(1.0));
  CHECK(tie_prob_joint(1, 1, 1) == Approx(13.0 / 72.0).epsilon(1e-15));
  CHECK_THROWS_AS(tie_prob_phi(1, 1, -0.1), std::domain_error);
  CHECK_THROWS_AS(tie_prob_joint(-2, 1, 1), std::domain_error);
}

TEST_CASE("correlations on a common set") {
  CHECK(corr_theta(0, 5) == Approx(1.0));
  CHECK(corr_theta(1, 1) == Approx(5.0 / 6.0).epsilon(1e-15));
  const double big = corr_theta(1e6, 1e6);
  CHECK(big > 0.5);
  CHECK(big == Approx(0.5).epsilon(1e-5));
  CHECK(corr_phi(0, 1, 1) == Approx(1.0));
  CHECK(corr_phi(1, 1, 1) == Approx(0.9).epsilon(1e-15));
  double prev = corr_phi(1, 1, 0.01);
  for (double a : {0.1, 0.5, 1.0, 2.0, 10.0, 100.0}) {
    const double c = corr_phi(1, 1, a);
    CHECK(c < prev);
    prev = c;
  }
}

TEST_CASE("random concentration triples respect the tie and correlation ranges") {
  Rng rng(11);
  for (int t = 0; t < 2000; ++t) {
    const double a = std::exp(4.0 * rng.normal()), b = std::exp(4.0 * rng.normal()),
                 c = std::exp(4.0 * rng.normal());
    const double qt = tie_prob_theta(a, b), qp = tie_prob_phi(a, b, c), qj = tie_prob_joint(a, b, c);
    CHECK(qj <= std::min(qt, qp) + 1e-15);
    CHECK(qt > 0.0);
    CHECK(qt <= 1.0);
    const double ct = corr_theta(a, b), cp = corr_phi(a, b, c);
    CHECK(ct > 0.5);
    CHECK(ct <= 1.0);
    CHECK(cp > 0.5);
    CHECK(cp <= 1.0);
  }
}

TEST_CASE("cross-measure covariance identity") {
  CHECK(cross_measure_covariance(0.4, 0.3, 0.2, 0.25, 0.25, 0.0, 0.0) == 0.0);
  // phi-sets equal to the whole space: G_phi products are 1 and delta_phi is 0
  CHECK(cross_measure_covariance(0.4, 0.3, 0.2, 0.1, 1.0, 0.15, 0.0) == Approx(0.4 * 0.15));
  CHECK(cross_measure_covariance(0.5, 0.25, 0.125, 0.2, 0.3, 0.1, -0.2) ==
        Approx(0.5 * 0.3 * 0.1 + 0.25 * 0.2 * -0.2 + 0.125 * 0.1 * -0.2));
}

TEST_CASE("truncation bounds") {
  ConcentrationParams one;
  CHECK(truncation_bound({10, 10, 10}, one) == Approx(3.0 * std::pow(0.5, 10)).epsilon(1e-15));
  CHECK(marginal_truncation_bound({10, 10, 10}, one, 100) == Approx(0.29296875).epsilon(1e-14));
  CHECK(marginal_truncation_bound({15, 15, 15}, one, 449) ==
        Approx(449.0 * 3.0 * std::pow(2.0, -15)).epsilon(1e-14));
  CHECK(marginal_truncation_bound({15, 15, 15}, one, 0) == 0.0);
  CHECK(marginal_truncation_bound({7, 8, 9}, one, 1) == truncation_bound({7, 8, 9}, one));
  CHECK(truncation_bound({400, 400, 400}, one) < 1e-100);
}

TEST_CASE("truncation bound is monotone in levels and concentrations") {
  ConcentrationParams c;
  c.alpha_star = 0.7;
  c.alpha_theta = 1.3;
  c.alpha_phi = 2.1;
  const TruncationLevels base{6, 7, 8};
  const double b0 = truncation_bound(base, c);
  CHECK(truncation_bound({7, 7, 8}, c) < b0);
  CHECK(truncation_bound({6, 8, 8}, c) < b0);
  CHECK(truncation_bound({6, 7, 9}, c) < b0);
  auto up = c;
  up.alpha_star *= 1.5;
  CHECK(truncation_bound(base, up) > b0);
  up = c;
  up.alpha_theta *= 1.5;
  CHECK(truncation_bound(base, up) > b0);
  up = c;
  up.alpha_phi *= 1.5;
  CHECK(truncation_bound(base, up) > b0);
}

TEST_CASE("stick breaking closes the simplex") {
  std::vector<double> frac = {0.3, 0.5, 0.25, 0.9}, w(4);
  stick_break(frac, w);
  CHECK(w[0] == Approx(0.3));
  CHECK(w[1] == Approx(0.35));
  CHECK(w[2] == Approx(0.0875));
  CHECK(w[3] == Approx(0.2625));  // last fraction treated as 1
  CHECK(w[0] + w[1] + w[2] + w[3] == Approx(1.0).epsilon(kSimplexTol));

  Rng rng(3);
  ConcentrationParams conc;
  conc.alpha_star = 0.4;
  conc.alpha_theta = 3.0;
  conc.alpha_phi = 1.0;
  const StickWeights sw = draw_stick_weights({5, 4, 3}, conc, rng);
  CHECK_NOTHROW(sw.validate());
  CHECK(sw.s_star[4] == 1.0);
  CHECK(std::abs(sw.pi_star.sum() - 1.0) <= kSimplexTol);
  for (int k = 0; k < 5; ++k) {
    CHECK(std::abs(sw.w_theta.row(k).sum() - 1.0) <= kSimplexTol);
    for (int l = 0; l < 4; ++l) {
      double s = 0.0;
      for (double x : sw.w_phi_row(k, l)) s += x;
      CHECK(std::abs(s - 1.0) <= kSimplexTol);
    }
  }
  auto broken = sw;
  broken.pi_star[0] += 1e-6;
  CHECK_THROWS_AS(broken.validate(), std::logic_error);
}

TEST_CASE("leave-one-out mean and design rows") {
  CHECK(leave_one_out_mean(10.0, 4.0, 4) == Approx(2.0));
  CHECK(leave_one_out_mean(3.5, 3.5, 1) == 3.5);

  const DesignSpec d{2, 1, false};
  CHECK(d.dim_d() == 6);
  CHECK(d.dim_m() == 8);
  CHECK(d.dim_y() == 10);
  Eigen::VectorXd x(2), v(1);
  x << 0.5, -1.0;
  v << 2.0;
  const Eigen::VectorXd ry = d.row_y(1, 7, x, v, 0.1, 0.2, 0.3, 0.4);
  Eigen::VectorXd expect(10);
  expect << 1, 1, 7, 0.5, -1.0, 2.0, 0.1, 0.2, 0.3, 0.4;
  CHECK((ry - expect).norm() == 0.0);
  CHECK((d.row_m(1, 7, x, v, 0.1, 0.2) - expect.head(8)).norm() == 0.0);
  CHECK((d.row_d(1, 7, x, v) - expect.head(6)).norm() == 0.0);
}

TEST_CASE("stacked design uses leave-one-out summaries per cluster") {
  ClusterDataset data = testing::small_dataset({1, 3}, 5);
  const DesignSpec d = DesignSpec::for_dataset(data);
  const StackedDesign s = stack_design(data, d);
  REQUIRE(s.c_y.rows() == 4);
  CHECK(s.cluster_start == std::vector<int>{0, 1, 4});
  CHECK(s.c_y(0, d.idx_d_loo()) == s.d[0]);  // singleton cluster
  const double loo = (s.d[1] + s.d[3]) / 2.0;
  CHECK(s.c_y(2, d.idx_d_loo()) == Approx(loo));
  CHECK(s.c_y(2, d.idx_m_loo()) == Approx((s.m[1] + s.m[3]) / 2.0));
  CHECK(s.c_y(2, d.idx_size()) == 3.0);
}

TEST_CASE("dataset validation") {
  ClusterDataset data = testing::small_dataset({2, 2}, 1);
  CHECK_NOTHROW(data.validate());
  auto bad = data;
  bad.clusters[1].individuals.clear();
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("c2"), std::invalid_argument);
  bad = data;
  bad.clusters[0].treatment = 2;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = data;
  bad.clusters[0].individuals[1].x.resize(3);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = data;
  bad.binary_d = true;
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("binary"), std::invalid_argument);
}

TEST_CASE("empirical Bayes g") {
  CHECK(empirical_bayes_g(0.5, 101, 10) == Approx(9.0).epsilon(1e-14));
  CHECK(empirical_bayes_g(0.0, 50, 3) == 0.0);
  CHECK_THROWS(empirical_bayes_g(1.0, 50, 3));
}

TEST_CASE("g-prior least squares matches the normal equations") {
  Rng rng(21);
  Eigen::MatrixXd c(20, 3);
  Eigen::VectorXd y(20);
  for (int i = 0; i < 20; ++i) {
    c(i, 0) = 1.0;
    c(i, 1) = rng.normal();
    c(i, 2) = rng.uniform();
    y[i] = 0.5 - c(i, 1) + 2.0 * c(i, 2) + 0.3 * rng.normal();
  }
  const GPriorFit fit = fit_gprior(c, y, "outcome");
  const Eigen::MatrixXd ctc = c.transpose() * c;
  const Eigen::VectorXd coef = ctc.inverse() * (c.transpose() * y);
  const Eigen::VectorXd resid = y - c * coef;
  CHECK((fit.coef - coef).cwiseAbs().maxCoeff() < kRegressionOracleTol);
  CHECK(fit.sigma2 == Approx(resid.squaredNorm() / 17.0).epsilon(kRegressionOracleTol));
  const double tss = (y.array() - y.mean()).square().sum();
  CHECK(fit.r_squared == Approx(1.0 - resid.squaredNorm() / tss).epsilon(1e-12));
  CHECK(fit.g == Approx(fit.r_squared / (1.0 - fit.r_squared) * 16.0 / 3.0).epsilon(1e-12));

  Eigen::MatrixXd dup = c;
  dup.col(2) = 2.0 * dup.col(1);
  CHECK_THROWS_WITH(fit_gprior(dup, y, "mediator"), doctest::Contains("mediator"));
  CHECK_THROWS_WITH(fit_gprior(c.topRows(4), y.head(4), "confounder"),
                    doctest::Contains("confounder"));
}

TEST_CASE("g floor keeps the prior proper") {
  Eigen::MatrixXd c(6, 2);
  Eigen::VectorXd y(6);
  c.col(0).setOnes();
  c.col(1) << -1, 1, -1, 1, -1, 1;
  y << 1, 1, 2, 2, 3, 3;  // orthogonal to the slope, R^2 = 0
  const GPriorFit fit = fit_gprior(c, y, "outcome");
  CHECK(fit.g_raw == 0.0);
  CHECK(fit.g == Approx(1.0 / 6.0));
}

TEST_CASE("g-prior hyperparameters for a dataset") {
  const ClusterDataset data = testing::small_dataset({15, 20, 12, 18, 25, 16}, 9);
  const DesignSpec d = DesignSpec::for_dataset(data);
  const BaseMeasureHyper h = gprior_hyperparameters(data, d);
  CHECK_NOTHROW(h.validate());
  const StackedDesign s = stack_design(data, d);
  const GPriorFit fy = fit_gprior(s.c_y, s.y, "outcome");
  CHECK((h.y.mean - fy.coef).norm() < 1e-10);
  const Eigen::MatrixXd cov = fy.g * fy.sigma2 * (s.c_y.transpose() * s.c_y).inverse();
  CHECK((h.y.cov - cov).cwiseAbs().maxCoeff() < 1e-10 * cov.cwiseAbs().maxCoeff());
  CHECK(h.m.mean.size() == d.dim_m());
  CHECK(h.d.mean.size() == d.dim_d());
}

TEST_CASE("prior draws are deterministic in the seed") {
  const DesignSpec d{1, 1, false};
  const BaseMeasureHyper base = default_base_measure(d);
  ConcentrationParams conc;
  const PriorDraw a = sample_prior_draw({4, 3, 2}, conc, base, d, 77);
  const PriorDraw b = sample_prior_draw({4, 3, 2}, conc, base, d, 77);
  CHECK(a.weights.pi_star == b.weights.pi_star);
  CHECK(a.weights.w_phi == b.weights.w_phi);
  CHECK(a.theta[2].y.beta == b.theta[2].y.beta);
  CHECK(a.phi[1].var == b.phi[1].var);
  CHECK(a.zeta_y == b.zeta_y);
  const PriorDraw c = sample_prior_draw({4, 3, 2}, conc, base, d, 78);
  CHECK(c.weights.pi_star != a.weights.pi_star);
}

TEST_CASE("single-class truncation puts everyone in one class") {
  const DesignSpec d{1, 1, false};
  const BaseMeasureHyper base = default_base_measure(d);
  ConcentrationParams conc;
  for (std::uint64_t seed = 1; seed < 20; ++seed) {
    const PriorDraw p = sample_prior_draw({1, 1, 1}, conc, base, d, seed);
    CHECK(p.cluster_class == 0);
    for (int l : p.zeta_y) CHECK(l == 0);
    for (int m : p.zeta_x) CHECK(m == 0);
  }
}

TEST_CASE("theta tie rate matches the closed form at unit concentrations") {
  // Rao-Blackwellised over the class draws: given the weights, two units in
  // independently drawn clusters tie with probability sum_l omega_l^2.
  const DesignSpec d{1, 1, false};
  const BaseMeasureHyper base = default_base_measure(d);
  ConcentrationParams conc;
  const int n = 100000;
  std::vector<double> rate(n);
  for (int t = 0; t < n; ++t) {
    Rng rng(derive_seed(5, 99, t));
    const StickWeights w = draw_stick_weights({10, 10, 10}, conc, rng);
    const Eigen::VectorXd omega = w.w_theta.transpose() * w.pi_star;
    rate[t] = omega.squaredNorm();
  }
  const double se = testing::sd_of(rate) / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(testing::mean_of(rate) - 5.0 / 12.0) < 3.0 * se);
}

}  // TEST_SUITE
