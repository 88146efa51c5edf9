#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <doctest.h>

#include "caedp/hyperparameters.hpp"
#include "caedp/simbench.hpp"
#include "test_support.hpp"

using namespace caedp;
using caedp::testing::mean_of;

namespace {

// Analytic S7 effects. With mediator mean = -(confounder mean), the treatment
// shifts every D by delta(N) = 1.5 (2 + 0.5 N / 50) and every M by -delta(N).
// Cluster means include the unit's own value, so the spillover share of a
// mediator shift is (N - 1) / N.
std::array<double, kNumEstimands> s7_truth(int size_min, int size_max) {
  double te = 0.0, nde = 0.0, sme = 0.0;
  const int count = size_max - size_min + 1;
  for (int N = size_min; N <= size_max; ++N) {
    const double delta = 1.5 * (2.0 + 0.5 * N / 50.0);
    nde += 1.0 + 0.5 * delta + 0.5 * delta;
    sme += 0.5 * delta * (N - 1.0) / N;
    te += 1.0 + 2.0 * delta;
  }
  te /= count;
  nde /= count;
  sme /= count;
  std::array<double, kNumEstimands> out{};
  out[kTE] = te;
  out[kNDE] = nde;
  out[kNIE] = te - nde;
  out[kSME] = sme;
  out[kIME] = te - nde - sme;
  return out;
}

EstimandSummary summary(double mean, double lower, double upper) {
  EstimandSummary s;
  s.mean = mean;
  s.lower = lower;
  s.upper = upper;
  return s;
}

}  // namespace

TEST_SUITE("simbench") {

TEST_CASE("scenario presets match the checked-in constants") {
  std::ifstream in(std::string(CAEDP_FIXTURE_DIR) + "/scenarios.txt");
  REQUIRE(in.good());
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string id, size_law, outcome;
    int clusters, size_min, size_max, cov_mixture, noise;
    double mix_prob, rate1, rate2, cov_mix_prob, sigma2, a0, a1, a2, r0, r1, t_df;
    ss >> id >> clusters >> size_law >> size_min >> size_max >> mix_prob >> rate1 >> rate2 >>
        cov_mixture >> cov_mix_prob >> noise >> outcome >> sigma2 >> a0 >> a1 >> a2 >> r0 >> r1 >>
        t_df;
    REQUIRE(ss);
    const ScenarioSpec s = ScenarioSpec::preset(id);
    INFO(id);
    CHECK(s.id == id);
    CHECK(s.num_clusters == clusters);
    CHECK((s.size_law == SizeLaw::kPoissonMixture) == (size_law == "poisson_mixture"));
    CHECK(s.size_min == size_min);
    CHECK(s.size_max == size_max);
    CHECK(s.size_mix_prob == mix_prob);
    CHECK(s.size_rate1 == rate1);
    CHECK(s.size_rate2 == rate2);
    CHECK(s.covariate_mixture == (cov_mixture == 1));
    CHECK(s.covariate_mix_prob == cov_mix_prob);
    CHECK(s.noise_covariates == noise);
    CHECK(s.p() == 3 + noise);
    CHECK((s.outcome == OutcomeFamily::kLinear) == (outcome == "linear"));
    CHECK(s.sigma2 == sigma2);
    CHECK(s.alpha0 == a0);
    CHECK(s.alpha1 == a1);
    CHECK(s.alpha2 == a2);
    CHECK(s.rho0 == r0);
    CHECK(s.rho1 == r1);
    CHECK(s.t_df == t_df);
    ++rows;
  }
  CHECK(rows == 7);
  CHECK_THROWS_AS(ScenarioSpec::preset("S8"), std::invalid_argument);
}

TEST_CASE("spec validation") {
  ScenarioSpec s = ScenarioSpec::preset("S1");
  s.size_min = 0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = ScenarioSpec::preset("S1");
  s.sigma2 = 0.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("outcome group and component weights sum to one") {
  CHECK(std::accumulate(kOutcomeGroupProbs.begin(), kOutcomeGroupProbs.end(), 0.0) ==
        doctest::Approx(1.0));
  for (const auto& row : kOutcomeComponentWeights) {
    CHECK(std::accumulate(row.begin(), row.end(), 0.0) == doctest::Approx(1.0));
  }
}

TEST_CASE("joint mediator covariance is positive definite") {
  const ScenarioSpec s = ScenarioSpec::preset("S1");
  for (int n : {1, 2, 20, 40}) {
    const Eigen::MatrixXd cov = s.joint_covariance(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
    CHECK(cov.diagonal().isApprox(Eigen::VectorXd::Constant(4 * n, 1.0)));
  }
}

TEST_CASE("S7 outcome location at zero covariates") {
  ScenarioSampler sampler(ScenarioSpec::preset("S7"));
  const Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
  CHECK(sampler.linear_location(1, 0, 0.0, 0.0, 0.0, 0.0, x) == doctest::Approx(2.0));
  CHECK(sampler.linear_location(0, 0, 0.0, 0.0, 0.0, 0.0, x) == doctest::Approx(1.0));
  CHECK(sampler.linear_location(1, 10, 1.0, 1.0, 1.0, 1.0, x) == doctest::Approx(5.0));
}

TEST_CASE("mediator noise has unit variance and the stated correlation") {
  const ScenarioSpec spec = ScenarioSpec::preset("S1");
  ScenarioSampler sampler(spec);
  Rng rng(404);
  const int n = 100000;
  std::vector<double> ed, em;
  ed.reserve(n);
  em.reserve(n);
  for (int c = 0; c < n; ++c) {
    const PotentialCluster pc = sampler.draw(rng);
    // One unit per cluster keeps the pairs independent.
    const Eigen::VectorXd x = pc.x.row(0).transpose();
    const double mu = sampler.confounder_mean(1, pc.N, x, pc.v);
    ed.push_back(pc.dm(0, 0) - mu);
    em.push_back(pc.dm(0, 2) + mu);
  }
  const double md = mean_of(ed), mm = mean_of(em);
  double vd = 0.0, vm = 0.0, cdm = 0.0;
  for (int i = 0; i < n; ++i) {
    vd += (ed[i] - md) * (ed[i] - md);
    vm += (em[i] - mm) * (em[i] - mm);
    cdm += (ed[i] - md) * (em[i] - mm);
  }
  vd /= n - 1;
  vm /= n - 1;
  const double corr = cdm / (n - 1) / std::sqrt(vd * vm);
  CHECK(std::abs(md) < 4.0 / std::sqrt(n));
  CHECK(std::abs(vd - spec.sigma2) < 4.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(vm - spec.sigma2) < 4.0 * std::sqrt(2.0 / n));
  const double se = (1.0 - spec.alpha0 * spec.alpha0) / std::sqrt(n);
  CHECK(std::abs(corr - spec.alpha0) < 3.0 * se);
}

TEST_CASE("baseline covariates and cluster sizes") {
  ScenarioSampler sampler(ScenarioSpec::preset("S1"));
  Rng rng(6);
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  double cross = 0.0;
  int units = 0;
  for (int c = 0; c < 4000; ++c) {
    const PotentialCluster pc = sampler.draw(rng);
    REQUIRE((pc.N >= 20 && pc.N <= 40));
    const Eigen::Vector3d x = pc.x.row(0).transpose();
    sum += x;
    cross += (x[0] - 0.5) * (x[1] - 0.0);
    ++units;
  }
  const Eigen::Vector3d mean = sum / units;
  CHECK(std::abs(mean[0] - 0.5) < 0.07);
  CHECK(std::abs(mean[1] - 0.0) < 0.07);
  CHECK(std::abs(mean[2] + 0.5) < 0.07);
  CHECK(std::abs(cross / units - 0.2) < 0.07);
}

TEST_CASE("generated datasets are valid and seed deterministic") {
  for (const char* id : {"S1", "S2", "S4", "S7"}) {
    const ScenarioSpec spec = ScenarioSpec::preset(id);
    Rng a(3), b(3);
    const ClusterDataset x = generate_dataset(spec, a);
    const ClusterDataset y = generate_dataset(spec, b);
    INFO(id);
    CHECK_NOTHROW(x.validate());
    CHECK(x.num_clusters() == spec.num_clusters);
    CHECK(x.p == spec.p());
    CHECK(x.q == 1);
    CHECK(x.clusters.front().id == "c1");
    for (std::size_t i = 0; i < x.clusters.size(); ++i) {
      REQUIRE(x.clusters[i].size() >= 1);
      CHECK(x.clusters[i].size() == y.clusters[i].size());
      CHECK(x.clusters[i].individuals.back().y == y.clusters[i].individuals.back().y);
    }
  }
}

TEST_CASE("null scenario has zero true effects") {
  ScenarioSpec spec = ScenarioSpec::preset("S1");
  spec.mediator_treatment_scale = 0.0;
  spec.outcome_treatment_scale = 0.0;
  Rng rng(15);
  const TruthValues t = truth_oracle(spec, 20000, rng);
  for (int e = 0; e < kNumEstimands; ++e) {
    INFO(kEstimandNames[e]);
    CHECK(std::abs(t.value[e]) < 4.0 * t.se[e]);
  }
}

TEST_CASE("S7 truth matches the analytic linear expectation") {
  const ScenarioSpec spec = ScenarioSpec::preset("S7");
  Rng rng(21);
  const TruthValues t = truth_oracle(spec, 100000, rng);
  const auto exact = s7_truth(spec.size_min, spec.size_max);
  CHECK(exact[kTE] == doctest::Approx(7.9).epsilon(1e-12));
  CHECK(std::abs(t.value[kTE] - exact[kTE]) < 2.0 * t.se[kTE]);
  for (int e = 0; e < kNumEstimands; ++e) {
    INFO(kEstimandNames[e]);
    CHECK(std::abs(t.value[e] - exact[e]) < 3.0 * t.se[e]);
    CHECK(std::abs(t.value[kTE] - t.value[kNDE] - t.value[kNIE]) < 1e-10);
  }
}

TEST_CASE("doubling the truth clusters halves the squared standard error") {
  const ScenarioSpec spec = ScenarioSpec::preset("S7");
  Rng a(1), b(2);
  const TruthValues small = truth_oracle(spec, 10000, a);
  const TruthValues large = truth_oracle(spec, 20000, b);
  const double ratio = large.se[kTE] * large.se[kTE] / (small.se[kTE] * small.se[kTE]);
  CHECK(ratio > 0.4);
  CHECK(ratio < 0.6);
  CHECK_THROWS_AS(truth_oracle(spec, 1, a), std::invalid_argument);
}

TEST_CASE("evaluate with exact point estimates") {
  std::array<double, kNumEstimands> truth{2.0, 1.0, 1.0, 0.5, 0.5};
  PosteriorSummary s;
  for (int e = 0; e < kNumEstimands; ++e) s[e] = summary(truth[e], truth[e], truth[e]);
  const EvalReport r = evaluate({s, s, s}, {truth, truth, truth});
  for (const auto& row : r.rows) {
    CHECK(row.bias == 0.0);
    CHECK(row.rmse == 0.0);
    CHECK(row.al == 0.0);
    CHECK(row.cp == 1.0);
    CHECK(row.replicates == 3);
  }
}

TEST_CASE("evaluate with errors of plus and minus one") {
  std::array<double, kNumEstimands> truth{};
  PosteriorSummary up, down;
  for (int e = 0; e < kNumEstimands; ++e) {
    up[e] = summary(1.0, 0.5, 1.5);
    down[e] = summary(-1.0, -2.0, 0.5);
  }
  const EvalReport r = evaluate({up, down}, {truth, truth});
  CHECK(r.rows[kSME].bias == doctest::Approx(0.0));
  CHECK(r.rows[kSME].rmse == doctest::Approx(1.0));
  CHECK(r.rows[kSME].al == doctest::Approx(1.75));
  CHECK(r.rows[kSME].cp == doctest::Approx(0.5));
}

TEST_CASE("evaluate matches a hand computation on five replicates") {
  // point, lower, upper, truth per replicate
  const double rows[5][4] = {{1.2, 0.4, 2.0, 1.0},
                             {0.7, 0.1, 1.1, 1.0},
                             {1.9, 1.2, 2.8, 1.0},
                             {0.95, 0.3, 1.5, 0.9},
                             {1.4, 1.05, 1.9, 1.0}};
  std::vector<PosteriorSummary> summaries(5);
  std::vector<std::array<double, kNumEstimands>> truths(5);
  for (int r = 0; r < 5; ++r) {
    summaries[r][kNIE] = summary(rows[r][0], rows[r][1], rows[r][2]);
    truths[r][kNIE] = rows[r][3];
  }
  const EvalReport rep = evaluate(summaries, truths);
  // errors 0.2, -0.3, 0.9, 0.05, 0.4; widths 1.6, 1.0, 1.6, 1.2, 0.85;
  // covered in replicates 1, 2, 4.
  CHECK(rep.rows[kNIE].bias == doctest::Approx(1.25 / 5.0));
  CHECK(rep.rows[kNIE].rmse == doctest::Approx(std::sqrt((0.04 + 0.09 + 0.81 + 0.0025 + 0.16) / 5.0)));
  CHECK(rep.rows[kNIE].al == doctest::Approx(6.25 / 5.0));
  CHECK(rep.rows[kNIE].cp == doctest::Approx(0.6));
  const std::string table = rep.table();
  CHECK(table.find("Bias") != std::string::npos);
  CHECK(table.find("SME") != std::string::npos);
  CHECK(table.find("NIE") != std::string::npos);
  CHECK(table.find("0.6000") != std::string::npos);
}

TEST_CASE("evaluate rejects mismatched or empty input") {
  PosteriorSummary s;
  CHECK_THROWS_AS(evaluate({s, s}, {std::array<double, kNumEstimands>{}}), std::invalid_argument);
  CHECK_THROWS_AS(evaluate({}, {}), std::invalid_argument);
}

TEST_CASE("LPML arithmetic") {
  Eigen::MatrixXd two(2, 1);
  two << std::log(1.0), std::log(3.0);
  CHECK(compute_lpml(two) == doctest::Approx(std::log(1.5)).epsilon(1e-14));
  Eigen::MatrixXd reordered(2, 1);
  reordered << std::log(3.0), std::log(1.0);
  CHECK(compute_lpml(reordered) == compute_lpml(two));

  const double c = 0.37;
  const Eigen::MatrixXd constant = Eigen::MatrixXd::Constant(6, 4, std::log(c));
  CHECK(compute_lpml(constant) == doctest::Approx(4.0 * std::log(c)).epsilon(1e-13));

  Rng rng(2);
  Eigen::MatrixXd random(7, 5);
  for (int t = 0; t < 7; ++t) {
    for (int j = 0; j < 5; ++j) random(t, j) = -800.0 + rng.normal();
  }
  Eigen::MatrixXd shuffled = random;
  shuffled.row(0).swap(shuffled.row(6));
  shuffled.row(2).swap(shuffled.row(3));
  CHECK(compute_lpml(shuffled) == doctest::Approx(compute_lpml(random)).epsilon(1e-13));
  CHECK(std::isfinite(compute_lpml(random)));
}

TEST_CASE("LPML errors") {
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(3, 2);
  bad(1, 1) = -std::numeric_limits<double>::infinity();
  try {
    compute_lpml(bad);
    FAIL("expected an error");
  } catch (const std::domain_error& e) {
    CHECK(std::string(e.what()).find("observation 1") != std::string::npos);
  }
  CHECK_THROWS_AS(compute_lpml(Eigen::MatrixXd(0, 3)), std::invalid_argument);
  CHECK_THROWS_AS(compute_lpml(PosteriorSample{DesignSpec{}, {CaEdpState{}}, {}}),
                  std::invalid_argument);
}

TEST_CASE("parametric baseline is the single-class chain") {
  const ScenarioSpec spec = ScenarioSpec::preset("S7");
  Rng rng(8);
  const ClusterDataset data = generate_dataset(spec, rng);
  const DesignSpec design = DesignSpec::for_dataset(data);
  const BaseMeasureHyper base = gprior_hyperparameters(data, design);
  McmcConfig cfg;
  cfg.burn_in = 30;
  cfg.keep = 10;
  cfg.seed = 5;
  const PosteriorSample baseline = fit_parametric_baseline(data, design, cfg, base);
  cfg.truncation = TruncationLevels{1, 1, 1};
  const PosteriorSample single = run_chain(data, design, cfg, base);
  REQUIRE(baseline.keep() == 10);
  for (int t = 0; t < 10; ++t) {
    CHECK(baseline.states[t].levels().L == 1);
    CHECK(baseline.states[t].theta[0].y.beta == single.states[t].theta[0].y.beta);
  }
  CHECK(compute_lpml(baseline) == compute_lpml(single));
}

TEST_CASE("small simulation study is deterministic across thread counts") {
  StudyConfig cfg;
  cfg.spec = ScenarioSpec::preset("S7");
  cfg.spec.num_clusters = 12;
  cfg.replicates = 2;
  cfg.mcmc.burn_in = 20;
  cfg.mcmc.keep = 8;
  cfg.mcmc.truncation = TruncationLevels{3, 3, 3};
  cfg.gcomp.synthetic_clusters = 20;
  cfg.gcomp.gamma_steps = 100;
  cfg.gcomp.gamma_burn = 10;
  cfg.truth_clusters = 2000;
  cfg.seed = 77;
  const StudyResult one = run_simulation_study(cfg);
  cfg.threads = 2;
  const StudyResult two = run_simulation_study(cfg);
  REQUIRE(one.summaries.size() == 2);
  for (int r = 0; r < 2; ++r) CHECK(one.summaries[r][kSME].mean == two.summaries[r][kSME].mean);
  CHECK(one.report.rows[kNIE].replicates == 2);
  CHECK(one.truth.value[kTE] == two.truth.value[kTE]);
  cfg.replicates = 0;
  CHECK_THROWS_AS(run_simulation_study(cfg), std::invalid_argument);
}

}  // TEST_SUITE
