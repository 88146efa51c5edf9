#include "caedp/simbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <Eigen/Dense>

#include "caedp/hyperparameters.hpp"
#include "caedp/parallel.hpp"

namespace caedp {
namespace {

Eigen::Matrix3d equicorrelated3(double r) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Constant(r);
  m.diagonal().setOnes();
  return m;
}

// Symmetric square root of a PSD matrix; throws when an eigenvalue is
// clearly negative.
Eigen::Matrix4d psd_sqrt(const Eigen::Matrix4d& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(m);
  Eigen::Vector4d ev = es.eigenvalues();
  if (ev.minCoeff() < -1e-12) throw std::domain_error("matrix is not positive semidefinite");
  ev = ev.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

ScenarioSpec ScenarioSpec::preset(const std::string& id) {
  ScenarioSpec s;
  s.id = id;
  if (id == "S1") return s;
  if (id == "S2") {
    s.size_law = SizeLaw::kPoissonMixture;
    s.covariate_mixture = true;
    return s;
  }
  if (id == "S3") {
    s.noise_covariates = 5;
    return s;
  }
  if (id == "S4") {
    s.noise_covariates = 12;
    return s;
  }
  if (id == "S5") {
    s.num_clusters = 20;
    return s;
  }
  if (id == "S6") {
    s.num_clusters = 80;
    return s;
  }
  if (id == "S7") {
    s.outcome = OutcomeFamily::kLinear;
    return s;
  }
  throw std::invalid_argument("unknown scenario '" + id + "' (expected S1..S7)");
}

void ScenarioSpec::validate() const {
  if (num_clusters < 1) throw std::invalid_argument("scenario needs at least one cluster");
  if (size_law == SizeLaw::kUniform && !(size_min >= 1 && size_max >= size_min)) {
    throw std::invalid_argument("cluster size range must satisfy 1 <= min <= max");
  }
  if (size_law == SizeLaw::kPoissonMixture &&
      !(size_rate1 > 0.0 && size_rate2 > 0.0 && size_mix_prob >= 0.0 && size_mix_prob <= 1.0)) {
    throw std::invalid_argument("Poisson size mixture parameters are invalid");
  }
  if (noise_covariates < 0) throw std::invalid_argument("noise covariate count must be >= 0");
  if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
  if (!(t_df > 0.0)) throw std::invalid_argument("t degrees of freedom must be positive");
}

Eigen::Matrix4d ScenarioSpec::r_block() const {
  Eigen::Matrix4d r;
  r << 1, alpha1, alpha0, alpha2,  //
      alpha1, 1, alpha2, alpha0,   //
      alpha0, alpha2, 1, alpha1,   //
      alpha2, alpha0, alpha1, 1;
  return r;
}

Eigen::Matrix4d ScenarioSpec::s_block() const {
  Eigen::Matrix4d s;
  s << rho0, 0, rho1, 0,  //
      0, rho0, 0, rho1,   //
      rho1, 0, rho0, 0,   //
      0, rho1, 0, rho0;
  return s;
}

Eigen::MatrixXd ScenarioSpec::joint_covariance(int n) const {
  const Eigen::Matrix4d r = r_block(), s = s_block();
  Eigen::MatrixXd cov(4 * n, 4 * n);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) cov.block<4, 4>(4 * j, 4 * k) = sigma2 * (j == k ? r : s);
  }
  return cov;
}

ScenarioSampler::ScenarioSampler(ScenarioSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  const Eigen::Matrix4d r = spec_.sigma2 * spec_.r_block();
  const Eigen::Matrix4d s = spec_.sigma2 * spec_.s_block();
  try {
    // Cov = I (x) (R - S) + J (x) S: independent unit noise plus a shared term.
    within_factor_ = psd_sqrt(r - s);
    common_factor_ = psd_sqrt(s);
  } catch (const std::domain_error&) {
    structured_ = false;
  }
  x_chol_a_ = equicorrelated3(0.2).llt().matrixL();
  x_chol_b_ = equicorrelated3(0.4).llt().matrixL();
}

double ScenarioSampler::confounder_mean(int a, int N, const Eigen::VectorXd& x, double v) const {
  const double s = spec_.mediator_treatment_scale;
  return 1.5 * (-2.0 + 2.0 * a * s + (0.5 + 0.5 * a * s) * N / 50.0 + 0.5 * x[0] - 0.5 * x[1] +
                x[1] + 0.5 * v);
}

void ScenarioSampler::sample_mediators(PotentialCluster& c, Rng& rng) {
  const int N = c.N;
  c.dm.resize(N, 4);
  Eigen::VectorXd noise(4 * N);
  if (structured_) {
    Eigen::Vector4d shared, e;
    for (int t = 0; t < 4; ++t) shared[t] = rng.normal();
    shared = common_factor_ * shared;
    for (int j = 0; j < N; ++j) {
      for (int t = 0; t < 4; ++t) e[t] = rng.normal();
      noise.segment<4>(4 * j) = within_factor_ * e + shared;
    }
  } else {
    auto it = dense_factor_.find(N);
    if (it == dense_factor_.end()) {
      Eigen::LLT<Eigen::MatrixXd> llt(spec_.joint_covariance(N));
      if (llt.info() != Eigen::Success) {
        throw std::domain_error("joint mediator covariance is not positive definite");
      }
      it = dense_factor_.emplace(N, llt.matrixL()).first;
    }
    Eigen::VectorXd e(4 * N);
    for (int t = 0; t < 4 * N; ++t) e[t] = rng.normal();
    noise = it->second * e;
  }
  for (int j = 0; j < N; ++j) {
    const Eigen::VectorXd xj = c.x.row(j).transpose();
    const double d1 = confounder_mean(1, N, xj, c.v);
    const double d0 = confounder_mean(0, N, xj, c.v);
    c.dm(j, 0) = d1 + noise[4 * j + 0];
    c.dm(j, 1) = d0 + noise[4 * j + 1];
    c.dm(j, 2) = -d1 + noise[4 * j + 2];
    c.dm(j, 3) = -d0 + noise[4 * j + 3];
  }
}

PotentialCluster ScenarioSampler::draw(Rng& rng) {
  PotentialCluster c;
  if (spec_.size_law == SizeLaw::kUniform) {
    const int span = spec_.size_max - spec_.size_min + 1;
    c.N = spec_.size_min + std::min(span - 1, static_cast<int>(rng.uniform() * span));
  } else {
    const double rate = rng.bernoulli(spec_.size_mix_prob) ? spec_.size_rate1 : spec_.size_rate2;
    do {
      c.N = rng.poisson(rate);
    } while (c.N == 0);
  }
  c.v = rng.normal(3.0 * c.N / 50.0, 1.0);
  c.treatment = rng.bernoulli(0.5) ? 1 : 0;
  const double u = rng.uniform();
  c.group = u < kOutcomeGroupProbs[0] ? 0 : (u < kOutcomeGroupProbs[0] + kOutcomeGroupProbs[1] ? 1 : 2);

  Eigen::Vector3d mean(0.5, 0.0, -0.5);
  const Eigen::Matrix3d* chol = &x_chol_a_;
  if (spec_.covariate_mixture) {
    if (rng.bernoulli(spec_.covariate_mix_prob)) {
      mean << -1.0, -1.5, -0.5;
    } else {
      mean << 1.5, 1.0, 0.5;
      chol = &x_chol_b_;
    }
  }
  c.x.resize(c.N, spec_.p());
  for (int j = 0; j < c.N; ++j) {
    Eigen::Vector3d z(rng.normal(), rng.normal(), rng.normal());
    c.x.row(j).head<3>() = (mean + *chol * z).transpose();
    for (int t = 3; t < spec_.p(); ++t) c.x(j, t) = rng.normal();
  }
  sample_mediators(c, rng);
  return c;
}

std::array<double, 8> ScenarioSampler::tmix_locations(int a, int N, double d_bar, double m_bar,
                                                      double d, double m,
                                                      const Eigen::VectorXd& x, double v) const {
  const double sT = spec_.outcome_treatment_scale, sD = spec_.outcome_d_scale,
               sM = spec_.outcome_m_scale;
  const double A = a * sT;
  const double x1 = x[0], x2 = x[1], x3 = x[2];
  const double quad = 0.1 * x1 * x1 + 0.1 * x2 * x2 + 0.1 * x1 * x2;
  std::array<double, 8> t{};
  t[0] = 1.0 + A + (0.5 + 0.5 * A) * N / 50.0 + sD * 0.5 * d_bar - sM * 0.5 * m_bar + sD * d -
         sM * m + 0.3 * x1 * A - 0.3 * x2 * A + quad + 0.5 * x3 + 0.5 * v;
  t[1] = -1.0 - A - (0.5 + 0.5 * A) * N / 50.0 - sD * 0.5 * d_bar + sM * 0.5 * m_bar - sD * d +
         sM * m - 0.3 * x1 * A + 0.3 * x2 * A - quad + 0.5 * x3 + 0.5 * v;
  t[2] = 1.0 + A + (0.3 + 0.3 * A) * N / 50.0 + sD * 0.3 * d_bar - sM * 0.3 * m_bar + sD * d -
         sM * m + 0.1 * x1 * A - 0.1 * x2 * A + quad + 0.3 * x3 + 0.3 * v;
  t[3] = -1.0 - A - (0.3 + 0.3 * A) * N / 50.0 - sD * 0.3 * d_bar + sM * 0.3 * m_bar - sD * d +
         sM * m - 0.1 * x1 * A + 0.1 * x2 * A - quad + 0.3 * x3 + 0.3 * v;
  t[4] = -0.5 * t[0];
  t[5] = -1.0 * t[1];
  t[6] = -1.5 * t[2];
  t[7] = -2.0 * t[3];
  return t;
}

double ScenarioSampler::linear_location(int a, int N, double d_bar, double m_bar, double d,
                                        double m, const Eigen::VectorXd& x) const {
  const double sT = spec_.outcome_treatment_scale, sD = spec_.outcome_d_scale,
               sM = spec_.outcome_m_scale;
  return 1.0 + sT * a + sD * 0.5 * d_bar - sM * 0.5 * m_bar + sD * 0.5 * d - sM * 0.5 * m +
         0.3 * x[0] - 0.3 * x[1] + 0.3 * x[2] + 0.3 * N;
}

double ScenarioSampler::regime_mean(const PotentialCluster& c, int a, int a1, int a2) const {
  const int N = c.N;
  const int d_col = a == 1 ? 0 : 1;
  const int m1_col = a1 == 1 ? 2 : 3;
  const int m2_col = a2 == 1 ? 2 : 3;
  const double d_bar = c.dm.col(d_col).mean();
  const double m2_total = c.dm.col(m2_col).sum();
  double acc = 0.0;
  for (int j = 0; j < N; ++j) {
    const double m_own = c.dm(j, m1_col);
    const double m_bar = (m_own + m2_total - c.dm(j, m2_col)) / N;
    const Eigen::VectorXd xj = c.x.row(j).transpose();
    if (spec_.outcome == OutcomeFamily::kLinear) {
      acc += linear_location(a, N, d_bar, m_bar, c.dm(j, d_col), m_own, xj);
    } else {
      const auto t = tmix_locations(a, N, d_bar, m_bar, c.dm(j, d_col), m_own, xj, c.v);
      for (int g = 0; g < 3; ++g) {
        for (int k = 0; k < 8; ++k) acc += kOutcomeGroupProbs[g] * kOutcomeComponentWeights[g][k] * t[k];
      }
    }
  }
  return acc / N;
}

ClusterDataset generate_dataset(const ScenarioSpec& spec, Rng& rng) {
  ScenarioSampler sampler(spec);
  ClusterDataset data;
  data.p = spec.p();
  data.q = spec.q();
  data.binary_d = false;
  std::vector<double> comp(8);
  for (int i = 0; i < spec.num_clusters; ++i) {
    const PotentialCluster c = sampler.draw(rng);
    ClusterRecord rec;
    rec.id = "c" + std::to_string(i + 1);
    rec.treatment = c.treatment;
    rec.v = Eigen::VectorXd::Constant(1, c.v);
    const int a = c.treatment;
    const int d_col = a == 1 ? 0 : 1, m_col = a == 1 ? 2 : 3;
    const double d_bar = c.dm.col(d_col).mean();
    const double m_bar = c.dm.col(m_col).mean();
    for (int k = 0; k < 8; ++k) comp[k] = kOutcomeComponentWeights[c.group][k];
    for (int j = 0; j < c.N; ++j) {
      Individual ind;
      ind.x = c.x.row(j).transpose();
      ind.d = c.dm(j, d_col);
      ind.m = c.dm(j, m_col);
      if (spec.outcome == OutcomeFamily::kLinear) {
        ind.y = rng.normal(sampler.linear_location(a, c.N, d_bar, m_bar, ind.d, ind.m, ind.x), 1.0);
      } else {
        const auto t = sampler.tmix_locations(a, c.N, d_bar, m_bar, ind.d, ind.m, ind.x, c.v);
        ind.y = t[rng.categorical(comp)] + rng.student_t(spec.t_df);
      }
      rec.individuals.push_back(std::move(ind));
    }
    data.clusters.push_back(std::move(rec));
  }
  return data;
}

TruthValues truth_oracle(const ScenarioSpec& spec, long n_clusters, Rng& rng) {
  if (n_clusters < 2) throw std::invalid_argument("truth oracle needs at least two clusters");
  ScenarioSampler sampler(spec);
  std::array<double, kNumEstimands> mean{}, m2{};
  for (long c = 0; c < n_clusters; ++c) {
    const PotentialCluster pc = sampler.draw(rng);
    const RegimeMeans r{sampler.regime_mean(pc, 1, 1, 1), sampler.regime_mean(pc, 1, 1, 0),
                        sampler.regime_mean(pc, 1, 0, 0), sampler.regime_mean(pc, 0, 0, 0)};
    const EstimandDraw e = estimands_from_regimes(r);
    for (int k = 0; k < kNumEstimands; ++k) {
      const double delta = e.value[k] - mean[k];
      mean[k] += delta / static_cast<double>(c + 1);
      m2[k] += delta * (e.value[k] - mean[k]);
    }
  }
  TruthValues t;
  t.clusters = n_clusters;
  for (int k = 0; k < kNumEstimands; ++k) {
    t.value[k] = mean[k];
    t.se[k] = std::sqrt(m2[k] / static_cast<double>(n_clusters - 1) / static_cast<double>(n_clusters));
  }
  return t;
}

PosteriorSample fit_parametric_baseline(const ClusterDataset& data, const DesignSpec& design,
                                        McmcConfig config, const BaseMeasureHyper& base) {
  config.truncation = TruncationLevels{1, 1, 1};
  return run_chain(data, design, config, base);
}

std::string EvalReport::table(const std::vector<Estimand>& which) const {
  std::string out = "Estimand        Bias        RMSE          AL          CP\n";
  char buf[160];
  for (Estimand e : which) {
    const auto& r = rows[e];
    std::snprintf(buf, sizeof buf, "%-8s %11.4f %11.4f %11.4f %11.4f\n", kEstimandNames[e], r.bias,
                  r.rmse, r.al, r.cp);
    out += buf;
  }
  return out;
}

EvalReport evaluate(const std::vector<PosteriorSummary>& summaries,
                    const std::vector<std::array<double, kNumEstimands>>& truths) {
  if (summaries.size() != truths.size()) {
    throw std::invalid_argument("evaluate: " + std::to_string(summaries.size()) +
                                " replicate summaries but " + std::to_string(truths.size()) +
                                " truths");
  }
  if (summaries.empty()) throw std::invalid_argument("evaluate: no replicates");
  EvalReport report;
  const double n = static_cast<double>(summaries.size());
  for (int e = 0; e < kNumEstimands; ++e) {
    auto& row = report.rows[e];
    row.replicates = static_cast<int>(summaries.size());
    double bias = 0.0, sq = 0.0, len = 0.0, cover = 0.0;
    for (std::size_t r = 0; r < summaries.size(); ++r) {
      const auto& s = summaries[r][e];
      const double err = s.mean - truths[r][e];
      bias += err;
      sq += err * err;
      len += s.upper - s.lower;
      if (s.lower <= truths[r][e] && truths[r][e] <= s.upper) cover += 1.0;
    }
    row.bias = bias / n;
    row.rmse = std::sqrt(sq / n);
    row.al = len / n;
    row.cp = cover / n;
  }
  return report;
}

double compute_lpml(const Eigen::MatrixXd& loglik) {
  const auto T = loglik.rows();
  if (T == 0) throw std::invalid_argument("LPML needs at least one iteration");
  double total = 0.0;
  for (Eigen::Index j = 0; j < loglik.cols(); ++j) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < T; ++t) {
      const double ll = loglik(t, j);
      if (std::isnan(ll) || ll == -std::numeric_limits<double>::infinity()) {
        throw std::domain_error("LPML: observation " + std::to_string(j) +
                                " has zero likelihood at iteration " + std::to_string(t));
      }
      mx = std::max(mx, -ll);
    }
    double s = 0.0;
    for (Eigen::Index t = 0; t < T; ++t) s += std::exp(-loglik(t, j) - mx);
    total += std::log(static_cast<double>(T)) - (mx + std::log(s));
  }
  return total;
}

double compute_lpml(const PosteriorSample& posterior) {
  if (posterior.loglik.rows() != posterior.keep()) {
    throw std::invalid_argument("posterior has no recorded log-likelihood matrix");
  }
  return compute_lpml(posterior.loglik);
}

StudyResult run_simulation_study(const StudyConfig& config) {
  config.spec.validate();
  config.mcmc.validate();
  config.gcomp.validate();
  if (config.replicates < 1) throw std::invalid_argument("replicates must be positive");
  StudyResult result;
  Rng truth_rng(derive_seed(config.seed, Stream::kTruth));
  result.truth = truth_oracle(config.spec, config.truth_clusters, truth_rng);
  result.summaries.resize(config.replicates);
  if (config.keep_draws) result.draws.resize(config.replicates);

  parallel_for(config.replicates, config.threads, [&](int r) {
    Rng data_rng(derive_seed(config.seed, Stream::kDataset, r));
    const ClusterDataset data = generate_dataset(config.spec, data_rng);
    const DesignSpec design = DesignSpec::for_dataset(data);
    const BaseMeasureHyper base = gprior_hyperparameters(data, design);
    McmcConfig mcmc = config.mcmc;
    mcmc.seed = derive_seed(config.seed, Stream::kReplicate, r);
    mcmc.record_loglik = false;
    const PosteriorSample posterior = config.model == ModelKind::kParametric
                                          ? fit_parametric_baseline(data, design, mcmc, base)
                                          : run_chain(data, design, mcmc, base);
    GcompConfig gc = config.gcomp;
    gc.threads = 1;
    EstimandDraws draws =
        gcompute_posterior(posterior, data, gc, derive_seed(config.seed, Stream::kGcompute, r));
    result.summaries[r] = aggregate_posterior(draws);
    if (config.keep_draws) result.draws[r] = std::move(draws);
  });
  const std::vector<std::array<double, kNumEstimands>> truths(config.replicates,
                                                              result.truth.value);
  result.report = evaluate(result.summaries, truths);
  return result;
}

}  // namespace caedp
