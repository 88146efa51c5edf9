#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "caedp/dataset.hpp"
#include "caedp/gcomp.hpp"
#include "caedp/gibbs.hpp"
#include "caedp/random.hpp"

namespace caedp {

enum class OutcomeFamily { kTMixture, kLinear };
enum class SizeLaw { kUniform, kPoissonMixture };

/// Data-generating configuration of one simulation scenario. The effect
/// scales multiply groups of terms and default to 1; they exist to build
/// null and single-pathway variants.
struct ScenarioSpec {
  std::string id = "S1";
  int num_clusters = 40;

  SizeLaw size_law = SizeLaw::kUniform;
  int size_min = 20;
  int size_max = 40;
  double size_mix_prob = 0.8;  // P(first Poisson component)
  double size_rate1 = 15.0;
  double size_rate2 = 30.0;

  bool covariate_mixture = false;  // per-cluster two-component X law
  double covariate_mix_prob = 0.8;
  int noise_covariates = 0;

  double sigma2 = 1.0;
  double alpha0 = 0.05;
  double alpha1 = 0.03;
  double alpha2 = 0.05;
  double rho0 = 0.03;
  double rho1 = 0.0;

  OutcomeFamily outcome = OutcomeFamily::kTMixture;
  double t_df = 1.5;

  double mediator_treatment_scale = 1.0;  // A terms of the confounder/mediator means
  double outcome_treatment_scale = 1.0;   // A terms of the outcome locations
  double outcome_d_scale = 1.0;           // D and D-bar terms of the outcome
  double outcome_m_scale = 1.0;           // M and M-bar terms of the outcome

  int p() const { return 3 + noise_covariates; }
  int q() const { return 1; }

  /// S1..S7 with their published constants.
  static ScenarioSpec preset(const std::string& id);
  void validate() const;

  Eigen::Matrix4d r_block() const;
  Eigen::Matrix4d s_block() const;
  /// sigma^2 (I (x) R + (J - I) (x) S) for a cluster of size n, ordered
  /// (D_j(1), D_j(0), M_j(1), M_j(0)) unit by unit.
  Eigen::MatrixXd joint_covariance(int n) const;
};

/// One cluster with both treatment worlds of the confounder and mediator.
struct PotentialCluster {
  int N = 0;
  int treatment = 0;
  int group = 0;        // latent outcome group (t-mixture scenarios)
  double v = 0.0;
  Eigen::MatrixXd x;    // N x p
  Eigen::MatrixXd dm;   // N x 4: D(1), D(0), M(1), M(0)
};

/// Draws potential clusters. Keeps a per-size factor cache, so one instance
/// should not be shared across threads.
class ScenarioSampler {
 public:
  explicit ScenarioSampler(ScenarioSpec spec);

  PotentialCluster draw(Rng& rng);
  const ScenarioSpec& spec() const { return spec_; }

  /// Mean of the confounder in world a (the mediator mean is its negative).
  double confounder_mean(int a, int N, const Eigen::VectorXd& x, double v) const;

  /// Cluster average of the expected outcome under regime (a, a1, a2).
  double regime_mean(const PotentialCluster& c, int a, int a1, int a2) const;

  /// Outcome location(s) of unit j given the realised cluster vectors.
  std::array<double, 8> tmix_locations(int a, int N, double d_bar, double m_bar, double d,
                                       double m, const Eigen::VectorXd& x, double v) const;
  double linear_location(int a, int N, double d_bar, double m_bar, double d, double m,
                         const Eigen::VectorXd& x) const;

 private:
  void sample_mediators(PotentialCluster& c, Rng& rng);

  ScenarioSpec spec_;
  bool structured_ = true;
  Eigen::Matrix4d within_factor_, common_factor_;
  std::map<int, Eigen::MatrixXd> dense_factor_;
  Eigen::Matrix3d x_chol_a_, x_chol_b_;
};

/// Outcome-group probabilities and within-group component weights.
inline constexpr std::array<double, 3> kOutcomeGroupProbs = {0.2, 0.3, 0.5};
inline constexpr std::array<std::array<double, 8>, 3> kOutcomeComponentWeights = {{
    {0.5, 0.5, 0, 0, 0, 0, 0, 0},
    {0, 0, 0.5, 0.25, 0.25, 0, 0, 0},
    {0, 0, 0, 0, 0, 0.5, 0.25, 0.25},
}};

ClusterDataset generate_dataset(const ScenarioSpec& spec, Rng& rng);

struct TruthValues {
  std::array<double, kNumEstimands> value{};
  std::array<double, kNumEstimands> se{};
  long clusters = 0;
};

/// Monte-Carlo truth: cluster averages of the four regimes' expected
/// outcomes from the joint potential-world law, averaged over clusters.
TruthValues truth_oracle(const ScenarioSpec& spec, long n_clusters, Rng& rng);

/// Single-class Bayesian linear regressions (K = L = M = 1) on the shared design.
PosteriorSample fit_parametric_baseline(const ClusterDataset& data, const DesignSpec& design,
                                        McmcConfig config, const BaseMeasureHyper& base);

struct MetricRow {
  double bias = 0.0;
  double rmse = 0.0;
  double al = 0.0;  // average interval length
  double cp = 0.0;  // coverage probability
  int replicates = 0;
};

struct EvalReport {
  std::array<MetricRow, kNumEstimands> rows;

  /// Table with columns Estimand, Bias, RMSE, AL, CP for the given estimands.
  std::string table(const std::vector<Estimand>& which = {kSME, kNIE}) const;
};

EvalReport evaluate(const std::vector<PosteriorSummary>& summaries,
                    const std::vector<std::array<double, kNumEstimands>>& truths);

/// LPML = sum_j log CPO_j with CPO_j the harmonic mean of the per-iteration
/// likelihoods. Rows = iterations, columns = observations.
double compute_lpml(const Eigen::MatrixXd& loglik);
double compute_lpml(const PosteriorSample& posterior);

enum class ModelKind { kCaEdp, kParametric };

struct StudyConfig {
  ScenarioSpec spec;
  int replicates = 20;
  McmcConfig mcmc;
  GcompConfig gcomp;
  ModelKind model = ModelKind::kCaEdp;
  std::uint64_t seed = 1;
  int threads = 1;
  long truth_clusters = 100000;
  bool keep_draws = false;
};

struct StudyResult {
  TruthValues truth;
  std::vector<PosteriorSummary> summaries;
  std::vector<EstimandDraws> draws;  // only with keep_draws
  EvalReport report;
};

/// Replicate r uses dataset seed derive(seed, kDataset, r), chain seed
/// derive(seed, kReplicate, r) and g-computation seed derive(seed, kGcompute, r).
StudyResult run_simulation_study(const StudyConfig& config);

}  // namespace caedp
