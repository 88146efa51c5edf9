#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "caedp/dataset.hpp"
#include "caedp/model.hpp"
#include "caedp/random.hpp"
#include "caedp/state.hpp"

namespace caedp {

#ifdef NDEBUG
inline constexpr bool kDefaultInvariantChecks = false;
#else
inline constexpr bool kDefaultInvariantChecks = true;
#endif

struct McmcConfig {
  int burn_in = 1000;
  int keep = 500;
  int thin = 1;
  std::uint64_t seed = 1;
  TruncationLevels truncation;
  /// Gamma hyperpriors of the concentrations (the values are ignored; the
  /// initial concentrations are drawn from these priors).
  ConcentrationParams conc_hyper;
  bool check_invariants = kDefaultInvariantChecks;
  bool record_loglik = true;
  /// Append the label-permutation Metropolis moves to every sweep.
  bool label_moves = true;

  void validate() const;
};

/// Kept states in order plus one log-likelihood row per kept state
/// (columns = individuals in dataset order).
struct PosteriorSample {
  DesignSpec design;
  std::vector<CaEdpState> states;
  Eigen::MatrixXd loglik;

  int keep() const { return static_cast<int>(states.size()); }
};

/// Dataset view used by the sampler: stacked designs plus per-cluster facts.
struct SamplerData {
  SamplerData(const ClusterDataset& data, const DesignSpec& design);

  DesignSpec design;
  StackedDesign stacked;
  int num_clusters = 0;
  int num_individuals = 0;
  std::vector<std::string> ids;
  std::vector<int> sizes;
  Eigen::MatrixXd x;  // individuals x p
  Eigen::MatrixXd v;  // clusters x q
};

/// Per-individual and per-cluster log densities under the current atoms.
/// log_dmy uses the probit likelihood for a binary confounder.
struct LikelihoodCache {
  Eigen::MatrixXd log_dmy;      // individuals x L
  Eigen::MatrixXd log_x;        // individuals x M
  Eigen::MatrixXd log_cluster;  // clusters x K: Poisson size + V density

  void refresh(const CaEdpState& state, const SamplerData& data);
};

/// log Phi(x), accurate in the far lower tail.
double log_norm_cdf(double x);

/// Normalised full-conditional probabilities of one cluster's v-class.
Eigen::VectorXd cluster_class_probabilities(const CaEdpState& state, const SamplerData& data,
                                            const LikelihoodCache& cache, int cluster);
/// Normalised full-conditional probabilities of one individual's y-class.
Eigen::VectorXd y_class_probabilities(const CaEdpState& state, const SamplerData& data,
                                      const LikelihoodCache& cache, int individual);
/// Normalised full-conditional probabilities of one individual's x-class.
Eigen::VectorXd x_class_probabilities(const CaEdpState& state, const SamplerData& data,
                                      const LikelihoodCache& cache, int individual);

void update_cluster_indicators(CaEdpState& state, const SamplerData& data,
                               const LikelihoodCache& cache, Rng& rng);
void update_y_indicators(CaEdpState& state, const SamplerData& data,
                         const LikelihoodCache& cache, Rng& rng);
void update_x_indicators(CaEdpState& state, const SamplerData& data,
                         const LikelihoodCache& cache, Rng& rng);
void update_stick_weights(CaEdpState& state, const SamplerData& data, Rng& rng);
void update_concentrations(CaEdpState& state, Rng& rng);
void update_eta_atoms(CaEdpState& state, const SamplerData& data, const BaseMeasureHyper& base,
                      Rng& rng);
void update_binary_d_latent(CaEdpState& state, const SamplerData& data, Rng& rng);
void update_theta_atoms(CaEdpState& state, const SamplerData& data, const BaseMeasureHyper& base,
                        Rng& rng);
void update_phi_atoms(CaEdpState& state, const SamplerData& data, const BaseMeasureHyper& base,
                      Rng& rng);

/// Conjugate draw for one regression: sigma^2 | beta from the inverse gamma
/// at the current beta (skipped when fix_unit_sigma), then beta | sigma^2.
/// With no rows this is a draw from the prior.
void draw_regression_posterior(RegressionAtom& atom, const RegressionPrior& prior,
                               const Eigen::MatrixXd& c, const Eigen::VectorXd& y,
                               bool fix_unit_sigma, Rng& rng);

/// Posterior covariance (Sigma0^{-1} + C'C / sigma^2)^{-1} of a regression.
Eigen::MatrixXd regression_posterior_cov(const RegressionPrior& prior, const Eigen::MatrixXd& c,
                                         double sigma2);

/// Initial state: concentrations and sticks from their priors, atoms from
/// the base measures, indicators uniform.
CaEdpState initialize_state(const SamplerData& data, const BaseMeasureHyper& base,
                            const TruncationLevels& levels, const ConcentrationParams& hyper,
                            Rng& rng);

/// Log density of truncated stick-breaking weights w (summing to 1) under
/// GEM(alpha), w.r.t. Lebesgue measure on the first n-1 coordinates:
/// (alpha-1) log w_n - sum_{k<n} log R_k with R_k = sum_{j>=k} w_j.
double log_stick_density(std::span<const double> w, double alpha);

struct LabelMoveStats {
  int proposed[3] = {0, 0, 0};  // v-, y-, x-class levels
  int accepted[3] = {0, 0, 0};
};

/// Metropolis moves that swap two class labels at one level together with
/// their weights, atoms, nested rows and indicators. The likelihood and the
/// iid atom priors are unchanged by a swap, so the acceptance ratio is the
/// stick-breaking density ratio of the permuted weights. Single-site updates
/// cannot move a whole class to another label, which otherwise leaves empty
/// classes stuck ahead of a large one with inflated weight.
LabelMoveStats permute_labels(CaEdpState& state, Rng& rng);

/// One full sweep in the fixed order: v-class, y-class, x-class indicators,
/// sticks, concentrations, eta, (latent probit), theta, phi, then the
/// optional label moves. The cache must match the incoming state and is
/// refreshed on exit.
void gibbs_sweep(CaEdpState& state, const SamplerData& data, const BaseMeasureHyper& base,
                 LikelihoodCache& cache, Rng& rng, bool label_moves = true);

/// Per-individual log p(D, M, Y | X, V, N, state) given the cluster's v-class.
Eigen::VectorXd individual_loglik(const CaEdpState& state, const SamplerData& data,
                                  const LikelihoodCache& cache);

PosteriorSample run_chain(const ClusterDataset& data, const DesignSpec& design,
                          const McmcConfig& config, const BaseMeasureHyper& base);

}  // namespace caedp
