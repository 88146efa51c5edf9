#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "caedp/dataset.hpp"
#include "caedp/random.hpp"
#include "caedp/state.hpp"

namespace caedp {

/// Same-world correlations gamma1 (treated world), gamma0 (control world),
/// cross-world correlation rho and the derived off-diagonal
/// rho_star = ((gamma0 + gamma1) / 2) rho, for a cluster of size N.
struct CopulaParams {
  double gamma1 = 0.0;
  double gamma0 = 0.0;
  double rho = 0.0;
  double rho_star = 0.0;
  int N = 1;

  /// Fills rho_star and validates the positive-definiteness condition.
  static CopulaParams make(double gamma1, double gamma0, double rho, int N);
};

struct PdReport {
  bool ok = false;
  double within_bound = 1.0;   // 4(1-g1)(1-g0) / (2-g1-g0)^2
  double between_bound = 1.0;  // 4(1+(N-1)g1)(1+(N-1)g0) / (2+(N-1)(g1+g0))^2
  std::string reason;          // empty when ok
};

/// Range check -1/(N-1) < gamma_a < 1 plus rho^2 below both bounds. For
/// N = 1 only the between bound applies (there is no within-cluster contrast).
PdReport check_pd_condition(double gamma1, double gamma0, double rho, int N);

/// Largest admissible |rho|: min of the square roots of the two bounds.
double rho_upper_bound(double gamma1, double gamma0, int N);

/// rho ~ Unif(0, rho_upper_bound).
double sample_rho(double gamma1, double gamma0, int N, Rng& rng);

struct OmegaBlocks {
  Eigen::MatrixXd c11, c00, c10;  // N x N
  Eigen::MatrixXd omega;          // 2N x 2N, ordered (Z(1), Z(0))
};

/// Throws std::domain_error carrying the violated inequality.
OmegaBlocks build_omega(const CopulaParams& params);

/// Log density of an equicorrelation Gaussian copula relative to independence.
double equicorr_loglik(const Eigen::VectorXd& z, double gamma);
/// Same, from n, s1 = sum z and s2 = sum z^2.
double equicorr_loglik(int n, double s1, double s2, double gamma);

/// A matrix a I + b J of fixed size.
struct EquicorrForm {
  double a = 1.0;
  double b = 0.0;
};

/// Gaussian conditional of Z(0) given Z(1) = z1: mean and covariance a I + b J.
struct CrossWorldConditional {
  Eigen::VectorXd mean;
  EquicorrForm cov_form;

  Eigen::MatrixXd cov() const;
  /// mean + sqrt(a) P_perp eps + sqrt(a + N b) P_1 eps.
  Eigen::VectorXd sample(Rng& rng) const;
};

CrossWorldConditional conditional_cross_world(const Eigen::VectorXd& z1,
                                              const CopulaParams& params);

/// Marginal mixture of the confounder for one unit under arm a:
/// sum_k sum_l pi_k w_kl N(C_d(a) beta_l, sigma_l^2). Components whose total
/// weight is below the pruning mass are dropped and the rest renormalised.
/// For a binary confounder this is the latent probit variable's marginal.
class MixtureMarginal {
 public:
  MixtureMarginal(const Eigen::VectorXd& theta_weights, const CaEdpState& state,
                  const DesignSpec& design, int arm, int cluster_size, const Eigen::VectorXd& x,
                  const Eigen::VectorXd& v);

  double cdf(double d) const;
  double pdf(double d) const;
  /// d with |F(d) - u| <= tol. Throws for u outside (0, 1) or when the
  /// bracket cannot be widened within the doubling limit.
  double quantile(double u, double tol) const;

  int components() const { return static_cast<int>(weights_.size()); }

 private:
  std::vector<double> weights_, means_, sds_;
};

/// Marginal y-class weights sum_k pi_k w_kl, pruned to the classes that
/// carry all but kMixturePruneMass of the mass (dropped entries are zero).
Eigen::VectorXd marginal_theta_weights(const StickWeights& weights);

double mixture_marginal_cdf(double d, int arm, int cluster_size, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& v, const CaEdpState& state,
                            const DesignSpec& design);
double invert_marginal_cdf(double u, int arm, int cluster_size, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& v, const CaEdpState& state,
                           const DesignSpec& design, double tol);

/// Per-arm cluster summaries (n, sum z, sum z^2) of the normal scores
/// z_ij = Phi^{-1}(F^{(A_i)}(D_ij)); index 0 = control arm, 1 = treated.
struct CopulaScores {
  std::vector<int> n[2];
  std::vector<double> s1[2], s2[2];
};

/// Uses the latent probit values of the state for a binary confounder.
CopulaScores copula_scores(const ClusterDataset& data, const CaEdpState& state,
                           const DesignSpec& design);

struct GammaChain {
  std::vector<double> gamma1, gamma0;
  double acceptance_rate = 0.0;
};

/// Independence Metropolis-Hastings on (gamma1, gamma0) with Unif(0,1)
/// priors and proposals, targeting the equicorrelation copula likelihood of
/// each arm. Returns the full chain of n_steps states.
GammaChain mh_update_gammas(const CopulaScores& scores, int n_steps, Rng& rng,
                            double start1 = 0.5, double start0 = 0.5);

/// Log likelihood of both arms at (gamma1, gamma0); the MH target up to the flat prior.
double gamma_log_target(const CopulaScores& scores, double gamma1, double gamma0);

}  // namespace caedp
