#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

namespace caedp {

/// Numbers of v-classes (K), y-classes (L) and x-classes (M).
struct TruncationLevels {
  int K = 15;
  int L = 15;
  int M = 15;

  void validate() const;
};

struct GammaPrior {
  double shape = 1.0;
  double rate = 1.0;
};

/// The three concentration parameters with their gamma hyperpriors.
struct ConcentrationParams {
  double alpha_star = 1.0;
  double alpha_theta = 1.0;
  double alpha_phi = 1.0;
  GammaPrior prior_star;
  GammaPrior prior_theta;
  GammaPrior prior_phi;

  void validate() const;
};

/// Writes the stick-breaking weights w_k = v_k prod_{j<k}(1 - v_j) for the
/// given fractions. The last fraction is treated as 1 (truncation closure).
void stick_break(std::span<const double> fractions, std::span<double> weights);

/// Truncated three-level stick-breaking weights. Class indices are 0-based.
/// The phi-level arrays are flattened with index (k * L + l) * M + m.
class StickWeights {
 public:
  StickWeights() = default;
  StickWeights(int K, int L, int M);

  int K() const { return K_; }
  int L() const { return L_; }
  int M() const { return M_; }

  Eigen::VectorXd s_star, pi_star;   // length K
  Eigen::MatrixXd v_theta, w_theta;  // K x L
  std::vector<double> v_phi, w_phi;  // K * L * M

  /// log(1 - fraction) at the same positions, filled by the samplers so the
  /// concentration update stays exact when a fraction rounds to 1. Empty
  /// when unknown (log1p(-fraction) is used instead); set them after
  /// close_and_recompute().
  Eigen::VectorXd log1m_s_star;
  Eigen::MatrixXd log1m_v_theta;
  std::vector<double> log1m_v_phi;
  bool has_log1m() const { return log1m_s_star.size() == K_; }
  void forget_log1m();

  std::size_t phi_index(int k, int l, int m) const {
    return (static_cast<std::size_t>(k) * L_ + l) * M_ + m;
  }
  std::span<const double> w_phi_row(int k, int l) const {
    return {w_phi.data() + phi_index(k, l, 0), static_cast<std::size_t>(M_)};
  }
  std::span<double> v_phi_row(int k, int l) {
    return {v_phi.data() + phi_index(k, l, 0), static_cast<std::size_t>(M_)};
  }

  /// Forces the final fraction of every level to 1 and recomputes all
  /// weights from the fractions. Drops the log1m arrays.
  void close_and_recompute();

  /// Throws std::logic_error when a simplex or stick-breaking identity fails.
  void validate() const;

 private:
  int K_ = 0, L_ = 0, M_ = 0;
};

struct RegressionAtom {
  Eigen::VectorXd beta;
  double sigma = 1.0;
};

/// Outcome, mediator and confounder regressions of one y-class.
struct ThetaAtom {
  RegressionAtom y, m, d;
};

/// Gaussian covariate model of one x-class with diagonal covariance.
struct PhiAtom {
  Eigen::VectorXd mu;
  Eigen::VectorXd var;
};

/// Cluster-size rate and cluster-covariate Gaussian of one v-class.
struct EtaAtom {
  double lambda_n = 1.0;
  Eigen::VectorXd v_mean;
  Eigen::VectorXd v_var;
};

/// Latent classes (0-based): one v-class per cluster, one y- and x-class per
/// individual in dataset order.
struct ClassIndicators {
  std::vector<int> zeta_n;
  std::vector<int> zeta_y;
  std::vector<int> zeta_x;
};

/// Normal prior on regression coefficients plus inverse-gamma on the
/// variance. finalize() caches the precision and the Cholesky factor.
struct RegressionPrior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  double a_sigma = 2.0;
  double b_sigma = 1.0;

  Eigen::MatrixXd precision;       // cov^{-1}
  Eigen::VectorXd precision_mean;  // cov^{-1} mean
  Eigen::MatrixXd cov_chol;        // lower Cholesky factor of cov

  void finalize();
};

/// Per-coordinate normal-inverse-gamma: var ~ IG(a, b), mean | var ~ N(m0, var / kappa).
struct NigPrior {
  Eigen::VectorXd mean;
  Eigen::VectorXd a;
  Eigen::VectorXd b;
  double kappa = 0.1;

  int dim() const { return static_cast<int>(mean.size()); }
};

struct BaseMeasureHyper {
  RegressionPrior y, m, d;
  NigPrior x;
  NigPrior v;
  double a_n = 1.0;  // gamma prior on the Poisson cluster-size rate
  double b_n = 0.1;

  void finalize();
  void validate() const;
};

}  // namespace caedp
