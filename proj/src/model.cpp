#include "caedp/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>

#include "caedp/constants.hpp"

namespace caedp {

void TruncationLevels::validate() const {
  if (K < 1 || L < 1 || M < 1) throw std::invalid_argument("truncation levels must be >= 1");
}

void ConcentrationParams::validate() const {
  if (!(alpha_star > 0.0 && alpha_theta > 0.0 && alpha_phi > 0.0)) {
    throw std::invalid_argument("concentration parameters must be positive");
  }
  for (const auto& g : {prior_star, prior_theta, prior_phi}) {
    if (!(g.shape > 0.0 && g.rate > 0.0)) {
      throw std::invalid_argument("concentration hyperparameters must be positive");
    }
  }
}

void stick_break(std::span<const double> fractions, std::span<double> weights) {
  double remaining = 1.0;
  const std::size_t n = fractions.size();
  for (std::size_t k = 0; k < n; ++k) {
    const double v = (k + 1 == n) ? 1.0 : fractions[k];
    weights[k] = v * remaining;
    remaining *= (1.0 - v);
  }
}

void StickWeights::forget_log1m() {
  log1m_s_star.resize(0);
  log1m_v_theta.resize(0, 0);
  log1m_v_phi.clear();
}

StickWeights::StickWeights(int K, int L, int M)
    : s_star(Eigen::VectorXd::Ones(K)),
      pi_star(Eigen::VectorXd::Zero(K)),
      v_theta(Eigen::MatrixXd::Ones(K, L)),
      w_theta(Eigen::MatrixXd::Zero(K, L)),
      v_phi(static_cast<std::size_t>(K) * L * M, 1.0),
      w_phi(static_cast<std::size_t>(K) * L * M, 0.0),
      K_(K),
      L_(L),
      M_(M) {
  close_and_recompute();
}

void StickWeights::close_and_recompute() {
  forget_log1m();
  s_star[K_ - 1] = 1.0;
  stick_break({s_star.data(), static_cast<std::size_t>(K_)},
              {pi_star.data(), static_cast<std::size_t>(K_)});
  std::vector<double> frac(L_), w(L_);
  for (int k = 0; k < K_; ++k) {
    v_theta(k, L_ - 1) = 1.0;
    for (int l = 0; l < L_; ++l) frac[l] = v_theta(k, l);
    stick_break(frac, w);
    for (int l = 0; l < L_; ++l) w_theta(k, l) = w[l];
    for (int l = 0; l < L_; ++l) {
      const std::size_t base = phi_index(k, l, 0);
      v_phi[base + M_ - 1] = 1.0;
      stick_break({v_phi.data() + base, static_cast<std::size_t>(M_)},
                  {w_phi.data() + base, static_cast<std::size_t>(M_)});
    }
  }
}

void StickWeights::validate() const {
  auto check_sum = [](double total, const char* what) {
    if (std::abs(total - 1.0) > kSimplexTol) {
      throw std::logic_error(std::string(what) + " weights do not sum to one");
    }
  };
  check_sum(pi_star.sum(), "cluster-level");
  if (s_star[K_ - 1] != 1.0) throw std::logic_error("final cluster-level fraction must be 1");
  for (int k = 0; k < K_; ++k) {
    check_sum(w_theta.row(k).sum(), "y-class");
    if (v_theta(k, L_ - 1) != 1.0) throw std::logic_error("final y-class fraction must be 1");
    for (int l = 0; l < L_; ++l) {
      double total = 0.0;
      for (double w : w_phi_row(k, l)) total += w;
      check_sum(total, "x-class");
      if (v_phi[phi_index(k, l, M_ - 1)] != 1.0) {
        throw std::logic_error("final x-class fraction must be 1");
      }
    }
  }
  for (int k = 0; k < K_; ++k) {
    if (!(s_star[k] > 0.0 && s_star[k] <= 1.0)) {
      throw std::logic_error("cluster-level stick fraction outside (0, 1]");
    }
  }
}

void RegressionPrior::finalize() {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("regression prior covariance is not positive definite");
  }
  cov_chol = llt.matrixL();
  precision = llt.solve(Eigen::MatrixXd::Identity(cov.rows(), cov.cols()));
  precision = 0.5 * (precision + precision.transpose());
  precision_mean = precision * mean;
}

void BaseMeasureHyper::finalize() {
  y.finalize();
  m.finalize();
  d.finalize();
}

void BaseMeasureHyper::validate() const {
  for (const RegressionPrior* r : {&y, &m, &d}) {
    if (!(r->a_sigma > 0.0 && r->b_sigma > 0.0)) {
      throw std::invalid_argument("inverse-gamma hyperparameters must be positive");
    }
    if (r->mean.size() != r->cov.rows() || r->cov.rows() != r->cov.cols()) {
      throw std::invalid_argument("regression prior dimensions are inconsistent");
    }
  }
  for (const NigPrior* n : {&x, &v}) {
    if (n->a.size() != n->mean.size() || n->b.size() != n->mean.size()) {
      throw std::invalid_argument("normal-inverse-gamma prior dimensions are inconsistent");
    }
    if (!(n->kappa > 0.0) || (n->a.array() <= 0.0).any() || (n->b.array() <= 0.0).any()) {
      throw std::invalid_argument("normal-inverse-gamma hyperparameters must be positive");
    }
  }
  if (!(a_n > 0.0 && b_n > 0.0)) {
    throw std::invalid_argument("cluster-size gamma hyperparameters must be positive");
  }
}

}  // namespace caedp
