#include "caedp/properties.hpp"

#include <cmath>
#include <stdexcept>

namespace caedp {
namespace {

void require_nonnegative(double a, const char* name) {
  if (!(a >= 0.0)) throw std::domain_error(std::string(name) + " must be nonnegative");
}

void require_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error(std::string(name) + " must lie in [0, 1]");
}

}  // namespace

double tie_prob_theta(double alpha_star, double alpha_theta) {
  require_nonnegative(alpha_star, "alpha_star");
  require_nonnegative(alpha_theta, "alpha_theta");
  return (1.0 / (1.0 + alpha_star)) *
         (1.0 / (1.0 + alpha_theta) + alpha_star / (1.0 + 2.0 * alpha_theta));
}

double tie_prob_phi(double alpha_star, double alpha_theta, double alpha_phi) {
  require_nonnegative(alpha_star, "alpha_star");
  require_nonnegative(alpha_theta, "alpha_theta");
  require_nonnegative(alpha_phi, "alpha_phi");
  const double cross = alpha_star + alpha_theta + alpha_star * alpha_theta;
  return (1.0 / ((1.0 + alpha_star) * (1.0 + alpha_theta))) *
         (1.0 / (1.0 + alpha_phi) + cross / (1.0 + 2.0 * alpha_phi));
}

double tie_prob_joint(double alpha_star, double alpha_theta, double alpha_phi) {
  require_nonnegative(alpha_star, "alpha_star");
  require_nonnegative(alpha_theta, "alpha_theta");
  require_nonnegative(alpha_phi, "alpha_phi");
  const double same = 1.0 / ((1.0 + alpha_theta) * (1.0 + alpha_phi));
  const double diff = alpha_star / ((1.0 + 2.0 * alpha_theta) * (1.0 + 2.0 * alpha_phi));
  return (same + diff) / (1.0 + alpha_star);
}

double corr_theta(double alpha_star, double alpha_theta) {
  require_nonnegative(alpha_star, "alpha_star");
  require_nonnegative(alpha_theta, "alpha_theta");
  return 1.0 - (alpha_star / (1.0 + alpha_star)) * (alpha_theta / (1.0 + 2.0 * alpha_theta));
}

double corr_phi(double alpha_star, double alpha_theta, double alpha_phi) {
  require_nonnegative(alpha_star, "alpha_star");
  require_nonnegative(alpha_theta, "alpha_theta");
  require_nonnegative(alpha_phi, "alpha_phi");
  const double denom = 1.0 + alpha_theta + alpha_theta * alpha_phi + 2.0 * alpha_phi;
  return 1.0 - (alpha_star / (1.0 + alpha_star)) * (alpha_phi / denom);
}

double cross_measure_covariance(double q_theta, double q_phi, double q_joint,
                                double g_theta_product, double g_phi_product,
                                double delta_theta, double delta_phi) {
  require_probability(q_theta, "q_theta");
  require_probability(q_phi, "q_phi");
  require_probability(q_joint, "q_joint");
  require_probability(g_theta_product, "G_theta(A)G_theta(B)");
  require_probability(g_phi_product, "G_phi(A)G_phi(B)");
  if (!std::isfinite(delta_theta) || !std::isfinite(delta_phi)) {
    throw std::domain_error("base-measure deltas must be finite");
  }
  return q_theta * g_phi_product * delta_theta + q_phi * g_theta_product * delta_phi +
         q_joint * delta_theta * delta_phi;
}

double truncation_bound(const TruncationLevels& levels, const ConcentrationParams& conc) {
  levels.validate();
  require_nonnegative(conc.alpha_star, "alpha_star");
  require_nonnegative(conc.alpha_theta, "alpha_theta");
  require_nonnegative(conc.alpha_phi, "alpha_phi");
  auto tail = [](double alpha, int level) { return std::pow(alpha / (1.0 + alpha), level); };
  return tail(conc.alpha_star, levels.K) + tail(conc.alpha_theta, levels.L) +
         tail(conc.alpha_phi, levels.M);
}

double marginal_truncation_bound(const TruncationLevels& levels, const ConcentrationParams& conc,
                                 long total_n) {
  if (total_n < 0) throw std::domain_error("total sample size must be nonnegative");
  return static_cast<double>(total_n) * truncation_bound(levels, conc);
}

}  // namespace caedp
