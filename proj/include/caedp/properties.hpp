#pragma once

#include "caedp/model.hpp"

namespace caedp {

// Closed-form prior properties of the truncated-free CA-EDP. All functions
// accept zero concentrations as limits and throw std::domain_error on
// negative or NaN inputs.

/// P(theta_ij = theta_i'j') for individuals in different clusters.
double tie_prob_theta(double alpha_star, double alpha_theta);

/// P(phi_ij = phi_i'j') for individuals in different clusters.
double tie_prob_phi(double alpha_star, double alpha_theta, double alpha_phi);

/// P(theta and phi both tie) for individuals in different clusters.
double tie_prob_joint(double alpha_star, double alpha_theta, double alpha_phi);

/// Correlation of F_i(A, Phi) and F_i'(A, Phi) on a common theta-set.
double corr_theta(double alpha_star, double alpha_theta);

/// Correlation of F_i(Theta, A) and F_i'(Theta, A) on a common phi-set.
double corr_phi(double alpha_star, double alpha_theta, double alpha_phi);

/// Cov(F_i(A_theta, A_phi), F_i'(B_theta, B_phi)) given the tie probabilities,
/// the base-measure masses G_theta(A)G_theta(B), G_phi(A)G_phi(B) and the
/// deltas G(A n B) - G(A)G(B) of each base measure.
double cross_measure_covariance(double q_theta, double q_phi, double q_joint,
                                double g_theta_product, double g_phi_product,
                                double delta_theta, double delta_phi);

/// Bound on the expected total variation between the untruncated measure and
/// its (K, L, M) truncation.
double truncation_bound(const TruncationLevels& levels, const ConcentrationParams& conc);

/// The same bound carried to the marginal law of total_n observations.
double marginal_truncation_bound(const TruncationLevels& levels, const ConcentrationParams& conc,
                                 long total_n);

}  // namespace caedp
