#pragma once

#include <iosfwd>

#include "caedp/gibbs.hpp"

namespace caedp {

// Posterior text format. Lines starting with '#' are comments. The first
// data line is
//   meta,K,L,M,p,q,binary_d,clusters,individuals,keep,has_loglik
// followed by the header "iteration,block,index,values..." and one row per
// (kept iteration, block, index) with a block-specific number of values:
//   conc    0        alpha_star alpha_theta alpha_phi and the six hyperprior numbers
//   sstar   0        K stick fractions
//   vtheta  k        L fractions of row k
//   vphi    k*L+l    M fractions of slice (k, l)
//   theta   l        beta_y sigma_y beta_m sigma_m beta_d sigma_d
//   phi     m        mu (p) var (p)
//   eta     k        lambda_n v_mean (q) v_var (q)
//   zn zy zx 0       class indicators (0-based)
//   latent  0        latent probit values (binary confounder only)
//   loglik  0        per-individual log-likelihoods (when recorded)
// Weights are recomputed from the fractions on reading. Numbers use the
// shortest round-trip representation, so write -> read is exact.

void write_posterior(std::ostream& out, const PosteriorSample& sample);
PosteriorSample read_posterior(std::istream& in);

}  // namespace caedp
