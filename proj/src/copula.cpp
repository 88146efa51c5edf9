#include "caedp/copula.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "caedp/constants.hpp"

namespace caedp {
namespace {

EquicorrForm product(const EquicorrForm& x, const EquicorrForm& y, int n) {
  return {x.a * y.a, x.a * y.b + x.b * y.a + n * x.b * y.b};
}

EquicorrForm inverse(const EquicorrForm& x, int n) {
  // (aI + bJ)^{-1} = (1/a) I - b / (a (a + n b)) J
  return {1.0 / x.a, -x.b / (x.a * (x.a + n * x.b))};
}

bool gamma_in_range(double gamma, int N) {
  if (!(gamma < 1.0)) return false;
  if (N <= 1) return true;
  return gamma > -1.0 / (N - 1);
}

}  // namespace

CopulaParams CopulaParams::make(double gamma1, double gamma0, double rho, int N) {
  CopulaParams p{gamma1, gamma0, rho, 0.5 * (gamma0 + gamma1) * rho, N};
  const PdReport r = check_pd_condition(gamma1, gamma0, rho, N);
  if (!r.ok) throw std::domain_error("copula parameters: " + r.reason);
  return p;
}

PdReport check_pd_condition(double gamma1, double gamma0, double rho, int N) {
  PdReport r;
  if (N < 1) {
    r.reason = "cluster size must be positive";
    return r;
  }
  const double n1 = N - 1;
  r.within_bound = 4.0 * (1.0 - gamma1) * (1.0 - gamma0) / std::pow(2.0 - gamma1 - gamma0, 2);
  r.between_bound = 4.0 * (1.0 + n1 * gamma1) * (1.0 + n1 * gamma0) /
                    std::pow(2.0 + n1 * (gamma1 + gamma0), 2);
  if (!gamma_in_range(gamma1, N) || !gamma_in_range(gamma0, N)) {
    r.reason = "same-world correlations must satisfy -1/(N-1) < gamma < 1";
    return r;
  }
  const double rho2 = rho * rho;
  if (N > 1 && !(rho2 < r.within_bound)) {
    r.reason = "rho^2 = " + std::to_string(rho2) + " violates rho^2 < 4(1-g1)(1-g0)/(2-g1-g0)^2 = " +
               std::to_string(r.within_bound);
    return r;
  }
  if (!(rho2 < r.between_bound)) {
    r.reason = "rho^2 = " + std::to_string(rho2) +
               " violates rho^2 < 4(1+(N-1)g1)(1+(N-1)g0)/(2+(N-1)(g1+g0))^2 = " +
               std::to_string(r.between_bound);
    return r;
  }
  r.ok = true;
  return r;
}

double rho_upper_bound(double gamma1, double gamma0, int N) {
  const PdReport r = check_pd_condition(gamma1, gamma0, 0.0, N);
  if (!r.ok) throw std::domain_error("rho bound: " + r.reason);
  const double between = std::sqrt(r.between_bound);
  return N > 1 ? std::min(std::sqrt(r.within_bound), between) : between;
}

double sample_rho(double gamma1, double gamma0, int N, Rng& rng) {
  const double upper = rho_upper_bound(gamma1, gamma0, N);
  if (!(upper > 0.0)) throw std::domain_error("rho prior has a nonpositive upper bound");
  return upper * rng.uniform();
}

OmegaBlocks build_omega(const CopulaParams& params) {
  const PdReport r = check_pd_condition(params.gamma1, params.gamma0, params.rho, params.N);
  if (!r.ok) throw std::domain_error("cannot build Omega: " + r.reason);
  const int N = params.N;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(N, N);
  const Eigen::MatrixXd J = Eigen::MatrixXd::Ones(N, N);
  OmegaBlocks b;
  b.c11 = (1.0 - params.gamma1) * I + params.gamma1 * J;
  b.c00 = (1.0 - params.gamma0) * I + params.gamma0 * J;
  b.c10 = (params.rho - params.rho_star) * I + params.rho_star * J;
  b.omega.resize(2 * N, 2 * N);
  b.omega << b.c11, b.c10.transpose(), b.c10, b.c00;
  return b;
}

double equicorr_loglik(int n, double s1, double s2, double gamma) {
  if (!gamma_in_range(gamma, n)) {
    throw std::domain_error("equicorrelation log-likelihood: gamma outside (-1/(N-1), 1)");
  }
  if (gamma == 0.0) return 0.0;
  const double a = 1.0 - gamma;
  const double c = 1.0 + (n - 1) * gamma;
  const double logdet = (n - 1) * std::log(a) + std::log(c);
  const double quad = gamma / a * s2 - gamma / (a * c) * s1 * s1;
  return -0.5 * logdet - 0.5 * quad;
}

double equicorr_loglik(const Eigen::VectorXd& z, double gamma) {
  return equicorr_loglik(static_cast<int>(z.size()), z.sum(), z.squaredNorm(), gamma);
}

Eigen::MatrixXd CrossWorldConditional::cov() const {
  const auto n = mean.size();
  return cov_form.a * Eigen::MatrixXd::Identity(n, n) + cov_form.b * Eigen::MatrixXd::Ones(n, n);
}

Eigen::VectorXd CrossWorldConditional::sample(Rng& rng) const {
  const auto n = mean.size();
  Eigen::VectorXd eps(n);
  for (Eigen::Index j = 0; j < n; ++j) eps[j] = rng.normal();
  const double bar = eps.mean();
  const double perp_scale = std::sqrt(std::max(0.0, cov_form.a));
  const double one_scale = std::sqrt(std::max(0.0, cov_form.a + n * cov_form.b));
  return mean + perp_scale * (eps.array() - bar).matrix() +
         Eigen::VectorXd::Constant(n, one_scale * bar);
}

CrossWorldConditional conditional_cross_world(const Eigen::VectorXd& z1,
                                              const CopulaParams& params) {
  const int N = params.N;
  if (z1.size() != N) throw std::invalid_argument("z1 length does not match the cluster size");
  const PdReport r = check_pd_condition(params.gamma1, params.gamma0, params.rho, N);
  if (!r.ok) throw std::domain_error("cross-world conditional: " + r.reason);
  const EquicorrForm r1{1.0 - params.gamma1, params.gamma1};
  const EquicorrForm r0{1.0 - params.gamma0, params.gamma0};
  const EquicorrForm b{params.rho - params.rho_star, params.rho_star};
  const EquicorrForm f = product(b, inverse(r1, N), N);
  const EquicorrForm fb = product(f, b, N);
  CrossWorldConditional out;
  out.mean = f.a * z1 + Eigen::VectorXd::Constant(N, f.b * z1.sum());
  out.cov_form = {r0.a - fb.a, r0.b - fb.b};
  return out;
}

Eigen::VectorXd marginal_theta_weights(const StickWeights& weights) {
  Eigen::VectorXd w = weights.w_theta.transpose() * weights.pi_star;
  std::vector<int> order(w.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&w](int a, int b) { return w[a] < w[b]; });
  double dropped = 0.0;
  for (int idx : order) {
    if (dropped + w[idx] >= kMixturePruneMass) break;
    dropped += w[idx];
    w[idx] = 0.0;
  }
  return w;
}

MixtureMarginal::MixtureMarginal(const Eigen::VectorXd& theta_weights, const CaEdpState& state,
                                 const DesignSpec& design, int arm, int cluster_size,
                                 const Eigen::VectorXd& x, const Eigen::VectorXd& v) {
  Eigen::VectorXd row(design.dim_d());
  design.fill_base(row, arm, cluster_size, x, v);
  double total = 0.0;
  for (Eigen::Index l = 0; l < theta_weights.size(); ++l) {
    if (!(theta_weights[l] > 0.0)) continue;
    const auto& atom = state.theta[l].d;
    weights_.push_back(theta_weights[l]);
    means_.push_back(row.dot(atom.beta));
    sds_.push_back(design.binary_d ? 1.0 : atom.sigma);
    total += theta_weights[l];
  }
  if (!(total > 0.0)) throw std::invalid_argument("mixture marginal has no components");
  for (double& w : weights_) w /= total;
}

double MixtureMarginal::cdf(double d) const {
  double f = 0.0;
  for (std::size_t c = 0; c < weights_.size(); ++c) f += weights_[c] * norm_cdf((d - means_[c]) / sds_[c]);
  return std::clamp(f, 0.0, 1.0);
}

double MixtureMarginal::pdf(double d) const {
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  double f = 0.0;
  for (std::size_t c = 0; c < weights_.size(); ++c) {
    const double z = (d - means_[c]) / sds_[c];
    f += weights_[c] * kInvSqrt2Pi * std::exp(-0.5 * z * z) / sds_[c];
  }
  return f;
}

double MixtureMarginal::quantile(double u, double tol) const {
  if (!(u > 0.0 && u < 1.0)) throw std::domain_error("CDF inversion requires u in (0, 1)");
  double mean = 0.0, max_sd = 0.0;
  for (std::size_t c = 0; c < weights_.size(); ++c) {
    mean += weights_[c] * means_[c];
    max_sd = std::max(max_sd, sds_[c]);
  }
  double lo = mean - 10.0 * max_sd, hi = mean + 10.0 * max_sd;
  double width = 10.0 * max_sd;
  int doublings = 0;
  while (cdf(lo) > u) {
    if (++doublings > kMaxBracketDoublings) throw std::runtime_error("CDF inversion: bracket failure");
    width *= 2.0;
    lo = mean - width;
  }
  while (cdf(hi) < u) {
    if (++doublings > kMaxBracketDoublings) throw std::runtime_error("CDF inversion: bracket failure");
    width *= 2.0;
    hi = mean + width;
  }
  // Newton steps safeguarded by the bracket; bisection when a step leaves it.
  double x = 0.5 * (lo + hi);
  for (int iter = 0; iter < 400; ++iter) {
    const double f = cdf(x) - u;
    if (std::abs(f) <= tol) return x;
    if (f > 0.0) {
      hi = x;
    } else {
      lo = x;
    }
    const double dens = pdf(x);
    double next = dens > 0.0 ? x - f / dens : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == x || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x))) {
      return x;
    }
    x = next;
  }
  throw std::runtime_error("CDF inversion did not converge");
}

double mixture_marginal_cdf(double d, int arm, int cluster_size, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& v, const CaEdpState& state,
                            const DesignSpec& design) {
  const MixtureMarginal mix(marginal_theta_weights(state.weights), state, design, arm,
                            cluster_size, x, v);
  return mix.cdf(d);
}

double invert_marginal_cdf(double u, int arm, int cluster_size, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& v, const CaEdpState& state,
                           const DesignSpec& design, double tol) {
  const MixtureMarginal mix(marginal_theta_weights(state.weights), state, design, arm,
                            cluster_size, x, v);
  return mix.quantile(u, tol);
}

CopulaScores copula_scores(const ClusterDataset& data, const CaEdpState& state,
                           const DesignSpec& design) {
  const Eigen::VectorXd w = marginal_theta_weights(state.weights);
  CopulaScores out;
  int row = 0;
  for (const auto& c : data.clusters) {
    const int a = c.treatment;
    double s1 = 0.0, s2 = 0.0;
    for (const auto& ind : c.individuals) {
      const MixtureMarginal mix(w, state, design, a, c.size(), ind.x, c.v);
      const double value = design.binary_d ? state.latent_d[row] : ind.d;
      // Clamp away from {0, 1} so extreme observations keep finite scores.
      const double u = std::clamp(mix.cdf(value), 1e-15, 1.0 - 1e-15);
      const double z = norm_quantile(u);
      s1 += z;
      s2 += z * z;
      ++row;
    }
    out.n[a].push_back(c.size());
    out.s1[a].push_back(s1);
    out.s2[a].push_back(s2);
  }
  return out;
}

double gamma_log_target(const CopulaScores& scores, double gamma1, double gamma0) {
  double total = 0.0;
  const double g[2] = {gamma0, gamma1};
  for (int a = 0; a < 2; ++a) {
    for (std::size_t i = 0; i < scores.n[a].size(); ++i) {
      total += equicorr_loglik(scores.n[a][i], scores.s1[a][i], scores.s2[a][i], g[a]);
    }
  }
  return total;
}

GammaChain mh_update_gammas(const CopulaScores& scores, int n_steps, Rng& rng, double start1,
                            double start0) {
  if (n_steps < 1) throw std::invalid_argument("MH chain needs at least one step");
  GammaChain chain;
  chain.gamma1.reserve(n_steps);
  chain.gamma0.reserve(n_steps);
  double g1 = start1, g0 = start0;
  double current = gamma_log_target(scores, g1, g0);
  int accepted = 0;
  for (int s = 0; s < n_steps; ++s) {
    // Proposal and prior are both Unif(0,1)^2, so the ratio is the likelihood ratio.
    const double p1 = rng.uniform(), p0 = rng.uniform();
    const double proposed = gamma_log_target(scores, p1, p0);
    const double log_ratio = proposed - current;
    if (log_ratio >= 0.0 || std::log(rng.uniform()) < log_ratio) {
      g1 = p1;
      g0 = p0;
      current = proposed;
      ++accepted;
    }
    chain.gamma1.push_back(g1);
    chain.gamma0.push_back(g0);
  }
  chain.acceptance_rate = static_cast<double>(accepted) / n_steps;
  return chain;
}

}  // namespace caedp
