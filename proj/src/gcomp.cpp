#include "caedp/gcomp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "caedp/constants.hpp"
#include "caedp/parallel.hpp"

namespace caedp {
namespace {

struct SyntheticUnit {
  int l = 0;
  Eigen::VectorXd x;
  double d[2] = {0.0, 0.0};  // confounder by world (observed scale)
  double m[2] = {0.0, 0.0};  // mediator by world
};

// Thrown when the copula transform of a synthetic cluster cannot be completed.
struct CopulaFailure {};

}  // namespace

std::string to_string(RhoMode mode) {
  switch (mode) {
    case RhoMode::kZero: return "zero";
    case RhoMode::kPrior: return "prior";
    case RhoMode::kFixed: return "fixed";
  }
  return "zero";
}

RhoMode parse_rho_mode(const std::string& text) {
  if (text == "zero") return RhoMode::kZero;
  if (text == "prior") return RhoMode::kPrior;
  if (text == "fixed") return RhoMode::kFixed;
  throw std::invalid_argument("unknown rho mode '" + text + "' (expected zero, prior or fixed)");
}

void GcompConfig::validate() const {
  if (synthetic_clusters < 1) throw std::invalid_argument("synthetic_clusters must be positive");
  if (gamma_steps < 1) throw std::invalid_argument("gamma_steps must be positive");
  if (gamma_burn < 0 || gamma_burn >= gamma_steps) {
    throw std::invalid_argument("gamma_burn must lie in [0, gamma_steps)");
  }
  if (!(inversion_tol > 0.0)) throw std::invalid_argument("inversion_tol must be positive");
  if (rho_mode == RhoMode::kFixed && !(std::abs(fixed_rho) < 1.0)) {
    throw std::invalid_argument("fixed rho must lie in (-1, 1)");
  }
  if (threads < 1) throw std::invalid_argument("threads must be positive");
}

EstimandDraw estimands_from_regimes(const RegimeMeans& r) {
  EstimandDraw d;
  d.regimes = r;
  d.value[kTE] = r.y111 - r.y000;
  d.value[kNIE] = r.y111 - r.y100;
  d.value[kNDE] = r.y100 - r.y000;
  d.value[kSME] = r.y111 - r.y110;
  d.value[kIME] = r.y110 - r.y100;
  return d;
}

int draw_positive_poisson(double lambda, Rng& rng) {
  if (!(lambda > 0.0)) throw std::domain_error("positive Poisson draw requires a positive rate");
  if (lambda > 1.0) {
    for (;;) {
      const int n = rng.poisson(lambda);
      if (n > 0) return n;
    }
  }
  // Inversion of the zero-truncated law; P(N = n | N > 0) = p_n / (1 - e^{-lambda}).
  const double norm = -std::expm1(-lambda);
  double target = rng.uniform() * norm;
  double pn = std::exp(-lambda);
  for (int n = 1; n < 1000; ++n) {
    pn *= lambda / n;
    target -= pn;
    if (target <= 0.0) return n;
  }
  return 1;
}

EstimandDraw gcompute_draw(const CaEdpState& state, double gamma1, double gamma0,
                           const DesignSpec& design, const GcompConfig& config, Rng& rng,
                           Rng& rho_rng) {
  const auto& w = state.weights;
  const int T = config.synthetic_clusters;
  const Eigen::VectorXd theta_w = marginal_theta_weights(w);
  std::vector<double> row_l(w.L());
  RegimeMeans sum;
  int used = 0, skipped = 0;
  std::vector<SyntheticUnit> units;
  Eigen::VectorXd v(design.q), base(design.dim_d()), rm(design.dim_m()), ry(design.dim_y());

  for (int t = 0; t < T; ++t) {
    // (b)-(c) classes, size, covariates
    const int k = rng.categorical({w.pi_star.data(), static_cast<std::size_t>(w.K())});
    const auto& eta = state.eta[k];
    const int N = draw_positive_poisson(eta.lambda_n, rng);
    for (int s = 0; s < design.q; ++s) v[s] = rng.normal(eta.v_mean[s], std::sqrt(eta.v_var[s]));
    for (int l = 0; l < w.L(); ++l) row_l[l] = w.w_theta(k, l);
    units.assign(N, SyntheticUnit{});
    for (auto& u : units) {
      u.l = rng.categorical(row_l);
      const int m = rng.categorical(w.w_phi_row(k, u.l));
      const auto& phi = state.phi[m];
      u.x.resize(design.p);
      for (int s = 0; s < design.p; ++s) u.x[s] = rng.normal(phi.mu[s], std::sqrt(phi.var[s]));
    }

    // (d) treated-world confounder from the unit's class; (e) copula for the
    // control world through the mixture marginals.
    Eigen::VectorXd z1(N), latent1(N);
    std::vector<MixtureMarginal> f0;
    f0.reserve(N);
    bool failed = false;
    for (int j = 0; j < N && !failed; ++j) {
      auto& u = units[j];
      const auto& atom = state.theta[u.l].d;
      design.fill_base(base, 1, N, u.x, v);
      const double sd = design.binary_d ? 1.0 : atom.sigma;
      latent1[j] = rng.normal(base.dot(atom.beta), sd);
      const MixtureMarginal f1(theta_w, state, design, 1, N, u.x, v);
      const double p = f1.cdf(latent1[j]);
      if (!(p > 0.0 && p < 1.0)) {
        failed = true;
        break;
      }
      z1[j] = norm_quantile(p);
      f0.emplace_back(theta_w, state, design, 0, N, u.x, v);
    }
    double rho = 0.0;
    if (config.rho_mode == RhoMode::kPrior) {
      rho = sample_rho(gamma1, gamma0, N, rho_rng);
    } else if (config.rho_mode == RhoMode::kFixed) {
      rho = config.fixed_rho;
    }
    if (failed) {
      ++skipped;
      continue;
    }
    const CopulaParams params = CopulaParams::make(gamma1, gamma0, rho, N);
    const Eigen::VectorXd z0 = conditional_cross_world(z1, params).sample(rng);
    try {
      for (int j = 0; j < N; ++j) {
        const double u0 = norm_cdf(z0[j]);
        if (!(u0 > 0.0 && u0 < 1.0)) throw CopulaFailure{};
        const double latent0 = f0[j].quantile(u0, config.inversion_tol);
        auto& u = units[j];
        u.d[1] = design.binary_d ? (latent1[j] >= 0.0 ? 1.0 : 0.0) : latent1[j];
        u.d[0] = design.binary_d ? (latent0 >= 0.0 ? 1.0 : 0.0) : latent0;
      }
    } catch (const CopulaFailure&) {
      ++skipped;
      continue;
    } catch (const std::runtime_error&) {
      ++skipped;
      continue;
    }

    // (f) mediators in each world
    double d_total[2] = {0.0, 0.0};
    for (const auto& u : units) {
      d_total[0] += u.d[0];
      d_total[1] += u.d[1];
    }
    double m_total[2] = {0.0, 0.0};
    for (int a = 1; a >= 0; --a) {
      for (auto& u : units) {
        const auto& atom = state.theta[u.l].m;
        design.fill_base(rm.head(design.dim_d()), a, N, u.x, v);
        rm[design.idx_d_own()] = u.d[a];
        rm[design.idx_d_loo()] = leave_one_out_mean(d_total[a], u.d[a], N);
        u.m[a] = rng.normal(rm.dot(atom.beta), atom.sigma);
        m_total[a] += u.m[a];
      }
    }

    // (g) expected outcomes under the four regimes
    auto regime = [&](int a, int a1, int a2) {
      double acc = 0.0;
      for (const auto& u : units) {
        design.fill_base(ry.head(design.dim_d()), a, N, u.x, v);
        ry[design.idx_d_own()] = u.d[a];
        ry[design.idx_d_loo()] = leave_one_out_mean(d_total[a], u.d[a], N);
        ry[design.idx_m_own()] = u.m[a1];
        ry[design.idx_m_loo()] = leave_one_out_mean(m_total[a2], u.m[a2], N);
        acc += ry.dot(state.theta[u.l].y.beta);
      }
      return acc / N;
    };
    sum.y111 += regime(1, 1, 1);
    sum.y110 += regime(1, 1, 0);
    sum.y100 += regime(1, 0, 0);
    sum.y000 += regime(0, 0, 0);
    ++used;
  }
  if (used < std::ceil(kMinSyntheticSuccess * T)) {
    throw std::runtime_error("g-computation: only " + std::to_string(used) + " of " +
                             std::to_string(T) + " synthetic clusters succeeded");
  }
  // (h) average over clusters
  RegimeMeans mean{sum.y111 / used, sum.y110 / used, sum.y100 / used, sum.y000 / used};
  EstimandDraw out = estimands_from_regimes(mean);
  out.gamma1 = gamma1;
  out.gamma0 = gamma0;
  out.clusters_used = used;
  out.clusters_skipped = skipped;
  return out;
}

EstimandDraws gcompute_posterior(const PosteriorSample& posterior, const ClusterDataset& data,
                                 const GcompConfig& config, std::uint64_t seed) {
  config.validate();
  if (posterior.states.empty()) throw std::invalid_argument("posterior has no kept states");
  EstimandDraws draws(posterior.states.size());
  parallel_for(posterior.keep(), config.threads, [&](int t) {
    const auto& state = posterior.states[t];
    Rng gamma_rng(derive_seed(seed, Stream::kGammaChain, t));
    const CopulaScores scores = copula_scores(data, state, posterior.design);
    const GammaChain chain = mh_update_gammas(scores, config.gamma_steps, gamma_rng);
    Rng rng(derive_seed(seed, Stream::kGcompute, t));
    Rng rho_rng(derive_seed(seed, Stream::kRho, t));
    try {
      draws[t] = gcompute_draw(state, chain.gamma1.back(), chain.gamma0.back(), posterior.design,
                               config, rng, rho_rng);
    } catch (const std::exception& e) {
      throw std::runtime_error("posterior draw " + std::to_string(t) + ": " + e.what());
    }
  });
  return draws;
}

double sorted_quantile(const std::vector<double>& sorted, double prob) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

PosteriorSummary aggregate_posterior(const EstimandDraws& draws) {
  if (draws.empty()) throw std::invalid_argument("cannot summarise zero estimand draws");
  PosteriorSummary out;
  const double n = static_cast<double>(draws.size());
  for (int e = 0; e < kNumEstimands; ++e) {
    std::vector<double> v;
    v.reserve(draws.size());
    double positive = 0.0;
    for (const auto& d : draws) {
      v.push_back(d.value[e]);
      if (d.value[e] > 0.0) positive += 1.0;
    }
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    std::sort(v.begin(), v.end());
    auto& s = out[e];
    s.mean = mean;
    s.lower = sorted_quantile(v, 0.025);
    s.upper = sorted_quantile(v, 0.975);
    s.pp = positive / n;
    s.sd = draws.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  }
  return out;
}

std::vector<SensitivityRun> run_sensitivity(const PosteriorSample& posterior,
                                            const ClusterDataset& data, GcompConfig config,
                                            const std::vector<std::pair<RhoMode, double>>& modes,
                                            std::uint64_t seed) {
  std::vector<SensitivityRun> runs;
  for (const auto& [mode, rho] : modes) {
    config.rho_mode = mode;
    config.fixed_rho = rho;
    SensitivityRun run{mode, rho, gcompute_posterior(posterior, data, config, seed), {}};
    run.summary = aggregate_posterior(run.draws);
    runs.push_back(std::move(run));
  }
  return runs;
}

}  // namespace caedp
