#include "caedp/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

#include "caedp/constants.hpp"
#include "caedp/prior.hpp"

namespace caedp {
namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMajor> phi_weight_matrix(const StickWeights& w) {
  return {w.w_phi.data(), static_cast<Eigen::Index>(w.K()) * w.L(), w.M()};
}

double logsumexp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double mx = v.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((v.array() - mx).exp().sum());
}

Eigen::VectorXd normalise_log(const Eigen::VectorXd& logp) {
  const double lse = logsumexp(logp);
  if (!std::isfinite(lse)) throw std::runtime_error("all class weights underflow");
  return (logp.array() - lse).exp().matrix();
}

int uniform_index(int n, Rng& rng) {
  return std::min(n - 1, static_cast<int>(rng.uniform() * n));
}

// Per-individual shifted exponentials of the cached log densities.
struct ShiftedRow {
  Eigen::VectorXd ex, ed;
  double mx = 0.0, md = 0.0;

  void load(const LikelihoodCache& cache, int j) {
    mx = cache.log_x.cols() > 0 ? cache.log_x.row(j).maxCoeff() : 0.0;
    md = cache.log_dmy.row(j).maxCoeff();
    ex = (cache.log_x.row(j).array() - mx).exp().transpose();
    ed = (cache.log_dmy.row(j).array() - md).exp().transpose();
  }
};

// log sum_m w_klm p(x | phi_m), evaluated stably in log space.
double log_x_mixture_exact(const StickWeights& w, const LikelihoodCache& cache, int j, int k,
                           int l) {
  const auto row = w.w_phi_row(k, l);
  double mx = kNegInf;
  for (int m = 0; m < w.M(); ++m) {
    if (row[m] > 0.0) mx = std::max(mx, std::log(row[m]) + cache.log_x(j, m));
  }
  if (!std::isfinite(mx)) return kNegInf;
  double s = 0.0;
  for (int m = 0; m < w.M(); ++m) {
    if (row[m] > 0.0) s += std::exp(std::log(row[m]) + cache.log_x(j, m) - mx);
  }
  return mx + std::log(s);
}

// log sum_l w_kl p_l(dmy) f_kl(x) for one individual, exact log space.
double log_individual_given_k_exact(const StickWeights& w, const LikelihoodCache& cache, int j,
                                    int k, bool include_dmy) {
  Eigen::VectorXd terms(w.L());
  for (int l = 0; l < w.L(); ++l) {
    const double wl = w.w_theta(k, l);
    terms[l] = wl > 0.0 ? std::log(wl) + log_x_mixture_exact(w, cache, j, k, l) +
                              (include_dmy ? cache.log_dmy(j, l) : 0.0)
                        : kNegInf;
  }
  return logsumexp(terms);
}

struct NigDraw {
  double mean;
  double var;
};

NigDraw draw_nig_posterior(double m0, double kappa0, double a0, double b0, double n, double sum,
                           double centered_ss, Rng& rng) {
  const double kappa_n = kappa0 + n;
  const double mean_n = (kappa0 * m0 + sum) / kappa_n;
  double b_n = b0;
  if (n > 0.0) {
    const double xbar = sum / n;
    b_n += 0.5 * centered_ss + kappa0 * n * (xbar - m0) * (xbar - m0) / (2.0 * kappa_n);
  }
  const double var = rng.inv_gamma(a0 + 0.5 * n, b_n);
  return {rng.normal(mean_n, std::sqrt(var / kappa_n)), var};
}

// Groups row indices by class label.
std::vector<std::vector<int>> group_by(const std::vector<int>& labels, int classes) {
  std::vector<std::vector<int>> groups(classes);
  for (int j = 0; j < static_cast<int>(labels.size()); ++j) groups[labels[j]].push_back(j);
  return groups;
}

void nig_update_columns(const Eigen::MatrixXd& values, const std::vector<int>& rows,
                        const NigPrior& prior, Eigen::VectorXd& mean, Eigen::VectorXd& var,
                        Rng& rng) {
  const int dim = prior.dim();
  mean.resize(dim);
  var.resize(dim);
  const double n = static_cast<double>(rows.size());
  for (int t = 0; t < dim; ++t) {
    double sum = 0.0;
    for (int r : rows) sum += values(r, t);
    double ss = 0.0;
    if (!rows.empty()) {
      const double xbar = sum / n;
      for (int r : rows) ss += (values(r, t) - xbar) * (values(r, t) - xbar);
    }
    const NigDraw d = draw_nig_posterior(prior.mean[t], prior.kappa, prior.a[t], prior.b[t], n,
                                         sum, ss, rng);
    mean[t] = d.mean;
    var[t] = d.var;
  }
}

}  // namespace

void McmcConfig::validate() const {
  if (burn_in < 0) throw std::invalid_argument("burn_in must be nonnegative");
  if (keep < 1) throw std::invalid_argument("keep must be positive");
  if (thin < 1) throw std::invalid_argument("thin must be at least 1");
  truncation.validate();
  for (const GammaPrior* g : {&conc_hyper.prior_star, &conc_hyper.prior_theta,
                              &conc_hyper.prior_phi}) {
    if (!(g->shape > 0.0 && g->rate > 0.0)) {
      throw std::invalid_argument("concentration hyperpriors must be positive");
    }
  }
}

SamplerData::SamplerData(const ClusterDataset& data, const DesignSpec& d)
    : design(d), stacked(stack_design(data, d)) {
  if (data.p != d.p || data.q != d.q || data.binary_d != d.binary_d) {
    throw std::invalid_argument("design does not match the dataset dimensions");
  }
  num_clusters = data.num_clusters();
  num_individuals = data.total_individuals();
  x.resize(num_individuals, d.p);
  for (int t = 0; t < d.p; ++t) x.col(t) = stacked.c_d.col(d.idx_x(t));
  v.resize(num_clusters, d.q);
  for (int i = 0; i < num_clusters; ++i) {
    const auto& c = data.clusters[i];
    ids.push_back(c.id);
    sizes.push_back(c.size());
    for (int t = 0; t < d.q; ++t) v(i, t) = c.v[t];
  }
}

double log_norm_cdf(double x) {
  if (x > -30.0) return std::log(norm_cdf(x));
  // Asymptotic series of the Mills ratio.
  const double x2 = x * x;
  return -0.5 * x2 - std::log(-x) - kHalfLog2Pi + std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
}

void LikelihoodCache::refresh(const CaEdpState& state, const SamplerData& data) {
  const auto lv = state.levels();
  const int n = data.num_individuals;
  const auto& s = data.stacked;
  const auto& design = data.design;
  log_dmy.resize(n, lv.L);
  log_x.resize(n, lv.M);
  log_cluster.resize(data.num_clusters, lv.K);
  if (n > 0) {
    Eigen::MatrixXd bd(design.dim_d(), lv.L), bm(design.dim_m(), lv.L), by(design.dim_y(), lv.L);
    for (int l = 0; l < lv.L; ++l) {
      bd.col(l) = state.theta[l].d.beta;
      bm.col(l) = state.theta[l].m.beta;
      by.col(l) = state.theta[l].y.beta;
    }
    const Eigen::MatrixXd mu_d = s.c_d * bd;
    const Eigen::MatrixXd mu_m = s.c_m * bm;
    const Eigen::MatrixXd mu_y = s.c_y * by;
    for (int l = 0; l < lv.L; ++l) {
      const auto& th = state.theta[l];
      const double inv_m = 1.0 / th.m.sigma, inv_y = 1.0 / th.y.sigma, inv_d = 1.0 / th.d.sigma;
      const double cst = -2.0 * kHalfLog2Pi - std::log(th.m.sigma) - std::log(th.y.sigma);
      const double cst_d = -kHalfLog2Pi - std::log(th.d.sigma);
      for (int j = 0; j < n; ++j) {
        const double zm = (s.m[j] - mu_m(j, l)) * inv_m;
        const double zy = (s.y[j] - mu_y(j, l)) * inv_y;
        double ld;
        if (design.binary_d) {
          ld = log_norm_cdf(s.d[j] > 0.5 ? mu_d(j, l) : -mu_d(j, l));
        } else {
          const double zd = (s.d[j] - mu_d(j, l)) * inv_d;
          ld = cst_d - 0.5 * zd * zd;
        }
        log_dmy(j, l) = ld + cst - 0.5 * (zm * zm + zy * zy);
      }
    }
    for (int m = 0; m < lv.M; ++m) {
      const auto& ph = state.phi[m];
      double cst = 0.0;
      for (int t = 0; t < design.p; ++t) cst += -kHalfLog2Pi - 0.5 * std::log(ph.var[t]);
      for (int j = 0; j < n; ++j) {
        double acc = cst;
        for (int t = 0; t < design.p; ++t) {
          const double dx = data.x(j, t) - ph.mu[t];
          acc -= 0.5 * dx * dx / ph.var[t];
        }
        log_x(j, m) = acc;
      }
    }
  }
  for (int k = 0; k < lv.K; ++k) {
    const auto& e = state.eta[k];
    const double log_lambda = std::log(e.lambda_n);
    for (int i = 0; i < data.num_clusters; ++i) {
      const double size = data.sizes[i];
      double acc = size * log_lambda - e.lambda_n - std::lgamma(size + 1.0);
      for (int t = 0; t < design.q; ++t) {
        acc += norm_logpdf(data.v(i, t), e.v_mean[t], std::sqrt(e.v_var[t]));
      }
      log_cluster(i, k) = acc;
    }
  }
}

namespace {

Eigen::VectorXd cluster_class_log_weights(const CaEdpState& state, const SamplerData& data,
                                          const LikelihoodCache& cache, int i) {
  const auto& w = state.weights;
  const int K = w.K(), L = w.L();
  Eigen::VectorXd logp(K);
  for (int k = 0; k < K; ++k) {
    logp[k] = (w.pi_star[k] > 0.0 ? std::log(w.pi_star[k]) : kNegInf) + cache.log_cluster(i, k);
  }
  const auto wphi = phi_weight_matrix(w);
  ShiftedRow row;
  Eigen::VectorXd xs;
  for (int j = data.stacked.cluster_start[i]; j < data.stacked.cluster_start[i + 1]; ++j) {
    row.load(cache, j);
    xs.noalias() = wphi * row.ex;
    for (int k = 0; k < K; ++k) {
      double total = 0.0;
      for (int l = 0; l < L; ++l) total += w.w_theta(k, l) * row.ed[l] * xs[k * L + l];
      if (total > 0.0 && std::isfinite(total)) {
        logp[k] += std::log(total) + row.mx + row.md;
      } else {
        logp[k] += log_individual_given_k_exact(w, cache, j, k, true);
      }
    }
  }
  return logp;
}

Eigen::VectorXd y_class_log_weights(const CaEdpState& state, const SamplerData& data,
                                    const LikelihoodCache& cache, int j) {
  const auto& w = state.weights;
  const int k = state.indicators.zeta_n[data.stacked.cluster_of[j]];
  const int L = w.L(), M = w.M();
  ShiftedRow row;
  row.load(cache, j);
  Eigen::VectorXd logp(L);
  for (int l = 0; l < L; ++l) {
    const double wl = w.w_theta(k, l);
    if (!(wl > 0.0)) {
      logp[l] = kNegInf;
      continue;
    }
    const auto wr = w.w_phi_row(k, l);
    double xs = 0.0;
    for (int m = 0; m < M; ++m) xs += wr[m] * row.ex[m];
    const double log_xs =
        xs > 0.0 ? std::log(xs) + row.mx : log_x_mixture_exact(w, cache, j, k, l);
    logp[l] = std::log(wl) + cache.log_dmy(j, l) + log_xs;
  }
  return logp;
}

Eigen::VectorXd x_class_log_weights(const CaEdpState& state, const SamplerData& data,
                                    const LikelihoodCache& cache, int j) {
  const auto& w = state.weights;
  const int k = state.indicators.zeta_n[data.stacked.cluster_of[j]];
  const int l = state.indicators.zeta_y[j];
  const auto wr = w.w_phi_row(k, l);
  Eigen::VectorXd logp(w.M());
  for (int m = 0; m < w.M(); ++m) {
    logp[m] = wr[m] > 0.0 ? std::log(wr[m]) + cache.log_x(j, m) : kNegInf;
  }
  return logp;
}

[[noreturn]] void underflow(const std::string& what, const SamplerData& data, int cluster) {
  throw std::runtime_error(what + " weights all underflow for cluster '" + data.ids[cluster] +
                           "'");
}

int draw_from_log(const Eigen::VectorXd& logp, Rng& rng, const std::string& what,
                  const SamplerData& data, int cluster) {
  if (!std::isfinite(logp.maxCoeff())) underflow(what, data, cluster);
  return rng.categorical_log({logp.data(), static_cast<std::size_t>(logp.size())});
}

}  // namespace

Eigen::VectorXd cluster_class_probabilities(const CaEdpState& state, const SamplerData& data,
                                            const LikelihoodCache& cache, int cluster) {
  return normalise_log(cluster_class_log_weights(state, data, cache, cluster));
}

Eigen::VectorXd y_class_probabilities(const CaEdpState& state, const SamplerData& data,
                                      const LikelihoodCache& cache, int individual) {
  return normalise_log(y_class_log_weights(state, data, cache, individual));
}

Eigen::VectorXd x_class_probabilities(const CaEdpState& state, const SamplerData& data,
                                      const LikelihoodCache& cache, int individual) {
  return normalise_log(x_class_log_weights(state, data, cache, individual));
}

void update_cluster_indicators(CaEdpState& state, const SamplerData& data,
                               const LikelihoodCache& cache, Rng& rng) {
  for (int i = 0; i < data.num_clusters; ++i) {
    state.indicators.zeta_n[i] =
        draw_from_log(cluster_class_log_weights(state, data, cache, i), rng, "v-class", data, i);
  }
}

void update_y_indicators(CaEdpState& state, const SamplerData& data,
                         const LikelihoodCache& cache, Rng& rng) {
  for (int j = 0; j < data.num_individuals; ++j) {
    state.indicators.zeta_y[j] = draw_from_log(y_class_log_weights(state, data, cache, j), rng,
                                               "y-class", data, data.stacked.cluster_of[j]);
  }
}

void update_x_indicators(CaEdpState& state, const SamplerData& data,
                         const LikelihoodCache& cache, Rng& rng) {
  for (int j = 0; j < data.num_individuals; ++j) {
    state.indicators.zeta_x[j] = draw_from_log(x_class_log_weights(state, data, cache, j), rng,
                                               "x-class", data, data.stacked.cluster_of[j]);
  }
}

void update_stick_weights(CaEdpState& state, const SamplerData& data, Rng& rng) {
  auto& w = state.weights;
  const int K = w.K(), L = w.L(), M = w.M();
  const auto& ind = state.indicators;
  std::vector<double> nk(K, 0.0), nkl(static_cast<std::size_t>(K) * L, 0.0),
      nklm(static_cast<std::size_t>(K) * L * M, 0.0);
  for (int k : ind.zeta_n) nk[k] += 1.0;
  for (int j = 0; j < data.num_individuals; ++j) {
    const int k = ind.zeta_n[data.stacked.cluster_of[j]];
    const int l = ind.zeta_y[j];
    nkl[static_cast<std::size_t>(k) * L + l] += 1.0;
    nklm[w.phi_index(k, l, ind.zeta_x[j])] += 1.0;
  }
  const auto& c = state.conc;
  auto fractions = [&rng](const double* counts, int n, double alpha, double* out, double* log1m) {
    double above = 0.0;
    for (int t = 0; t < n; ++t) above += counts[t];
    for (int t = 0; t + 1 < n; ++t) {
      above -= counts[t];
      out[t] = rng.beta(1.0 + counts[t], alpha + above, log1m[t]);
    }
  };
  Eigen::VectorXd log1m_star = Eigen::VectorXd::Zero(K);
  std::vector<double> log1m_phi(w.v_phi.size(), 0.0);
  std::vector<double> s(K);
  fractions(nk.data(), K, c.alpha_star, s.data(), log1m_star.data());
  for (int k = 0; k + 1 < K; ++k) w.s_star[k] = s[k];
  Eigen::MatrixXd log1m_theta = Eigen::MatrixXd::Zero(K, L);
  std::vector<double> vt(L), lt(L);
  for (int k = 0; k < K; ++k) {
    fractions(nkl.data() + static_cast<std::size_t>(k) * L, L, c.alpha_theta, vt.data(), lt.data());
    for (int l = 0; l + 1 < L; ++l) {
      w.v_theta(k, l) = vt[l];
      log1m_theta(k, l) = lt[l];
    }
    for (int l = 0; l < L; ++l) {
      const std::size_t at = w.phi_index(k, l, 0);
      fractions(nklm.data() + at, M, c.alpha_phi, w.v_phi.data() + at, log1m_phi.data() + at);
    }
  }
  w.close_and_recompute();
  w.log1m_s_star = std::move(log1m_star);
  w.log1m_v_theta = std::move(log1m_theta);
  w.log1m_v_phi = std::move(log1m_phi);
}

void update_concentrations(CaEdpState& state, Rng& rng) {
  const auto& w = state.weights;
  const int K = w.K(), L = w.L(), M = w.M();
  const bool exact = w.has_log1m();
  auto log1m = [](double s) { return std::log1p(-std::min(s, kStickClamp)); };
  double sum_star = 0.0, sum_theta = 0.0, sum_phi = 0.0;
  for (int k = 0; k + 1 < K; ++k) sum_star += exact ? w.log1m_s_star[k] : log1m(w.s_star[k]);
  for (int k = 0; k < K; ++k) {
    for (int l = 0; l + 1 < L; ++l) {
      sum_theta += exact ? w.log1m_v_theta(k, l) : log1m(w.v_theta(k, l));
    }
    for (int l = 0; l < L; ++l) {
      for (int m = 0; m + 1 < M; ++m) {
        const std::size_t at = w.phi_index(k, l, m);
        sum_phi += exact ? w.log1m_v_phi[at] : log1m(w.v_phi[at]);
      }
    }
  }
  auto& c = state.conc;
  c.alpha_star = rng.gamma(c.prior_star.shape + (K - 1), c.prior_star.rate - sum_star);
  c.alpha_theta =
      rng.gamma(c.prior_theta.shape + static_cast<double>(K) * (L - 1), c.prior_theta.rate - sum_theta);
  c.alpha_phi = rng.gamma(c.prior_phi.shape + static_cast<double>(K) * L * (M - 1),
                          c.prior_phi.rate - sum_phi);
}

void update_eta_atoms(CaEdpState& state, const SamplerData& data, const BaseMeasureHyper& base,
                      Rng& rng) {
  const int K = state.weights.K();
  const auto groups = group_by(state.indicators.zeta_n, K);
  for (int k = 0; k < K; ++k) {
    auto& e = state.eta[k];
    double total = 0.0;
    for (int i : groups[k]) total += data.sizes[i];
    e.lambda_n = rng.gamma(base.a_n + total, base.b_n + static_cast<double>(groups[k].size()));
    nig_update_columns(data.v, groups[k], base.v, e.v_mean, e.v_var, rng);
  }
}

void update_binary_d_latent(CaEdpState& state, const SamplerData& data, Rng& rng) {
  if (!data.design.binary_d) throw std::logic_error("latent update requires a binary confounder");
  const auto& s = data.stacked;
  state.latent_d.resize(data.num_individuals);
  for (int j = 0; j < data.num_individuals; ++j) {
    const double mean = s.c_d.row(j).dot(state.theta[state.indicators.zeta_y[j]].d.beta);
    state.latent_d[j] = s.d[j] > 0.5 ? rng.truncated_normal_below(mean, 1.0, 0.0)
                                     : rng.truncated_normal_above(mean, 1.0, 0.0);
  }
}

Eigen::MatrixXd regression_posterior_cov(const RegressionPrior& prior, const Eigen::MatrixXd& c,
                                         double sigma2) {
  const Eigen::MatrixXd precision = prior.precision + c.transpose() * c / sigma2;
  return precision.llt().solve(Eigen::MatrixXd::Identity(precision.rows(), precision.cols()));
}

void draw_regression_posterior(RegressionAtom& atom, const RegressionPrior& prior,
                               const Eigen::MatrixXd& c, const Eigen::VectorXd& y,
                               bool fix_unit_sigma, Rng& rng) {
  const double n = static_cast<double>(c.rows());
  double sigma2 = 1.0;
  if (!fix_unit_sigma) {
    const double ss = c.rows() > 0 ? (y - c * atom.beta).squaredNorm() : 0.0;
    sigma2 = rng.inv_gamma(prior.a_sigma + 0.5 * n, prior.b_sigma + 0.5 * ss);
  }
  atom.sigma = std::sqrt(sigma2);
  Eigen::MatrixXd precision = prior.precision;
  Eigen::VectorXd rhs = prior.precision_mean;
  if (c.rows() > 0) {
    precision.noalias() += c.transpose() * c / sigma2;
    rhs.noalias() += c.transpose() * y / sigma2;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("regression posterior precision is not positive definite");
  }
  Eigen::VectorXd z(precision.rows());
  for (Eigen::Index t = 0; t < z.size(); ++t) z[t] = rng.normal();
  atom.beta = llt.solve(rhs) + llt.matrixU().solve(z);
}

void update_theta_atoms(CaEdpState& state, const SamplerData& data, const BaseMeasureHyper& base,
                        Rng& rng) {
  const int L = state.weights.L();
  const auto& s = data.stacked;
  const bool binary = data.design.binary_d;
  const auto groups = group_by(state.indicators.zeta_y, L);
  const Eigen::VectorXd& d_response = binary ? state.latent_d : s.d;
  for (int l = 0; l < L; ++l) {
    const auto& rows = groups[l];
    auto& atom = state.theta[l];
    const Eigen::MatrixXd cd = s.c_d(rows, Eigen::all);
    const Eigen::MatrixXd cm = s.c_m(rows, Eigen::all);
    const Eigen::MatrixXd cy = s.c_y(rows, Eigen::all);
    draw_regression_posterior(atom.d, base.d, cd, d_response(rows), binary, rng);
    draw_regression_posterior(atom.m, base.m, cm, s.m(rows), false, rng);
    draw_regression_posterior(atom.y, base.y, cy, s.y(rows), false, rng);
  }
}

void update_phi_atoms(CaEdpState& state, const SamplerData& data, const BaseMeasureHyper& base,
                      Rng& rng) {
  const int M = state.weights.M();
  const auto groups = group_by(state.indicators.zeta_x, M);
  for (int m = 0; m < M; ++m) {
    nig_update_columns(data.x, groups[m], base.x, state.phi[m].mu, state.phi[m].var, rng);
  }
}

CaEdpState initialize_state(const SamplerData& data, const BaseMeasureHyper& base,
                            const TruncationLevels& levels, const ConcentrationParams& hyper,
                            Rng& rng) {
  levels.validate();
  CaEdpState s;
  s.conc = draw_concentrations(hyper, rng);
  s.weights = draw_stick_weights(levels, s.conc, rng);
  for (int l = 0; l < levels.L; ++l) {
    s.theta.push_back(draw_theta_atom(base, data.design.binary_d, rng));
  }
  for (int m = 0; m < levels.M; ++m) s.phi.push_back(draw_phi_atom(base.x, rng));
  for (int k = 0; k < levels.K; ++k) s.eta.push_back(draw_eta_atom(base, rng));
  auto& ind = s.indicators;
  for (int i = 0; i < data.num_clusters; ++i) ind.zeta_n.push_back(uniform_index(levels.K, rng));
  for (int j = 0; j < data.num_individuals; ++j) {
    ind.zeta_y.push_back(uniform_index(levels.L, rng));
    ind.zeta_x.push_back(uniform_index(levels.M, rng));
  }
  if (data.design.binary_d) update_binary_d_latent(s, data, rng);
  return s;
}

double log_stick_density(std::span<const double> w, double alpha) {
  const std::size_t n = w.size();
  if (n < 2) return 0.0;
  double tail = w[n - 1];
  double out = static_cast<double>(n - 1) * std::log(alpha) + (alpha - 1.0) * std::log(w[n - 1]);
  for (std::size_t k = n - 1; k-- > 0;) {
    tail += w[k];
    out -= std::log(tail);
  }
  return out;
}

namespace {

// log p(w with entries i < j swapped) - log p(w); only R_{i+1..j} and, when
// j is the last position, the (alpha - 1) log w_n term change.
double log_swap_ratio(std::span<const double> w, int i, int j, double alpha) {
  if (i > j) std::swap(i, j);
  const int n = static_cast<int>(w.size());
  double tail = 0.0;
  for (int k = n - 1; k > j; --k) tail += w[k];
  double out = 0.0;
  for (int k = j; k > i; --k) {
    tail += w[k];
    if (k == n - 1) continue;  // R_n is not part of the density
    out += std::log(tail) - std::log(tail - w[j] + w[i]);
  }
  if (j == n - 1) out += (alpha - 1.0) * (std::log(w[i]) - std::log(w[j]));
  return out;
}

// Stick fractions reproducing the weights w; the last fraction is left to
// the closure.
void fractions_from_weights(std::span<const double> w, double* frac) {
  double tail = 0.0;
  for (double x : w) tail += x;
  for (std::size_t k = 0; k + 1 < w.size(); ++k) {
    frac[k] = tail > 0.0 ? std::clamp(w[k] / tail, 0.0, 1.0) : 0.0;
    tail -= w[k];
  }
}

void swap_labels(std::vector<int>& z, int a, int b) {
  for (int& x : z) x = x == a ? b : (x == b ? a : x);
}

void pick_pair(int n, Rng& rng, int& a, int& b) {
  a = std::min(n - 1, static_cast<int>(rng.uniform() * n));
  b = std::min(n - 2, static_cast<int>(rng.uniform() * (n - 1)));
  if (b >= a) ++b;
}

bool accept_log(double log_r, Rng& rng) {
  return !std::isnan(log_r) && std::log(rng.uniform()) < log_r;
}

}  // namespace

LabelMoveStats permute_labels(CaEdpState& state, Rng& rng) {
  LabelMoveStats stats;
  auto& w = state.weights;
  auto& ind = state.indicators;
  const int K = w.K(), L = w.L(), M = w.M();
  std::vector<double> row;
  int a = 0, b = 0;

  for (int t = 0; K > 1 && t < K; ++t) {
    pick_pair(K, rng, a, b);
    ++stats.proposed[0];
    const double log_r = log_swap_ratio({w.pi_star.data(), static_cast<std::size_t>(K)}, a, b,
                                        state.conc.alpha_star);
    if (!accept_log(log_r, rng)) continue;
    ++stats.accepted[0];
    row.assign(w.pi_star.data(), w.pi_star.data() + K);
    std::swap(row[a], row[b]);
    fractions_from_weights(row, w.s_star.data());
    w.v_theta.row(a).swap(w.v_theta.row(b));
    std::swap_ranges(w.v_phi.begin() + w.phi_index(a, 0, 0),
                     w.v_phi.begin() + w.phi_index(a, L - 1, M - 1) + 1,
                     w.v_phi.begin() + w.phi_index(b, 0, 0));
    std::swap(state.eta[a], state.eta[b]);
    swap_labels(ind.zeta_n, a, b);
    w.close_and_recompute();
  }

  for (int t = 0; L > 1 && t < L; ++t) {
    pick_pair(L, rng, a, b);
    ++stats.proposed[1];
    double log_r = 0.0;
    for (int k = 0; k < K; ++k) {
      row.assign(L, 0.0);
      for (int l = 0; l < L; ++l) row[l] = w.w_theta(k, l);
      log_r += log_swap_ratio(row, a, b, state.conc.alpha_theta);
    }
    if (!accept_log(log_r, rng)) continue;
    ++stats.accepted[1];
    std::vector<double> frac(L);
    for (int k = 0; k < K; ++k) {
      for (int l = 0; l < L; ++l) row[l] = w.w_theta(k, l);
      std::swap(row[a], row[b]);
      fractions_from_weights(row, frac.data());
      for (int l = 0; l + 1 < L; ++l) w.v_theta(k, l) = frac[l];
      std::swap_ranges(w.v_phi.begin() + w.phi_index(k, a, 0),
                       w.v_phi.begin() + w.phi_index(k, a, M - 1) + 1,
                       w.v_phi.begin() + w.phi_index(k, b, 0));
    }
    std::swap(state.theta[a], state.theta[b]);
    swap_labels(ind.zeta_y, a, b);
    w.close_and_recompute();
  }

  for (int t = 0; M > 1 && t < M; ++t) {
    pick_pair(M, rng, a, b);
    ++stats.proposed[2];
    double log_r = 0.0;
    for (int k = 0; k < K; ++k) {
      for (int l = 0; l < L; ++l) log_r += log_swap_ratio(w.w_phi_row(k, l), a, b, state.conc.alpha_phi);
    }
    if (!accept_log(log_r, rng)) continue;
    ++stats.accepted[2];
    for (int k = 0; k < K; ++k) {
      for (int l = 0; l < L; ++l) {
        const auto wr = w.w_phi_row(k, l);
        row.assign(wr.begin(), wr.end());
        std::swap(row[a], row[b]);
        fractions_from_weights(row, w.v_phi.data() + w.phi_index(k, l, 0));
      }
    }
    std::swap(state.phi[a], state.phi[b]);
    swap_labels(ind.zeta_x, a, b);
    w.close_and_recompute();
  }
  return stats;
}

void gibbs_sweep(CaEdpState& state, const SamplerData& data, const BaseMeasureHyper& base,
                 LikelihoodCache& cache, Rng& rng, bool label_moves) {
  update_cluster_indicators(state, data, cache, rng);
  update_y_indicators(state, data, cache, rng);
  update_x_indicators(state, data, cache, rng);
  update_stick_weights(state, data, rng);
  update_concentrations(state, rng);
  update_eta_atoms(state, data, base, rng);
  if (data.design.binary_d) update_binary_d_latent(state, data, rng);
  update_theta_atoms(state, data, base, rng);
  update_phi_atoms(state, data, base, rng);
  if (label_moves) permute_labels(state, rng);
  cache.refresh(state, data);
}

Eigen::VectorXd individual_loglik(const CaEdpState& state, const SamplerData& data,
                                  const LikelihoodCache& cache) {
  const auto& w = state.weights;
  const int L = w.L(), M = w.M();
  Eigen::VectorXd out(data.num_individuals);
  ShiftedRow row;
  for (int j = 0; j < data.num_individuals; ++j) {
    const int k = state.indicators.zeta_n[data.stacked.cluster_of[j]];
    row.load(cache, j);
    double num = 0.0, den = 0.0;
    for (int l = 0; l < L; ++l) {
      const auto wr = w.w_phi_row(k, l);
      double xs = 0.0;
      for (int m = 0; m < M; ++m) xs += wr[m] * row.ex[m];
      const double a = w.w_theta(k, l) * xs;
      den += a;
      num += a * row.ed[l];
    }
    if (num > 0.0 && den > 0.0 && std::isfinite(num)) {
      out[j] = std::log(num) + row.md - std::log(den);
    } else {
      out[j] = log_individual_given_k_exact(w, cache, j, k, true) -
               log_individual_given_k_exact(w, cache, j, k, false);
    }
  }
  return out;
}

PosteriorSample run_chain(const ClusterDataset& data, const DesignSpec& design,
                          const McmcConfig& config, const BaseMeasureHyper& base) {
  config.validate();
  data.validate();
  base.validate();
  const SamplerData sd(data, design);
  Rng rng(derive_seed(config.seed, Stream::kChain));
  CaEdpState state = initialize_state(sd, base, config.truncation, config.conc_hyper, rng);
  LikelihoodCache cache;
  cache.refresh(state, sd);

  PosteriorSample out;
  out.design = design;
  out.states.reserve(config.keep);
  if (config.record_loglik) out.loglik.resize(config.keep, sd.num_individuals);
  const long total = static_cast<long>(config.burn_in) + static_cast<long>(config.keep) * config.thin;
  for (long it = 1; it <= total; ++it) {
    try {
      gibbs_sweep(state, sd, base, cache, rng, config.label_moves);
      if (config.check_invariants) state.validate(design, sd.num_clusters, sd.num_individuals);
    } catch (const std::exception& e) {
      throw std::runtime_error("Gibbs iteration " + std::to_string(it) + ": " + e.what());
    }
    if (it > config.burn_in && (it - config.burn_in) % config.thin == 0) {
      if (config.record_loglik) {
        const Eigen::VectorXd ll = individual_loglik(state, sd, cache);
        if (!ll.allFinite()) {
          throw std::runtime_error("Gibbs iteration " + std::to_string(it) +
                                   ": non-finite log-likelihood");
        }
        out.loglik.row(out.keep()) = ll.transpose();
      }
      out.states.push_back(state);
    }
  }
  return out;
}

}  // namespace caedp
