#include "caedp/prior.hpp"

#include <cmath>

namespace caedp {
namespace {

RegressionAtom draw_regression(const RegressionPrior& prior, Rng& rng, bool fixed_unit_sigma) {
  RegressionAtom atom;
  Eigen::VectorXd z(prior.mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  atom.beta = prior.mean + prior.cov_chol * z;
  atom.sigma = fixed_unit_sigma ? 1.0 : std::sqrt(rng.inv_gamma(prior.a_sigma, prior.b_sigma));
  return atom;
}

void draw_nig(const NigPrior& prior, Rng& rng, Eigen::VectorXd& mean, Eigen::VectorXd& var) {
  const int dim = prior.dim();
  mean.resize(dim);
  var.resize(dim);
  for (int t = 0; t < dim; ++t) {
    var[t] = rng.inv_gamma(prior.a[t], prior.b[t]);
    mean[t] = rng.normal(prior.mean[t], std::sqrt(var[t] / prior.kappa));
  }
}

}  // namespace

ThetaAtom draw_theta_atom(const BaseMeasureHyper& base, bool binary_d, Rng& rng) {
  ThetaAtom atom;
  atom.y = draw_regression(base.y, rng, false);
  atom.m = draw_regression(base.m, rng, false);
  atom.d = draw_regression(base.d, rng, binary_d);
  return atom;
}

PhiAtom draw_phi_atom(const NigPrior& prior, Rng& rng) {
  PhiAtom atom;
  draw_nig(prior, rng, atom.mu, atom.var);
  return atom;
}

EtaAtom draw_eta_atom(const BaseMeasureHyper& base, Rng& rng) {
  EtaAtom atom;
  atom.lambda_n = rng.gamma(base.a_n, base.b_n);
  draw_nig(base.v, rng, atom.v_mean, atom.v_var);
  return atom;
}

StickWeights draw_stick_weights(const TruncationLevels& levels, const ConcentrationParams& conc,
                                Rng& rng) {
  levels.validate();
  StickWeights w(levels.K, levels.L, levels.M);
  Eigen::VectorXd ls = Eigen::VectorXd::Zero(levels.K);
  Eigen::MatrixXd lt = Eigen::MatrixXd::Zero(levels.K, levels.L);
  std::vector<double> lp(w.v_phi.size(), 0.0);
  for (int k = 0; k + 1 < levels.K; ++k) w.s_star[k] = rng.beta(1.0, conc.alpha_star, ls[k]);
  for (int k = 0; k < levels.K; ++k) {
    for (int l = 0; l + 1 < levels.L; ++l) {
      w.v_theta(k, l) = rng.beta(1.0, conc.alpha_theta, lt(k, l));
    }
    for (int l = 0; l < levels.L; ++l) {
      for (int m = 0; m + 1 < levels.M; ++m) {
        const std::size_t at = w.phi_index(k, l, m);
        w.v_phi[at] = rng.beta(1.0, conc.alpha_phi, lp[at]);
      }
    }
  }
  w.close_and_recompute();
  w.log1m_s_star = std::move(ls);
  w.log1m_v_theta = std::move(lt);
  w.log1m_v_phi = std::move(lp);
  return w;
}

ConcentrationParams draw_concentrations(const ConcentrationParams& hyper, Rng& rng) {
  ConcentrationParams c = hyper;
  c.alpha_star = rng.gamma(hyper.prior_star.shape, hyper.prior_star.rate);
  c.alpha_theta = rng.gamma(hyper.prior_theta.shape, hyper.prior_theta.rate);
  c.alpha_phi = rng.gamma(hyper.prior_phi.shape, hyper.prior_phi.rate);
  return c;
}

PriorDraw sample_prior_draw(const TruncationLevels& levels, const ConcentrationParams& conc,
                            const BaseMeasureHyper& base, const DesignSpec& design,
                            std::uint64_t seed) {
  Rng rng(seed);
  PriorDraw draw;
  draw.weights = draw_stick_weights(levels, conc, rng);
  draw.theta.reserve(levels.L);
  for (int l = 0; l < levels.L; ++l) draw.theta.push_back(draw_theta_atom(base, design.binary_d, rng));
  draw.phi.reserve(levels.M);
  for (int m = 0; m < levels.M; ++m) draw.phi.push_back(draw_phi_atom(base.x, rng));
  draw.eta.reserve(levels.K);
  for (int k = 0; k < levels.K; ++k) draw.eta.push_back(draw_eta_atom(base, rng));

  const auto& w = draw.weights;
  draw.cluster_class = rng.categorical({w.pi_star.data(), static_cast<std::size_t>(levels.K)});
  draw.cluster_size = rng.poisson(draw.eta[draw.cluster_class].lambda_n);
  std::vector<double> row(levels.L);
  for (int l = 0; l < levels.L; ++l) row[l] = w.w_theta(draw.cluster_class, l);
  for (int j = 0; j < draw.cluster_size; ++j) {
    const int l = rng.categorical(row);
    draw.zeta_y.push_back(l);
    draw.zeta_x.push_back(rng.categorical(w.w_phi_row(draw.cluster_class, l)));
  }
  return draw;
}

void simulate_responses(const CaEdpState& state, const DesignSpec& design, ClusterDataset& data,
                        Rng& rng, bool redraw_d) {
  int row = 0;
  for (auto& c : data.clusters) {
    const int n = c.size();
    if (redraw_d) {
      for (int j = 0; j < n; ++j) {
        auto& ind = c.individuals[j];
        const auto& atom = state.theta[state.indicators.zeta_y[row + j]].d;
        const double mean = design.row_d(c.treatment, n, ind.x, c.v).dot(atom.beta);
        if (design.binary_d) {
          ind.d = (mean + rng.normal() >= 0.0) ? 1.0 : 0.0;
        } else {
          ind.d = rng.normal(mean, atom.sigma);
        }
      }
    }
    double d_total = 0.0;
    for (const auto& ind : c.individuals) d_total += ind.d;
    for (int j = 0; j < n; ++j) {
      auto& ind = c.individuals[j];
      const auto& atom = state.theta[state.indicators.zeta_y[row + j]].m;
      const double d_loo = leave_one_out_mean(d_total, ind.d, n);
      ind.m = rng.normal(design.row_m(c.treatment, n, ind.x, c.v, ind.d, d_loo).dot(atom.beta),
                         atom.sigma);
    }
    double m_total = 0.0;
    for (const auto& ind : c.individuals) m_total += ind.m;
    for (int j = 0; j < n; ++j) {
      auto& ind = c.individuals[j];
      const auto& atom = state.theta[state.indicators.zeta_y[row + j]].y;
      const double d_loo = leave_one_out_mean(d_total, ind.d, n);
      const double m_loo = leave_one_out_mean(m_total, ind.m, n);
      ind.y = rng.normal(
          design.row_y(c.treatment, n, ind.x, c.v, ind.d, d_loo, ind.m, m_loo).dot(atom.beta),
          atom.sigma);
    }
    row += n;
  }
}

PriorPredictiveDraw simulate_prior_predictive(const TruncationLevels& levels,
                                              const ConcentrationParams& hyper,
                                              const BaseMeasureHyper& base,
                                              const DesignSpec& design, int num_clusters,
                                              Rng& rng) {
  PriorPredictiveDraw out;
  auto& s = out.state;
  s.conc = draw_concentrations(hyper, rng);
  s.weights = draw_stick_weights(levels, s.conc, rng);
  for (int l = 0; l < levels.L; ++l) s.theta.push_back(draw_theta_atom(base, design.binary_d, rng));
  for (int m = 0; m < levels.M; ++m) s.phi.push_back(draw_phi_atom(base.x, rng));
  for (int k = 0; k < levels.K; ++k) s.eta.push_back(draw_eta_atom(base, rng));

  auto& data = out.data;
  data.p = design.p;
  data.q = design.q;
  data.binary_d = design.binary_d;
  std::vector<double> row(levels.L);
  for (int i = 0; i < num_clusters; ++i) {
    const int k = rng.categorical({s.weights.pi_star.data(), static_cast<std::size_t>(levels.K)});
    s.indicators.zeta_n.push_back(k);
    const auto& eta = s.eta[k];
    ClusterRecord c;
    c.id = "c" + std::to_string(i);
    c.treatment = rng.bernoulli(0.5) ? 1 : 0;
    c.v.resize(design.q);
    for (int t = 0; t < design.q; ++t) c.v[t] = rng.normal(eta.v_mean[t], std::sqrt(eta.v_var[t]));
    const int n = rng.poisson(eta.lambda_n);
    for (int l = 0; l < levels.L; ++l) row[l] = s.weights.w_theta(k, l);
    for (int j = 0; j < n; ++j) {
      const int l = rng.categorical(row);
      const int m = rng.categorical(s.weights.w_phi_row(k, l));
      s.indicators.zeta_y.push_back(l);
      s.indicators.zeta_x.push_back(m);
      Individual ind;
      ind.x.resize(design.p);
      for (int t = 0; t < design.p; ++t) {
        ind.x[t] = rng.normal(s.phi[m].mu[t], std::sqrt(s.phi[m].var[t]));
      }
      c.individuals.push_back(std::move(ind));
    }
    data.clusters.push_back(std::move(c));
  }
  if (design.binary_d) {
    // Latent probit values first, so that D = 1{Z >= 0} agrees with them.
    s.latent_d.resize(data.total_individuals());
    int r = 0;
    for (auto& c : data.clusters) {
      for (auto& ind : c.individuals) {
        const auto& atom = s.theta[s.indicators.zeta_y[r]].d;
        const double z = rng.normal(design.row_d(c.treatment, c.size(), ind.x, c.v).dot(atom.beta), 1.0);
        s.latent_d[r] = z;
        ind.d = z >= 0.0 ? 1.0 : 0.0;
        ++r;
      }
    }
    simulate_responses(s, design, data, rng, false);
  } else {
    simulate_responses(s, design, data, rng, true);
  }
  return out;
}

}  // namespace caedp
