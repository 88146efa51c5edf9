#include "caedp/hyperparameters.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace caedp {
namespace {

NigPrior moment_nig(const Eigen::MatrixXd& values) {
  // values: rows = observations
  NigPrior prior;
  const int dim = static_cast<int>(values.cols());
  const auto n = values.rows();
  prior.mean = Eigen::VectorXd::Zero(dim);
  prior.a = Eigen::VectorXd::Constant(dim, 2.0);
  prior.b = Eigen::VectorXd::Ones(dim);
  prior.kappa = 0.1;
  for (int t = 0; t < dim; ++t) {
    if (n == 0) continue;
    const double mean = values.col(t).mean();
    prior.mean[t] = mean;
    if (n > 1) {
      const double var = (values.col(t).array() - mean).square().sum() / static_cast<double>(n - 1);
      if (var > 0.0) prior.b[t] = var;
    }
  }
  return prior;
}

}  // namespace

double empirical_bayes_g(double r_squared, long n, int d) {
  if (d < 1) throw std::invalid_argument("g-prior needs at least one coefficient");
  if (!(r_squared < 1.0)) throw std::domain_error("R^2 = 1 gives a degenerate g");
  const double g = r_squared / (1.0 - r_squared) * static_cast<double>(n - d - 1) / d;
  return std::max(0.0, g);
}

GPriorFit fit_gprior(const Eigen::MatrixXd& c, const Eigen::VectorXd& y, const std::string& name) {
  const long n = c.rows();
  const int d = static_cast<int>(c.cols());
  if (n <= d + 1) {
    throw std::invalid_argument(name + " regression: need more than d + 1 = " +
                                std::to_string(d + 1) + " observations, have " +
                                std::to_string(n));
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(c);
  if (qr.rank() < d) {
    throw std::invalid_argument(name + " regression: design matrix is rank deficient (rank " +
                                std::to_string(qr.rank()) + " < " + std::to_string(d) + ")");
  }
  GPriorFit fit;
  fit.coef = qr.solve(y);
  const double sse = (y - c * fit.coef).squaredNorm();
  const double sst = (y.array() - y.mean()).square().sum();
  fit.sigma2 = sse / static_cast<double>(n - d);
  fit.r_squared = sst > 0.0 ? 1.0 - sse / sst : 1.0;
  if (!(fit.r_squared < 1.0) || !(fit.sigma2 > 0.0)) {
    throw std::domain_error(name + " regression: perfect fit (R^2 = 1), g is degenerate");
  }
  fit.g_raw = empirical_bayes_g(fit.r_squared, n, d);
  fit.g = fit.g_raw > 0.0 ? fit.g_raw : 1.0 / static_cast<double>(n);
  return fit;
}

BaseMeasureHyper gprior_hyperparameters(const ClusterDataset& data, const DesignSpec& design) {
  data.validate();
  const StackedDesign s = stack_design(data, design);
  BaseMeasureHyper h;

  auto fill = [](RegressionPrior& prior, const Eigen::MatrixXd& c, const Eigen::VectorXd& y,
                 const std::string& name) {
    const GPriorFit fit = fit_gprior(c, y, name);
    const Eigen::MatrixXd ctc = c.transpose() * c;
    prior.mean = fit.coef;
    prior.cov = fit.g * fit.sigma2 * ctc.ldlt().solve(Eigen::MatrixXd::Identity(c.cols(), c.cols()));
    prior.cov = 0.5 * (prior.cov + prior.cov.transpose());
    prior.a_sigma = 2.0;
    prior.b_sigma = fit.sigma2;
  };
  fill(h.y, s.c_y, s.y, "outcome");
  fill(h.m, s.c_m, s.m, "mediator");
  if (design.binary_d) {
    const long n = s.c_d.rows();
    const int d = static_cast<int>(s.c_d.cols());
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(s.c_d);
    if (n <= d + 1 || qr.rank() < d) {
      throw std::invalid_argument("confounder regression: design matrix is rank deficient");
    }
    const Eigen::MatrixXd ctc = s.c_d.transpose() * s.c_d;
    h.d.mean = Eigen::VectorXd::Zero(d);
    h.d.cov = static_cast<double>(n) * ctc.ldlt().solve(Eigen::MatrixXd::Identity(d, d));
    h.d.cov = 0.5 * (h.d.cov + h.d.cov.transpose());
    h.d.a_sigma = 2.0;
    h.d.b_sigma = 1.0;
  } else {
    fill(h.d, s.c_d, s.d, "confounder");
  }

  Eigen::MatrixXd x(s.c_d.rows(), design.p);
  for (int t = 0; t < design.p; ++t) x.col(t) = s.c_d.col(design.idx_x(t));
  h.x = moment_nig(x);
  Eigen::MatrixXd v(data.num_clusters(), design.q);
  for (int i = 0; i < data.num_clusters(); ++i) {
    for (int t = 0; t < design.q; ++t) v(i, t) = data.clusters[i].v[t];
  }
  h.v = moment_nig(v);

  const double mean_size =
      static_cast<double>(data.total_individuals()) / std::max(1, data.num_clusters());
  h.b_n = 0.1;
  h.a_n = 0.1 * mean_size;
  h.finalize();
  h.validate();
  return h;
}

BaseMeasureHyper default_base_measure(const DesignSpec& design, double scale) {
  BaseMeasureHyper h;
  auto fill = [scale](RegressionPrior& prior, int dim) {
    prior.mean = Eigen::VectorXd::Zero(dim);
    prior.cov = scale * scale * Eigen::MatrixXd::Identity(dim, dim);
    prior.a_sigma = 2.0;
    prior.b_sigma = 1.0;
  };
  fill(h.y, design.dim_y());
  fill(h.m, design.dim_m());
  fill(h.d, design.dim_d());
  auto nig = [](int dim) {
    NigPrior prior;
    prior.mean = Eigen::VectorXd::Zero(dim);
    prior.a = Eigen::VectorXd::Constant(dim, 2.0);
    prior.b = Eigen::VectorXd::Ones(dim);
    prior.kappa = 0.1;
    return prior;
  };
  h.x = nig(design.p);
  h.v = nig(design.q);
  h.a_n = 1.0;
  h.b_n = 0.1;
  h.finalize();
  h.validate();
  return h;
}

}  // namespace caedp
