#pragma once

#include <string>

#include <Eigen/Core>

#include "caedp/dataset.hpp"
#include "caedp/model.hpp"

namespace caedp {

/// g = max{0, R^2 / (1 - R^2) * (n - d - 1) / d}. Throws on R^2 >= 1 or d < 1.
double empirical_bayes_g(double r_squared, long n, int d);

/// Least-squares summary behind the g-prior of one regression.
struct GPriorFit {
  Eigen::VectorXd coef;  // least-squares coefficients
  double sigma2 = 0.0;   // SSE / (n - d)
  double r_squared = 0.0;
  double g = 0.0;        // after the 1/n floor
  double g_raw = 0.0;    // before the floor
};

/// Fits y on the columns of c (the intercept is expected among them).
/// `name` labels errors: rank deficiency, too few rows, R^2 = 1.
GPriorFit fit_gprior(const Eigen::MatrixXd& c, const Eigen::VectorXd& y, const std::string& name);

/// Empirical-Bayes base-measure hyperparameters for a dataset:
///  regressions: mean = least squares, cov = g sigma2 (C'C)^{-1},
///               sigma^2 ~ IG(2, sigma2);
///  binary confounder: mean 0, cov = n (C'C)^{-1} (unit-information probit prior);
///  X and V: per-coordinate NIG centred at the sample moments, kappa = 0.1, a = 2;
///  cluster size: lambda ~ Gamma(0.1 * mean size, 0.1).
BaseMeasureHyper gprior_hyperparameters(const ClusterDataset& data, const DesignSpec& design);

/// Data-free base measure: N(0, scale^2 I) coefficients, IG(2, 1) variances,
/// NIG(0, kappa = 0.1, a = 2, b = 1) for X and V, Gamma(1, 0.1) sizes.
BaseMeasureHyper default_base_measure(const DesignSpec& design, double scale = 1.0);

}  // namespace caedp
