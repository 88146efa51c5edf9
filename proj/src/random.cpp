#include "caedp/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <boost/math/special_functions/erf.hpp>

namespace caedp {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t index) {
  return splitmix64(splitmix64(master ^ (tag * 0xD1B54A32D192ED03ULL)) + index);
}

double Rng::uniform() {
  // 53 random bits mapped to the open interval (0, 1).
  for (;;) {
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    if (u > 0.0) return u;
  }
}

double Rng::normal() { return std_normal_(engine_); }

double Rng::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) {
    throw std::domain_error("gamma draw requires positive shape and rate");
  }
  std::gamma_distribution<double> dist(shape, 1.0 / rate);
  return dist(engine_);
}

double Rng::beta(double a, double b) {
  // Beta(1, b) has the closed-form inverse CDF 1 - U^{1/b}; it is the
  // stick-breaking prior and worth the shortcut.
  if (a == 1.0 && b > 0.0) return -std::expm1(std::log(uniform()) / b);
  const double x = gamma(a, 1.0);
  const double y = gamma(b, 1.0);
  return x / (x + y);
}

double Rng::log_gamma_variate(double shape) {
  if (shape >= 1.0) return std::log(gamma(shape, 1.0));
  // Gamma(shape) = Gamma(shape + 1) U^{1/shape}; the power underflows for
  // small shapes, its logarithm does not.
  return std::log(gamma(shape + 1.0, 1.0)) + std::log(uniform()) / shape;
}

double Rng::beta(double a, double b, double& log1m) {
  if (a == 1.0 && b > 0.0) {
    log1m = std::log(uniform()) / b;
    return -std::expm1(log1m);
  }
  if (!(a > 0.0) || !(b > 0.0)) throw std::domain_error("beta draw requires positive shapes");
  const double lx = log_gamma_variate(a);
  const double ly = log_gamma_variate(b);
  const double hi = std::max(lx, ly);
  const double lse = hi + std::log(std::exp(lx - hi) + std::exp(ly - hi));
  log1m = ly - lse;
  return std::exp(lx - lse);
}

int Rng::poisson(double lambda) {
  if (!(lambda > 0.0)) throw std::domain_error("poisson draw requires a positive rate");
  std::poisson_distribution<int> dist(lambda);
  return dist(engine_);
}

double Rng::student_t(double df) {
  const double z = normal();
  const double chi2 = 2.0 * gamma(0.5 * df, 1.0);
  return z / std::sqrt(chi2 / df);
}

int Rng::categorical_log(std::span<const double> log_weights) {
  double max_lw = -std::numeric_limits<double>::infinity();
  for (double lw : log_weights) max_lw = std::max(max_lw, lw);
  if (!std::isfinite(max_lw)) {
    throw std::runtime_error("categorical draw: all log-weights are -inf");
  }
  double total = 0.0;
  for (double lw : log_weights) total += std::exp(lw - max_lw);
  double target = uniform() * total;
  const int n = static_cast<int>(log_weights.size());
  for (int i = 0; i < n; ++i) {
    target -= std::exp(log_weights[i] - max_lw);
    if (target <= 0.0) return i;
  }
  // Rounding: fall back to the last index with positive weight.
  for (int i = n - 1; i >= 0; --i) {
    if (log_weights[i] > -std::numeric_limits<double>::infinity()) return i;
  }
  return n - 1;
}

int Rng::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw std::runtime_error("categorical draw: weights sum to zero");
  double target = uniform() * total;
  const int n = static_cast<int>(weights.size());
  for (int i = 0; i < n; ++i) {
    target -= weights[i];
    if (target <= 0.0) return i;
  }
  for (int i = n - 1; i >= 0; --i) {
    if (weights[i] > 0.0) return i;
  }
  return n - 1;
}

double Rng::truncated_normal_below(double mean, double sd, double lower) {
  // Standardised lower bound; inverse-CDF in the upper tail is stable
  // when expressed through the survival function.
  const double a = (lower - mean) / sd;
  if (a > 8.0) {
    // Robert (1995) exponential rejection for far tails.
    const double alpha = 0.5 * (a + std::sqrt(a * a + 4.0));
    for (;;) {
      const double z = a - std::log(uniform()) / alpha;
      if (std::log(uniform()) <= -0.5 * (z - alpha) * (z - alpha)) return mean + sd * z;
    }
  }
  const double surv_a = norm_cdf(-a);
  const double u = uniform();
  const double z = -norm_quantile(u * surv_a);
  return mean + sd * std::max(z, a);
}

double Rng::truncated_normal_above(double mean, double sd, double upper) {
  return -truncated_normal_below(-mean, sd, -upper);
}

Eigen::VectorXd Rng::mvnormal(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("multivariate normal draw: covariance is not positive definite");
  }
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal();
  return mean + llt.matrixL() * z;
}

double norm_cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 * 0.5); }

double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw std::domain_error("normal quantile requires p in [0, 1]");
  }
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double norm_logpdf(double x, double mean, double sd) {
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  const double z = (x - mean) / sd;
  return -kHalfLog2Pi - std::log(sd) - 0.5 * z * z;
}

}  // namespace caedp
