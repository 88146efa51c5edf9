#pragma once

#include <cstdint>
#include <random>
#include <span>

#include <Eigen/Core>

namespace caedp {

/// Seeds for independent streams are derived from a master seed with
/// splitmix64: seed(master, tag, index) = mix(mix(master ^ tag) + index).
/// Chains, replicates and per-draw g-computation all go through this rule.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t index = 0);

/// Stream tags used with derive_seed.
enum class Stream : std::uint64_t {
  kChain = 1,
  kGcompute = 2,
  kGammaChain = 3,
  kRho = 4,
  kReplicate = 5,
  kTruth = 6,
  kDataset = 7,
};

inline std::uint64_t derive_seed(std::uint64_t master, Stream tag, std::uint64_t index = 0) {
  return derive_seed(master, static_cast<std::uint64_t>(tag), index);
}

/// Thin wrapper over mt19937_64 with the draws the samplers need. Gamma and
/// inverse-gamma use the shape/rate parameterisation throughout.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();                  // (0, 1)
  double normal();                   // N(0, 1)
  double normal(double mean, double sd) { return mean + sd * normal(); }
  double gamma(double shape, double rate);
  double inv_gamma(double shape, double scale) { return 1.0 / gamma(shape, scale); }
  double beta(double a, double b);
  /// Beta draw that also returns log(1 - draw), computed without
  /// cancellation so it stays finite after the draw rounds to 1.
  double beta(double a, double b, double& log1m);
  int poisson(double lambda);
  bool bernoulli(double p) { return uniform() < p; }
  double student_t(double df);

  /// Draw an index from unnormalised log-weights (max-subtracted internally).
  /// Throws std::runtime_error if every weight is -inf or NaN.
  int categorical_log(std::span<const double> log_weights);
  /// Draw an index from nonnegative (not necessarily normalised) weights.
  int categorical(std::span<const double> weights);

  /// Normal truncated to [lower, +inf) or (-inf, upper].
  double truncated_normal_below(double mean, double sd, double lower);
  double truncated_normal_above(double mean, double sd, double upper);

  /// Multivariate normal with the given covariance (dense Cholesky).
  Eigen::VectorXd mvnormal(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);

  std::mt19937_64& engine() { return engine_; }

 private:
  double log_gamma_variate(double shape);  // log of a Gamma(shape, 1) draw

  std::mt19937_64 engine_;
  std::normal_distribution<double> std_normal_{0.0, 1.0};
};

/// Standard normal CDF and quantile.
double norm_cdf(double x);
double norm_quantile(double p);
double norm_logpdf(double x, double mean, double sd);

}  // namespace caedp
