#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "caedp/copula.hpp"
#include "caedp/dataset.hpp"
#include "caedp/gibbs.hpp"
#include "caedp/random.hpp"
#include "caedp/state.hpp"

namespace caedp {

enum class RhoMode { kZero, kPrior, kFixed };

std::string to_string(RhoMode mode);
RhoMode parse_rho_mode(const std::string& text);

struct GcompConfig {
  int synthetic_clusters = 100;  // T
  RhoMode rho_mode = RhoMode::kZero;
  double fixed_rho = 0.0;
  int gamma_steps = 2000;
  int gamma_burn = 500;
  double inversion_tol = 1e-8;
  int threads = 1;

  void validate() const;
};

/// Cluster-averaged expected outcomes of the four regimes (a, a1, a2):
/// treatment a with the confounder in world a, own mediator from world a1,
/// the other members' mediators from world a2.
struct RegimeMeans {
  double y111 = 0.0, y110 = 0.0, y100 = 0.0, y000 = 0.0;
};

enum Estimand { kTE = 0, kNDE, kNIE, kSME, kIME, kNumEstimands };
inline constexpr std::array<const char*, kNumEstimands> kEstimandNames = {"TE", "NDE", "NIE",
                                                                          "SME", "IME"};

/// One Monte-Carlo draw of the estimands with its ingredients.
struct EstimandDraw {
  RegimeMeans regimes;
  std::array<double, kNumEstimands> value{};
  double gamma1 = 0.0, gamma0 = 0.0;
  int clusters_used = 0;
  int clusters_skipped = 0;

  double te() const { return value[kTE]; }
  double nde() const { return value[kNDE]; }
  double nie() const { return value[kNIE]; }
  double sme() const { return value[kSME]; }
  double ime() const { return value[kIME]; }
};

using EstimandDraws = std::vector<EstimandDraw>;

/// TE = y111 - y000, NIE = y111 - y100, NDE = y100 - y000,
/// SME = y111 - y110, IME = y110 - y100.
EstimandDraw estimands_from_regimes(const RegimeMeans& r);

/// Zero-truncated Poisson draw.
int draw_positive_poisson(double lambda, Rng& rng);

/// g-computation over T synthetic clusters for one posterior state with
/// same-world correlations (gamma1, gamma0). `rho_rng` is only consumed in
/// prior mode, so the other draws stay aligned across modes. Clusters whose
/// copula transform fails are skipped; fewer than 90% successes is an error.
EstimandDraw gcompute_draw(const CaEdpState& state, double gamma1, double gamma0,
                           const DesignSpec& design, const GcompConfig& config, Rng& rng,
                           Rng& rho_rng);

/// Full post-processing of a posterior: for each kept state an MH chain for
/// (gamma1, gamma0) on the observed data, then gcompute_draw. Streams are
/// derived from (seed, draw index), so results do not depend on threads.
EstimandDraws gcompute_posterior(const PosteriorSample& posterior, const ClusterDataset& data,
                                 const GcompConfig& config, std::uint64_t seed);

struct EstimandSummary {
  double mean = 0.0;
  double lower = 0.0;  // 2.5% quantile
  double upper = 0.0;  // 97.5% quantile
  double pp = 0.0;     // fraction of draws > 0
  double sd = 0.0;
};

using PosteriorSummary = std::array<EstimandSummary, kNumEstimands>;

/// Linear-interpolation quantile of sorted values (R type 7).
double sorted_quantile(const std::vector<double>& sorted, double prob);

PosteriorSummary aggregate_posterior(const EstimandDraws& draws);

struct SensitivityRun {
  RhoMode mode;
  double fixed_rho = 0.0;
  EstimandDraws draws;
  PosteriorSummary summary;
};

/// g-computation in each requested rho mode with the same seed, so the
/// only difference between runs is rho.
std::vector<SensitivityRun> run_sensitivity(const PosteriorSample& posterior,
                                            const ClusterDataset& data, GcompConfig config,
                                            const std::vector<std::pair<RhoMode, double>>& modes,
                                            std::uint64_t seed);

}  // namespace caedp
