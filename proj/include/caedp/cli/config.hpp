#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "caedp/gcomp.hpp"
#include "caedp/gibbs.hpp"
#include "caedp/simbench.hpp"

namespace caedp::cli {

/// Bad input or configuration; maps to exit status 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// CSV column roles. Empty x/v lists mean "every header named X_<n> / V_<n>
/// in numeric order".
struct ColumnSchema {
  std::string cluster = "cluster_id";
  std::string treatment = "A";
  std::vector<std::string> x;
  std::vector<std::string> v;
  std::string d = "D";
  std::string m = "M";
  std::string y = "Y";
  bool binary_d = false;
};

enum class PriorKind { kGPrior, kDefault };

struct RunConfig {
  std::string command;
  std::string input;      // CSV data
  std::string posterior;  // posterior file; defaults to <out>/posterior.txt
  std::string out = "out";
  std::uint64_t seed = 1;
  int threads = 1;

  McmcConfig mcmc;
  PriorKind prior = PriorKind::kGPrior;
  double prior_scale = 1.0;  // coefficient sd of the default prior
  double size_shape = 0.0;   // Gamma prior of the size rate; 0 keeps the built-in value
  double size_rate = 0.0;
  double nig_kappa = 0.0;    // NIG precision scale for X and V; 0 keeps the built-in value

  ColumnSchema schema;
  GcompConfig gcomp;
  std::vector<std::pair<RhoMode, double>> sensitivity_modes = {{RhoMode::kZero, 0.0},
                                                               {RhoMode::kPrior, 0.0}};

  std::string scenario = "S7";
  int replicates = 20;
  int num_clusters = 0;  // 0 keeps the scenario's value
  long truth_clusters = 100000;
  ModelKind model = ModelKind::kCaEdp;

  std::string posterior_path() const;

  /// Sets one key; throws ValidationError for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);

  /// Throws ValidationError when the settings are inconsistent for `command`.
  void validate() const;

  /// Every key in canonical order as "key=value" lines.
  std::string to_text() const;
};

/// Reads "key = value" lines; '#' starts a comment line. Keys beginning with
/// "manifest." are skipped, so a run manifest is itself a valid config.
void apply_config_text(RunConfig& config, const std::string& text, const std::string& source);
void load_config_file(RunConfig& config, const std::string& path);

/// Default thread count: the CAEDP_THREADS environment variable, else 1.
int default_threads();

}  // namespace caedp::cli
