#include "caedp/cli/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "caedp/textio.hpp"

namespace caedp::cli {
namespace {

using Setter = std::function<void(RunConfig&, const std::string&)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Key {
  const char* name;
  Setter set;
  Getter get;
};

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? "," : "") + parts[i];
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  if (trim(text).empty()) return out;
  for (auto part : split(text)) out.emplace_back(trim(part));
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    return parse_int(v, key);
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    return parse_double(v, key);
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ValidationError(key + ": '" + v + "' is not a boolean");
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

#define INT_KEY(NAME, FIELD)                                                           \
  Key{NAME, [](RunConfig& c, const std::string& v) { c.FIELD = static_cast<decltype(c.FIELD)>(to_int(NAME, v)); }, \
      [](const RunConfig& c) { return std::to_string(c.FIELD); }}
#define DOUBLE_KEY(NAME, FIELD)                                                        \
  Key{NAME, [](RunConfig& c, const std::string& v) { c.FIELD = to_double(NAME, v); }, \
      [](const RunConfig& c) { return format_double(c.FIELD); }}
#define STRING_KEY(NAME, FIELD)                                               \
  Key{NAME, [](RunConfig& c, const std::string& v) { c.FIELD = v; },         \
      [](const RunConfig& c) { return c.FIELD; }}
#define BOOL_KEY(NAME, FIELD)                                                        \
  Key{NAME, [](RunConfig& c, const std::string& v) { c.FIELD = to_bool(NAME, v); }, \
      [](const RunConfig& c) { return from_bool(c.FIELD); }}
#define LIST_KEY(NAME, FIELD)                                                        \
  Key{NAME, [](RunConfig& c, const std::string& v) { c.FIELD = split_list(v); },    \
      [](const RunConfig& c) { return join(c.FIELD); }}

std::string modes_text(const std::vector<std::pair<RhoMode, double>>& modes) {
  std::vector<std::string> parts;
  for (const auto& [mode, rho] : modes) {
    parts.push_back(mode == RhoMode::kFixed ? "fixed:" + format_double(rho) : to_string(mode));
  }
  return join(parts);
}

std::vector<std::pair<RhoMode, double>> parse_modes(const std::string& text) {
  std::vector<std::pair<RhoMode, double>> out;
  for (const auto& part : split_list(text)) {
    const auto colon = part.find(':');
    try {
      if (colon == std::string::npos) {
        const RhoMode m = parse_rho_mode(part);
        if (m == RhoMode::kFixed) throw ValidationError("fixed mode needs a value: fixed:<rho>");
        out.emplace_back(m, 0.0);
      } else {
        if (part.substr(0, colon) != "fixed") {
          throw ValidationError("only the fixed mode takes a value: '" + part + "'");
        }
        out.emplace_back(RhoMode::kFixed, to_double("sensitivity_modes", part.substr(colon + 1)));
      }
    } catch (const ValidationError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ValidationError(std::string("sensitivity_modes: ") + e.what());
    }
  }
  if (out.empty()) throw ValidationError("sensitivity_modes must list at least one mode");
  return out;
}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      STRING_KEY("input", input),
      STRING_KEY("posterior", posterior),
      STRING_KEY("out", out),
      Key{"seed",
          [](RunConfig& c, const std::string& v) {
            const long long s = to_int("seed", v);
            if (s < 0) throw ValidationError("seed must be nonnegative");
            c.seed = static_cast<std::uint64_t>(s);
          },
          [](const RunConfig& c) { return std::to_string(c.seed); }},
      INT_KEY("threads", threads),
      INT_KEY("burn_in", mcmc.burn_in),
      INT_KEY("keep", mcmc.keep),
      INT_KEY("thin", mcmc.thin),
      INT_KEY("K", mcmc.truncation.K),
      INT_KEY("L", mcmc.truncation.L),
      INT_KEY("M", mcmc.truncation.M),
      DOUBLE_KEY("alpha_star_shape", mcmc.conc_hyper.prior_star.shape),
      DOUBLE_KEY("alpha_star_rate", mcmc.conc_hyper.prior_star.rate),
      DOUBLE_KEY("alpha_theta_shape", mcmc.conc_hyper.prior_theta.shape),
      DOUBLE_KEY("alpha_theta_rate", mcmc.conc_hyper.prior_theta.rate),
      DOUBLE_KEY("alpha_phi_shape", mcmc.conc_hyper.prior_phi.shape),
      DOUBLE_KEY("alpha_phi_rate", mcmc.conc_hyper.prior_phi.rate),
      BOOL_KEY("label_moves", mcmc.label_moves),
      BOOL_KEY("check_invariants", mcmc.check_invariants),
      Key{"prior",
          [](RunConfig& c, const std::string& v) {
            if (v == "gprior") {
              c.prior = PriorKind::kGPrior;
            } else if (v == "default") {
              c.prior = PriorKind::kDefault;
            } else {
              throw ValidationError("prior: '" + v + "' (expected gprior or default)");
            }
          },
          [](const RunConfig& c) {
            return std::string(c.prior == PriorKind::kGPrior ? "gprior" : "default");
          }},
      DOUBLE_KEY("prior_scale", prior_scale),
      DOUBLE_KEY("size_shape", size_shape),
      DOUBLE_KEY("size_rate", size_rate),
      DOUBLE_KEY("nig_kappa", nig_kappa),
      STRING_KEY("col_cluster", schema.cluster),
      STRING_KEY("col_treatment", schema.treatment),
      LIST_KEY("col_x", schema.x),
      LIST_KEY("col_v", schema.v),
      STRING_KEY("col_d", schema.d),
      STRING_KEY("col_m", schema.m),
      STRING_KEY("col_y", schema.y),
      Key{"d_type",
          [](RunConfig& c, const std::string& v) {
            if (v != "continuous" && v != "binary") {
              throw ValidationError("d_type: '" + v + "' (expected continuous or binary)");
            }
            c.schema.binary_d = v == "binary";
          },
          [](const RunConfig& c) { return std::string(c.schema.binary_d ? "binary" : "continuous"); }},
      INT_KEY("synthetic_clusters", gcomp.synthetic_clusters),
      Key{"rho_mode",
          [](RunConfig& c, const std::string& v) {
            try {
              c.gcomp.rho_mode = parse_rho_mode(v);
            } catch (const std::invalid_argument& e) {
              throw ValidationError(e.what());
            }
          },
          [](const RunConfig& c) { return to_string(c.gcomp.rho_mode); }},
      DOUBLE_KEY("fixed_rho", gcomp.fixed_rho),
      INT_KEY("gamma_steps", gcomp.gamma_steps),
      INT_KEY("gamma_burn", gcomp.gamma_burn),
      DOUBLE_KEY("inversion_tol", gcomp.inversion_tol),
      Key{"sensitivity_modes",
          [](RunConfig& c, const std::string& v) { c.sensitivity_modes = parse_modes(v); },
          [](const RunConfig& c) { return modes_text(c.sensitivity_modes); }},
      STRING_KEY("scenario", scenario),
      INT_KEY("replicates", replicates),
      INT_KEY("num_clusters", num_clusters),
      INT_KEY("truth_clusters", truth_clusters),
      Key{"model",
          [](RunConfig& c, const std::string& v) {
            if (v == "caedp") {
              c.model = ModelKind::kCaEdp;
            } else if (v == "parametric") {
              c.model = ModelKind::kParametric;
            } else {
              throw ValidationError("model: '" + v + "' (expected caedp or parametric)");
            }
          },
          [](const RunConfig& c) {
            return std::string(c.model == ModelKind::kCaEdp ? "caedp" : "parametric");
          }},
  };
  return table;
}

#undef INT_KEY
#undef DOUBLE_KEY
#undef STRING_KEY
#undef BOOL_KEY
#undef LIST_KEY

}  // namespace

std::string RunConfig::posterior_path() const {
  return posterior.empty() ? out + "/posterior.txt" : posterior;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& k : keys()) {
    if (key == k.name) {
      k.set(*this, value);
      return;
    }
  }
  throw ValidationError("unknown configuration key '" + key + "'");
}

void RunConfig::validate() const {
  const auto wrap = [](auto&& fn) {
    try {
      fn();
    } catch (const ValidationError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ValidationError(e.what());
    }
  };
  if (threads < 1) throw ValidationError("threads must be positive");
  if (out.empty()) throw ValidationError("out must name a directory");
  const bool needs_input = command == "fit" || command == "gcompute" || command == "sensitivity";
  if (needs_input && input.empty()) {
    throw ValidationError(command + " needs an input CSV (key 'input')");
  }
  if (command == "fit") wrap([&] { mcmc.validate(); });
  if (command == "gcompute" || command == "sensitivity") wrap([&] { gcomp.validate(); });
  if (command == "simulate") {
    wrap([&] {
      mcmc.validate();
      gcomp.validate();
      ScenarioSpec::preset(scenario).validate();
    });
    if (replicates < 1) throw ValidationError("replicates must be positive");
    if (num_clusters < 0) throw ValidationError("num_clusters must be nonnegative");
    if (truth_clusters < 2) throw ValidationError("truth_clusters must be at least 2");
  }
  if (!(prior_scale > 0.0)) throw ValidationError("prior_scale must be positive");
  if (size_shape < 0.0 || size_rate < 0.0 || nig_kappa < 0.0) {
    throw ValidationError("prior overrides must be nonnegative (0 keeps the built-in value)");
  }
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& k : keys()) out += std::string(k.name) + "=" + k.get(*this) + "\n";
  return out;
}

void apply_config_text(RunConfig& config, const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw ValidationError(source + " line " + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key(trim(t.substr(0, eq)));
    const std::string value(trim(t.substr(eq + 1)));
    if (key.rfind("manifest.", 0) == 0) continue;
    try {
      config.set(key, value);
    } catch (const ValidationError& e) {
      throw ValidationError(source + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void load_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  apply_config_text(config, buf.str(), path);
}

int default_threads() {
  const char* env = std::getenv("CAEDP_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  const long long n = to_int("CAEDP_THREADS", env);
  if (n < 1) throw ValidationError("CAEDP_THREADS must be a positive integer");
  return static_cast<int>(n);
}

}  // namespace caedp::cli
