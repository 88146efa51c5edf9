#include <exception>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "caedp/cli/commands.hpp"

namespace caedp::cli {

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian nonparametric causal mediation for cluster-randomized trials", "caedp"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::vector<std::string> sets;
  long long seed = -1;
  int threads = 0;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"fit", "run the blocked Gibbs sampler on a CSV dataset"},
      {"gcompute", "g-computation of the mediation estimands from a posterior"},
      {"sensitivity", "g-computation under several cross-world correlation modes"},
      {"simulate", "simulation study with truth, fits and evaluation"},
      {"diagnose", "LPML and class-occupancy diagnostics of a posterior"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "key=value configuration file");
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--out", out_dir, "output directory (overrides the config)");
    sub->add_option("--threads", threads, "worker threads (default CAEDP_THREADS or 1)");
    sub->add_option("--set", sets, "extra key=value setting, repeatable");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  try {
    RunConfig config;
    config.command = app.get_subcommands().front()->get_name();
    config.threads = default_threads();
    if (!config_path.empty()) load_config_file(config, config_path);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + kv + "'");
      config.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed >= 0) config.seed = static_cast<std::uint64_t>(seed);
    if (!out_dir.empty()) config.out = out_dir;
    if (threads != 0) config.threads = threads;
    execute(config, out);
    return 0;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace caedp::cli
