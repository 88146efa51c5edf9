#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "caedp/cli/config.hpp"
#include "caedp/gcomp.hpp"

namespace caedp::cli {

/// SHA-1 of "blob <size>\0<content>", as git hashes file contents.
std::string git_blob_sha1(const std::string& content);

/// Writes to "<path>.tmp" and renames over `path`.
void atomic_write(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

/// Est / 95% CI / PP table, one row per estimand.
std::string format_summary_table(const PosteriorSummary& summary);
std::string format_sensitivity_table(const std::vector<SensitivityRun>& runs);
/// One row per retained draw: iteration, the five estimands, gamma1, gamma0,
/// clusters used and skipped.
std::string format_draws_csv(const EstimandDraws& draws);

/// Base measure of a fit: empirical-Bayes g-prior or the data-free default,
/// with the size and NIG overrides applied.
BaseMeasureHyper base_measure_for(const RunConfig& config, const ClusterDataset& data,
                                  const DesignSpec& design);

struct Artifact {
  std::string name;  // file name inside the output directory
  std::string content;
};

struct CommandOutput {
  std::vector<Artifact> artifacts;
  std::vector<std::pair<std::string, std::string>> inputs;  // manifest key, file content
  std::string message;                                      // printed on success
};

CommandOutput run_fit(const RunConfig& config);
CommandOutput run_gcompute(const RunConfig& config);
CommandOutput run_sensitivity_command(const RunConfig& config);
CommandOutput run_simulate(const RunConfig& config);
CommandOutput run_diagnose(const RunConfig& config);

/// Validates, dispatches on config.command, writes every artifact and the
/// manifest "manifest_<command>.txt" into config.out. Returns the written paths.
std::vector<std::string> execute(const RunConfig& config, std::ostream& log);

/// Whole front end: argument parsing, config layering (defaults,
/// CAEDP_THREADS, --config file, --set pairs, then --seed/--out/--threads)
/// and error mapping. Exit status 0 success, 1 validation error, 2 runtime error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace caedp::cli
