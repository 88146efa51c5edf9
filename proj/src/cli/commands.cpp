#include "caedp/cli/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "caedp/cli/csv.hpp"
#include "caedp/hyperparameters.hpp"
#include "caedp/posterior_io.hpp"
#include "caedp/simbench.hpp"
#include "caedp/textio.hpp"

namespace caedp::cli {
namespace {

std::string fmt(const char* format, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

ClusterDataset load_data(const RunConfig& config, CommandOutput& out) {
  out.inputs.emplace_back("input", read_file(config.input));
  std::istringstream in(out.inputs.back().second);
  return read_csv(in, config.schema, config.input);
}

PosteriorSample load_posterior(const RunConfig& config, CommandOutput& out) {
  const std::string path = config.posterior_path();
  out.inputs.emplace_back("posterior", read_file(path));
  std::istringstream in(out.inputs.back().second);
  try {
    return read_posterior(in);
  } catch (const std::invalid_argument& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void check_matches(const PosteriorSample& post, const ClusterDataset& data) {
  const DesignSpec d = DesignSpec::for_dataset(data);
  if (post.design.p != d.p || post.design.q != d.q || post.design.binary_d != d.binary_d) {
    throw ValidationError("posterior design does not match the input data");
  }
  const auto& s = post.states.front();
  if (static_cast<int>(s.indicators.zeta_n.size()) != data.num_clusters() ||
      static_cast<int>(s.indicators.zeta_y.size()) != data.total_individuals()) {
    throw ValidationError("posterior was fitted to a dataset of a different size");
  }
}

GcompConfig gcomp_config(const RunConfig& config) {
  GcompConfig gc = config.gcomp;
  gc.threads = config.threads;
  return gc;
}

int distinct(const std::vector<int>& v) { return static_cast<int>(std::set<int>(v.begin(), v.end()).size()); }

}  // namespace

std::string git_blob_sha1(const std::string& content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr) throw std::runtime_error("SHA-1: cannot allocate a digest context");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("SHA-1 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

void atomic_write(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write '" + tmp + "'");
    f << content;
    f.flush();
    if (!f) throw std::runtime_error("write to '" + tmp + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string format_summary_table(const PosteriorSummary& summary) {
  std::string out = "Estimand        Est                  95% CI       PP\n";
  for (int e = 0; e < kNumEstimands; ++e) {
    const auto& s = summary[e];
    out += fmt("%-8s %10.4f  [%10.4f, %10.4f]  %5.3f\n", kEstimandNames[e], s.mean, s.lower,
               s.upper, s.pp);
  }
  return out;
}

std::string format_sensitivity_table(const std::vector<SensitivityRun>& runs) {
  std::string out;
  const auto label = [](const SensitivityRun& r) {
    return r.mode == RhoMode::kFixed ? "fixed " + format_double(r.fixed_rho) : to_string(r.mode);
  };
  for (const auto& r : runs) {
    out += "rho mode: " + label(r) + "\n" + format_summary_table(r.summary) + "\n";
  }
  if (runs.size() > 1) {
    const auto& ref = runs.front();
    out += "Differences in posterior means against rho mode " + label(ref) +
           " (Monte-Carlo SE from the draw standard deviations)\n";
    out += "Mode          Estimand       Diff          SE\n";
    for (std::size_t i = 1; i < runs.size(); ++i) {
      for (int e = 0; e < kNumEstimands; ++e) {
        const double n0 = static_cast<double>(ref.draws.size());
        const double n1 = static_cast<double>(runs[i].draws.size());
        const double se = std::sqrt(ref.summary[e].sd * ref.summary[e].sd / n0 +
                                    runs[i].summary[e].sd * runs[i].summary[e].sd / n1);
        out += fmt("%-13s %-8s %10.4f  %10.4f\n", label(runs[i]).c_str(), kEstimandNames[e],
                   runs[i].summary[e].mean - ref.summary[e].mean, se);
      }
    }
  }
  return out;
}

std::string format_draws_csv(const EstimandDraws& draws) {
  std::string out = "iteration,TE,NDE,NIE,SME,IME,gamma1,gamma0,clusters_used,clusters_skipped\n";
  for (std::size_t t = 0; t < draws.size(); ++t) {
    const auto& d = draws[t];
    out += std::to_string(t);
    for (double v : d.value) out += "," + format_double(v);
    out += "," + format_double(d.gamma1) + "," + format_double(d.gamma0) + "," +
           std::to_string(d.clusters_used) + "," + std::to_string(d.clusters_skipped) + "\n";
  }
  return out;
}

BaseMeasureHyper base_measure_for(const RunConfig& config, const ClusterDataset& data,
                                  const DesignSpec& design) {
  BaseMeasureHyper base = config.prior == PriorKind::kGPrior
                              ? gprior_hyperparameters(data, design)
                              : default_base_measure(design, config.prior_scale);
  if (config.size_shape > 0.0) base.a_n = config.size_shape;
  if (config.size_rate > 0.0) base.b_n = config.size_rate;
  if (config.nig_kappa > 0.0) {
    base.x.kappa = config.nig_kappa;
    base.v.kappa = config.nig_kappa;
  }
  base.validate();
  return base;
}

CommandOutput run_fit(const RunConfig& config) {
  CommandOutput out;
  const ClusterDataset data = load_data(config, out);
  const DesignSpec design = DesignSpec::for_dataset(data);
  McmcConfig mcmc = config.mcmc;
  mcmc.seed = config.seed;
  mcmc.record_loglik = true;
  const PosteriorSample post = run_chain(data, design, mcmc, base_measure_for(config, data, design));
  std::ostringstream buf;
  write_posterior(buf, post);
  out.artifacts.push_back({"posterior.txt", buf.str()});
  out.message = "fit: " + std::to_string(data.num_clusters()) + " clusters, " +
                std::to_string(data.total_individuals()) + " individuals, " +
                std::to_string(post.keep()) + " kept draws";
  return out;
}

CommandOutput run_gcompute(const RunConfig& config) {
  CommandOutput out;
  const ClusterDataset data = load_data(config, out);
  const PosteriorSample post = load_posterior(config, out);
  check_matches(post, data);
  const EstimandDraws draws = gcompute_posterior(post, data, gcomp_config(config), config.seed);
  long skipped = 0;
  for (const auto& d : draws) skipped += d.clusters_skipped;
  const PosteriorSummary summary = aggregate_posterior(draws);
  out.artifacts.push_back({"estimand_draws.csv", format_draws_csv(draws)});
  out.artifacts.push_back({"summary.txt", "rho mode: " + to_string(config.gcomp.rho_mode) + "\n" +
                                              format_summary_table(summary)});
  out.message = format_summary_table(summary);
  if (skipped > 0) {
    out.message += "warning: " + std::to_string(skipped) +
                   " synthetic clusters skipped after copula inversion failures\n";
  }
  return out;
}

CommandOutput run_sensitivity_command(const RunConfig& config) {
  CommandOutput out;
  const ClusterDataset data = load_data(config, out);
  const PosteriorSample post = load_posterior(config, out);
  check_matches(post, data);
  const auto runs =
      run_sensitivity(post, data, gcomp_config(config), config.sensitivity_modes, config.seed);
  std::string csv = "mode,rho,iteration,TE,NDE,NIE,SME,IME\n";
  for (const auto& r : runs) {
    for (std::size_t t = 0; t < r.draws.size(); ++t) {
      csv += to_string(r.mode) + "," + format_double(r.fixed_rho) + "," + std::to_string(t);
      for (double v : r.draws[t].value) csv += "," + format_double(v);
      csv += "\n";
    }
  }
  const std::string table = format_sensitivity_table(runs);
  out.artifacts.push_back({"sensitivity_draws.csv", csv});
  out.artifacts.push_back({"sensitivity.txt", table});
  out.message = table;
  return out;
}

CommandOutput run_simulate(const RunConfig& config) {
  CommandOutput out;
  StudyConfig study;
  study.spec = ScenarioSpec::preset(config.scenario);
  if (config.num_clusters > 0) study.spec.num_clusters = config.num_clusters;
  study.replicates = config.replicates;
  study.mcmc = config.mcmc;
  study.gcomp = config.gcomp;
  study.model = config.model;
  study.seed = config.seed;
  study.threads = config.threads;
  study.truth_clusters = config.truth_clusters;
  const StudyResult result = run_simulation_study(study);

  std::string report = "Scenario " + study.spec.id + ", " + std::to_string(study.replicates) +
                       " replicates, model " +
                       (config.model == ModelKind::kCaEdp ? "caedp" : "parametric") + "\n";
  report += result.report.table({kTE, kNDE, kNIE, kSME, kIME});
  report += "\nTruth (" + std::to_string(result.truth.clusters) + " Monte-Carlo clusters)\n";
  for (int e = 0; e < kNumEstimands; ++e) {
    report += fmt("%-8s %11.4f  (SE %.4f)\n", kEstimandNames[e], result.truth.value[e],
                  result.truth.se[e]);
  }
  std::string csv = "replicate,estimand,mean,lower,upper,pp,sd,truth\n";
  for (std::size_t r = 0; r < result.summaries.size(); ++r) {
    for (int e = 0; e < kNumEstimands; ++e) {
      const auto& s = result.summaries[r][e];
      csv += std::to_string(r) + "," + kEstimandNames[e] + "," + format_double(s.mean) + "," +
             format_double(s.lower) + "," + format_double(s.upper) + "," + format_double(s.pp) +
             "," + format_double(s.sd) + "," + format_double(result.truth.value[e]) + "\n";
    }
  }
  out.artifacts.push_back({"eval_report.txt", report});
  out.artifacts.push_back({"replicate_summaries.csv", csv});
  out.message = report;
  return out;
}

CommandOutput run_diagnose(const RunConfig& config) {
  CommandOutput out;
  const PosteriorSample post = load_posterior(config, out);
  if (post.loglik.rows() != post.keep()) {
    throw ValidationError(config.posterior_path() + ": no per-individual log-likelihoods recorded");
  }
  const double lpml = compute_lpml(post);
  double occ[3] = {0.0, 0.0, 0.0}, alpha[3] = {0.0, 0.0, 0.0};
  for (const auto& s : post.states) {
    occ[0] += distinct(s.indicators.zeta_n);
    occ[1] += distinct(s.indicators.zeta_y);
    occ[2] += distinct(s.indicators.zeta_x);
    alpha[0] += s.conc.alpha_star;
    alpha[1] += s.conc.alpha_theta;
    alpha[2] += s.conc.alpha_phi;
  }
  const double n = post.keep();
  std::string text = "keep=" + std::to_string(post.keep()) + "\n";
  text += "individuals=" + std::to_string(post.loglik.cols()) + "\n";
  text += "lpml=" + format_double(lpml) + "\n";
  text += "mean_occupied_v_classes=" + format_double(occ[0] / n) + "\n";
  text += "mean_occupied_y_classes=" + format_double(occ[1] / n) + "\n";
  text += "mean_occupied_x_classes=" + format_double(occ[2] / n) + "\n";
  text += "mean_alpha_star=" + format_double(alpha[0] / n) + "\n";
  text += "mean_alpha_theta=" + format_double(alpha[1] / n) + "\n";
  text += "mean_alpha_phi=" + format_double(alpha[2] / n) + "\n";
  out.artifacts.push_back({"diagnostics.txt", text});
  out.message = text;
  return out;
}

std::vector<std::string> execute(const RunConfig& config, std::ostream& log) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  CommandOutput result;
  if (config.command == "fit") {
    result = run_fit(config);
  } else if (config.command == "gcompute") {
    result = run_gcompute(config);
  } else if (config.command == "sensitivity") {
    result = run_sensitivity_command(config);
  } else if (config.command == "simulate") {
    result = run_simulate(config);
  } else if (config.command == "diagnose") {
    result = run_diagnose(config);
  } else {
    throw ValidationError("unknown command '" + config.command + "'");
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::error_code ec;
  std::filesystem::create_directories(config.out, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + config.out + "'");
  std::vector<std::string> written;
  std::string manifest = "# caedp run manifest; usable as --config to repeat the run\n";
  manifest += "manifest.command=" + config.command + "\n";
  manifest += "manifest.seed=" + std::to_string(config.seed) + "\n";
  manifest += "manifest.wall_time_seconds=" + fmt("%.3f", seconds) + "\n";
  for (const auto& [key, content] : result.inputs) {
    manifest += "manifest." + key + "_sha1=" + git_blob_sha1(content) + "\n";
  }
  for (const auto& a : result.artifacts) {
    const std::string path = config.out + "/" + a.name;
    atomic_write(path, a.content);
    written.push_back(path);
    manifest += "manifest.artifact." + a.name + "=" + git_blob_sha1(a.content) + "\n";
  }
  manifest += config.to_text();
  const std::string manifest_path = config.out + "/manifest_" + config.command + ".txt";
  atomic_write(manifest_path, manifest);
  written.push_back(manifest_path);
  log << result.message;
  if (!result.message.empty() && result.message.back() != '\n') log << '\n';
  for (const auto& p : written) log << "wrote " << p << '\n';
  return written;
}

}  // namespace caedp::cli
