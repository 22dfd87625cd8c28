// egpd_lasso: fit, simulate and post-process conditional EGPD regressions.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
// failure. EGPD_LASSO_WORKERS sets the default for --workers.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "egpd/commands.hpp"
#include "egpd/errors.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

std::size_t default_workers() {
  const char* env = std::getenv("EGPD_LASSO_WORKERS");
  if (env == nullptr || *env == '\0') return 1;
  try {
    std::size_t used = 0;
    const unsigned long v = std::stoul(env, &used);
    if (used != std::string(env).size() || v == 0) throw std::invalid_argument(env);
    return v;
  } catch (const std::exception&) {
    throw egpd::ConfigError(std::string("EGPD_LASSO_WORKERS must be a positive integer, got '") +
                            env + "'");
  }
}

egpd::OutputFormat format_of(const std::string& s) { return egpd::parse_output_format(s); }

void add_format(CLI::App* cmd, std::string& format) {
  cmd->add_option("--format", format, "Output format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional EGPD regression with Bayesian Lasso shrinkage"};
  app.require_subcommand(1);

  std::size_t workers = 0;
  std::string format = "csv";

  // fit
  auto* fit = app.add_subcommand("fit", "Fit a model described by a config file");
  std::string fit_config;
  std::optional<std::uint64_t> fit_seed;
  std::string fit_out;
  std::optional<std::string> fit_format;
  fit->add_option("--config", fit_config, "Config file")->required();
  fit->add_option("--seed", fit_seed, "Override sampler.seed");
  fit->add_option("--out", fit_out, "Override output.directory");
  fit->add_option("--workers", workers, "Concurrent chains");
  fit->add_option("--format", fit_format, "Summary format")->check(CLI::IsMember({"csv", "json"}));

  // simulate
  auto* sim = app.add_subcommand("simulate", "Write a simulated dataset");
  egpd::SimulateOptions sim_opts;
  std::string sim_out;
  sim->add_option("--scenario", sim_opts.scenario, "Scenario id (1-4)")->capture_default_str();
  sim->add_option("--n", sim_opts.n, "Number of observations")->capture_default_str();
  sim->add_option("--seed", sim_opts.seed, "Master seed")->capture_default_str();
  sim->add_option("--out", sim_out, "Output CSV")->required();
  sim->add_flag("--rainfall", sim_opts.rainfall, "Synthetic rainfall-shaped data (n defaults to 532)");

  // mc-study
  auto* mc = app.add_subcommand("mc-study", "Monte Carlo study over replicated scenario fits");
  egpd::McStudyOptions mc_opts;
  std::string mc_out;
  std::string mc_config;
  std::optional<std::uint64_t> mc_seed;
  std::optional<std::size_t> mc_draws, mc_burn, mc_chains, mc_nx;
  bool mc_full = false;
  mc->add_option("--scenario", mc_opts.scenario, "Scenario id (1-4)")->capture_default_str();
  mc->add_option("--n", mc_opts.sample_sizes, "Sample sizes")->capture_default_str();
  mc->add_option("--reps", mc_opts.reps, "Replicates per sample size")->capture_default_str();
  mc->add_option("--seed", mc_seed, "Master seed");
  mc->add_option("--out", mc_out, "Output directory")->required();
  mc->add_option("--workers", workers, "Concurrent replicates");
  mc->add_option("--config", mc_config, "Config file with [prior] and [sampler] sections");
  mc->add_option("--draws", mc_draws, "Retained draws per replicate");
  mc->add_option("--burn-in", mc_burn, "Burn-in sweeps per replicate");
  mc->add_option("--chains", mc_chains, "Chains per replicate");
  mc->add_option("--n-x", mc_nx, "Covariate points for MISE");
  mc->add_flag("--fit-intercept", mc_opts.config.design.intercept,
               "Fit an intercept per channel on standardized covariates");
  mc->add_flag("--full", mc_full, "Full-size study: 1000 replicates, 20000 draws (hours)");

  // density-grid
  auto* dg = app.add_subcommand("density-grid", "Conditional density cross-sections of a fit");
  std::string dg_fit, dg_out;
  egpd::DensityGridOptions dg_opts;
  std::optional<double> dg_ymin, dg_ymax;
  dg->add_option("--fit", dg_fit, "Fit output directory")->required();
  dg->add_option("--out", dg_out, "Output file")->required();
  dg->add_option("--c", dg_opts.c_values, "Sections x = (c, ..., c)")->capture_default_str();
  dg->add_option("--y-min", dg_ymin, "Smallest y");
  dg->add_option("--y-max", dg_ymax, "Largest y (default: max observed)");
  dg->add_option("--y-count", dg_opts.y_count, "Grid points")->capture_default_str();
  dg->add_option("--max-draws", dg_opts.max_draws, "Posterior draws used")->capture_default_str();
  dg->add_option("--level", dg_opts.level, "Band level")->capture_default_str();
  add_format(dg, format);

  // residuals
  auto* res = app.add_subcommand("residuals", "Quantile residuals of a fit");
  std::string res_fit, res_out;
  egpd::ResidualCommandOptions res_opts;
  res->add_option("--fit", res_fit, "Fit output directory")->required();
  res->add_option("--out", res_out, "Output file")->required();
  res->add_flag("--plugin", res_opts.residuals.plugin, "Use posterior-mean coefficients only");
  res->add_option("--max-draws", res_opts.residuals.max_draws, "Posterior draws used")
      ->capture_default_str();
  add_format(res, format);

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "ESS, Geweke and R-hat from chain files");
  std::string diag_fit, diag_out;
  diag->add_option("--fit", diag_fit, "Fit output directory")->required();
  diag->add_option("--out", diag_out, "Output file")->required();
  add_format(diag, format);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (workers == 0) workers = default_workers();

    if (*fit) {
      egpd::RunConfig config = egpd::load_config(fit_config);
      if (fit_seed) config.sampler.master_seed = *fit_seed;
      if (!fit_out.empty()) config.output.directory = fit_out;
      if (fit_format) config.output.format = format_of(*fit_format);
      egpd::cmd_fit(config, workers, std::cerr);
    } else if (*sim) {
      if (sim_opts.rainfall && sim->count("--n") == 0) sim_opts.n = 532;
      egpd::cmd_simulate(sim_opts, sim_out);
    } else if (*mc) {
      egpd::McConfig& cfg = mc_opts.config;
      if (!mc_config.empty()) {
        const egpd::RunConfig rc = egpd::load_config(mc_config, false);
        cfg.sampler = rc.sampler;
        cfg.prior = rc.prior;
        cfg.master_seed = rc.sampler.master_seed;
      }
      if (mc_full) {
        mc_opts.reps = mc->count("--reps") ? mc_opts.reps : 1000;
        cfg.sampler.n_iter = 20000;
        std::cerr << "warning: the full study runs for many hours\n";
      }
      if (mc_seed) cfg.master_seed = *mc_seed;
      if (mc_draws) cfg.sampler.n_iter = *mc_draws;
      if (mc_burn) cfg.sampler.burn_in = *mc_burn;
      if (mc_chains) cfg.sampler.n_chains = *mc_chains;
      if (mc_nx) cfg.n_x = *mc_nx;
      cfg.workers = workers;
      const auto results = egpd::cmd_mc_study(mc_opts, mc_out, std::cerr);
      for (const auto& r : results) {
        std::cout << "n=" << r.n << " median MISE " << r.mise.median << " failures "
                  << r.failures << '\n';
      }
    } else if (*dg) {
      dg_opts.y_min = dg_ymin;
      dg_opts.y_max = dg_ymax;
      dg_opts.format = format_of(format);
      egpd::cmd_density_grid(dg_fit, dg_opts, dg_out);
    } else if (*res) {
      res_opts.format = format_of(format);
      const auto rep = egpd::cmd_residuals(res_fit, res_opts, res_out);
      std::cout << "KS statistic " << rep.ks.statistic << ", p-value " << rep.ks.p_value << '\n';
    } else if (*diag) {
      egpd::cmd_diagnose(diag_fit, format_of(format), diag_out);
    }
  } catch (const egpd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const egpd::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
  return 0;
}
