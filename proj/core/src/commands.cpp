#include "egpd/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "egpd/errors.hpp"

namespace egpd {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

Json summary_to_json(const std::vector<CoefficientSummary>& rows) {
  return Json::parse(summary_json(rows));
}

void write_summary(const fs::path& path_stem, const std::vector<CoefficientSummary>& rows,
                   OutputFormat format) {
  if (format == OutputFormat::Json) {
    write_text_file(fs::path(path_stem).replace_extension(".json"), summary_json(rows));
  } else {
    std::ostringstream out;
    write_summary_csv(out, rows);
    write_text_file(fs::path(path_stem).replace_extension(".csv"), out.str());
  }
}

std::string pad_index(std::size_t r) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", r);
  return buf;
}

// --- Monte Carlo replicate files ---------------------------------------------------

std::vector<std::string> replicate_header(const ScenarioFitDesign& design) {
  std::vector<std::string> h = {"replicate", "ok", "mise"};
  for (auto& name : replicate_coefficient_names(design)) h.push_back(std::move(name));
  return h;
}

std::string replicate_row(const ReplicateResult& r, std::size_t k) {
  std::string line = std::to_string(r.replicate) + "," + (r.ok ? "1" : "0") + "," +
                     format_double(r.ok ? r.mise : 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    line += ',';
    line += format_double(r.ok ? r.coefficient_means[j] : 0.0);
  }
  return line;
}

std::string join_header(const std::vector<std::string>& h) {
  std::string out;
  for (std::size_t i = 0; i < h.size(); ++i) out += (i ? "," : "") + h[i];
  return out;
}

fs::path replicate_file(const fs::path& dir, std::size_t r) {
  return dir / ("replicate_" + pad_index(r) + ".csv");
}

fs::path replicate_error_file(const fs::path& dir, std::size_t r) {
  return dir / ("replicate_" + pad_index(r) + ".error.txt");
}

void write_replicate(const fs::path& dir, const ScenarioFitDesign& design,
                     const ReplicateResult& r) {
  const auto header = replicate_header(design);
  if (!r.ok) write_text_file(replicate_error_file(dir, r.replicate), r.error + "\n");
  // Written last and whole, so its presence marks a finished replicate.
  const fs::path final_path = replicate_file(dir, r.replicate);
  const fs::path tmp = fs::path(final_path).concat(".tmp");
  write_text_file(tmp, join_header(header) + "\n" + replicate_row(r, header.size() - 3) + "\n");
  fs::rename(tmp, final_path);
}

std::optional<ReplicateResult> read_replicate(const fs::path& dir,
                                              const ScenarioFitDesign& design, std::size_t rep,
                                              std::uint64_t seed) {
  const fs::path path = replicate_file(dir, rep);
  if (!fs::exists(path)) return std::nullopt;
  CsvTable t;
  try {
    t = read_csv(path);
  } catch (const DataError&) {
    return std::nullopt;
  }
  if (t.header != replicate_header(design) || t.rows.size() != 1) return std::nullopt;
  const auto& row = t.rows.front();
  if (row[0] != static_cast<double>(rep)) return std::nullopt;
  ReplicateResult r;
  r.replicate = rep;
  r.seed = seed;
  r.ok = row[1] == 1.0;
  if (r.ok) {
    r.mise = row[2];
    r.coefficient_means.assign(row.begin() + 3, row.end());
  } else {
    const fs::path err = replicate_error_file(dir, rep);
    r.error = fs::exists(err) ? read_text_file(err) : std::string("unknown failure");
    while (!r.error.empty() && r.error.back() == '\n') r.error.pop_back();
  }
  return r;
}

Json quartile_json(const QuartileSummary& q) {
  return {{"q25", q.q25}, {"median", q.median}, {"q75", q.q75}};
}

double truth_for(const Scenario& s, const std::string& name) {
  const auto dot = name.find('.');
  const std::string channel = name.substr(0, dot);
  const std::string column = name.substr(dot + 1);
  if (column == "intercept") return 0.0;
  const auto j = static_cast<std::size_t>(std::stoul(column.substr(1)) - 1);
  if (channel == "beta") return s.beta[j];
  if (channel == "alpha") return s.alpha[j];
  return s.gamma[j];
}

Json sampler_json(const SamplerConfig& c) {
  return {{"n_iter", c.n_iter},   {"burn_in", c.burn_in},
          {"thin", c.thin},       {"n_chains", c.n_chains},
          {"target_accept", c.target_accept}, {"adapt_window", c.adapt_window},
          {"adapt_until", c.adapt_until_or_default()}, {"initial_scale", c.initial_scale}};
}

std::vector<double> default_y_grid(const Dataset& data, const DensityGridOptions& o) {
  if (o.y_count < 2) throw ConfigError("y grid needs at least two points");
  const double y_max = o.y_max.value_or(data.y.maxCoeff());
  const double y_min = o.y_min.value_or(y_max / static_cast<double>(o.y_count));
  if (!(y_min > 0.0 && y_max > y_min)) throw ConfigError("y grid needs 0 < y_min < y_max");
  std::vector<double> y(o.y_count);
  for (std::size_t k = 0; k < o.y_count; ++k) {
    y[k] = y_min + (y_max - y_min) * static_cast<double>(k) / static_cast<double>(o.y_count - 1);
  }
  return y;
}

}  // namespace

// --- fit -----------------------------------------------------------------------------

PreparedFit prepare_fit(const RunConfig& config) {
  PreparedFit out;
  Dataset data = load_dataset(config.data);
  out.data = config.data.standardize ? standardize(data) : std::move(data);
  out.spec = config.model;
  out.spec.p = out.data.p();
  out.spec.has_intercept = out.data.has_intercept;
  out.spec.standardize = config.data.standardize;
  out.spec.validate();
  return out;
}

FitResult fit(const RunConfig& config, std::size_t workers) {
  const auto start = std::chrono::steady_clock::now();
  FitResult r;
  r.prepared = prepare_fit(config);
  const PosteriorModel model(r.prepared.spec, config.prior, r.prepared.data);
  r.samples = run(model, config.sampler, workers);
  r.summary = summarize(r.samples);
  if (r.prepared.data.standardization) {
    r.raw_summary = summarize(
        to_raw_scale(r.samples, r.prepared.spec, model.layout(), *r.prepared.data.standardization));
  }
  r.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::string fit_report_json(const RunConfig& config, const FitResult& result) {
  const auto& data = result.prepared.data;
  Json report;
  report["config"] = to_ini(config, false);
  report["seed"] = config.sampler.master_seed;

  Json data_json = {{"path", config.data.path.string()},
                    {"n", data.n()},
                    {"columns", data.column_names}};
  if (data.standardization) {
    data_json["standardization"] = {{"mean", data.standardization->mean},
                                    {"sd", data.standardization->sd}};
  }
  report["data"] = data_json;
  report["coordinates"] = result.samples.names;
  report["summary"] = summary_to_json(result.summary);
  if (result.raw_summary) report["summary_raw_scale"] = summary_to_json(*result.raw_summary);

  const auto lambda_it = std::find_if(result.summary.begin(), result.summary.end(),
                                      [](const auto& s) { return s.name == "lambda"; });
  if (lambda_it != result.summary.end()) {
    report["lambda"] = {{"mean", lambda_it->mean},   {"sd", lambda_it->sd},
                        {"lower", lambda_it->lower}, {"upper", lambda_it->upper},
                        {"ess", lambda_it->ess}};
  }
  Json acceptance = Json::array();
  for (const auto& chain : result.samples.acceptance) acceptance.push_back(chain);
  report["acceptance"] = acceptance;
  report["warnings"] = result.samples.warnings;
  report["timing"] = {{"wall_seconds", result.wall_seconds}};
  return report.dump(2) + "\n";
}

FitResult cmd_fit(const RunConfig& config, std::size_t workers, std::ostream& log) {
  FitResult r = fit(config, workers);
  const fs::path& dir = config.output.directory;
  write_text_file(dir / "config.ini", to_ini(config));
  write_text_file(dir / "report.json", fit_report_json(config, r));
  write_summary(dir / "summary", r.summary, config.output.format);
  if (r.raw_summary) write_summary(dir / "summary_raw_scale", *r.raw_summary, config.output.format);
  for (std::size_t c = 0; c < r.samples.n_chains; ++c) {
    std::ostringstream out;
    write_chain_csv(out, r.samples, c);
    write_text_file(chain_file(dir, c), out.str());
  }
  for (const auto& w : r.samples.warnings) log << "warning: " << w << '\n';
  log << "fit: " << r.samples.n_chains << " chains x " << r.samples.n_draws << " draws, "
      << r.samples.dim() << " coordinates -> " << dir.string() << '\n';
  return r;
}

LoadedFit load_fit(const fs::path& fit_dir) {
  LoadedFit out;
  out.config = load_config(fit_dir / "config.ini");
  out.prepared = prepare_fit(out.config);
  out.samples = read_chains(fit_dir);
  const CoefficientLayout layout(out.prepared.spec, out.prepared.data.column_names,
                                 out.config.prior.penalize_intercept);
  if (out.samples.names != layout.names()) {
    throw DataError("chain header in '" + fit_dir.string() +
                    "' does not match the coordinates of the configured model");
  }
  out.samples.config = out.config.sampler;
  out.samples.config.n_chains = out.samples.n_chains;
  return out;
}

// --- simulate ------------------------------------------------------------------------

void cmd_simulate(const SimulateOptions& options, const fs::path& out) {
  if (options.n == 0) throw ConfigError("n must be positive");
  Rng rng = make_stream(options.seed, 0);
  std::ostringstream text;
  if (options.rainfall) {
    write_dataset_csv(text, simulate_rainfall_like(options.n, rng), "precip");
  } else {
    write_dataset_csv(text, simulate_dataset(scenario(options.scenario), options.n, rng), "y");
  }
  write_text_file(out, text.str());
}

// --- Monte Carlo ---------------------------------------------------------------------

std::vector<McResult> cmd_mc_study(const McStudyOptions& options, const fs::path& out_dir,
                                   std::ostream& log) {
  const Scenario& s = scenario(options.scenario);
  if (options.reps == 0) throw ConfigError("reps must be positive");
  if (options.sample_sizes.empty()) throw ConfigError("no sample sizes given");
  const McConfig& cfg = options.config;
  cfg.sampler.validate();
  cfg.prior.validate();

  std::vector<McResult> results;
  std::ostringstream combined;
  const auto header = replicate_header(cfg.design);
  combined << "n," << join_header(header) << '\n';
  Json per_n = Json::array();
  for (const std::size_t n : options.sample_sizes) {
    if (n == 0) throw ConfigError("sample sizes must be positive");
    const fs::path dir = out_dir / ("n_" + std::to_string(n));
    fs::create_directories(dir);

    std::vector<ReplicateResult> reps(options.reps);
    std::vector<std::size_t> todo;
    for (std::size_t r = 0; r < options.reps; ++r) {
      const std::uint64_t seed = replicate_seed(cfg.master_seed, s.id, n, r);
      if (auto done = read_replicate(dir, cfg.design, r, seed)) {
        reps[r] = *std::move(done);
      } else {
        todo.push_back(r);
      }
    }
    log << "mc-study: scenario " << s.id << ", n = " << n << ": " << todo.size() << " of "
        << options.reps << " replicates to run\n";

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < todo.size(); i = next++) {
        const std::size_t r = todo[i];
        ReplicateResult res =
            run_replicate(s, n, r, replicate_seed(cfg.master_seed, s.id, n, r), cfg);
        write_replicate(dir, cfg.design, res);
        reps[r] = std::move(res);
      }
    };
    const std::size_t threads =
        std::clamp<std::size_t>(cfg.workers, 1, std::max<std::size_t>(todo.size(), 1));
    {
      std::vector<std::jthread> pool;
      for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
      worker();
    }

    McResult agg = aggregate(s, n, cfg.design, std::move(reps));
    for (const auto& r : agg.replicates) {
      combined << n << ',' << replicate_row(r, header.size() - 3) << '\n';
    }

    Json coefs = Json::array();
    for (std::size_t k = 0; k < agg.coefficient_names.size(); ++k) {
      Json c = quartile_json(agg.coefficient_summary[k]);
      c["name"] = agg.coefficient_names[k];
      c["truth"] = truth_for(s, agg.coefficient_names[k]);
      coefs.push_back(c);
    }
    Json failures = Json::array();
    for (const auto& r : agg.replicates) {
      if (!r.ok) failures.push_back({{"replicate", r.replicate}, {"error", r.error}});
    }
    per_n.push_back({{"n", n},
                     {"replicates", agg.replicates.size()},
                     {"failures", agg.failures},
                     {"failed_replicates", failures},
                     {"mise", quartile_json(agg.mise)},
                     {"coefficients", coefs}});
    if (agg.failures > 0) log << "mc-study: " << agg.failures << " replicate(s) failed\n";
    results.push_back(std::move(agg));
  }

  Json report = {{"scenario", s.id},
                 {"reps", options.reps},
                 {"master_seed", cfg.master_seed},
                 {"fit_intercept", cfg.design.intercept},
                 {"sampler", sampler_json(cfg.sampler)},
                 {"prior", {{"a_lambda", cfg.prior.a_lambda},
                            {"b_lambda", cfg.prior.b_lambda},
                            {"intercept_sd", cfg.prior.intercept_sd}}},
                 {"n_x", cfg.n_x},
                 {"max_density_draws", cfg.max_density_draws},
                 {"results", per_n}};
  write_text_file(out_dir / "replicates.csv", combined.str());
  write_text_file(out_dir / "aggregate.json", report.dump(2) + "\n");
  return results;
}

// --- post-processing -----------------------------------------------------------------

std::vector<DensityGrid> cmd_density_grid(const fs::path& fit_dir,
                                          const DensityGridOptions& options,
                                          const fs::path& out) {
  const LoadedFit fit = load_fit(fit_dir);
  const auto& spec = fit.prepared.spec;
  const CoefficientLayout layout(spec, fit.prepared.data.column_names,
                                 fit.config.prior.penalize_intercept);
  const PosteriorDensity density = PosteriorDensity::from_samples(
      spec, layout, fit.samples, options.max_draws, fit.prepared.data.standardization);
  const std::vector<double> y = default_y_grid(fit.prepared.data, options);
  const auto grids =
      density_heatmap(density, spec.p, spec.has_intercept, options.c_values, y, options.level);

  if (options.format == OutputFormat::Json) {
    Json arr = Json::array();
    for (std::size_t g = 0; g < grids.size(); ++g) {
      arr.push_back({{"c", options.c_values[g]},
                     {"x_section", grids[g].x_section},
                     {"y", grids[g].y},
                     {"mean", grids[g].mean},
                     {"lo", grids[g].lower},
                     {"hi", grids[g].upper}});
    }
    write_text_file(out, arr.dump(2) + "\n");
  } else {
    std::ostringstream text;
    text << "x_section,y,mean,lo,hi\n";
    for (std::size_t g = 0; g < grids.size(); ++g) {
      for (std::size_t k = 0; k < grids[g].y.size(); ++k) {
        text << format_double(options.c_values[g]) << ',' << format_double(grids[g].y[k]) << ','
             << format_double(grids[g].mean[k]) << ',' << format_double(grids[g].lower[k]) << ','
             << format_double(grids[g].upper[k]) << '\n';
      }
    }
    write_text_file(out, text.str());
  }
  return grids;
}

ResidualReport cmd_residuals(const fs::path& fit_dir, const ResidualCommandOptions& options,
                             const fs::path& out) {
  const LoadedFit fit = load_fit(fit_dir);
  const CoefficientLayout layout(fit.prepared.spec, fit.prepared.data.column_names,
                                 fit.config.prior.penalize_intercept);
  ResidualReport rep = quantile_residuals(fit.prepared.spec, layout, fit.samples,
                                          fit.prepared.data, options.residuals);
  if (options.format == OutputFormat::Json) {
    Json j = {{"draws_used", rep.draws_used},
              {"plugin", options.residuals.plugin},
              {"ks", {{"statistic", rep.ks.statistic}, {"p_value", rep.ks.p_value}}},
              {"theoretical", rep.theoretical},
              {"mean", rep.sorted_mean},
              {"lo", rep.sorted_lower},
              {"hi", rep.sorted_upper},
              {"observation_mean", rep.observation_mean}};
    write_text_file(out, j.dump(2) + "\n");
  } else {
    std::ostringstream text;
    text << "theoretical,mean,lo,hi\n";
    for (std::size_t i = 0; i < rep.theoretical.size(); ++i) {
      text << format_double(rep.theoretical[i]) << ',' << format_double(rep.sorted_mean[i]) << ','
           << format_double(rep.sorted_lower[i]) << ',' << format_double(rep.sorted_upper[i])
           << '\n';
    }
    write_text_file(out, text.str());
  }
  return rep;
}

std::vector<CoefficientSummary> cmd_diagnose(const fs::path& fit_dir, OutputFormat format,
                                             const fs::path& out) {
  const LoadedFit fit = load_fit(fit_dir);
  auto rows = summarize(fit.samples);
  if (format == OutputFormat::Json) {
    write_text_file(out, summary_json(rows));
  } else {
    std::ostringstream text;
    write_summary_csv(text, rows);
    write_text_file(out, text.str());
  }
  return rows;
}

}  // namespace egpd
