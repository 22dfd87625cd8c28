#pragma once

// Batch commands behind the egpd_lasso executable. Each command is a pure
// function of its configuration, input files and seed; the only varying
// output is the "timing" field of JSON reports.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "egpd/diagnostics.hpp"
#include "egpd/io.hpp"
#include "egpd/simulation.hpp"

namespace egpd {

/// Model, data and layout as used for fitting (standardized if configured).
struct PreparedFit {
  ModelSpec spec;
  Dataset data;
};

PreparedFit prepare_fit(const RunConfig& config);

struct FitResult {
  PreparedFit prepared;
  PosteriorSamples samples;
  std::vector<CoefficientSummary> summary;  ///< fitting scale
  std::optional<std::vector<CoefficientSummary>> raw_summary;
  double wall_seconds = 0.0;
};

FitResult fit(const RunConfig& config, std::size_t workers = 1);

/// Fits and writes config.ini, report.json, summary.{csv,json} and
/// chain_<c>.csv (c = 1..n_chains) to config.output.directory.
FitResult cmd_fit(const RunConfig& config, std::size_t workers, std::ostream& log);

/// Report JSON text for a finished fit.
std::string fit_report_json(const RunConfig& config, const FitResult& result);

/// Configuration, prepared data and draws read back from a fit directory.
/// Throws DataError when the chain headers do not match the model.
struct LoadedFit {
  RunConfig config;
  PreparedFit prepared;
  PosteriorSamples samples;
};

LoadedFit load_fit(const std::filesystem::path& fit_dir);

// --- simulate --------------------------------------------------------------------

struct SimulateOptions {
  int scenario = 1;
  std::size_t n = 500;
  std::uint64_t seed = 1;
  bool rainfall = false;  ///< synthetic rainfall-shaped data instead of a scenario
};

/// Writes x1..x10,y for scenarios, or AMO,...,NAO,precip for rainfall data.
void cmd_simulate(const SimulateOptions& options, const std::filesystem::path& out);

// --- Monte Carlo -----------------------------------------------------------------

struct McStudyOptions {
  int scenario = 1;
  std::vector<std::size_t> sample_sizes{100, 250, 500};
  std::size_t reps = 50;
  McConfig config = McConfig::desk_scale();
};

/// Per-replicate files n_<n>/replicate_<r>.csv, a combined replicates.csv
/// and aggregate.json. Existing replicate files are reused, so an
/// interrupted study resumes where it stopped.
std::vector<McResult> cmd_mc_study(const McStudyOptions& options,
                                   const std::filesystem::path& out_dir, std::ostream& log);

// --- post-processing -------------------------------------------------------------

struct DensityGridOptions {
  std::vector<double> c_values{0.25, 0.5};  ///< x = (c, ..., c) on the raw covariate scale
  std::optional<double> y_min;
  std::optional<double> y_max;  ///< defaults to the largest observed response
  std::size_t y_count = 200;
  std::size_t max_draws = 1000;
  double level = 0.95;
  OutputFormat format = OutputFormat::Csv;
};

/// Long table x_section,y,mean,lo,hi with one block per c value.
std::vector<DensityGrid> cmd_density_grid(const std::filesystem::path& fit_dir,
                                          const DensityGridOptions& options,
                                          const std::filesystem::path& out);

struct ResidualCommandOptions {
  ResidualOptions residuals;
  OutputFormat format = OutputFormat::Csv;
};

/// QQ table theoretical,mean,lo,hi (csv) or the full report (json).
ResidualReport cmd_residuals(const std::filesystem::path& fit_dir,
                             const ResidualCommandOptions& options,
                             const std::filesystem::path& out);

/// Recomputes the summary table (ESS, Geweke, R-hat) from chain files.
std::vector<CoefficientSummary> cmd_diagnose(const std::filesystem::path& fit_dir,
                                             OutputFormat format,
                                             const std::filesystem::path& out);

}  // namespace egpd
