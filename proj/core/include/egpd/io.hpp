#pragma once

// Configuration files, CSV datasets, chain files and JSON reports.
//
// Config grammar (line oriented, UTF-8):
//
//   # comment            ; comment
//   [section]
//   key = value
//
// Sections are model, prior, sampler, data and output. Whitespace around keys
// and values is trimmed; values run to the end of the line. Unknown sections
// or keys, duplicate keys and unparsable values raise ConfigError.
//
// CSV dialect: comma separated, header row required, '.' decimal point, no
// quoting, numeric cells only. NaN and infinities are rejected.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "egpd/diagnostics.hpp"
#include "egpd/model.hpp"
#include "egpd/sampler.hpp"

namespace egpd {

enum class OutputFormat { Csv, Json };

OutputFormat parse_output_format(const std::string& text);
std::string to_string(OutputFormat f);

struct DataConfig {
  std::filesystem::path path;
  std::string response = "y";
  std::vector<std::string> covariates;  ///< empty: every non-response column
  bool intercept = true;
  bool standardize = true;
};

struct OutputConfig {
  std::filesystem::path directory = "egpd_out";
  OutputFormat format = OutputFormat::Csv;
};

struct RunConfig {
  ModelSpec model;  ///< p and has_intercept are filled in from the data
  PriorSpec prior;
  SamplerConfig sampler;
  DataConfig data;
  OutputConfig output;

  /// Checks every section; throws ConfigError. data.path is only required
  /// when `require_data` is set.
  void validate(bool require_data = true) const;
};

/// Relative data paths are resolved against `base_dir` and made absolute.
RunConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {},
                       bool require_data = true);
RunConfig load_config(const std::filesystem::path& path, bool require_data = true);

/// Canonical rendering: every key, fixed order, round-trip exact numbers.
/// Parsing the result yields the same configuration. Without the output
/// directory the text depends only on what determines the draws.
std::string to_ini(const RunConfig& config, bool with_output_directory = true);

// --- CSV -------------------------------------------------------------------------

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> lines;  ///< 1-based file line of each row
};

/// Throws DataError naming the 1-based file line of the first bad cell.
CsvTable read_csv(std::istream& in);
CsvTable read_csv(const std::filesystem::path& path);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

/// Builds the design from the configured columns; y <= 0 is a DataError
/// naming the file line. Does not standardize.
Dataset dataset_from_table(const CsvTable& table, const DataConfig& config);
Dataset load_dataset(const DataConfig& config);

/// Writes covariate columns (the intercept column is omitted) followed by
/// the response column.
void write_dataset_csv(std::ostream& out, const Dataset& data, const std::string& response = "y");

// --- chains ----------------------------------------------------------------------

void write_chain_csv(std::ostream& out, const PosteriorSamples& samples, std::size_t chain);
std::filesystem::path chain_file(const std::filesystem::path& dir, std::size_t chain);

/// Reads chain_1.csv, chain_2.csv, ... from `dir` until one is missing.
/// Throws DataError if headers disagree or no chain file exists.
PosteriorSamples read_chains(const std::filesystem::path& dir);

// --- reports ---------------------------------------------------------------------

void write_summary_csv(std::ostream& out, const std::vector<CoefficientSummary>& rows);

/// JSON text of a summary table (array of objects).
std::string summary_json(const std::vector<CoefficientSummary>& rows);

/// Writes `text` to `path`, creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace egpd
