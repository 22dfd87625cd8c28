#include "egpd/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <json.hpp>

#include "egpd/errors.hpp"

namespace egpd {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::optional<double> parse_double(const std::string& text) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) return std::nullopt;
  return v;
}

// --- config values -----------------------------------------------------------------

struct Location {
  std::string key;
  std::size_t line;
};

[[noreturn]] void bad_value(const Location& at, const std::string& value, const std::string& want) {
  throw ConfigError("config line " + std::to_string(at.line) + ": " + at.key + " = '" + value +
                    "' is not " + want);
}

double to_real(const Location& at, const std::string& v) {
  const auto d = parse_double(v);
  if (!d || !std::isfinite(*d)) bad_value(at, v, "a finite number");
  return *d;
}

std::size_t to_count(const Location& at, const std::string& v) {
  std::size_t n = 0;
  const char* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, n);
  if (ec != std::errc() || ptr != end || v.empty()) bad_value(at, v, "a non-negative integer");
  return n;
}

std::uint64_t to_u64(const Location& at, const std::string& v) {
  std::uint64_t n = 0;
  const char* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, n);
  if (ec != std::errc() || ptr != end || v.empty()) bad_value(at, v, "an unsigned 64-bit integer");
  return n;
}

bool to_bool(const Location& at, const std::string& v) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  bad_value(at, v, "a boolean (true/false)");
}

CarrierFamily to_carrier(const Location& at, const std::string& v) {
  if (v == "power") return CarrierFamily::Power;
  if (v == "beta") return CarrierFamily::Beta;
  if (v == "mixture") return CarrierFamily::Mixture;
  bad_value(at, v, "one of power, beta, mixture");
}

Link to_link(const Location& at, const std::string& v) {
  if (v == "exp") return Link::Exp;
  if (v == "identity") return Link::Identity;
  bad_value(at, v, "one of exp, identity");
}

ModelVersion to_version(const Location& at, const std::string& v) {
  if (v == "full") return ModelVersion::Full;
  if (v == "bulk") return ModelVersion::BulkOnly;
  bad_value(at, v, "one of full, bulk");
}

LambdaPrior to_lambda_prior(const Location& at, const std::string& v) {
  if (v == "lambda") return LambdaPrior::Lambda;
  if (v == "lambda_squared") return LambdaPrior::LambdaSquared;
  bad_value(at, v, "one of lambda, lambda_squared");
}

using Setter = std::function<void(RunConfig&, const Location&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"model.carrier", [](RunConfig& c, const Location& at, const std::string& v) {
         c.model.carrier = to_carrier(at, v);
       }},
      {"model.mixture_weight", [](RunConfig& c, const Location& at, const std::string& v) {
         c.model.mixture_weight = to_real(at, v);
       }},
      {"model.link_kappa", [](RunConfig& c, const Location& at, const std::string& v) {
         c.model.link_kappa = to_link(at, v);
       }},
      {"model.link_nu", [](RunConfig& c, const Location& at, const std::string& v) {
         c.model.link_nu = to_link(at, v);
       }},
      {"model.link_xi", [](RunConfig& c, const Location& at, const std::string& v) {
         c.model.link_xi = to_link(at, v);
       }},
      {"model.version", [](RunConfig& c, const Location& at, const std::string& v) {
         c.model.version = to_version(at, v);
       }},
      {"prior.a_lambda", [](RunConfig& c, const Location& at, const std::string& v) {
         c.prior.a_lambda = to_real(at, v);
       }},
      {"prior.b_lambda", [](RunConfig& c, const Location& at, const std::string& v) {
         c.prior.b_lambda = to_real(at, v);
       }},
      {"prior.intercept_sd", [](RunConfig& c, const Location& at, const std::string& v) {
         c.prior.intercept_sd = to_real(at, v);
       }},
      {"prior.penalize_intercept", [](RunConfig& c, const Location& at, const std::string& v) {
         c.prior.penalize_intercept = to_bool(at, v);
       }},
      {"prior.lambda_prior", [](RunConfig& c, const Location& at, const std::string& v) {
         c.prior.lambda_prior = to_lambda_prior(at, v);
       }},
      {"sampler.n_iter", [](RunConfig& c, const Location& at, const std::string& v) {
         c.sampler.n_iter = to_count(at, v);
       }},
      {"sampler.burn_in", [](RunConfig& c, const Location& at, const std::string& v) {
         c.sampler.burn_in = to_count(at, v);
       }},
      {"sampler.thin", [](RunConfig& c, const Location& at, const std::string& v) {
         c.sampler.thin = to_count(at, v);
       }},
      {"sampler.n_chains", [](RunConfig& c, const Location& at, const std::string& v) {
         c.sampler.n_chains = to_count(at, v);
       }},
      {"sampler.seed", [](RunConfig& c, const Location& at, const std::string& v) {
         c.sampler.master_seed = to_u64(at, v);
       }},
      {"sampler.target_accept", [](RunConfig& c, const Location& at, const std::string& v) {
         c.sampler.target_accept = to_real(at, v);
       }},
      {"sampler.adapt_window", [](RunConfig& c, const Location& at, const std::string& v) {
         c.sampler.adapt_window = to_count(at, v);
       }},
      {"sampler.adapt_until", [](RunConfig& c, const Location& at, const std::string& v) {
         if (v.empty()) {
           c.sampler.adapt_until.reset();
         } else {
           c.sampler.adapt_until = to_count(at, v);
         }
       }},
      {"sampler.initial_scale", [](RunConfig& c, const Location& at, const std::string& v) {
         c.sampler.initial_scale = to_real(at, v);
       }},
      {"data.path", [](RunConfig& c, const Location&, const std::string& v) { c.data.path = v; }},
      {"data.response", [](RunConfig& c, const Location&, const std::string& v) {
         c.data.response = v;
       }},
      {"data.covariates", [](RunConfig& c, const Location&, const std::string& v) {
         c.data.covariates.clear();
         if (!v.empty()) c.data.covariates = split(v, ',');
       }},
      {"data.intercept", [](RunConfig& c, const Location& at, const std::string& v) {
         c.data.intercept = to_bool(at, v);
       }},
      {"data.standardize", [](RunConfig& c, const Location& at, const std::string& v) {
         c.data.standardize = to_bool(at, v);
       }},
      {"output.directory", [](RunConfig& c, const Location&, const std::string& v) {
         c.output.directory = v;
       }},
      {"output.format", [](RunConfig& c, const Location& at, const std::string& v) {
         if (v == "csv") {
           c.output.format = OutputFormat::Csv;
         } else if (v == "json") {
           c.output.format = OutputFormat::Json;
         } else {
           bad_value(at, v, "one of csv, json");
         }
       }},
  };
  return table;
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return in;
}

}  // namespace

// --- formats -----------------------------------------------------------------------

OutputFormat parse_output_format(const std::string& text) {
  if (text == "csv") return OutputFormat::Csv;
  if (text == "json") return OutputFormat::Json;
  throw ConfigError("unknown output format '" + text + "'");
}

std::string to_string(OutputFormat f) { return f == OutputFormat::Csv ? "csv" : "json"; }

// --- config ------------------------------------------------------------------------

void RunConfig::validate(bool require_data) const {
  if (model.link_kappa != Link::Exp) throw ConfigError("kappa link must be exp");
  if (model.link_nu != Link::Exp) throw ConfigError("nu link must be exp");
  if (model.carrier == CarrierFamily::Mixture &&
      !(model.mixture_weight > 0.0 && model.mixture_weight < 1.0)) {
    throw ConfigError("mixture_weight must lie in (0, 1)");
  }
  if (model.carrier == CarrierFamily::Mixture && !data.intercept) {
    throw ConfigError("mixture carrier requires data.intercept = true");
  }
  if (data.standardize && !data.intercept) {
    throw ConfigError("data.standardize requires data.intercept = true");
  }
  prior.validate();
  sampler.validate();
  if (require_data && data.path.empty()) throw ConfigError("data.path is required");
  if (data.response.empty()) throw ConfigError("data.response must not be empty");
}

RunConfig parse_config(std::istream& in, const fs::path& base_dir, bool require_data) {
  static const std::vector<std::string> sections = {"model", "prior", "sampler", "data", "output"};
  RunConfig config;
  std::string section;
  std::map<std::string, std::size_t> seen;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("config line " + std::to_string(line_no) + ": malformed section header");
      }
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (std::find(sections.begin(), sections.end(), section) == sections.end()) {
        throw ConfigError("config line " + std::to_string(line_no) + ": unknown section [" +
                          section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    if (section.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) + ": key outside a section");
    }
    const std::string key = section + "." + trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    if (const auto [prev, fresh] = seen.emplace(key, line_no); !fresh) {
      throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key +
                        "' (first set on line " + std::to_string(prev->second) + ")");
    }
    it->second(config, {key, line_no}, value);
  }
  if (!config.data.path.empty() && config.data.path.is_relative() && !base_dir.empty()) {
    config.data.path = fs::absolute(base_dir / config.data.path).lexically_normal();
  }
  config.validate(require_data);
  return config;
}

RunConfig load_config(const fs::path& path, bool require_data) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  return parse_config(in, base, require_data);
}

std::string to_ini(const RunConfig& c, bool with_output_directory) {
  std::ostringstream out;
  out << "[model]\n"
      << "carrier = " << to_string(c.model.carrier) << '\n'
      << "mixture_weight = " << format_double(c.model.mixture_weight) << '\n'
      << "link_kappa = " << to_string(c.model.link_kappa) << '\n'
      << "link_nu = " << to_string(c.model.link_nu) << '\n'
      << "link_xi = " << to_string(c.model.link_xi) << '\n'
      << "version = " << to_string(c.model.version) << '\n'
      << "\n[prior]\n"
      << "a_lambda = " << format_double(c.prior.a_lambda) << '\n'
      << "b_lambda = " << format_double(c.prior.b_lambda) << '\n'
      << "intercept_sd = " << format_double(c.prior.intercept_sd) << '\n'
      << "penalize_intercept = " << (c.prior.penalize_intercept ? "true" : "false") << '\n'
      << "lambda_prior = " << to_string(c.prior.lambda_prior) << '\n'
      << "\n[sampler]\n"
      << "n_iter = " << c.sampler.n_iter << '\n'
      << "burn_in = " << c.sampler.burn_in << '\n'
      << "thin = " << c.sampler.thin << '\n'
      << "n_chains = " << c.sampler.n_chains << '\n'
      << "seed = " << c.sampler.master_seed << '\n'
      << "target_accept = " << format_double(c.sampler.target_accept) << '\n'
      << "adapt_window = " << c.sampler.adapt_window << '\n'
      << "adapt_until = " << c.sampler.adapt_until_or_default() << '\n'
      << "initial_scale = " << format_double(c.sampler.initial_scale) << '\n'
      << "\n[data]\n"
      << "path = " << c.data.path.string() << '\n'
      << "response = " << c.data.response << '\n'
      << "covariates = " << join(c.data.covariates, ',') << '\n'
      << "intercept = " << (c.data.intercept ? "true" : "false") << '\n'
      << "standardize = " << (c.data.standardize ? "true" : "false") << '\n'
      << "\n[output]\n";
  if (with_output_directory) out << "directory = " << c.output.directory.string() << '\n';
  out << "format = " << to_string(c.output.format) << '\n';
  return out.str();
}

// --- CSV ---------------------------------------------------------------------------

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw NumericalError("cannot format number");
  return std::string(buf, ptr);
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string raw;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (!have_header) {
      table.header = split(line, ',');
      for (const auto& name : table.header) {
        if (name.empty()) throw DataError("line " + std::to_string(line_no) + ": empty column name");
      }
      for (std::size_t j = 0; j < table.header.size(); ++j) {
        if (std::find(table.header.begin(), table.header.begin() + static_cast<std::ptrdiff_t>(j),
                      table.header[j]) != table.header.begin() + static_cast<std::ptrdiff_t>(j)) {
          throw DataError("duplicate column '" + table.header[j] + "'");
        }
      }
      have_header = true;
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() != table.header.size()) {
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(table.header.size()) + " fields, found " +
                      std::to_string(cells.size()));
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const auto v = parse_double(cells[j]);
      if (!v) {
        throw DataError("line " + std::to_string(line_no) + ": column '" + table.header[j] +
                        "' value '" + cells[j] + "' is not numeric");
      }
      if (!std::isfinite(*v)) {
        throw DataError("line " + std::to_string(line_no) + ": column '" + table.header[j] +
                        "' is not finite");
      }
      row.push_back(*v);
    }
    table.rows.push_back(std::move(row));
    table.lines.push_back(line_no);
  }
  if (!have_header) throw DataError("CSV input is empty (header row required)");
  return table;
}

CsvTable read_csv(const fs::path& path) {
  auto in = open_input(path);
  try {
    return read_csv(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Dataset dataset_from_table(const CsvTable& table, const DataConfig& config) {
  auto column = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(table.header.begin(), table.header.end(), name);
    if (it == table.header.end()) throw DataError("column '" + name + "' not found");
    return static_cast<std::size_t>(it - table.header.begin());
  };
  const std::size_t response = column(config.response);
  std::vector<std::string> names = config.covariates;
  if (names.empty()) {
    for (const auto& h : table.header) {
      if (h != config.response) names.push_back(h);
    }
  }
  std::vector<std::size_t> cols;
  for (const auto& name : names) {
    if (name == config.response) throw DataError("response column listed as a covariate");
    if (config.intercept && name == "intercept") {
      throw DataError("column name 'intercept' is reserved when data.intercept = true");
    }
    cols.push_back(column(name));
  }
  if (table.rows.empty()) throw DataError("dataset has no observations");

  const auto n = static_cast<Eigen::Index>(table.rows.size());
  DesignMatrix X(n, static_cast<Eigen::Index>(cols.size()));
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    if (!(row[response] > 0.0)) {
      const auto k = static_cast<std::size_t>(i);
      const std::size_t line = k < table.lines.size() ? table.lines[k] : k + 2;
      throw DataError("line " + std::to_string(line) + ": response '" + config.response +
                      "' must be > 0, got " + format_double(row[response]));
    }
    y[i] = row[response];
    for (std::size_t j = 0; j < cols.size(); ++j) X(i, static_cast<Eigen::Index>(j)) = row[cols[j]];
  }
  return make_dataset(X, std::move(y), std::move(names), config.intercept);
}

Dataset load_dataset(const DataConfig& config) {
  const CsvTable table = read_csv(config.path);
  try {
    return dataset_from_table(table, config);
  } catch (const DataError& e) {
    throw DataError(config.path.string() + ": " + e.what());
  }
}

void write_dataset_csv(std::ostream& out, const Dataset& data, const std::string& response) {
  const std::size_t first = data.has_intercept ? 1 : 0;
  std::vector<std::string> header(data.column_names.begin() + static_cast<std::ptrdiff_t>(first),
                                  data.column_names.end());
  header.push_back(response);
  out << join(header, ',') << '\n';
  for (Eigen::Index i = 0; i < data.X.rows(); ++i) {
    for (Eigen::Index j = static_cast<Eigen::Index>(first); j < data.X.cols(); ++j) {
      out << format_double(data.X(i, j)) << ',';
    }
    out << format_double(data.y[i]) << '\n';
  }
}

// --- chains ------------------------------------------------------------------------

fs::path chain_file(const fs::path& dir, std::size_t chain) {
  return dir / ("chain_" + std::to_string(chain + 1) + ".csv");
}

void write_chain_csv(std::ostream& out, const PosteriorSamples& samples, std::size_t chain) {
  out << join(samples.names, ',') << '\n';
  std::string line;
  for (std::size_t i = 0; i < samples.n_draws; ++i) {
    line.clear();
    const auto d = samples.draw(chain, i);
    for (std::size_t k = 0; k < d.size(); ++k) {
      if (k > 0) line += ',';
      line += format_double(d[k]);
    }
    out << line << '\n';
  }
}

PosteriorSamples read_chains(const fs::path& dir) {
  PosteriorSamples s;
  for (std::size_t c = 0; fs::exists(chain_file(dir, c)); ++c) {
    const CsvTable t = read_csv(chain_file(dir, c));
    if (c == 0) {
      s.names = t.header;
      s.n_draws = t.rows.size();
    } else if (t.header != s.names) {
      throw DataError(chain_file(dir, c).string() + ": header differs from chain 1");
    } else if (t.rows.size() != s.n_draws) {
      throw DataError(chain_file(dir, c).string() + ": draw count differs from chain 1");
    }
    for (const auto& row : t.rows) s.draws.insert(s.draws.end(), row.begin(), row.end());
    ++s.n_chains;
  }
  if (s.n_chains == 0) throw DataError("no chain files in '" + dir.string() + "'");
  s.config.n_chains = s.n_chains;
  s.config.n_iter = s.n_draws;
  return s;
}

// --- reports -----------------------------------------------------------------------

void write_summary_csv(std::ostream& out, const std::vector<CoefficientSummary>& rows) {
  out << "name,mean,sd,lower,upper,ess,geweke_z,rhat,selected\n";
  for (const auto& r : rows) {
    out << r.name << ',' << format_double(r.mean) << ',' << format_double(r.sd) << ','
        << format_double(r.lower) << ',' << format_double(r.upper) << ',' << format_double(r.ess)
        << ',' << format_double(r.geweke_z) << ',' << format_double(r.rhat) << ','
        << (r.selected ? 1 : 0) << '\n';
  }
}

std::string summary_json(const std::vector<CoefficientSummary>& rows) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    arr.push_back({{"name", r.name},
                   {"mean", r.mean},
                   {"sd", r.sd},
                   {"lower", r.lower},
                   {"upper", r.upper},
                   {"ess", r.ess},
                   {"geweke_z", r.geweke_z},
                   {"rhat", r.rhat},
                   {"selected", r.selected}});
  }
  return arr.dump(2) + "\n";
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw ConfigError("write to '" + path.string() + "' failed");
}

std::string read_text_file(const fs::path& path) {
  auto in = open_input(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace egpd
