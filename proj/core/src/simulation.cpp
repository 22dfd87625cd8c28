#include "egpd/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "egpd/diagnostics.hpp"
#include "egpd/errors.hpp"

namespace egpd {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Eigen::VectorXd to_vector(const std::array<double, kScenarioCovariates>& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t j = 0; j < a.size(); ++j) v[static_cast<Eigen::Index>(j)] = a[j];
  return v;
}

std::vector<std::string> numbered_names(std::size_t count) {
  std::vector<std::string> names;
  names.reserve(count);
  for (std::size_t j = 1; j <= count; ++j) names.push_back("x" + std::to_string(j));
  return names;
}

double draw_response(const ModelSpec& spec, const CoefficientSet& coef, std::span<const double> x,
                     Rng& rng) {
  return egpd_sample(predict_params(spec, coef, x), 1, rng).front();
}

}  // namespace

// --- scenarios -------------------------------------------------------------------

const std::array<Scenario, 4>& scenarios() {
  static const std::array<Scenario, 4> table{{
      {1, "light bulk effects, light tail effects",
       {0.3, 0, 0.3, 0, 0, -0.3, 0, 0, 0, -0.3},
       {0, -0.3, 0, 0, 0.3, 0, 0, 0.3, 0, 0},
       {0.3, 0, 0, 0.3, 0, 0, 0, 0, 0.3, -0.3}},
      {2, "light bulk effects, large tail effects",
       {0.3, 0, 0.3, 0, 0, -0.3, 0, 0, 0, -0.3},
       {0, -0.6, 0, 0, 0.6, 0, 0, 0.6, 0, 0},
       {0.6, 0, 0, 0.6, 0, 0, 0, 0, 0.6, -0.6}},
      {3, "large bulk effects, light tail effects",
       {0.6, 0, 0.6, 0, 0, -0.6, 0, 0, 0, -0.6},
       {0, -0.3, 0, 0, 0.3, 0, 0, 0.3, 0, 0},
       {0.3, 0, 0, 0.3, 0, 0, 0, 0, 0.3, -0.3}},
      {4, "large bulk effects, large tail effects",
       {0.6, 0, 0.6, 0, 0, -0.6, 0, 0, 0, -0.6},
       {0, -0.6, 0, 0, 0.6, 0, 0, 0.6, 0, 0},
       {0.6, 0, 0, 0.6, 0, 0, 0, 0, 0.6, -0.6}},
  }};
  return table;
}

const Scenario& scenario(int id) {
  if (id < 1 || id > 4) throw ConfigError("unknown scenario " + std::to_string(id));
  return scenarios()[static_cast<std::size_t>(id - 1)];
}

ModelSpec scenario_spec() {
  ModelSpec spec;
  spec.carrier = CarrierFamily::Power;
  spec.version = ModelVersion::Full;
  spec.p = kScenarioCovariates;
  spec.has_intercept = false;
  return spec;
}

CoefficientSet scenario_coefficients(const Scenario& s) {
  CoefficientSet c = CoefficientSet::zeros(kScenarioCovariates);
  c.beta = to_vector(s.beta);
  c.alpha = to_vector(s.alpha);
  c.gamma = to_vector(s.gamma);
  return c;
}

EgpdParams true_params(const Scenario& s, std::span<const double> x) {
  return predict_params(scenario_spec(), scenario_coefficients(s), x);
}

// --- data generation -------------------------------------------------------------

Dataset simulate_from_model(const ModelSpec& spec, const CoefficientSet& coef, std::size_t n,
                            Rng& rng) {
  const std::size_t first = spec.has_intercept ? 1 : 0;
  const std::size_t k = spec.p - first;
  DesignMatrix X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(spec.p));
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    if (spec.has_intercept) X(i, 0) = 1.0;
    for (std::size_t j = first; j < spec.p; ++j) {
      X(i, static_cast<Eigen::Index>(j)) = uniform_open01(rng);
    }
    y[i] = draw_response(spec, coef, {X.row(i).data(), spec.p}, rng);
  }
  Dataset d;
  d.X = std::move(X);
  d.y = std::move(y);
  d.has_intercept = spec.has_intercept;
  if (spec.has_intercept) d.column_names.emplace_back("intercept");
  for (auto& name : numbered_names(k)) d.column_names.push_back(std::move(name));
  d.validate();
  return d;
}

Dataset simulate_dataset(const Scenario& s, std::size_t n, Rng& rng) {
  return simulate_from_model(scenario_spec(), scenario_coefficients(s), n, rng);
}

Dataset resimulate_response(const ModelSpec& spec, const CoefficientSet& coef, const Dataset& data,
                            Rng& rng) {
  if (data.p() != spec.p) throw ConfigError("dataset width differs from model spec");
  Dataset out = data;
  for (Eigen::Index i = 0; i < out.X.rows(); ++i) {
    out.y[i] = draw_response(spec, coef, {out.X.row(i).data(), spec.p}, rng);
  }
  out.validate();
  return out;
}

RainfallTruth rainfall_truth() {
  ModelSpec spec;
  spec.carrier = CarrierFamily::Power;
  spec.version = ModelVersion::Full;
  spec.link_xi = Link::Identity;
  spec.p = 7;
  spec.has_intercept = true;

  // Columns: intercept, AMO, ENSO, NP, PDO, SOI, NAO.
  CoefficientSet c = CoefficientSet::zeros(spec.p);
  c.beta << std::log(0.9), 0.15, 0.0, 0.0, 0.0, 0.0, -0.2;
  c.alpha << std::log(40.0), 0.1, 0.2, 0.0, 0.0, 0.0, -0.25;
  c.gamma << 0.12, 0.0, 0.03, 0.0, 0.0, 0.0, 0.0;
  return {spec, c};
}

Dataset simulate_rainfall_like(std::size_t n, Rng& rng) {
  const RainfallTruth truth = rainfall_truth();
  const std::size_t p = truth.spec.p;
  DesignMatrix X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    X(i, 0) = 1.0;
    for (std::size_t j = 1; j < p; ++j) X(i, static_cast<Eigen::Index>(j)) = standard_normal(rng);
    y[i] = draw_response(truth.spec, truth.coef, {X.row(i).data(), p}, rng);
  }
  Dataset d;
  d.X = std::move(X);
  d.y = std::move(y);
  d.has_intercept = true;
  d.column_names = {"intercept", "AMO", "ENSO", "NP", "PDO", "SOI", "NAO"};
  d.validate();
  return d;
}

ModelSpec scenario_fit_spec(const ScenarioFitDesign& design) {
  ModelSpec spec = scenario_spec();
  if (design.intercept) {
    spec.p = kScenarioCovariates + 1;
    spec.has_intercept = true;
    spec.standardize = true;
  }
  return spec;
}

Dataset scenario_fit_data(const Dataset& raw, const ScenarioFitDesign& design) {
  return design.intercept ? standardize(add_intercept(raw)) : raw;
}

// --- MISE ------------------------------------------------------------------------

std::vector<Eigen::VectorXd> draw_covariate_points(std::size_t count, std::size_t p, Rng& rng) {
  std::vector<Eigen::VectorXd> points(count, Eigen::VectorXd(static_cast<Eigen::Index>(p)));
  for (auto& x : points) {
    for (Eigen::Index j = 0; j < x.size(); ++j) x[j] = uniform_open01(rng);
  }
  return points;
}

double mise(const ConditionalDensity& fitted, const Scenario& truth,
            std::span<const Eigen::VectorXd> x_points, const MiseOptions& options) {
  if (x_points.empty()) throw ConfigError("MISE needs at least one covariate point");
  if (options.grid_size < 2) throw ConfigError("MISE grid needs at least two points");
  if (!(options.lower_prob > 0.0 && options.lower_prob < options.upper_prob &&
        options.upper_prob < 1.0)) {
    throw ConfigError("MISE probability bounds must satisfy 0 < lower < upper < 1");
  }

  const std::size_t m = options.grid_size;
  std::vector<double> y(m);
  double total = 0.0;
  for (const auto& x : x_points) {
    const EgpdParams params = true_params(truth, {x.data(), static_cast<std::size_t>(x.size())});
    const double t0 = std::log(egpd_quantile(params, options.lower_prob));
    const double t1 = std::log(egpd_quantile(params, options.upper_prob));
    const double dt = (t1 - t0) / static_cast<double>(m - 1);
    for (std::size_t k = 0; k < m; ++k) y[k] = std::exp(t0 + dt * static_cast<double>(k));
    y.back() = std::exp(t1);

    const std::vector<double> f_hat = fitted(x, y);
    if (f_hat.size() != m) throw ConfigError("fitted density returned the wrong grid size");

    // Trapezoid in t = log y; the Jacobian dy = y dt keeps the integrand
    // well resolved near the lower quantile.
    double integral = 0.0;
    double prev = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double gap = f_hat[k] - egpd_pdf(params, y[k]);
      const double g = gap * gap * y[k];
      if (k > 0) integral += 0.5 * (prev + g) * dt;
      prev = g;
    }
    total += integral;
  }
  return total / static_cast<double>(x_points.size());
}

// --- Monte Carlo study -----------------------------------------------------------

McConfig McConfig::desk_scale() {
  McConfig c;
  c.sampler.n_iter = 5000;
  c.sampler.burn_in = 1000;
  c.sampler.n_chains = 1;
  c.n_x = 200;
  return c;
}

std::vector<std::string> replicate_coefficient_names(const ScenarioFitDesign& design) {
  std::vector<std::string> names;
  for (const char* channel : {"beta", "alpha", "gamma"}) {
    if (design.intercept) names.push_back(std::string(channel) + ".intercept");
    for (std::size_t j = 1; j <= kScenarioCovariates; ++j) {
      names.push_back(std::string(channel) + ".x" + std::to_string(j));
    }
  }
  return names;
}

std::uint64_t replicate_seed(std::uint64_t master, int scenario_id, std::size_t n,
                             std::size_t rep) {
  const std::uint64_t s = derive_seed(master, static_cast<std::uint64_t>(scenario_id));
  return derive_seed(derive_seed(s, n), rep);
}

ReplicateResult run_replicate(const Scenario& s, std::size_t n, std::size_t rep,
                              std::uint64_t seed, const McConfig& config) {
  ReplicateResult result;
  result.replicate = rep;
  result.seed = seed;
  try {
    Rng data_rng = make_stream(seed, 0);
    const Dataset raw = simulate_dataset(s, n, data_rng);
    const Dataset fit_data = scenario_fit_data(raw, config.design);
    const ModelSpec spec = scenario_fit_spec(config.design);
    const PosteriorModel model(spec, config.prior, fit_data);
    SamplerConfig sampler = config.sampler;
    sampler.master_seed = derive_seed(seed, 1);
    const PosteriorSamples samples = run(model, sampler, 1);

    const PosteriorSamples raw_samples =
        fit_data.standardization
            ? to_raw_scale(samples, spec, model.layout(), *fit_data.standardization)
            : samples;
    for (const auto& name : replicate_coefficient_names(config.design)) {
      const auto draws = raw_samples.pooled(raw_samples.index_of(name));
      double sum = 0.0;
      for (double d : draws) sum += d;
      result.coefficient_means.push_back(sum / static_cast<double>(draws.size()));
    }

    const PosteriorDensity density = PosteriorDensity::from_samples(
        spec, model.layout(), samples, config.max_density_draws, fit_data.standardization);
    Rng x_rng = make_stream(seed, 2);
    const auto points = draw_covariate_points(config.n_x, kScenarioCovariates, x_rng);
    const ConditionalDensity fitted = [&](const Eigen::VectorXd& x, std::span<const double> y) {
      if (!spec.has_intercept) return density.mean_density(x, y);
      Eigen::VectorXd row(x.size() + 1);
      row[0] = 1.0;
      row.tail(x.size()) = x;
      return density.mean_density(row, y);
    };
    result.mise = mise(fitted, s, points, config.mise);
    result.ok = std::isfinite(result.mise);
    if (!result.ok) result.error = "non-finite MISE";
  } catch (const std::exception& e) {
    result.ok = false;
    result.error = e.what();
    result.coefficient_means.clear();
  }
  return result;
}

QuartileSummary quartiles(std::vector<double> values) {
  if (values.empty()) return {kNaN, kNaN, kNaN};
  std::sort(values.begin(), values.end());
  return {quantile_sorted(values, 0.25), quantile_sorted(values, 0.5),
          quantile_sorted(values, 0.75)};
}

McResult aggregate(const Scenario& s, std::size_t n, const ScenarioFitDesign& design,
                   std::vector<ReplicateResult> replicates) {
  McResult out;
  out.scenario = s.id;
  out.n = n;
  out.coefficient_names = replicate_coefficient_names(design);
  std::sort(replicates.begin(), replicates.end(),
            [](const auto& a, const auto& b) { return a.replicate < b.replicate; });
  out.replicates = std::move(replicates);

  std::vector<std::vector<double>> columns(out.coefficient_names.size());
  std::vector<double> mise_values;
  for (const auto& r : out.replicates) {
    if (!r.ok) {
      ++out.failures;
      continue;
    }
    for (std::size_t k = 0; k < columns.size(); ++k) columns[k].push_back(r.coefficient_means[k]);
    mise_values.push_back(r.mise);
  }
  for (auto& col : columns) out.coefficient_summary.push_back(quartiles(std::move(col)));
  out.mise = quartiles(std::move(mise_values));
  return out;
}

McResult run_monte_carlo(const Scenario& s, std::size_t n, std::size_t n_reps,
                         const McConfig& config) {
  std::vector<ReplicateResult> results(n_reps);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < n_reps; r = next++) {
      results[r] = run_replicate(s, n, r, replicate_seed(config.master_seed, s.id, n, r), config);
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(config.workers, 1, std::max<std::size_t>(n_reps, 1));
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }
  return aggregate(s, n, config.design, std::move(results));
}

}  // namespace egpd
