#pragma once

// Simulation scenarios, the Monte Carlo study and MISE scoring.
//
// Scenario data use ten independent Uniform(0, 1) covariates and no
// intercept column; the scenario vectors are the ten slopes of each channel.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "egpd/model.hpp"
#include "egpd/random.hpp"
#include "egpd/sampler.hpp"

namespace egpd {

inline constexpr std::size_t kScenarioCovariates = 10;

struct Scenario {
  int id;
  std::string_view label;
  std::array<double, kScenarioCovariates> beta;
  std::array<double, kScenarioCovariates> alpha;
  std::array<double, kScenarioCovariates> gamma;
};

const std::array<Scenario, 4>& scenarios();

/// Throws ConfigError for ids outside 1..4.
const Scenario& scenario(int id);

/// Data-generating model: power carrier, all links exp, ten slopes, no intercept.
ModelSpec scenario_spec();
CoefficientSet scenario_coefficients(const Scenario& s);
EgpdParams true_params(const Scenario& s, std::span<const double> x);

/// n rows of Uniform(0, 1) covariates named x1..xp with responses drawn from
/// the model. Per row: p covariate uniforms, then one response uniform.
Dataset simulate_from_model(const ModelSpec& spec, const CoefficientSet& coef, std::size_t n,
                            Rng& rng);

Dataset simulate_dataset(const Scenario& s, std::size_t n, Rng& rng);

/// Same design as `data` with fresh responses drawn from (spec, coef).
Dataset resimulate_response(const ModelSpec& spec, const CoefficientSet& coef, const Dataset& data,
                            Rng& rng);

/// Synthetic stand-in for a monthly-rainfall dataset: six standard-normal
/// climate indices (AMO, ENSO, NP, PDO, SOI, NAO) and a positive response
/// "precip" from the full model with an identity xi link.
Dataset simulate_rainfall_like(std::size_t n, Rng& rng);

struct RainfallTruth {
  ModelSpec spec;
  CoefficientSet coef;
};

/// Generating model of simulate_rainfall_like (raw covariate scale).
RainfallTruth rainfall_truth();

// --- MISE ----------------------------------------------------------------------

/// Conditional density f(y | x) on a grid of y; x is a raw scenario covariate row.
using ConditionalDensity =
    std::function<std::vector<double>(const Eigen::VectorXd& x, std::span<const double> y)>;

struct MiseOptions {
  std::size_t grid_size = 200;
  double lower_prob = 1e-6;  ///< y-grid starts at this true conditional quantile
  double upper_prob = 0.999;
};

/// Average over x_points of the integrated squared gap between `fitted` and
/// the scenario's true conditional density. The y-integral runs between the
/// true lower_prob and upper_prob quantiles on a log-spaced trapezoid grid.
double mise(const ConditionalDensity& fitted, const Scenario& truth,
            std::span<const Eigen::VectorXd> x_points, const MiseOptions& options = {});

std::vector<Eigen::VectorXd> draw_covariate_points(std::size_t count, std::size_t p, Rng& rng);

// --- Monte Carlo study ---------------------------------------------------------

/// Fitting design for scenario data. Without an intercept the fitted model
/// has exactly the generating form (ten raw slopes per channel); with one,
/// covariates are standardized and results mapped back to the raw scale.
struct ScenarioFitDesign {
  bool intercept = false;
};

ModelSpec scenario_fit_spec(const ScenarioFitDesign& design);
Dataset scenario_fit_data(const Dataset& raw, const ScenarioFitDesign& design);

struct McConfig {
  SamplerConfig sampler;
  ScenarioFitDesign design;
  PriorSpec prior;
  std::size_t n_x = 200;
  std::size_t max_density_draws = 500;
  MiseOptions mise;
  std::uint64_t master_seed = 1;
  std::size_t workers = 1;

  /// 1 chain, 1000 burn-in, 5000 retained draws, 200 MISE points.
  static McConfig desk_scale();
};

struct ReplicateResult {
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::vector<double> coefficient_means;  ///< raw scale, see replicate_coefficient_names()
  double mise = 0.0;
};

struct QuartileSummary {
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
};

struct McResult {
  int scenario = 0;
  std::size_t n = 0;
  std::vector<std::string> coefficient_names;
  std::vector<ReplicateResult> replicates;  ///< replicate-index order
  std::vector<QuartileSummary> coefficient_summary;
  QuartileSummary mise;
  std::size_t failures = 0;
};

/// Raw-scale coefficients reported per replicate: the 30 slopes, preceded in
/// each channel by its intercept when the design has one.
std::vector<std::string> replicate_coefficient_names(const ScenarioFitDesign& design);

std::uint64_t replicate_seed(std::uint64_t master, int scenario, std::size_t n, std::size_t rep);

/// simulate -> fit -> summarize -> MISE for one replicate. Failures are
/// captured in the result, never thrown.
ReplicateResult run_replicate(const Scenario& s, std::size_t n, std::size_t rep,
                              std::uint64_t seed, const McConfig& config);

/// Quartiles over successful replicates.
McResult aggregate(const Scenario& s, std::size_t n, const ScenarioFitDesign& design,
                   std::vector<ReplicateResult> replicates);

McResult run_monte_carlo(const Scenario& s, std::size_t n, std::size_t n_reps,
                         const McConfig& config);

QuartileSummary quartiles(std::vector<double> values);

}  // namespace egpd
