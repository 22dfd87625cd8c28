#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "egpd/model.hpp"
#include "egpd/sampler.hpp"

namespace egpd {

// --- convergence -------------------------------------------------------------

/// N / (1 + 2 sum_k rho_k), autocorrelations truncated by Geyer's initial
/// positive (monotone) sequence. Needs >= 100 draws; throws NumericalError on
/// a constant series.
double effective_sample_size(std::span<const double> draws);

/// Multi-chain version: within-chain autocovariances are combined with the
/// between-chain variance, so chains stuck in different places lower the ESS.
double effective_sample_size(const std::vector<std::span<const double>>& chains);

/// Geweke z-score comparing the mean of the first `frac_a` of the series with
/// the mean of the last `frac_b`, each with a spectral variance estimate.
double geweke_z(std::span<const double> draws, double frac_a = 0.1, double frac_b = 0.5);

/// Split-chain potential scale reduction factor.
double split_rhat(const std::vector<std::span<const double>>& chains);

// --- summaries -----------------------------------------------------------------

/// Linear-interpolation (type 7) quantile of sorted data.
double quantile_sorted(std::span<const double> sorted, double prob);

struct CoefficientSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double ess = 0.0;
  double geweke_z = 0.0;  ///< largest |z| over chains, sign kept
  double rhat = 1.0;
  bool selected = false;  ///< 0 lies outside [lower, upper]
};

/// Pooled-chain summaries with equal-tailed intervals at `level`.
std::vector<CoefficientSummary> summarize(const PosteriorSamples& samples, double level = 0.95);

/// Samples with every draw mapped to the raw covariate scale.
PosteriorSamples to_raw_scale(const PosteriorSamples& samples, const ModelSpec& spec,
                              const CoefficientLayout& layout, const StandardizationStats& stats);

/// Up to `max_draws` draws spaced evenly over the pooled chains.
std::vector<CoefficientSet> select_draws(const PosteriorSamples& samples,
                                         const CoefficientLayout& layout, std::size_t max_draws);

/// Coordinate-wise posterior mean as a coefficient set.
CoefficientSet posterior_mean(const PosteriorSamples& samples, const CoefficientLayout& layout);

// --- goodness of fit -----------------------------------------------------------

struct KsResult {
  double statistic;
  double p_value;
};

/// One-sample Kolmogorov-Smirnov test against N(0, 1).
KsResult ks_test_normal(std::span<const double> values);

/// Survival function of the Kolmogorov distribution, P(K > t).
double kolmogorov_sf(double t);

double normal_quantile(double p);
double normal_cdf(double x);

struct ResidualOptions {
  bool plugin = false;  ///< use the posterior-mean coefficients only
  std::size_t max_draws = 1000;
  double level = 0.95;
};

struct ResidualReport {
  std::vector<double> observation_mean;  ///< per observation, data order
  std::vector<double> theoretical;       ///< standard normal plotting positions
  std::vector<double> sorted_mean;       ///< posterior mean of each order statistic
  std::vector<double> sorted_lower;
  std::vector<double> sorted_upper;
  KsResult ks;                           ///< observation_mean against N(0, 1)
  std::size_t draws_used = 0;
};

/// Quantile residuals Phi^{-1}(F(y_i | x_i)) per posterior draw. CDF values
/// are clamped to [1e-12, 1 - 1e-12]. `data` must be on the fitting scale.
ResidualReport quantile_residuals(const ModelSpec& spec, const CoefficientLayout& layout,
                                  const PosteriorSamples& samples, const Dataset& data,
                                  const ResidualOptions& options = {});

// --- conditional densities -----------------------------------------------------

struct DensityGrid {
  std::vector<double> x_section;  ///< raw covariate row
  std::vector<double> y;
  std::vector<double> mean;
  std::vector<double> lower;
  std::vector<double> upper;
};

/// Posterior of the conditional density f(y | x) represented by a set of draws.
class PosteriorDensity {
 public:
  PosteriorDensity(ModelSpec spec, std::vector<CoefficientSet> draws,
                   std::optional<StandardizationStats> stats);

  static PosteriorDensity from_samples(const ModelSpec& spec, const CoefficientLayout& layout,
                                       const PosteriorSamples& samples, std::size_t max_draws,
                                       std::optional<StandardizationStats> stats);

  std::size_t draw_count() const { return draws_.size(); }

  /// Posterior mean of f(y | x) on a grid; x is a raw covariate row
  /// (including the intercept entry when the model has one).
  std::vector<double> mean_density(const Eigen::VectorXd& x_raw, std::span<const double> y) const;

  DensityGrid grid(const Eigen::VectorXd& x_raw, std::vector<double> y, double level = 0.95) const;

 private:
  Eigen::VectorXd fitted_row(const Eigen::VectorXd& x_raw) const;

  ModelSpec spec_;
  std::vector<CoefficientSet> draws_;
  std::optional<StandardizationStats> stats_;
};

/// Raw covariate row (c, ..., c), with a leading 1 when `has_intercept`.
Eigen::VectorXd diagonal_section(std::size_t p, bool has_intercept, double c);

/// Cross-section of the posterior density at x_raw; see PosteriorDensity::grid.
DensityGrid density_grid(const PosteriorDensity& density, const Eigen::VectorXd& x_raw,
                         std::vector<double> y_grid, double level = 0.95);

/// Heatmap: one cross-section per c along the diagonal x = (c, ..., c).
std::vector<DensityGrid> density_heatmap(const PosteriorDensity& density, std::size_t p,
                                         bool has_intercept, std::span<const double> c_values,
                                         const std::vector<double>& y_grid, double level = 0.95);

}  // namespace egpd
