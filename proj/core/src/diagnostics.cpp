#include "egpd/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "egpd/errors.hpp"

namespace egpd {

namespace {

constexpr std::size_t kMinEssDraws = 100;
constexpr double kResidualClamp = 1e-12;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
  const double m = mean_of(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

/// Lag-t autocovariance with 1/n normalization.
double autocovariance(std::span<const double> x, double mean, std::size_t lag) {
  double s = 0.0;
  for (std::size_t i = 0; i + lag < x.size(); ++i) s += (x[i] - mean) * (x[i + lag] - mean);
  return s / static_cast<double>(x.size());
}

/// Integrated autocorrelation time 1 + 2 sum_{t>=1} rho_t over equal-length
/// chains, truncated by Geyer's initial monotone positive sequence.
double autocorrelation_time(const std::vector<std::span<const double>>& chains) {
  const std::size_t m = chains.size();
  const std::size_t n = chains.front().size();
  for (const auto& c : chains) {
    if (c.size() != n) throw ConfigError("chains must have equal length");
  }
  if (n < 4) throw ConfigError("series too short for autocorrelation estimates");

  std::vector<double> means(m);
  std::vector<double> acov0(m);
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = mean_of(chains[c]);
    acov0[c] = autocovariance(chains[c], means[c], 0);
  }
  const double nd = static_cast<double>(n);
  const double within = mean_of(acov0) * nd / (nd - 1.0);
  double var_plus = within * (nd - 1.0) / nd;
  if (m > 1) var_plus += sample_variance(means);
  if (!(var_plus > 0.0) || !(within > 0.0)) {
    throw NumericalError("series is constant; autocorrelation undefined");
  }

  auto rho = [&](std::size_t t) -> double {
    if (t == 0) return 1.0;
    double acov = 0.0;
    for (std::size_t c = 0; c < m; ++c) acov += autocovariance(chains[c], means[c], t);
    acov /= static_cast<double>(m);
    if (m == 1) return acov / acov0[0];
    return 1.0 - (within - acov) / var_plus;
  };

  double pair_sum = 0.0;
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double gamma = rho(2 * k) + rho(2 * k + 1);
    if (gamma <= 0.0) break;
    gamma = std::min(gamma, previous);
    previous = gamma;
    pair_sum += gamma;
  }
  return std::max(-1.0 + 2.0 * pair_sum, 1.0 / std::log10(static_cast<double>(m * n)));
}

/// Variance of a segment mean from the spectral density at zero of an
/// autoregression fitted by Yule-Walker, order chosen by AIC up to 10 log10 n.
double spectral_mean_variance(std::span<const double> segment) {
  const std::size_t n = segment.size();
  const double nd = static_cast<double>(n);
  const double m = mean_of(segment);
  const auto max_order = std::min<std::size_t>(n - 1, static_cast<std::size_t>(10.0 * std::log10(nd)));
  std::vector<double> acov(max_order + 1);
  for (std::size_t k = 0; k <= max_order; ++k) acov[k] = autocovariance(segment, m, k);
  if (!(acov[0] > 0.0)) throw NumericalError("series is constant; Geweke z undefined");

  // Levinson-Durbin recursion.
  std::vector<double> phi, next;
  double innovation = acov[0];
  double best_aic = nd * std::log(innovation);
  double best_spectrum = acov[0];
  for (std::size_t k = 1; k <= max_order; ++k) {
    double num = acov[k];
    for (std::size_t j = 0; j + 1 < k; ++j) num -= phi[j] * acov[k - 1 - j];
    const double partial = num / innovation;
    next.assign(k, 0.0);
    for (std::size_t j = 0; j + 1 < k; ++j) next[j] = phi[j] - partial * phi[k - 2 - j];
    next[k - 1] = partial;
    phi.swap(next);
    innovation *= 1.0 - partial * partial;
    if (!(innovation > 0.0)) break;
    const double aic = nd * std::log(innovation) + 2.0 * static_cast<double>(k);
    if (aic < best_aic) {
      best_aic = aic;
      const double denom = 1.0 - std::accumulate(phi.begin(), phi.end(), 0.0);
      const double pred = innovation * nd / (nd - static_cast<double>(k + 1));
      best_spectrum = pred / (denom * denom);
    }
  }
  return best_spectrum / nd;
}

std::vector<std::span<const double>> as_spans(const std::vector<std::vector<double>>& series) {
  std::vector<std::span<const double>> out;
  out.reserve(series.size());
  for (const auto& s : series) out.emplace_back(s);
  return out;
}

}  // namespace

// --- convergence -------------------------------------------------------------

double effective_sample_size(std::span<const double> draws) {
  return effective_sample_size(std::vector<std::span<const double>>{draws});
}

double effective_sample_size(const std::vector<std::span<const double>>& chains) {
  if (chains.empty()) throw ConfigError("no chains given");
  const std::size_t total = chains.size() * chains.front().size();
  if (total < kMinEssDraws) throw ConfigError("effective sample size needs at least 100 draws");
  return static_cast<double>(total) / autocorrelation_time(chains);
}

double geweke_z(std::span<const double> draws, double frac_a, double frac_b) {
  if (!(frac_a > 0.0 && frac_b > 0.0 && frac_a + frac_b <= 1.0)) {
    throw ConfigError("Geweke window fractions must be positive and sum to at most 1");
  }
  if (draws.size() < kMinEssDraws) throw ConfigError("Geweke diagnostic needs at least 100 draws");
  const auto n = static_cast<double>(draws.size());
  const auto n_a = static_cast<std::size_t>(std::floor(frac_a * n));
  const auto n_b = static_cast<std::size_t>(std::floor(frac_b * n));
  const auto a = draws.first(n_a);
  const auto b = draws.last(n_b);
  return (mean_of(a) - mean_of(b)) / std::sqrt(spectral_mean_variance(a) + spectral_mean_variance(b));
}

double split_rhat(const std::vector<std::span<const double>>& chains) {
  std::vector<std::span<const double>> halves;
  for (const auto& c : chains) {
    const std::size_t h = c.size() / 2;
    halves.push_back(c.first(h));
    halves.push_back(c.subspan(c.size() - h, h));
  }
  const auto n = static_cast<double>(halves.front().size());
  std::vector<double> means;
  std::vector<double> vars;
  for (const auto& h : halves) {
    means.push_back(mean_of(h));
    vars.push_back(sample_variance(h));
  }
  const double within = mean_of(vars);
  if (!(within > 0.0)) return kNaN;
  const double var_plus = (n - 1.0) / n * within + sample_variance(means);
  return std::sqrt(var_plus / within);
}

// --- summaries -----------------------------------------------------------------

double quantile_sorted(std::span<const double> sorted, double prob) {
  if (sorted.empty()) throw ConfigError("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

std::vector<CoefficientSummary> summarize(const PosteriorSamples& samples, double level) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("credible level must lie in (0, 1)");
  std::vector<CoefficientSummary> out;
  out.reserve(samples.dim());
  for (std::size_t k = 0; k < samples.dim(); ++k) {
    CoefficientSummary s;
    s.name = samples.names[k];
    std::vector<double> pooled = samples.pooled(k);
    s.mean = mean_of(pooled);
    s.sd = pooled.size() > 1 ? std::sqrt(sample_variance(pooled)) : 0.0;
    std::sort(pooled.begin(), pooled.end());
    s.lower = quantile_sorted(pooled, 0.5 * (1.0 - level));
    s.upper = quantile_sorted(pooled, 0.5 * (1.0 + level));
    s.selected = !(s.lower <= 0.0 && 0.0 <= s.upper);

    std::vector<std::vector<double>> series;
    for (std::size_t c = 0; c < samples.n_chains; ++c) series.push_back(samples.chain_series(c, k));
    const auto chains = as_spans(series);
    try {
      s.ess = effective_sample_size(chains);
      s.geweke_z = 0.0;
      for (const auto& c : chains) {
        const double z = geweke_z(c);
        if (std::abs(z) > std::abs(s.geweke_z)) s.geweke_z = z;
      }
      s.rhat = split_rhat(chains);
    } catch (const std::exception&) {
      s.ess = kNaN;
      s.geweke_z = kNaN;
      s.rhat = kNaN;
    }
    out.push_back(std::move(s));
  }
  return out;
}

PosteriorSamples to_raw_scale(const PosteriorSamples& samples, const ModelSpec& spec,
                              const CoefficientLayout& layout, const StandardizationStats& stats) {
  if (samples.dim() != layout.size()) throw ConfigError("samples do not match the layout");
  PosteriorSamples raw = samples;
  for (std::size_t c = 0; c < samples.n_chains; ++c) {
    for (std::size_t i = 0; i < samples.n_draws; ++i) {
      const auto packed = layout.pack(to_raw_scale(spec, layout.unpack(samples.draw(c, i)), stats));
      std::copy(packed.begin(), packed.end(), raw.draws.begin() + static_cast<std::ptrdiff_t>(
                                                                     (c * samples.n_draws + i) *
                                                                     samples.dim()));
    }
  }
  return raw;
}

std::vector<CoefficientSet> select_draws(const PosteriorSamples& samples,
                                         const CoefficientLayout& layout, std::size_t max_draws) {
  if (samples.names != layout.names()) {
    throw ConfigError("coordinate names of the samples do not match the model");
  }
  const std::size_t total = samples.n_chains * samples.n_draws;
  const std::size_t k = std::min(max_draws, total);
  std::vector<CoefficientSet> out;
  out.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t idx = j * total / k;
    out.push_back(layout.unpack(samples.draw(idx / samples.n_draws, idx % samples.n_draws)));
  }
  return out;
}

CoefficientSet posterior_mean(const PosteriorSamples& samples, const CoefficientLayout& layout) {
  std::vector<double> mean(samples.dim(), 0.0);
  for (std::size_t k = 0; k < samples.dim(); ++k) mean[k] = mean_of(samples.pooled(k));
  return layout.unpack(mean);
}

// --- goodness of fit -----------------------------------------------------------

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double kolmogorov_sf(double t) {
  if (t <= 0.0) return 1.0;
  if (t < 1.18) {
    // P(K <= t) = sqrt(2 pi) / t * sum exp(-(2k - 1)^2 pi^2 / (8 t^2))
    const double c = std::numbers::pi * std::numbers::pi / (8.0 * t * t);
    double s = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const double j = 2.0 * k - 1.0;
      s += std::exp(-j * j * c);
    }
    return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / t * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * t * t);
    s += (k % 2 == 1 ? term : -term);
    if (term < 1e-300) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

KsResult ks_test_normal(std::span<const double> values) {
  if (values.empty()) throw ConfigError("KS test of an empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = normal_cdf(sorted[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  const double root_n = std::sqrt(n);
  return {d, kolmogorov_sf((root_n + 0.12 + 0.11 / root_n) * d)};
}

ResidualReport quantile_residuals(const ModelSpec& spec, const CoefficientLayout& layout,
                                  const PosteriorSamples& samples, const Dataset& data,
                                  const ResidualOptions& options) {
  if (data.p() != spec.p) throw ConfigError("dataset width differs from model spec");
  const std::vector<CoefficientSet> draws =
      options.plugin ? std::vector<CoefficientSet>{posterior_mean(samples, layout)}
                     : select_draws(samples, layout, options.max_draws);
  const std::size_t n = data.n();
  const std::size_t s_count = draws.size();

  // residuals[s * n + rank] holds the sorted residuals of draw s
  std::vector<double> sorted_by_draw(s_count * n);
  std::vector<double> obs_sum(n, 0.0);
  std::vector<double> r(n);
  for (std::size_t s = 0; s < s_count; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = data.X.row(static_cast<Eigen::Index>(i));
      const auto params = try_predict_params(spec, draws[s], {row.data(), spec.p});
      if (!params) throw NumericalError("posterior draw outside the admissible region");
      const double u = std::clamp(egpd_cdf(*params, data.y[static_cast<Eigen::Index>(i)]),
                                  kResidualClamp, 1.0 - kResidualClamp);
      r[i] = normal_quantile(u);
      obs_sum[i] += r[i];
    }
    std::sort(r.begin(), r.end());
    std::copy(r.begin(), r.end(), sorted_by_draw.begin() + static_cast<std::ptrdiff_t>(s * n));
  }

  ResidualReport out;
  out.draws_used = s_count;
  out.observation_mean.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.observation_mean[i] = obs_sum[i] / static_cast<double>(s_count);

  const double lo_p = 0.5 * (1.0 - options.level);
  const double hi_p = 0.5 * (1.0 + options.level);
  std::vector<double> column(s_count);
  for (std::size_t k = 0; k < n; ++k) {
    out.theoretical.push_back(normal_quantile((static_cast<double>(k) + 0.5) / static_cast<double>(n)));
    for (std::size_t s = 0; s < s_count; ++s) column[s] = sorted_by_draw[s * n + k];
    out.sorted_mean.push_back(mean_of(column));
    std::sort(column.begin(), column.end());
    out.sorted_lower.push_back(quantile_sorted(column, lo_p));
    out.sorted_upper.push_back(quantile_sorted(column, hi_p));
  }
  out.ks = ks_test_normal(out.observation_mean);
  return out;
}

// --- conditional densities -----------------------------------------------------

PosteriorDensity::PosteriorDensity(ModelSpec spec, std::vector<CoefficientSet> draws,
                                   std::optional<StandardizationStats> stats)
    : spec_(std::move(spec)), draws_(std::move(draws)), stats_(std::move(stats)) {
  if (draws_.empty()) throw ConfigError("posterior density needs at least one draw");
}

PosteriorDensity PosteriorDensity::from_samples(const ModelSpec& spec,
                                                const CoefficientLayout& layout,
                                                const PosteriorSamples& samples,
                                                std::size_t max_draws,
                                                std::optional<StandardizationStats> stats) {
  return PosteriorDensity(spec, select_draws(samples, layout, max_draws), std::move(stats));
}

Eigen::VectorXd PosteriorDensity::fitted_row(const Eigen::VectorXd& x_raw) const {
  if (static_cast<std::size_t>(x_raw.size()) != spec_.p) {
    throw ConfigError("covariate row has " + std::to_string(x_raw.size()) + " entries, model has " +
                      std::to_string(spec_.p));
  }
  return stats_ ? standardize_row(x_raw, *stats_) : x_raw;
}

std::vector<double> PosteriorDensity::mean_density(const Eigen::VectorXd& x_raw,
                                                   std::span<const double> y) const {
  const Eigen::VectorXd x = fitted_row(x_raw);
  std::vector<double> acc(y.size(), 0.0);
  for (const auto& coef : draws_) {
    const auto params = try_predict_params(spec_, coef, {x.data(), spec_.p});
    if (!params) continue;
    for (std::size_t k = 0; k < y.size(); ++k) acc[k] += egpd_pdf(*params, y[k]);
  }
  for (double& a : acc) a /= static_cast<double>(draws_.size());
  return acc;
}

DensityGrid PosteriorDensity::grid(const Eigen::VectorXd& x_raw, std::vector<double> y,
                                   double level) const {
  for (std::size_t k = 0; k < y.size(); ++k) {
    if (!(y[k] > 0.0) || (k > 0 && !(y[k] > y[k - 1]))) {
      throw ConfigError("density grid must be positive and strictly increasing");
    }
  }
  const Eigen::VectorXd x = fitted_row(x_raw);
  const std::size_t s_count = draws_.size();
  std::vector<double> values(s_count * y.size(), 0.0);  // [grid][draw]
  for (std::size_t s = 0; s < s_count; ++s) {
    const auto params = try_predict_params(spec_, draws_[s], {x.data(), spec_.p});
    if (!params) continue;
    for (std::size_t k = 0; k < y.size(); ++k) values[k * s_count + s] = egpd_pdf(*params, y[k]);
  }
  DensityGrid g;
  g.x_section.assign(x_raw.data(), x_raw.data() + x_raw.size());
  const double lo_p = 0.5 * (1.0 - level);
  const double hi_p = 0.5 * (1.0 + level);
  for (std::size_t k = 0; k < y.size(); ++k) {
    std::span<double> col(values.data() + k * s_count, s_count);
    g.mean.push_back(mean_of(col));
    std::sort(col.begin(), col.end());
    g.lower.push_back(quantile_sorted(col, lo_p));
    g.upper.push_back(quantile_sorted(col, hi_p));
  }
  g.y = std::move(y);
  return g;
}

Eigen::VectorXd diagonal_section(std::size_t p, bool has_intercept, double c) {
  Eigen::VectorXd x = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(p), c);
  if (has_intercept && p > 0) x[0] = 1.0;
  return x;
}

DensityGrid density_grid(const PosteriorDensity& density, const Eigen::VectorXd& x_raw,
                         std::vector<double> y_grid, double level) {
  return density.grid(x_raw, std::move(y_grid), level);
}

std::vector<DensityGrid> density_heatmap(const PosteriorDensity& density, std::size_t p,
                                         bool has_intercept, std::span<const double> c_values,
                                         const std::vector<double>& y_grid, double level) {
  std::vector<DensityGrid> out;
  out.reserve(c_values.size());
  for (double c : c_values) out.push_back(density.grid(diagonal_section(p, has_intercept, c), y_grid, level));
  return out;
}

}  // namespace egpd
