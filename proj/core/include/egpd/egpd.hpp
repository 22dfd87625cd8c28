#pragma once

// Generalized Pareto and extended generalized Pareto (EGPD) distributions.
//
// An EGPD has distribution function F(y) = G(H(y)), where H is a GPD and G is
// a carrier distribution function on [0, 1]. Three carrier families are
// provided: power, Beta-type and a two-component power mixture.
//
// Density routines return -infinity outside the support instead of throwing,
// so that proposals landing there can simply be rejected by a sampler.

#include <cstddef>
#include <limits>
#include <variant>
#include <vector>

#include "egpd/random.hpp"

namespace egpd {

/// |xi| below this threshold selects the exponential (xi -> 0) branches.
inline constexpr double kXiLimit = 1e-8;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

class GpdParams {
 public:
  GpdParams(double sigma, double xi);

  double sigma() const noexcept { return sigma_; }
  double xi() const noexcept { return xi_; }

  /// Right endpoint of the support; +inf unless xi < 0.
  double upper_endpoint() const noexcept;

 private:
  double sigma_;
  double xi_;
};

struct PowerCarrier {
  explicit PowerCarrier(double kappa);
  double kappa;
};

/// G(v) = 1 - Q(1 - v^kappa), Q the Beta(1/kappa, 2) distribution function.
struct BetaCarrier {
  explicit BetaCarrier(double kappa);
  double kappa;
};

/// G(v) = pi v^kappa1 + (1 - pi) v^kappa2.
struct MixtureCarrier {
  MixtureCarrier(double pi, double kappa1, double kappa2);
  double pi;
  double kappa1;
  double kappa2;
};

using Carrier = std::variant<PowerCarrier, BetaCarrier, MixtureCarrier>;

struct EgpdParams {
  Carrier carrier;
  GpdParams gpd;
};

// --- GPD -------------------------------------------------------------------

double gpd_cdf(const GpdParams& p, double y);
/// Survival function 1 - H(y).
double gpd_sf(const GpdParams& p, double y);
double gpd_logpdf(const GpdParams& p, double y);
double gpd_quantile(const GpdParams& p, double prob);

// --- carriers --------------------------------------------------------------

double carrier_cdf(const Carrier& g, double v);
/// 1 - G(1 - w), evaluated without cancellation for small w.
double carrier_sf(const Carrier& g, double w);
double carrier_logdensity(const Carrier& g, double v);
double carrier_quantile(const Carrier& g, double u);
/// 1 - G^{-1}(u), accurate when the quantile is close to 1.
double carrier_quantile_complement(const Carrier& g, double u);

// --- EGPD ------------------------------------------------------------------

double egpd_cdf(const EgpdParams& p, double y);
double egpd_sf(const EgpdParams& p, double y);
double egpd_logpdf(const EgpdParams& p, double y);
double egpd_pdf(const EgpdParams& p, double y);
double egpd_quantile(const EgpdParams& p, double prob);

/// n inverse-transform draws; one uniform is consumed per draw.
std::vector<double> egpd_sample(const EgpdParams& p, std::size_t n, Rng& rng);

// --- oracles ---------------------------------------------------------------

/// Generalized Feller-Pareto parameters (a, b, p, q, r).
struct GfpParams {
  GfpParams(double a, double b, double p, double q, double r);
  double a, b, p, q, r;
};

double gfp_logpdf(const GfpParams& g, double y);

struct AssumptionLimits {
  double a;  ///< lim (1 - G(1 - v)) / v
  double c;  ///< lim G(v) / v^kappa_ref
};

/// Finite-v estimates of the carrier tail (A) and lower-tail (C) limits,
/// evaluated at v = 1e-6.
AssumptionLimits assumption_limits(const Carrier& g, double kappa_ref);

}  // namespace egpd
