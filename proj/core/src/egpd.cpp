#include "egpd/egpd.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "egpd/errors.hpp"

namespace egpd {

namespace {

constexpr int kMaxBisection = 200;
constexpr double kAssumptionProbe = 1e-6;

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

/// log(1 - exp(x)) for x <= 0.
double log1mexp(double x) {
  if (x > -0.6931471805599453) return std::log(-std::expm1(x));
  return std::log1p(-std::exp(x));
}

/// coef * log_value with the convention 0 * (+-inf) = 0.
double scaled_log(double coef, double log_value) {
  return coef == 0.0 ? 0.0 : coef * log_value;
}

double log_add_exp(double a, double b) {
  const double hi = std::max(a, b);
  if (hi == kNegInf) return kNegInf;
  if (hi == kInf) return kInf;
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

void check_unit_closed(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw DomainError(std::string(what) + ": argument " + std::to_string(v) +
                      " outside [0, 1]");
  }
}

/// log(1 - H(y)); -inf beyond the upper endpoint. Requires y >= 0.
double gpd_log_sf(const GpdParams& p, double y) {
  const double z = y / p.sigma();
  if (std::abs(p.xi()) < kXiLimit) return -z;
  const double arg = p.xi() * z;
  if (arg <= -1.0) return kNegInf;
  return -std::log1p(arg) / p.xi();
}

// Power-family pieces shared by the power and mixture carriers.

double power_logdensity(double kappa, double log_v) {
  return std::log(kappa) + scaled_log(kappa - 1.0, log_v);
}

double power_sf(double kappa, double w) { return -std::expm1(kappa * std::log1p(-w)); }

/// log dG/dv from log v and log(1 - v).
double carrier_logdensity_logs(const Carrier& g, double log_v, double log1m_v) {
  return std::visit(
      [&](const auto& c) -> double {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, PowerCarrier>) {
          return power_logdensity(c.kappa, log_v);
        } else if constexpr (std::is_same_v<T, BetaCarrier>) {
          // g(v) = (1 + k)/k * v^(2k - 1) * (1 - v^k)^(1/k - 1)
          const double k = c.kappa;
          double log_1m_t;
          if (log1m_v == kNegInf) {
            log_1m_t = kNegInf;
          } else if (log_v == kNegInf) {
            log_1m_t = 0.0;
          } else {
            log_1m_t = log1mexp(k * log_v);
          }
          return std::log1p(1.0 / k) + scaled_log(2.0 * k - 1.0, log_v) +
                 scaled_log(1.0 / k - 1.0, log_1m_t);
        } else {
          return log_add_exp(std::log(c.pi) + power_logdensity(c.kappa1, log_v),
                             std::log1p(-c.pi) + power_logdensity(c.kappa2, log_v));
        }
      },
      g);
}

/// Smallest-representable bracket of the root of an increasing f on [0, 1].
template <class F>
double bisect_increasing(F&& f, double target) {
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < kMaxBisection; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

// --- parameter types ---------------------------------------------------------

GpdParams::GpdParams(double sigma, double xi) : sigma_(sigma), xi_(xi) {
  if (!positive_finite(sigma)) {
    throw DomainError("GPD scale must be finite and > 0, got " + std::to_string(sigma));
  }
  if (!std::isfinite(xi)) throw DomainError("GPD shape must be finite");
}

double GpdParams::upper_endpoint() const noexcept {
  if (xi_ < 0.0 && std::abs(xi_) >= kXiLimit) return -sigma_ / xi_;
  return kInf;
}

PowerCarrier::PowerCarrier(double k) : kappa(k) {
  if (!positive_finite(k)) throw DomainError("power carrier kappa must be > 0");
}

BetaCarrier::BetaCarrier(double k) : kappa(k) {
  if (!positive_finite(k)) throw DomainError("Beta carrier kappa must be > 0");
}

MixtureCarrier::MixtureCarrier(double p, double k1, double k2)
    : pi(p), kappa1(k1), kappa2(k2) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("mixture weight must lie in (0, 1)");
  if (!positive_finite(k1) || !positive_finite(k2)) {
    throw DomainError("mixture carrier kappas must be > 0");
  }
}

GfpParams::GfpParams(double a_, double b_, double p_, double q_, double r_)
    : a(a_), b(b_), p(p_), q(q_), r(r_) {
  for (double v : {a, b, p, q, r}) {
    if (!positive_finite(v)) throw DomainError("GFP parameters must be finite and > 0");
  }
}

// --- GPD -------------------------------------------------------------------

double gpd_cdf(const GpdParams& p, double y) {
  if (!(y >= 0.0)) throw DomainError("gpd_cdf: y must be >= 0");
  return -std::expm1(gpd_log_sf(p, y));
}

double gpd_sf(const GpdParams& p, double y) {
  if (!(y >= 0.0)) throw DomainError("gpd_sf: y must be >= 0");
  return std::exp(gpd_log_sf(p, y));
}

double gpd_logpdf(const GpdParams& p, double y) {
  if (!(y >= 0.0) || std::isinf(y)) return kNegInf;
  const double z = y / p.sigma();
  if (std::abs(p.xi()) < kXiLimit) return -z - std::log(p.sigma());
  const double arg = p.xi() * z;
  if (arg <= -1.0) return kNegInf;
  return -std::log(p.sigma()) - (1.0 / p.xi() + 1.0) * std::log1p(arg);
}

double gpd_quantile(const GpdParams& p, double prob) {
  check_unit_closed(prob, "gpd_quantile");
  if (prob == 1.0) return p.upper_endpoint();
  const double log_w = std::log1p(-prob);
  if (std::abs(p.xi()) < kXiLimit) return -p.sigma() * log_w;
  return p.sigma() / p.xi() * std::expm1(-p.xi() * log_w);
}

// --- carriers --------------------------------------------------------------

double carrier_cdf(const Carrier& g, double v) {
  check_unit_closed(v, "carrier_cdf");
  return std::visit(
      [v](const auto& c) -> double {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, PowerCarrier>) {
          return std::pow(v, c.kappa);
        } else if constexpr (std::is_same_v<T, BetaCarrier>) {
          // 1 - Q(1 - t) = 1 - (1 - t)^(1/k) (1 + t/k), t = v^k
          const double t = std::pow(v, c.kappa);
          return -std::expm1(std::log1p(-t) / c.kappa + std::log1p(t / c.kappa));
        } else {
          return c.pi * std::pow(v, c.kappa1) + (1.0 - c.pi) * std::pow(v, c.kappa2);
        }
      },
      g);
}

double carrier_sf(const Carrier& g, double w) {
  check_unit_closed(w, "carrier_sf");
  return std::visit(
      [w](const auto& c) -> double {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, PowerCarrier>) {
          return power_sf(c.kappa, w);
        } else if constexpr (std::is_same_v<T, BetaCarrier>) {
          const double log_t = c.kappa * std::log1p(-w);
          const double one_minus_t = -std::expm1(log_t);
          return std::exp(std::log(one_minus_t) / c.kappa + std::log1p(std::exp(log_t) / c.kappa));
        } else {
          return c.pi * power_sf(c.kappa1, w) + (1.0 - c.pi) * power_sf(c.kappa2, w);
        }
      },
      g);
}

double carrier_logdensity(const Carrier& g, double v) {
  check_unit_closed(v, "carrier_logdensity");
  return carrier_logdensity_logs(g, std::log(v), std::log1p(-v));
}

double carrier_quantile(const Carrier& g, double u) {
  check_unit_closed(u, "carrier_quantile");
  if (const auto* power = std::get_if<PowerCarrier>(&g)) return std::pow(u, 1.0 / power->kappa);
  if (u <= 0.5) return bisect_increasing([&](double v) { return carrier_cdf(g, v); }, u);
  return 1.0 - bisect_increasing([&](double w) { return carrier_sf(g, w); }, 1.0 - u);
}

double carrier_quantile_complement(const Carrier& g, double u) {
  check_unit_closed(u, "carrier_quantile_complement");
  if (const auto* power = std::get_if<PowerCarrier>(&g)) {
    return -std::expm1(std::log(u) / power->kappa);
  }
  if (u <= 0.5) return 1.0 - bisect_increasing([&](double v) { return carrier_cdf(g, v); }, u);
  return bisect_increasing([&](double w) { return carrier_sf(g, w); }, 1.0 - u);
}

// --- EGPD ------------------------------------------------------------------

double egpd_cdf(const EgpdParams& p, double y) {
  if (!(y >= 0.0)) throw DomainError("egpd_cdf: y must be >= 0");
  const double log_s = gpd_log_sf(p.gpd, y);
  const double s = std::exp(log_s);
  if (s < 0.5) return 1.0 - carrier_sf(p.carrier, s);
  return carrier_cdf(p.carrier, -std::expm1(log_s));
}

double egpd_sf(const EgpdParams& p, double y) {
  if (!(y >= 0.0)) throw DomainError("egpd_sf: y must be >= 0");
  const double log_s = gpd_log_sf(p.gpd, y);
  const double s = std::exp(log_s);
  if (s < 0.5) return carrier_sf(p.carrier, s);
  return 1.0 - carrier_cdf(p.carrier, -std::expm1(log_s));
}

double egpd_logpdf(const EgpdParams& p, double y) {
  const double log_h = gpd_logpdf(p.gpd, y);
  if (log_h == kNegInf) return kNegInf;
  const double log_s = gpd_log_sf(p.gpd, y);
  const double log_v = log_s == 0.0 ? kNegInf : log1mexp(log_s);
  return log_h + carrier_logdensity_logs(p.carrier, log_v, log_s);
}

double egpd_pdf(const EgpdParams& p, double y) { return std::exp(egpd_logpdf(p, y)); }

double egpd_quantile(const EgpdParams& p, double prob) {
  check_unit_closed(prob, "egpd_quantile");
  const double w = carrier_quantile_complement(p.carrier, prob);
  if (w <= 0.0) return p.gpd.upper_endpoint();
  const double log_w = std::log(w);
  if (std::abs(p.gpd.xi()) < kXiLimit) return -p.gpd.sigma() * log_w;
  return p.gpd.sigma() / p.gpd.xi() * std::expm1(-p.gpd.xi() * log_w);
}

std::vector<double> egpd_sample(const EgpdParams& p, std::size_t n, Rng& rng) {
  std::vector<double> out(n);
  for (auto& y : out) y = egpd_quantile(p, uniform_open01(rng));
  return out;
}

// --- oracles ---------------------------------------------------------------

double gfp_logpdf(const GfpParams& g, double y) {
  if (!(y > 0.0) || std::isinf(y)) return kNegInf;
  const double log_ratio = std::log(y / g.b);
  const double log1p_z = std::log1p(g.a == 1.0 ? y / g.b : std::exp(g.a * log_ratio));
  const double log_beta = std::lgamma(g.p) + std::lgamma(g.q) - std::lgamma(g.p + g.q);
  return std::log(g.a) + std::log(g.r) + scaled_log(g.a - 1.0, std::log(y)) -
         g.a * std::log(g.b) - log_beta - (g.r * g.q + 1.0) * log1p_z +
         scaled_log(g.p - 1.0, log1mexp(-g.r * log1p_z));
}

AssumptionLimits assumption_limits(const Carrier& g, double kappa_ref) {
  if (!positive_finite(kappa_ref)) throw DomainError("kappa_ref must be > 0");
  const double v = kAssumptionProbe;
  return {carrier_sf(g, v) / v, carrier_cdf(g, v) / std::pow(v, kappa_ref)};
}

}  // namespace egpd
