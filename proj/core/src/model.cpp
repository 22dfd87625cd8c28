#include "egpd/model.hpp"

#include <cmath>
#include <numbers>

#include "egpd/errors.hpp"

namespace egpd {

namespace {

/// Non-owning view of a coefficient state, shared by the CoefficientSet and
/// flat-vector entry points.
struct CoefView {
  const double* beta;
  const double* alpha;
  const double* gamma;
  double beta2_intercept;
  double lambda;
};

CoefView view_of(const CoefficientSet& c) {
  return {c.beta.data(), c.alpha.data(), c.gamma.data(), c.beta2_intercept, c.lambda};
}

struct FlatOffsets {
  std::size_t beta = 0;
  std::size_t beta2 = 0;  // valid for mixtures only
  std::size_t alpha = 0;
  std::size_t gamma = 0;
  std::size_t lambda = 0;
};

FlatOffsets offsets_for(const ModelSpec& spec) {
  FlatOffsets o;
  const std::size_t tail_len = spec.version == ModelVersion::Full ? spec.p : 1;
  std::size_t at = spec.p;
  if (spec.carrier == CarrierFamily::Mixture) o.beta2 = at++;
  o.alpha = at;
  at += tail_len;
  o.gamma = at;
  at += tail_len;
  o.lambda = at;
  return o;
}

CoefView view_of(const ModelSpec& spec, std::span<const double> theta) {
  const FlatOffsets o = offsets_for(spec);
  return {theta.data() + o.beta, theta.data() + o.alpha, theta.data() + o.gamma,
          spec.carrier == CarrierFamily::Mixture ? theta[o.beta2] : 0.0, theta[o.lambda]};
}

double dot(const double* x, const double* c, std::size_t p) {
  double s = 0.0;
  for (std::size_t j = 0; j < p; ++j) s += x[j] * c[j];
  return s;
}

bool admissible_positive(double v) { return std::isfinite(v) && v > 0.0; }

std::optional<EgpdParams> params_at(const ModelSpec& spec, const CoefView& c, const double* x) {
  const bool full = spec.version == ModelVersion::Full;
  const double eta_kappa = dot(x, c.beta, spec.p);
  const double eta_nu = full ? dot(x, c.alpha, spec.p) : c.alpha[0];
  const double eta_xi = full ? dot(x, c.gamma, spec.p) : c.gamma[0];

  const double kappa = std::exp(eta_kappa);
  const double nu = apply_link(spec.link_nu, eta_nu);
  const double xi = apply_link(spec.link_xi, eta_xi);
  if (!admissible_positive(kappa) || !admissible_positive(nu) || !std::isfinite(xi)) {
    return std::nullopt;
  }
  if (spec.link_xi == Link::Identity && !(xi > kXiFloor)) return std::nullopt;
  const double sigma = nu / (1.0 + xi);
  if (!admissible_positive(sigma)) return std::nullopt;

  switch (spec.carrier) {
    case CarrierFamily::Power:
      return EgpdParams{PowerCarrier(kappa), GpdParams(sigma, xi)};
    case CarrierFamily::Beta:
      return EgpdParams{BetaCarrier(kappa), GpdParams(sigma, xi)};
    case CarrierFamily::Mixture: {
      const double kappa2 = std::exp(eta_kappa + c.beta2_intercept - c.beta[0]);
      if (!admissible_positive(kappa2)) return std::nullopt;
      return EgpdParams{MixtureCarrier(spec.mixture_weight, kappa, kappa2), GpdParams(sigma, xi)};
    }
  }
  return std::nullopt;
}

double log_likelihood_view(const ModelSpec& spec, const CoefView& c, const Dataset& data) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < data.X.rows(); ++i) {
    const auto params = params_at(spec, c, data.X.row(i).data());
    if (!params) return kNegInf;
    const double lp = egpd_logpdf(*params, data.y[i]);
    if (lp == kNegInf) return kNegInf;
    total += lp;
  }
  return std::isnan(total) ? kNegInf : total;
}

double normal_logpdf(double x, double sd) {
  const double z = x / sd;
  return -0.5 * std::log(2.0 * std::numbers::pi) - std::log(sd) - 0.5 * z * z;
}

double gamma_logpdf(double x, double shape, double rate) {
  if (!(x > 0.0)) return kNegInf;
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double log_prior_flat(const ModelSpec& spec, const CoefficientLayout& layout,
                      const PriorSpec& prior, std::span<const double> theta) {
  const double lambda = theta[layout.lambda_index()];
  if (!(lambda > 0.0) || !std::isfinite(lambda)) return kNegInf;
  if (spec.carrier == CarrierFamily::Mixture) {
    const CoefView c = view_of(spec, theta);
    if (!(c.beta[0] > c.beta2_intercept)) return kNegInf;
  }
  double total = lambda_log_prior(prior, lambda);
  const double log_norm = std::log(lambda / 4.0);
  for (std::size_t k = 0; k < layout.lambda_index(); ++k) {
    const Coordinate& coord = layout.coordinates()[k];
    if (coord.penalized) {
      total += log_norm - 0.5 * lambda * std::abs(theta[k]);
    } else {
      total += normal_logpdf(theta[k], prior.intercept_sd);
    }
  }
  return total;
}

std::string column_name(const std::vector<std::string>& names, std::size_t j) {
  return j < names.size() ? names[j] : "x" + std::to_string(j);
}

}  // namespace

// --- configuration -------------------------------------------------------------

void ModelSpec::validate() const {
  if (p == 0) throw ConfigError("model needs at least one design column");
  if (link_kappa != Link::Exp) throw ConfigError("kappa link must be exp");
  if (link_nu != Link::Exp) throw ConfigError("nu link must be exp");
  if (carrier == CarrierFamily::Mixture) {
    if (!(mixture_weight > 0.0 && mixture_weight < 1.0)) {
      throw ConfigError("mixture_weight must lie in (0, 1)");
    }
    if (!has_intercept) throw ConfigError("mixture carrier requires an intercept column");
  }
  if (standardize && !has_intercept) {
    throw ConfigError("standardized covariates require an intercept column");
  }
}

void PriorSpec::validate() const {
  if (!(a_lambda > 0.0) || !(b_lambda > 0.0)) {
    throw ConfigError("Gamma hyperprior parameters must be > 0");
  }
  if (!(intercept_sd > 0.0)) throw ConfigError("intercept_sd must be > 0");
}

CoefficientSet CoefficientSet::zeros(std::size_t p) {
  CoefficientSet c;
  const auto n = static_cast<Eigen::Index>(p);
  c.beta = Eigen::VectorXd::Zero(n);
  c.alpha = Eigen::VectorXd::Zero(n);
  c.gamma = Eigen::VectorXd::Zero(n);
  return c;
}

// --- data ------------------------------------------------------------------------

void Dataset::validate() const {
  if (y.size() == 0) throw DataError("dataset has no observations");
  if (X.rows() != y.size()) throw DataError("design rows and response length differ");
  if (column_names.size() != p()) throw DataError("column name count differs from design width");
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y[i]) || !(y[i] > 0.0)) {
      throw DataError("response row " + std::to_string(i + 1) + " is not a positive finite value");
    }
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      if (!std::isfinite(X(i, j))) {
        throw DataError("non-finite covariate at row " + std::to_string(i + 1));
      }
    }
  }
  if (has_intercept && (X.cols() == 0 || (X.col(0).array() != 1.0).any())) {
    throw DataError("intercept column must be all ones");
  }
}

Dataset make_dataset(const DesignMatrix& covariates, Eigen::VectorXd y,
                     std::vector<std::string> covariate_names, bool add_intercept) {
  Dataset d;
  d.has_intercept = add_intercept;
  if (add_intercept) {
    d.X.resize(covariates.rows(), covariates.cols() + 1);
    d.X.col(0).setOnes();
    d.X.rightCols(covariates.cols()) = covariates;
    d.column_names.reserve(covariate_names.size() + 1);
    d.column_names.emplace_back("intercept");
    for (auto& name : covariate_names) d.column_names.push_back(std::move(name));
  } else {
    d.X = covariates;
    d.column_names = std::move(covariate_names);
  }
  d.y = std::move(y);
  d.validate();
  return d;
}

Dataset add_intercept(const Dataset& data) {
  if (data.has_intercept) throw ConfigError("dataset already has an intercept column");
  return make_dataset(data.X, data.y, data.column_names, true);
}

Dataset standardize(const Dataset& data) {
  if (data.standardization) throw ConfigError("dataset is already standardized");
  Dataset out = data;
  StandardizationStats stats;
  stats.mean.assign(data.p(), 0.0);
  stats.sd.assign(data.p(), 1.0);
  const auto n = static_cast<double>(data.n());
  for (std::size_t j = data.has_intercept ? 1 : 0; j < data.p(); ++j) {
    const auto col = data.X.col(static_cast<Eigen::Index>(j));
    const double mean = col.mean();
    const double ss = (col.array() - mean).square().sum();
    const double sd = n > 1.0 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    if (!(sd > 0.0)) {
      throw DataError("column '" + data.column_names[j] + "' has zero variance");
    }
    out.X.col(static_cast<Eigen::Index>(j)) = (col.array() - mean) / sd;
    stats.mean[j] = mean;
    stats.sd[j] = sd;
  }
  out.standardization = std::move(stats);
  return out;
}

Eigen::VectorXd standardize_row(const Eigen::VectorXd& x_raw, const StandardizationStats& stats) {
  Eigen::VectorXd x = x_raw;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    x[j] = (x_raw[j] - stats.mean[static_cast<std::size_t>(j)]) /
           stats.sd[static_cast<std::size_t>(j)];
  }
  return x;
}

CoefficientSet to_raw_scale(const ModelSpec& spec, const CoefficientSet& fitted,
                            const StandardizationStats& stats) {
  if (!spec.has_intercept) throw ConfigError("back-transformation requires an intercept");
  CoefficientSet raw = fitted;
  auto transform = [&](const Eigen::VectorXd& c, Eigen::VectorXd& out) -> double {
    double shift = 0.0;
    for (Eigen::Index j = 1; j < c.size(); ++j) {
      const auto k = static_cast<std::size_t>(j);
      out[j] = c[j] / stats.sd[k];
      shift += c[j] * stats.mean[k] / stats.sd[k];
    }
    out[0] = c[0] - shift;
    return shift;
  };
  const double kappa_shift = transform(fitted.beta, raw.beta);
  raw.beta2_intercept = fitted.beta2_intercept - kappa_shift;
  if (spec.version == ModelVersion::Full) {
    transform(fitted.alpha, raw.alpha);
    transform(fitted.gamma, raw.gamma);
  }
  return raw;
}

// --- prediction ------------------------------------------------------------------

double apply_link(Link link, double eta) { return link == Link::Exp ? std::exp(eta) : eta; }

std::optional<EgpdParams> try_predict_params(const ModelSpec& spec, const CoefficientSet& coef,
                                             std::span<const double> x) {
  if (x.size() != spec.p) throw ConfigError("covariate vector has the wrong length");
  return params_at(spec, view_of(coef), x.data());
}

EgpdParams predict_params(const ModelSpec& spec, const CoefficientSet& coef,
                          std::span<const double> x) {
  auto params = try_predict_params(spec, coef, x);
  if (!params) throw InvalidRegionError("linear predictors outside the admissible region");
  return *std::move(params);
}

// --- densities -------------------------------------------------------------------

double log_likelihood(const ModelSpec& spec, const CoefficientSet& coef, const Dataset& data) {
  if (data.p() != spec.p) throw ConfigError("dataset width differs from model spec");
  return log_likelihood_view(spec, view_of(coef), data);
}

double lambda_log_prior(const PriorSpec& prior, double lambda) {
  if (!(lambda > 0.0)) return kNegInf;
  if (prior.lambda_prior == LambdaPrior::Lambda) {
    return gamma_logpdf(lambda, prior.a_lambda, prior.b_lambda);
  }
  // lambda^2 ~ Gamma(a, b): change of variables adds log(2 lambda).
  return std::log(2.0 * lambda) + gamma_logpdf(lambda * lambda, prior.a_lambda, prior.b_lambda);
}

double log_prior(const ModelSpec& spec, const PriorSpec& prior, const CoefficientSet& coef) {
  const CoefficientLayout layout(spec, {}, prior.penalize_intercept);
  const auto theta = layout.pack(coef);
  return log_prior_flat(spec, layout, prior, theta);
}

double log_posterior(const ModelSpec& spec, const PriorSpec& prior, const CoefficientSet& coef,
                     const Dataset& data) {
  const double lp = log_prior(spec, prior, coef);
  if (lp == kNegInf) return kNegInf;
  return lp + log_likelihood(spec, coef, data);
}

// --- layout ----------------------------------------------------------------------

CoefficientLayout::CoefficientLayout(const ModelSpec& spec,
                                     const std::vector<std::string>& column_names,
                                     bool penalize_intercept)
    : p_(spec.p) {
  auto add = [&](Channel ch, std::size_t index, bool intercept, std::string name) {
    const bool penalized = !intercept || penalize_intercept;
    if (penalized) penalized_.push_back(coords_.size());
    coords_.push_back({ch, index, intercept, penalized, std::move(name)});
  };
  auto add_channel = [&](Channel ch, const std::string& prefix) {
    for (std::size_t j = 0; j < spec.p; ++j) {
      add(ch, j, spec.has_intercept && j == 0, prefix + "." + column_name(column_names, j));
    }
  };

  add_channel(Channel::Kappa, "beta");
  if (spec.carrier == CarrierFamily::Mixture) add(Channel::KappaSecond, 0, true, "beta2.intercept");
  if (spec.version == ModelVersion::Full) {
    add_channel(Channel::Nu, "alpha");
    add_channel(Channel::Xi, "gamma");
  } else {
    add(Channel::Nu, 0, true, "alpha.intercept");
    add(Channel::Xi, 0, true, "gamma.intercept");
  }
  coords_.push_back({Channel::Lambda, 0, false, false, "lambda"});
}

std::vector<std::string> CoefficientLayout::names() const {
  std::vector<std::string> out;
  out.reserve(coords_.size());
  for (const auto& c : coords_) out.push_back(c.name);
  return out;
}

std::vector<double> CoefficientLayout::pack(const CoefficientSet& coef) const {
  std::vector<double> theta(coords_.size());
  for (std::size_t k = 0; k < coords_.size(); ++k) {
    const auto& c = coords_[k];
    const auto j = static_cast<Eigen::Index>(c.index);
    switch (c.channel) {
      case Channel::Kappa: theta[k] = coef.beta[j]; break;
      case Channel::KappaSecond: theta[k] = coef.beta2_intercept; break;
      case Channel::Nu: theta[k] = coef.alpha[j]; break;
      case Channel::Xi: theta[k] = coef.gamma[j]; break;
      case Channel::Lambda: theta[k] = coef.lambda; break;
    }
  }
  return theta;
}

CoefficientSet CoefficientLayout::unpack(std::span<const double> theta) const {
  if (theta.size() != coords_.size()) throw ConfigError("flat vector has the wrong length");
  CoefficientSet coef = CoefficientSet::zeros(p_);
  for (std::size_t k = 0; k < coords_.size(); ++k) {
    const auto& c = coords_[k];
    const auto j = static_cast<Eigen::Index>(c.index);
    switch (c.channel) {
      case Channel::Kappa: coef.beta[j] = theta[k]; break;
      case Channel::KappaSecond: coef.beta2_intercept = theta[k]; break;
      case Channel::Nu: coef.alpha[j] = theta[k]; break;
      case Channel::Xi: coef.gamma[j] = theta[k]; break;
      case Channel::Lambda: coef.lambda = theta[k]; break;
    }
  }
  return coef;
}

CoefficientSet initial_coefficients(const ModelSpec& spec, const PriorSpec& prior,
                                    const Dataset& data) {
  CoefficientSet c = CoefficientSet::zeros(spec.p);
  constexpr double xi_start = 0.1;
  const bool scalar_tail = spec.version == ModelVersion::BulkOnly;
  if (spec.has_intercept || scalar_tail) {
    const double sigma_start = data.y.mean();
    c.alpha[0] = std::log(sigma_start * (1.0 + xi_start));
    c.gamma[0] = spec.link_xi == Link::Exp ? std::log(xi_start) : xi_start;
  }
  c.beta2_intercept = c.beta[0] - 1.0;
  c.lambda = prior.lambda_prior == LambdaPrior::Lambda
                 ? prior.a_lambda / prior.b_lambda
                 : std::sqrt(prior.a_lambda / prior.b_lambda);
  return c;
}

// --- bound model -----------------------------------------------------------------

PosteriorModel::PosteriorModel(ModelSpec spec, PriorSpec prior, Dataset data, bool use_likelihood)
    : spec_(std::move(spec)),
      prior_(std::move(prior)),
      data_(std::move(data)),
      layout_(spec_, data_.column_names, prior_.penalize_intercept),
      use_likelihood_(use_likelihood) {
  spec_.validate();
  prior_.validate();
  if (data_.p() != spec_.p) throw ConfigError("dataset width differs from model spec");
}

double PosteriorModel::log_likelihood(std::span<const double> theta) const {
  if (!use_likelihood_) return 0.0;
  return log_likelihood_view(spec_, view_of(spec_, theta), data_);
}

double PosteriorModel::log_prior(std::span<const double> theta) const {
  return log_prior_flat(spec_, layout_, prior_, theta);
}

double PosteriorModel::log_posterior(std::span<const double> theta) const {
  const double lp = log_prior(theta);
  if (lp == kNegInf) return kNegInf;
  return lp + log_likelihood(theta);
}

std::vector<double> PosteriorModel::initial_state() const {
  return layout_.pack(initial_coefficients(spec_, prior_, data_));
}

// --- names -----------------------------------------------------------------------

std::string to_string(CarrierFamily c) {
  switch (c) {
    case CarrierFamily::Power: return "power";
    case CarrierFamily::Beta: return "beta";
    case CarrierFamily::Mixture: return "mixture";
  }
  return "?";
}

std::string to_string(Link l) { return l == Link::Exp ? "exp" : "identity"; }

std::string to_string(ModelVersion v) { return v == ModelVersion::Full ? "full" : "bulk"; }

std::string to_string(LambdaPrior l) {
  return l == LambdaPrior::Lambda ? "lambda" : "lambda_squared";
}

}  // namespace egpd
