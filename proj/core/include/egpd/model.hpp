#pragma once

// Covariate-indexed EGPD regression with Bayesian-Lasso priors.
//
// Three linear predictors drive the conditional distribution of y given x:
//
//   kappa(x) = exp(x'beta)          carrier shape (bulk / lower tail)
//   nu(x)    = exp(x'alpha)         tail scale, nu = sigma (1 + xi)
//   xi(x)    = link_xi(x'gamma)     tail index, exp or identity link
//
// The bulk-only version keeps nu and xi global: only alpha[0] and gamma[0]
// are used. Penalized coefficients carry Laplace(rate lambda/2) priors,
// intercepts a N(0, intercept_sd^2) prior and lambda a Gamma(a, b) prior
// (optionally on lambda^2).

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "egpd/egpd.hpp"

namespace egpd {

using DesignMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class CarrierFamily { Power, Beta, Mixture };
enum class Link { Exp, Identity };
enum class ModelVersion { BulkOnly, Full };
enum class LambdaPrior { Lambda, LambdaSquared };

/// Fitted xi(x) must exceed this under the identity link.
inline constexpr double kXiFloor = -0.5 + 1e-6;

struct ModelSpec {
  CarrierFamily carrier = CarrierFamily::Power;
  double mixture_weight = 0.5;
  Link link_kappa = Link::Exp;
  Link link_nu = Link::Exp;
  Link link_xi = Link::Exp;
  ModelVersion version = ModelVersion::Full;
  std::size_t p = 0;  ///< number of design columns
  bool has_intercept = true;  ///< column 0 of the design is all ones
  bool standardize = false;

  /// Throws ConfigError on inconsistent settings.
  void validate() const;
};

struct PriorSpec {
  double a_lambda = 0.1;
  double b_lambda = 0.1;
  double intercept_sd = 100.0;
  bool penalize_intercept = false;
  LambdaPrior lambda_prior = LambdaPrior::Lambda;

  void validate() const;
};

struct CoefficientSet {
  Eigen::VectorXd beta;
  Eigen::VectorXd alpha;
  Eigen::VectorXd gamma;
  double beta2_intercept = 0.0;  ///< intercept of the second mixture component
  double lambda = 1.0;

  static CoefficientSet zeros(std::size_t p);
};

struct StandardizationStats {
  std::vector<double> mean;  ///< per column; intercept column has mean 0
  std::vector<double> sd;    ///< per column; intercept column has sd 1
};

struct Dataset {
  DesignMatrix X;
  Eigen::VectorXd y;
  std::vector<std::string> column_names;
  bool has_intercept = false;
  std::optional<StandardizationStats> standardization;

  std::size_t n() const { return static_cast<std::size_t>(y.size()); }
  std::size_t p() const { return static_cast<std::size_t>(X.cols()); }

  /// Throws DataError when shapes disagree, y <= 0 or any entry is non-finite.
  void validate() const;
};

/// Builds a dataset, optionally prepending an all-ones "intercept" column.
Dataset make_dataset(const DesignMatrix& covariates, Eigen::VectorXd y,
                     std::vector<std::string> covariate_names, bool add_intercept);

/// Copy of `data` with an all-ones "intercept" column prepended.
Dataset add_intercept(const Dataset& data);

/// Centers and scales every non-intercept column (sample sd); throws DataError
/// on a zero-variance column.
Dataset standardize(const Dataset& data);

/// Maps a raw covariate row onto the standardized scale.
Eigen::VectorXd standardize_row(const Eigen::VectorXd& x_raw, const StandardizationStats& stats);

/// Coefficients on the raw covariate scale implied by coefficients fitted on
/// standardized covariates. Requires an intercept in column 0.
CoefficientSet to_raw_scale(const ModelSpec& spec, const CoefficientSet& fitted,
                            const StandardizationStats& stats);

// --- parameter prediction ----------------------------------------------------

double apply_link(Link link, double eta);

/// EGPD parameters at design row x, or nullopt when the predictors fall
/// outside the admissible region.
std::optional<EgpdParams> try_predict_params(const ModelSpec& spec, const CoefficientSet& coef,
                                             std::span<const double> x);

/// As try_predict_params but throws InvalidRegionError.
EgpdParams predict_params(const ModelSpec& spec, const CoefficientSet& coef,
                          std::span<const double> x);

// --- densities ---------------------------------------------------------------

double log_likelihood(const ModelSpec& spec, const CoefficientSet& coef, const Dataset& data);
double log_prior(const ModelSpec& spec, const PriorSpec& prior, const CoefficientSet& coef);
double log_posterior(const ModelSpec& spec, const PriorSpec& prior, const CoefficientSet& coef,
                     const Dataset& data);

/// Log-density of lambda under the configured hyperprior.
double lambda_log_prior(const PriorSpec& prior, double lambda);

// --- flat parameter vectors --------------------------------------------------

enum class Channel { Kappa, KappaSecond, Nu, Xi, Lambda };

struct Coordinate {
  Channel channel;
  std::size_t index;  ///< position within the channel's coefficient vector
  bool intercept;     ///< intercept or global scalar
  bool penalized;     ///< carries a Laplace prior
  std::string name;
};

/// Packing of a CoefficientSet into the flat vector the sampler moves on:
/// beta | beta2 intercept (mixture only) | alpha | gamma | lambda.
/// In the bulk-only version alpha and gamma contribute one scalar each.
class CoefficientLayout {
 public:
  CoefficientLayout(const ModelSpec& spec, const std::vector<std::string>& column_names,
                    bool penalize_intercept);

  std::size_t size() const { return coords_.size(); }
  std::size_t lambda_index() const { return coords_.size() - 1; }
  const std::vector<Coordinate>& coordinates() const { return coords_; }
  const std::vector<std::size_t>& penalized() const { return penalized_; }
  std::vector<std::string> names() const;

  std::vector<double> pack(const CoefficientSet& coef) const;
  CoefficientSet unpack(std::span<const double> theta) const;

 private:
  std::size_t p_;
  std::vector<Coordinate> coords_;
  std::vector<std::size_t> penalized_;
};

/// Starting point inside the support for any dataset with positive responses:
/// kappa = 1, sigma = mean(y), xi = 0.1, all slopes 0, lambda = a / b.
CoefficientSet initial_coefficients(const ModelSpec& spec, const PriorSpec& prior,
                                    const Dataset& data);

/// A model bound to its data; evaluates the log-posterior of flat vectors.
/// Immutable after construction and safe to share between threads.
class PosteriorModel {
 public:
  PosteriorModel(ModelSpec spec, PriorSpec prior, Dataset data, bool use_likelihood = true);

  const ModelSpec& spec() const { return spec_; }
  const PriorSpec& prior() const { return prior_; }
  const Dataset& data() const { return data_; }
  const CoefficientLayout& layout() const { return layout_; }
  bool uses_likelihood() const { return use_likelihood_; }

  double log_likelihood(std::span<const double> theta) const;
  double log_prior(std::span<const double> theta) const;
  double log_posterior(std::span<const double> theta) const;
  double operator()(std::span<const double> theta) const { return log_posterior(theta); }

  std::vector<double> initial_state() const;

 private:
  ModelSpec spec_;
  PriorSpec prior_;
  Dataset data_;
  CoefficientLayout layout_;
  bool use_likelihood_;
};

std::string to_string(CarrierFamily c);
std::string to_string(Link l);
std::string to_string(ModelVersion v);
std::string to_string(LambdaPrior l);

}  // namespace egpd
