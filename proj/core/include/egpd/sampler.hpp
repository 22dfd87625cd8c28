#pragma once

// Adaptive random-walk Metropolis-within-Gibbs.
//
// One sweep updates every coefficient with a Gaussian random-walk proposal,
// then refreshes lambda: by an exact Gamma draw when the hyperprior sits on
// lambda, or by a random-walk step on log(lambda) when it sits on lambda^2.
// Proposal scales adapt in windows during burn-in and are frozen afterwards.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "egpd/model.hpp"
#include "egpd/random.hpp"

namespace egpd {

struct SamplerConfig {
  std::size_t n_iter = 20000;  ///< retained draws per chain
  std::size_t burn_in = 1000;
  std::size_t thin = 1;
  std::size_t n_chains = 4;
  std::uint64_t master_seed = 1;
  double target_accept = 0.44;
  std::size_t adapt_window = 50;
  std::optional<std::size_t> adapt_until;  ///< defaults to burn_in
  double initial_scale = 0.1;

  std::size_t adapt_until_or_default() const { return adapt_until.value_or(burn_in); }
  void validate() const;
};

struct ChainState {
  std::vector<double> theta;
  double log_post = 0.0;
  std::vector<double> scales;
  std::vector<std::uint64_t> window_accepted;
  std::vector<std::uint64_t> window_proposed;
  std::vector<std::uint64_t> accepted;
  std::vector<std::uint64_t> proposed;

  static ChainState start(std::vector<double> theta, double log_post, double initial_scale);
  void reset_counters();
};

/// Random-walk Metropolis step on coordinate j. `target` maps a flat
/// parameter vector to its unnormalized log-density; proposals with -inf or
/// NaN density are rejected. Exactly one normal and one uniform are drawn.
template <class Target>
bool mh_update_coordinate(ChainState& state, std::size_t j, const Target& target, Rng& rng) {
  const double previous = state.theta[j];
  state.theta[j] = previous + state.scales[j] * standard_normal(rng);
  const double proposed = target(std::span<const double>(state.theta));
  const double log_u = std::log(uniform_open01(rng));
  ++state.window_proposed[j];
  ++state.proposed[j];
  if (!std::isnan(proposed) && log_u < proposed - state.log_post) {
    state.log_post = proposed;
    ++state.window_accepted[j];
    ++state.accepted[j];
    return true;
  }
  state.theta[j] = previous;
  return false;
}

struct GammaShapeRate {
  double shape;
  double rate;
};

/// Full conditional of lambda under a Gamma(a, b) hyperprior on lambda:
/// Gamma(a + m, b + sum|c_j| / 2) over the m penalized coefficients.
GammaShapeRate lambda_full_conditional(const PosteriorModel& model, std::span<const double> theta);

/// Refreshes lambda and the cached log-posterior.
void gibbs_lambda(ChainState& state, const PosteriorModel& model, Rng& rng);

/// Nudges every log proposal scale by (window rate - target) / sqrt(window_index)
/// and clears the window counters. window_index is 1-based.
void adapt_scales(ChainState& state, std::size_t window_index, double target_accept);

struct PosteriorSamples {
  std::vector<std::string> names;
  std::size_t n_chains = 0;
  std::size_t n_draws = 0;
  std::vector<double> draws;  ///< [chain][draw][coordinate], dense
  std::vector<std::vector<double>> acceptance;  ///< [chain][coordinate], post burn-in
  SamplerConfig config;
  std::vector<std::string> warnings;

  std::size_t dim() const { return names.size(); }
  double at(std::size_t chain, std::size_t draw, std::size_t coord) const {
    return draws[(chain * n_draws + draw) * dim() + coord];
  }
  std::span<const double> draw(std::size_t chain, std::size_t i) const {
    return {draws.data() + (chain * n_draws + i) * dim(), dim()};
  }
  std::vector<double> chain_series(std::size_t chain, std::size_t coord) const;
  /// All chains concatenated in chain order.
  std::vector<double> pooled(std::size_t coord) const;
  std::size_t index_of(const std::string& name) const;
};

struct ChainResult {
  std::vector<double> draws;  ///< [draw][coordinate]
  std::vector<double> acceptance;
  std::vector<double> final_scales;
};

/// Runs one chain from the model's initial state on the stream seeded by
/// `stream_seed`.
ChainResult run_chain(const PosteriorModel& model, const SamplerConfig& config,
                      std::uint64_t stream_seed);

/// Runs config.n_chains chains; chain c draws from derive_seed(master_seed, c).
/// Up to `workers` chains execute concurrently; output does not depend on it.
PosteriorSamples run(const PosteriorModel& model, const SamplerConfig& config,
                     std::size_t workers = 1);

}  // namespace egpd
