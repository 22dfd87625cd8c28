#include "egpd/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <sstream>
#include <thread>

#include "egpd/errors.hpp"

namespace egpd {

namespace {

constexpr double kAcceptLow = 0.15;
constexpr double kAcceptHigh = 0.7;

void check_initial_state(const PosteriorModel& model, std::span<const double> theta) {
  const double prior = model.log_prior(theta);
  if (!std::isfinite(prior)) {
    throw NumericalError("initial state has non-finite log-prior (lambda or constraint)");
  }
  const double lik = model.log_likelihood(theta);
  if (!std::isfinite(lik)) {
    throw NumericalError("initial state has non-finite log-likelihood (observation outside support)");
  }
}

void sweep(ChainState& state, const PosteriorModel& model, Rng& rng) {
  const std::size_t lambda = model.layout().lambda_index();
  for (std::size_t j = 0; j < lambda; ++j) mh_update_coordinate(state, j, model, rng);
  gibbs_lambda(state, model, rng);
}

}  // namespace

void SamplerConfig::validate() const {
  if (n_iter == 0 || thin == 0 || n_chains == 0 || adapt_window == 0) {
    throw ConfigError("sampler counts (n_iter, thin, n_chains, adapt_window) must be positive");
  }
  if (!(target_accept > 0.0 && target_accept < 1.0)) {
    throw ConfigError("target_accept must lie in (0, 1)");
  }
  if (!(initial_scale > 0.0)) throw ConfigError("initial proposal scale must be > 0");
}

ChainState ChainState::start(std::vector<double> theta, double log_post, double initial_scale) {
  ChainState s;
  const std::size_t d = theta.size();
  s.theta = std::move(theta);
  s.log_post = log_post;
  s.scales.assign(d, initial_scale);
  s.window_accepted.assign(d, 0);
  s.window_proposed.assign(d, 0);
  s.accepted.assign(d, 0);
  s.proposed.assign(d, 0);
  return s;
}

void ChainState::reset_counters() {
  std::fill(accepted.begin(), accepted.end(), 0);
  std::fill(proposed.begin(), proposed.end(), 0);
}

GammaShapeRate lambda_full_conditional(const PosteriorModel& model, std::span<const double> theta) {
  double abs_sum = 0.0;
  for (std::size_t k : model.layout().penalized()) abs_sum += std::abs(theta[k]);
  const auto m = static_cast<double>(model.layout().penalized().size());
  return {model.prior().a_lambda + m, model.prior().b_lambda + 0.5 * abs_sum};
}

void gibbs_lambda(ChainState& state, const PosteriorModel& model, Rng& rng) {
  const std::size_t k = model.layout().lambda_index();
  if (model.prior().lambda_prior == LambdaPrior::Lambda) {
    const auto [shape, rate] = lambda_full_conditional(model, state.theta);
    state.theta[k] = gamma_rate(rng, shape, rate);
    ++state.window_proposed[k];
    ++state.window_accepted[k];
    ++state.proposed[k];
    ++state.accepted[k];
    state.log_post = model.log_posterior(state.theta);
    return;
  }
  // lambda^2 ~ Gamma is not conjugate: random walk on log(lambda), where the
  // Jacobian adds log(lambda) to the target.
  const double previous = state.theta[k];
  const double current_target = state.log_post + std::log(previous);
  state.theta[k] = previous * std::exp(state.scales[k] * standard_normal(rng));
  const double proposed_post = model.log_posterior(state.theta);
  const double log_u = std::log(uniform_open01(rng));
  ++state.window_proposed[k];
  ++state.proposed[k];
  if (!std::isnan(proposed_post) &&
      log_u < proposed_post + std::log(state.theta[k]) - current_target) {
    state.log_post = proposed_post;
    ++state.window_accepted[k];
    ++state.accepted[k];
  } else {
    state.theta[k] = previous;
  }
}

void adapt_scales(ChainState& state, std::size_t window_index, double target_accept) {
  const double step = 1.0 / std::sqrt(static_cast<double>(window_index));
  for (std::size_t j = 0; j < state.scales.size(); ++j) {
    if (state.window_proposed[j] == 0) continue;
    const double rate = static_cast<double>(state.window_accepted[j]) /
                        static_cast<double>(state.window_proposed[j]);
    state.scales[j] *= std::exp((rate - target_accept) * step);
  }
  std::fill(state.window_accepted.begin(), state.window_accepted.end(), 0);
  std::fill(state.window_proposed.begin(), state.window_proposed.end(), 0);
}

ChainResult run_chain(const PosteriorModel& model, const SamplerConfig& config,
                      std::uint64_t stream_seed) {
  config.validate();
  Rng rng(stream_seed);
  std::vector<double> theta = model.initial_state();
  check_initial_state(model, theta);
  const double lp = model.log_posterior(theta);
  ChainState state = ChainState::start(std::move(theta), lp, config.initial_scale);

  const std::size_t dim = state.theta.size();
  const std::size_t adapt_until = config.adapt_until_or_default();
  const std::size_t total = config.burn_in + config.n_iter * config.thin;

  ChainResult out;
  out.draws.reserve(config.n_iter * dim);
  for (std::size_t t = 0; t < total; ++t) {
    if (t == config.burn_in) state.reset_counters();
    sweep(state, model, rng);
    if (t < adapt_until && (t + 1) % config.adapt_window == 0) {
      adapt_scales(state, (t + 1) / config.adapt_window, config.target_accept);
    }
    if (t >= config.burn_in && (t - config.burn_in + 1) % config.thin == 0) {
      out.draws.insert(out.draws.end(), state.theta.begin(), state.theta.end());
    }
  }
  out.acceptance.resize(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    out.acceptance[j] = state.proposed[j] == 0
                            ? 0.0
                            : static_cast<double>(state.accepted[j]) /
                                  static_cast<double>(state.proposed[j]);
  }
  out.final_scales = state.scales;
  return out;
}

PosteriorSamples run(const PosteriorModel& model, const SamplerConfig& config,
                     std::size_t workers) {
  config.validate();
  const std::size_t chains = config.n_chains;
  std::vector<ChainResult> results(chains);
  std::vector<std::exception_ptr> errors(chains);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t c = next++; c < chains; c = next++) {
      try {
        results[c] = run_chain(model, config, derive_seed(config.master_seed, c));
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(workers, 1, chains);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  PosteriorSamples s;
  s.names = model.layout().names();
  s.n_chains = chains;
  s.n_draws = config.n_iter;
  s.config = config;
  s.draws.reserve(chains * config.n_iter * s.dim());
  const bool gibbs_lambda_step = model.prior().lambda_prior == LambdaPrior::Lambda;
  for (std::size_t c = 0; c < chains; ++c) {
    s.draws.insert(s.draws.end(), results[c].draws.begin(), results[c].draws.end());
    for (std::size_t j = 0; j < s.dim(); ++j) {
      if (gibbs_lambda_step && j == model.layout().lambda_index()) continue;
      const double rate = results[c].acceptance[j];
      if (rate < kAcceptLow || rate > kAcceptHigh) {
        std::ostringstream msg;
        msg << "chain " << c << ": acceptance rate " << rate << " of '" << s.names[j]
            << "' outside (" << kAcceptLow << ", " << kAcceptHigh << ")";
        s.warnings.push_back(msg.str());
      }
    }
    s.acceptance.push_back(std::move(results[c].acceptance));
  }
  return s;
}

std::vector<double> PosteriorSamples::chain_series(std::size_t chain, std::size_t coord) const {
  std::vector<double> out(n_draws);
  for (std::size_t i = 0; i < n_draws; ++i) out[i] = at(chain, i, coord);
  return out;
}

std::vector<double> PosteriorSamples::pooled(std::size_t coord) const {
  std::vector<double> out;
  out.reserve(n_chains * n_draws);
  for (std::size_t c = 0; c < n_chains; ++c) {
    for (std::size_t i = 0; i < n_draws; ++i) out.push_back(at(c, i, coord));
  }
  return out;
}

std::size_t PosteriorSamples::index_of(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ConfigError("unknown coordinate '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

}  // namespace egpd
