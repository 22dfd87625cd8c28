#include <benchmark/benchmark.h>

#include "egpd/egpd.hpp"
#include "egpd/model.hpp"
#include "egpd/sampler.hpp"
#include "egpd/simulation.hpp"

namespace {

void BM_EgpdLogpdf(benchmark::State& state) {
  const egpd::EgpdParams p{egpd::PowerCarrier(1.3), egpd::GpdParams(0.8, 0.2)};
  double y = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(egpd::egpd_logpdf(p, y));
    y = y < 10.0 ? y * 1.01 : 0.1;
  }
}
BENCHMARK(BM_EgpdLogpdf);

void BM_EgpdQuantileBeta(benchmark::State& state) {
  const egpd::EgpdParams p{egpd::BetaCarrier(1.7), egpd::GpdParams(1.0, 0.1)};
  double u = 0.01;
  for (auto _ : state) {
    benchmark::DoNotOptimize(egpd::egpd_quantile(p, u));
    u = u < 0.98 ? u + 0.01 : 0.01;
  }
}
BENCHMARK(BM_EgpdQuantileBeta);

egpd::PosteriorModel scenario_model(std::size_t n) {
  egpd::Rng rng = egpd::make_stream(7, 0);
  auto data = egpd::standardize(egpd::add_intercept(egpd::simulate_dataset(egpd::scenario(1), n, rng)));
  egpd::ModelSpec spec = egpd::scenario_spec();
  spec.p = data.p();
  spec.has_intercept = true;
  spec.standardize = true;
  return egpd::PosteriorModel(spec, egpd::PriorSpec{}, std::move(data));
}

void BM_LogPosterior(benchmark::State& state) {
  const auto model = scenario_model(static_cast<std::size_t>(state.range(0)));
  const auto theta = model.initial_state();
  for (auto _ : state) benchmark::DoNotOptimize(model.log_posterior(theta));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LogPosterior)->Arg(100)->Arg(500);

void BM_Sweep(benchmark::State& state) {
  const auto model = scenario_model(static_cast<std::size_t>(state.range(0)));
  egpd::SamplerConfig cfg;
  cfg.n_chains = 1;
  cfg.burn_in = 0;
  cfg.n_iter = 10;
  for (auto _ : state) benchmark::DoNotOptimize(egpd::run_chain(model, cfg, 11));
  state.SetItemsProcessed(state.iterations() * 10);
}
BENCHMARK(BM_Sweep)->Arg(500)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
