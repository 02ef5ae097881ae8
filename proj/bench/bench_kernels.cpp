#include "flac/flow/kernels.hpp"
#include "flac/theory/checks.hpp"

#include <benchmark/benchmark.h>
#include <omp.h>

using namespace flac;

namespace {

struct Setup {
  nn::Params actor;
  Eigen::MatrixXd states;
  flow::SolverConfig cfg;
  flow::NoiseDraws noise;
};

Setup make_setup(int width, int batch) {
  Setup s;
  s.cfg.n_steps = 2;
  s.cfg.scheme = flow::Scheme::midpoint;
  s.actor = nn::mlp_init(std::vector<int>{6 + 2 + 1, width, width, 2}, nn::Activation::elu, 1);
  s.states = Eigen::MatrixXd::Random(6, batch);
  Rng rng = make_rng(2);
  s.noise = flow::draw_noise(s.cfg, 2, batch, rng);
  return s;
}

flow::TerminalTerm linear_terminal(const Eigen::MatrixXd&, const Eigen::MatrixXd& a) {
  return {Eigen::MatrixXd::Constant(a.rows(), a.cols(), -1.0 / a.cols()), -a.colwise().sum().transpose()};
}

void BM_PathwiseSerial(benchmark::State& state) {
  const Setup s = make_setup(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  for (auto _ : state)
    benchmark::DoNotOptimize(flow::pathwise_batch_serial(s.actor, s.states, s.cfg, s.noise, linear_terminal, 0.1));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}

void BM_PathwiseOmp(benchmark::State& state) {
  const Setup s = make_setup(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  for (auto _ : state)
    benchmark::DoNotOptimize(flow::pathwise_batch_omp(s.actor, s.states, s.cfg, s.noise, linear_terminal, 0.1));
  state.SetItemsProcessed(state.iterations() * state.range(1));
  state.counters["threads"] = omp_get_max_threads();
}

void BM_GenerateSerial(benchmark::State& state) {
  const Setup s = make_setup(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(flow::generate_batch_serial(s.actor, s.states, s.cfg, s.noise));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}

void BM_GenerateOmp(benchmark::State& state) {
  const Setup s = make_setup(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(flow::generate_batch_omp(s.actor, s.states, s.cfg, s.noise));
  state.SetItemsProcessed(state.iterations() * state.range(1));
  state.counters["threads"] = omp_get_max_threads();
}

void BM_Girsanov(benchmark::State& state) {
  theory::GirsanovOptions opts;
  opts.n_paths = 100000;
  opts.parallel = state.range(0) != 0;
  const auto drift = theory::constant_drift(Eigen::Vector2d(1.0, 0.0));
  for (auto _ : state) benchmark::DoNotOptimize(theory::girsanov_estimate(drift, 2, 1.0, 7, opts));
  state.SetItemsProcessed(state.iterations() * opts.n_paths);
}

}  // namespace

BENCHMARK(BM_PathwiseSerial)->Args({64, 256})->Args({512, 256})->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_PathwiseOmp)->Args({64, 256})->Args({512, 256})->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_GenerateSerial)->Args({64, 256})->Args({512, 256})->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_GenerateOmp)->Args({64, 256})->Args({512, 256})->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Girsanov)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
