#include <benchmark/benchmark.h>

#include <memory>

#include "npsem/cpf_bs.hpp"
#include "npsem/dynamics.hpp"
#include "npsem/llr.hpp"
#include "npsem/random.hpp"
#include "npsem/simulate.hpp"

namespace {

using namespace npsem;

SsmSpec sinus_spec() {
  const Theta theta = Theta::isotropic(1, 1, 0.1, 0.1);
  GaussianSpec initial;
  initial.mean = Eigen::VectorXd::Zero(1);
  initial.cov = Eigen::MatrixXd::Identity(1, 1);
  return SsmSpec{std::make_shared<SinusModel>(), ObservationOperator::identity(1),
                 theta, initial};
}

Catalog sinus_catalog(int horizon) {
  RandomStream rng(7);
  const SimulatedData data = simulate_ssm(sinus_spec(), horizon,
                                          CovariateSequence(), rng);
  return catalog_from_states(data.states, CovariateSequence());
}

void BM_KnnSearch(benchmark::State& state) {
  const Catalog catalog = sinus_catalog(static_cast<int>(state.range(0)));
  Eigen::VectorXd query(1);
  query << 0.3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(knn_search(query, catalog, 32));
  }
}
BENCHMARK(BM_KnnSearch)->Arg(1000)->Arg(5000);

void BM_LlrPredict(benchmark::State& state) {
  const Catalog catalog = sinus_catalog(static_cast<int>(state.range(0)));
  LlrConfig cfg;
  cfg.k = 64;
  Eigen::VectorXd query(1);
  query << 0.3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(llr_predict(query, catalog, cfg));
  }
}
BENCHMARK(BM_LlrPredict)->Arg(1000)->Arg(5000);

void BM_CpfSweep(benchmark::State& state) {
  const SsmSpec spec = sinus_spec();
  const int horizon = static_cast<int>(state.range(0));
  RandomStream rng(11);
  const SimulatedData data = simulate_ssm(spec, horizon, CovariateSequence(),
                                          rng);
  SmootherConfig cfg;
  cfg.n_filter = 10;
  cfg.n_smooth = 5;
  StateSequence conditioning = data.states;
  for (auto _ : state) {
    RandomStream sweep_rng(13);
    const ParticleSystem ps = cpf(spec, data.obs, CovariateSequence(),
                                  conditioning, cfg, sweep_rng);
    benchmark::DoNotOptimize(
        backward_simulation(ps, spec.theta, cfg.n_smooth, sweep_rng));
  }
}
BENCHMARK(BM_CpfSweep)->Arg(100)->Arg(1000);

void BM_Lorenz63Flow(benchmark::State& state) {
  Lorenz63Config cfg;
  const Lorenz63Model model(cfg);
  Eigen::MatrixXd x(3, 100);
  RandomStream rng(3);
  for (int i = 0; i < x.cols(); ++i) {
    x(0, i) = 1.5 + rng.normal();
    x(1, i) = -1.5 + rng.normal();
    x(2, i) = 25.0 + rng.normal();
  }
  Eigen::MatrixXd z(0, x.cols());
  Eigen::MatrixXd out(3, x.cols());
  for (auto _ : state) {
    model.evaluate(x, z, 1, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_Lorenz63Flow);

}  // namespace

BENCHMARK_MAIN();
