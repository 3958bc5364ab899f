// Microbenchmarks for the hot paths: tape recording + backward sweep,
// decoded-target jet evaluation, the finite-difference reference solve and
// whole training steps at the stock model size.

#include <benchmark/benchmark.h>

#include "npr/metrics.hpp"
#include "npr/model.hpp"
#include "npr/reference.hpp"
#include "npr/rng.hpp"
#include "npr/training.hpp"

namespace {

npr::TrainConfig stock_config() {
  npr::TrainConfig tc;
  tc.model.kind = npr::ModelKind::npr;
  tc.model.npr = npr::make_hypernet_spec(32, 32, 4, 64, 4);
  tc.problem.equation = npr::Equation::heat;
  tc.ics.kind = npr::IcFamilyKind::fourier;
  tc.d_enc = 32;
  tc.seed = 1;
  return tc;
}

std::vector<double> sample_sensors(int d_enc) {
  npr::Rng rng(7);
  npr::ICSample ic = npr::draw_ic(npr::IcFamily{}, rng);
  return npr::discretize(ic, d_enc);
}

void BM_TapeRecordAndBackward(benchmark::State& state) {
  const npr::TrainConfig tc = stock_config();
  const npr::ParamVector params = npr::init_model_params(tc.model, tc.seed);
  const std::vector<double> sensors = sample_sensors(tc.d_enc);
  npr::Rng rng(7);
  const npr::ICSample ic = npr::draw_ic(npr::IcFamily{}, rng);
  std::vector<double> grad(params.size(), 0.0);

  npr::Tape tape;
  const npr::VarRange phi = tape.leaves(params);
  const std::size_t base = tape.mark();
  for (auto _ : state) {
    tape.rollback(base);
    npr::ModelDerivs d =
        npr::record_model_derivs(tape, tc.model, phi, sensors, 0.3, 0.6, tc.constraints, ic);
    npr::Var res = npr::record_residual(tape, tc.problem, d);
    tape.backward(tape.abs(res), 1.0);
    benchmark::DoNotOptimize(d.u);
  }
  tape.copy_adjoints(phi, grad);
  benchmark::DoNotOptimize(grad.data());
}

void BM_DecodeTheta(benchmark::State& state) {
  const npr::TrainConfig tc = stock_config();
  const npr::ParamVector params = npr::init_model_params(tc.model, tc.seed);
  const std::vector<double> sensors = sample_sensors(tc.d_enc);
  for (auto _ : state) {
    npr::ParamVector theta = npr::decode_theta(tc.model.npr, params, sensors);
    benchmark::DoNotOptimize(theta.data());
  }
}

void BM_TargetJetPass(benchmark::State& state) {
  const npr::TrainConfig tc = stock_config();
  const npr::ParamVector params = npr::init_model_params(tc.model, tc.seed);
  const std::vector<double> sensors = sample_sensors(tc.d_enc);
  const npr::ParamVector theta = npr::decode_theta(tc.model.npr, params, sensors);
  npr::Rng rng(7);
  const npr::ICSample ic = npr::draw_ic(npr::IcFamily{}, rng);
  double x = 0.0;
  for (auto _ : state) {
    x += 1e-6;
    npr::Jet2 u = npr::target_eval<npr::Jet2>(tc.model.npr.target, theta, npr::Jet2::constant(0.3),
                                              npr::Jet2::seed(x), tc.constraints, ic);
    benchmark::DoNotOptimize(u);
  }
}

void BM_HeatFdSolve(benchmark::State& state) {
  npr::Rng rng(7);
  const npr::ICSample ic = npr::draw_ic(npr::IcFamily{}, rng);
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) {
    npr::FieldGrid g = npr::heat_fd_solve(ic, 0.05, n, n, 4);
    benchmark::DoNotOptimize(g.values.data());
  }
}

void BM_TrainStep(benchmark::State& state) {
  npr::TrainConfig tc = stock_config();
  tc.batch_pde = static_cast<int>(state.range(0));
  tc.n_steps = 1;
  tc.weight_update_every = 0;
  tc.progress_every = 0;
  for (auto _ : state) {
    npr::TrainResult r = npr::train(tc, {});
    benchmark::DoNotOptimize(r.params.data());
  }
  state.SetItemsProcessed(state.iterations() * tc.batch_pde);
}

}  // namespace

BENCHMARK(BM_TapeRecordAndBackward);
BENCHMARK(BM_DecodeTheta);
BENCHMARK(BM_TargetJetPass);
BENCHMARK(BM_HeatFdSolve)->Arg(100)->Arg(500);
BENCHMARK(BM_TrainStep)->Arg(64)->Arg(512)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
