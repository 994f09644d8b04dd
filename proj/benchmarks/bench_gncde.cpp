#include <benchmark/benchmark.h>

#include "gncde/dyngraph.hpp"
#include "gncde/path.hpp"
#include "gncde/solver.hpp"
#include "gncde/train.hpp"
#include "gncde/vfield.hpp"

using namespace gncde;

namespace {

Dataset heat_grid(int n, int snapshots) {
  DatasetSpec s;
  s.n_nodes = n;
  s.snapshots = snapshots;
  s.seed = 0;
  return generate_dataset(s);
}

struct FieldSetup {
  VectorFieldParams params;
  StageInput input;
  Matrix z;

  FieldSetup(Variant variant, int n, int d) {
    const Dataset data = heat_grid(n, 20);
    const GraphPath path = build_path(data.observations, Scheme::natural_cubic);
    ModelSpec spec = attribute_model_spec(variant, n, d, 1, 1);
    spec.direct_cap = n;
    params = init_params(spec, 1);
    const double s = 0.5 * (path.knot_params()[3] + path.knot_params()[4]);
    input = make_stage_input(spec, path, nullptr, s, Side::right, ExtrapolationMode::hold);
    Rng rng(2);
    z = variant == Variant::neural_cde_plain ? uniform_matrix(rng, 1, d, -1.0, 1.0)
                                             : uniform_matrix(rng, n, d, -1.0, 1.0);
  }
};

void BM_Field(benchmark::State& state, Variant variant) {
  const FieldSetup setup(variant, static_cast<int>(state.range(0)), 20);
  for (auto _ : state) {
    Matrix out = field(setup.params.spec, setup.params.weights, setup.input, setup.z);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK_CAPTURE(BM_Field, approx, Variant::gncde_approx)->Arg(20)->Arg(100)->Arg(400);
BENCHMARK_CAPTURE(BM_Field, gnode, Variant::gnode)->Arg(20)->Arg(100)->Arg(400);
BENCHMARK_CAPTURE(BM_Field, direct, Variant::gncde_direct)->Arg(10)->Arg(20);

void BM_ForwardPass(benchmark::State& state) {
  const Dataset data = heat_grid(static_cast<int>(state.range(0)), 30);
  const ModelSpec spec = attribute_model_spec(Variant::gncde_approx, data.observations.n_nodes(), 20, 1, 1);
  SolverConfig solver;
  solver.step = 0.05;
  const ForwardModel model = attribute_forward_model(spec, solver, data.observations, Scheme::natural_cubic);
  const VectorFieldParams params = init_params(spec, 1);
  const std::vector<double> times = data.observations.times();
  for (auto _ : state) {
    auto preds = model.predict(params.weights, times);
    benchmark::DoNotOptimize(preds.data());
  }
}
BENCHMARK(BM_ForwardPass)->Arg(20)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_TrainingStep(benchmark::State& state) {
  const Dataset data = heat_grid(static_cast<int>(state.range(0)), 30);
  const ModelSpec spec = attribute_model_spec(Variant::gncde_approx, data.observations.n_nodes(), 20, 1, 1);
  SolverConfig solver;
  solver.step = 0.05;
  const ForwardModel model = attribute_forward_model(spec, solver, data.observations, Scheme::natural_cubic);
  VectorFieldParams params = init_params(spec, 1);
  TrainConfig cfg;
  AdamState adam = AdamState::for_params(params.weights, cfg);
  for (auto _ : state) {
    Tape tape;
    const Weights<Var> w = to_tape(params.weights, tape);
    tape.backward(attribute_loss(model, tape, w, data.observations, LossKind::mse));
    Weights<Matrix> grads = gradients(w, tape);
    clip_gradients(grads, cfg.clip_norm);
    adam_step(adam, params.weights, grads);
  }
}
BENCHMARK(BM_TrainingStep)->Arg(20)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_Simulate(benchmark::State& state) {
  DatasetSpec s;
  s.n_nodes = static_cast<int>(state.range(0));
  s.topology = TopologyKind::small_world;
  s.dynamics = DynamicsKind::gene;
  for (auto _ : state) {
    Dataset d = generate_dataset(s);
    benchmark::DoNotOptimize(d.observations.snapshots.data());
  }
}
BENCHMARK(BM_Simulate)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
