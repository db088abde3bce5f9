#include <benchmark/benchmark.h>

#include "sesim/batching.hpp"
#include "sesim/eval.hpp"
#include "sesim/losses.hpp"
#include "sesim/trainer.hpp"

using namespace sesim;

namespace {

Matrix random_matrix(int rows, int cols, RngStream& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data) v = rng.gaussian();
  return m;
}

void BM_matmul(benchmark::State& state) {
  const int n = int(state.range(0));
  RngStream rng(1);
  const Matrix a = random_matrix(n, n, rng);
  const Matrix b = random_matrix(n, n, rng);
  for (auto _ : state) {
    Matrix c = matmul(a, b);
    benchmark::DoNotOptimize(c.data.data());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_matmul)->Arg(64)->Arg(128)->Arg(256)->Arg(512);

// One full optimisation step at the benchmark scale used by the experiments:
// composite batch assembly, teacher forward, graph build, backward sweep and
// the joint Adam update.
void BM_train_step(benchmark::State& state) {
  Dataset ds = select_labeled(make_two_moons(2000, 0.15, 1), 12, 2);
  BatchSpec bs;  // stock batch shape
  BatchBuilder builder(ds, bs, 0.15);
  ModelState model = init_model(toy_feature_spec(2, 100, 2),
                                toy_similarity_spec(100, {512, 128, 64}, 0.2), 3, 0.99);
  const LossWeights weights{0.06, 0.06, 0.15, 3.0};

  RngStream batch_rng(4), f_drop(5), s_drop(6), shadow_drop(7);
  std::vector<Matrix*> params;
  for (auto* net : {&model.feature, &model.similarity})
    for (std::size_t i = 0; i < net->w.size(); ++i) {
      params.push_back(&net->w[i]);
      params.push_back(&net->b[i]);
    }
  AdamOptimizer opt(AdamConfig{});

  for (auto _ : state) {
    const TrainingBatch batch = builder.next(batch_rng);
    const ShadowOutputs shadow = compute_shadow(model, batch, true, &shadow_drop);
    Tape tape;
    StepGraph g =
        build_step_graph(tape, model, batch, weights, true, &f_drop, &s_drop, shadow);
    tape.backward(g.total);
    std::vector<const Matrix*> grads;
    for (auto* net : {&g.feature, &g.similarity})
      for (std::size_t i = 0; i < net->w.size(); ++i) {
        grads.push_back(&tape.grad(net->w[i]));
        grads.push_back(&tape.grad(net->b[i]));
      }
    opt.step(params, grads, 1e-3);
    benchmark::DoNotOptimize(g.parts.total);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_train_step)->Unit(benchmark::kMillisecond);

void BM_similarity_matrix(benchmark::State& state) {
  const int m = int(state.range(0));
  const Dataset ds = make_two_moons(2000, 0.15, 1);
  const ModelState model = init_model(
      toy_feature_spec(2, 100, 2), toy_similarity_spec(100, {512, 128, 64}, 0.2), 3, 0.99);
  RngStream rng(4);
  const std::vector<int> idx = rng.sample_without_replacement(ds.n(), m);
  for (auto _ : state) {
    SimilarityMatrix sm = similarity_matrix(model, ds, idx);
    benchmark::DoNotOptimize(sm.s.data.data());
  }
  state.SetItemsProcessed(state.iterations() * m * m);
}
BENCHMARK(BM_similarity_matrix)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_feature_eval(benchmark::State& state) {
  const Dataset ds = make_two_moons(int(state.range(0)), 0.15, 1);
  const ModelState model = init_model(
      toy_feature_spec(2, 100, 2), toy_similarity_spec(100, {512, 128, 64}, 0.2), 3, 0.99);
  for (auto _ : state) {
    FeatureEval fe = feature_eval(model, ds.x);
    benchmark::DoNotOptimize(fe.f.data.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_feature_eval)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
