#include <benchmark/benchmark.h>

#include "deepstack/generative.hpp"
#include "deepstack/objectives.hpp"
#include "deepstack/training.hpp"

using namespace deepstack;

namespace {

Matrix uniform(std::size_t r, std::size_t c, Rng& rng) {
    Matrix m(r, c);
    for (double& v : m.data()) v = rng.uniform();
    return m;
}

void BM_Matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    const Matrix a = uniform(n, n, rng), b = uniform(n, n, rng);
    for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

// One minibatch of the joint objective, forward and backward.
void BM_JointObjective(benchmark::State& state) {
    const auto width = static_cast<std::size_t>(state.range(0));
    const bool contractive = state.range(1) != 0;
    Rng rng(2);
    const StackParams stack = StackParams::random(784, std::vector<std::size_t>{width, width}, true, rng);
    const Matrix x = uniform(100, 784, rng);
    ObjectiveSpec spec;
    spec.corruption.assign(2, CorruptionSpec::gaussian(0.3));
    spec.regularizer.assign(2, contractive ? RegularizerSpec::contractive(0.1) : RegularizerSpec::none());
    for (auto _ : state) benchmark::DoNotOptimize(joint_objective(stack.layers(), x, spec, rng).value);
}
BENCHMARK(BM_JointObjective)->Args({100, 0})->Args({100, 1})->Args({500, 0})->Unit(benchmark::kMillisecond);

void BM_ParzenLoglik(benchmark::State& state) {
    const auto samples = static_cast<std::size_t>(state.range(0));
    Rng rng(3);
    const ParzenModel model = parzen_fit(uniform(samples, 784, rng), 0.2);
    const Matrix test = uniform(100, 784, rng);
    for (auto _ : state) benchmark::DoNotOptimize(parzen_loglik(model, test));
    state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_ParzenLoglik)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_RmsPropStep(benchmark::State& state) {
    Rng rng(4);
    Matrix p = uniform(1000, 784, rng);
    const Matrix g = uniform(1000, 784, rng);
    RmsPropState st{{0.01, 0.9, 1e-8}, {}};
    std::vector<Matrix*> params{&p};
    std::vector<const Matrix*> grads{&g};
    for (auto _ : state) rmsprop_step(st, params, grads);
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(p.size()));
}
BENCHMARK(BM_RmsPropStep);

void BM_GsnChain(benchmark::State& state) {
    Rng rng(5);
    const StackParams model = StackParams::random(784, std::vector<std::size_t>{500, 500}, true, rng);
    const std::vector<double> init(784, 0.5);
    for (auto _ : state) benchmark::DoNotOptimize(gsn_chain(model, init, 100, CorruptionSpec::gaussian(0.3), rng));
    state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_GsnChain)->Unit(benchmark::kMillisecond);

} // namespace
BENCHMARK_MAIN();
