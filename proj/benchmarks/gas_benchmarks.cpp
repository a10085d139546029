#include <benchmark/benchmark.h>

#include "gas/grad_engine.hpp"
#include "gas/optimizer.hpp"
#include "gas/rng.hpp"

using namespace gas;

namespace {

struct BenchSetup {
    DiffusionSchedule schedule = DiffusionSchedule::linear_beta(1000);
    GaussianBackendSpec spec;
    EditPlan plan;
    LatentGrid z, z_ref, eps;
    GasConfig config;

    BenchSetup(int subtasks, int channels, int side) {
        SampleRng rng(42);
        spec.variance = 1.0;
        spec.null_mean = LatentGrid(channels, side, side, 0.0);
        std::vector<Subtask> subs;
        for (int k = 0; k < subtasks; ++k) {
            const std::string src = "s" + std::to_string(k);
            const std::string tgt = "t" + std::to_string(k);
            spec.means.emplace(src, LatentGrid(channels, side, side, 0.1 * k));
            spec.means.emplace(tgt, LatentGrid(channels, side, side, 0.1 * k + 0.5));
            const int band = side / subtasks;
            Subtask sub{src, tgt, Mask::rect(side, side, k * band, 0, (k + 1) * band, side),
                        false, k % 2 == 0, std::nullopt};
            subs.push_back(std::move(sub));
        }
        spec.means.emplace("X", LatentGrid(channels, side, side, 0.0));
        spec.means.emplace("Y", LatentGrid(channels, side, side, 1.0));
        plan = make_edit_plan("X", "Y", std::move(subs));
        z = LatentGrid::standard_normal(channels, side, side, rng);
        z_ref = LatentGrid::standard_normal(channels, side, side, rng);
        eps = LatentGrid::standard_normal(channels, side, side, rng);
    }
};

void BM_AnalyticPredict(benchmark::State& state) {
    const int side = int(state.range(0));
    BenchSetup setup(1, 4, side);
    const AnalyticBackend backend(setup.spec, setup.schedule);
    const Condition cond = Condition::phrase("t0");
    for (auto _ : state) {
        benchmark::DoNotOptimize(backend.predict_noise(setup.z, 500, cond));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_AnalyticPredict)->Arg(16)->Arg(64);

void BM_GasGradient(benchmark::State& state) {
    const int subtasks = int(state.range(0));
    const int side = int(state.range(1));
    BenchSetup setup(subtasks, 4, side);
    const AnalyticBackend backend(setup.spec, setup.schedule);
    for (auto _ : state) {
        benchmark::DoNotOptimize(gas_gradient(backend, setup.z, setup.z_ref, setup.plan, 500,
                                              setup.eps, setup.schedule, setup.config));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_GasGradient)->Args({1, 16})->Args({3, 16})->Args({5, 16})->Args({3, 64});

void BM_OverlapWeights(benchmark::State& state) {
    const int side = int(state.range(0));
    std::vector<Mask> masks;
    for (int k = 0; k < 5; ++k) {
        masks.push_back(Mask::rect(side, side, k * 2, k * 2, side / 2 + k * 2, side / 2 + k * 2));
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(overlap_weights(masks, 0.3));
    }
}
BENCHMARK(BM_OverlapWeights)->Arg(16)->Arg(64);

void BM_NullTextPenalty(benchmark::State& state) {
    const int side = int(state.range(0));
    SampleRng rng(7);
    const LatentGrid guided = LatentGrid::standard_normal(4, side, side, rng);
    const LatentGrid null_pred = LatentGrid::standard_normal(4, side, side, rng);
    const Mask mask = Mask::rect(side, side, 0, 0, side / 2, side / 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(null_text_penalty(guided, null_pred, mask, 5.0));
    }
}
BENCHMARK(BM_NullTextPenalty)->Arg(16)->Arg(64);

void BM_EditStep(benchmark::State& state) {
    // Cost of one optimizer step at the default operating point.
    BenchSetup setup(3, 4, int(state.range(0)));
    const AnalyticBackend backend(setup.spec, setup.schedule);
    OptimizerConfig opt;
    opt.max_steps = 1;
    opt.step_size = 0.05;
    opt.convergence_tol = 0.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            run_edit(setup.z, setup.plan, backend, setup.schedule, setup.config, opt));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EditStep)->Arg(16)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
