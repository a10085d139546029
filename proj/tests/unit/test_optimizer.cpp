#include <doctest.h>

#include <cmath>

#include "gas/error.hpp"
#include "gas/optimizer.hpp"
#include "test_support.hpp"

using namespace gas;
using test_support::constant_spec;

namespace {

// Backend that predicts zero noise everywhere; with it the editing gradient
// vanishes and only regularizer terms can move the latent.
class ZeroBackend : public ScoreBackend {
public:
    LatentGrid predict_noise(const LatentGrid& z_t, int, const Condition&) const override {
        return LatentGrid(z_t.channels(), z_t.height(), z_t.width(), 0.0);
    }
};

EditPlan full_mask_plan(int h, int w, bool preserve = false) {
    Subtask sub{"x1", "y1", Mask(h, w, 1), preserve, false, std::nullopt};
    return make_edit_plan("X", "Y", {sub});
}

GaussianBackendSpec pull_up_spec(int c, int h, int w) {
    return constant_spec(c, h, w, 1.0, {{"x1", 0.0}, {"y1", 1.0}, {"X", 0.0}, {"Y", 1.0}});
}

}  // namespace

TEST_CASE("run_edit rejects zero step budgets and honors the null update") {
    const int h = 4, w = 4;
    const DiffusionSchedule s = DiffusionSchedule::linear_beta(1000);
    const AnalyticBackend backend(pull_up_spec(1, h, w), s);
    const EditPlan plan = full_mask_plan(h, w);
    const LatentGrid z0(1, h, w, 0.25);

    OptimizerConfig bad;
    bad.max_steps = 0;
    CHECK_THROWS_AS(run_edit(z0, plan, backend, s, GasConfig{}, bad), Error);

    OptimizerConfig null_update;
    null_update.max_steps = 1;
    null_update.step_size = 0.0;
    const EditResult result = run_edit(z0, plan, backend, s, GasConfig{}, null_update);
    CHECK(result.final_latent == z0);
    CHECK(result.steps_run == 1);
    CHECK(result.reports.size() == 1);
}

TEST_CASE("run_edit is bit-identical across runs with the same seed") {
    const int h = 4, w = 4;
    const DiffusionSchedule s = DiffusionSchedule::linear_beta(1000);
    const AnalyticBackend backend(pull_up_spec(2, h, w), s);
    const EditPlan plan = full_mask_plan(h, w);
    SampleRng rng(55);
    const LatentGrid z0 = test_support::random_grid(2, h, w, rng);

    OptimizerConfig cfg;
    cfg.max_steps = 40;
    cfg.step_size = 0.05;
    cfg.seed = 99;
    cfg.convergence_tol = 0.0;

    const EditResult a = run_edit(z0, plan, backend, s, GasConfig{}, cfg);
    const EditResult b = run_edit(z0, plan, backend, s, GasConfig{}, cfg);
    CHECK(a.final_latent == b.final_latent);
    CHECK(a.steps_run == b.steps_run);
    REQUIRE(a.reports.size() == b.reports.size());
    for (std::size_t i = 0; i < a.reports.size(); ++i) {
        CHECK(a.reports[i].timestep == b.reports[i].timestep);
        CHECK(a.reports[i].grad_norm_inside == b.reports[i].grad_norm_inside);
    }
}

TEST_CASE("run_edit contracts a full-mask edit onto the target mean") {
    // Analytic dynamics: each step pulls z toward z0 + omega * (mu_y - mu_x),
    // so with omega = 1 and means 0 -> 1 the latent settles at 1.
    const int h = 8, w = 8;
    const DiffusionSchedule s = DiffusionSchedule::linear_beta(1000);
    const AnalyticBackend backend(pull_up_spec(1, h, w), s);
    const EditPlan plan = full_mask_plan(h, w);
    const LatentGrid z0(1, h, w, 0.0);

    GasConfig gas_cfg;
    gas_cfg.omega = 1.0;
    OptimizerConfig opt;
    opt.max_steps = 500;
    opt.step_size = 0.05;
    opt.seed = 7;
    opt.convergence_tol = 0.0;

    const EditResult result = run_edit(z0, plan, backend, s, gas_cfg, opt);
    double mean = 0.0;
    for (std::size_t i = 0; i < result.final_latent.size(); ++i) mean += result.final_latent[i];
    mean /= double(result.final_latent.size());
    CHECK(std::abs(mean - 1.0) < 0.1);
    CHECK(result.steps_run == 500);
}

TEST_CASE("run_edit leaves cells outside the union mask bit-identical") {
    const int h = 6, w = 6;
    const DiffusionSchedule s = DiffusionSchedule::linear_beta(1000);
    const AnalyticBackend backend(pull_up_spec(2, h, w), s);
    const Mask m = Mask::rect(h, w, 1, 1, 4, 4);
    Subtask sub{"x1", "y1", m, false, false, std::nullopt};
    const EditPlan plan = make_edit_plan("X", "Y", {sub});
    SampleRng rng(66);
    const LatentGrid z0 = test_support::random_grid(2, h, w, rng);

    OptimizerConfig opt;
    opt.max_steps = 100;
    opt.step_size = 0.05;
    opt.seed = 3;
    opt.convergence_tol = 0.0;

    const EditResult result = run_edit(z0, plan, backend, s, GasConfig{}, opt);
    const std::size_t plane = z0.plane_size();
    bool moved_inside = false;
    for (int c = 0; c < 2; ++c) {
        for (std::size_t i = 0; i < plane; ++i) {
            const std::size_t idx = std::size_t(c) * plane + i;
            if (m.at_index(i)) {
                moved_inside = moved_inside || result.final_latent[idx] != z0[idx];
            } else {
                CHECK(result.final_latent[idx] == z0[idx]);
            }
        }
    }
    CHECK(moved_inside);
}

TEST_CASE("run_edit raises a diverged error carrying the step index") {
    const int h = 4, w = 4;
    const DiffusionSchedule s = DiffusionSchedule::linear_beta(1000);
    const AnalyticBackend backend(pull_up_spec(1, h, w), s);
    const EditPlan plan = full_mask_plan(h, w);
    const LatentGrid z0(1, h, w, 0.0);

    OptimizerConfig opt;
    opt.max_steps = 200;
    opt.step_size = 1e5;  // grossly unstable on purpose
    opt.seed = 1;
    opt.convergence_tol = 0.0;
    GasConfig gas_cfg;
    gas_cfg.omega = 7.5;

    CHECK_THROWS_AS(run_edit(z0, plan, backend, s, gas_cfg, opt), DivergedError);
    try {
        run_edit(z0, plan, backend, s, gas_cfg, opt);
    } catch (const DivergedError& e) {
        CHECK(e.step() >= 0);
        CHECK(e.step() < 200);
    }
}

TEST_CASE("run_edit converges once the windowed gradient norm settles") {
    const int h = 4, w = 4;
    const ZeroBackend backend;
    const DiffusionSchedule s = DiffusionSchedule::linear_beta(1000);
    const EditPlan plan = full_mask_plan(h, w);
    const LatentGrid z0(1, h, w, 0.5);

    OptimizerConfig opt;
    opt.max_steps = 100;
    opt.step_size = 0.1;
    opt.convergence_window = 5;
    opt.convergence_tol = 1e-3;

    const EditResult result = run_edit(z0, plan, backend, s, GasConfig{}, opt);
    CHECK(result.converged);
    CHECK(result.steps_run == 5);
    CHECK(result.reports.size() == 5);
}

TEST_CASE("regularizer hooks") {
    const int h = 4, w = 4;
    const DiffusionSchedule s = DiffusionSchedule::linear_beta(1000);
    SampleRng rng(77);
    const LatentGrid z = test_support::random_grid(1, h, w, rng);
    const LatentGrid z0 = test_support::random_grid(1, h, w, rng);

    SUBCASE("default hook is a zero grid") {
        const EditPlan plan = full_mask_plan(h, w, true);
        const LatentGrid term = apply_regularizer("", z, z0, plan);
        CHECK(term.max_abs() == 0.0);
    }
    SUBCASE("no preserve_form subtask gates any hook to zero") {
        register_regularizer("ones", [](const LatentGrid& zz, const LatentGrid&, const EditPlan&) {
            return LatentGrid(zz.channels(), zz.height(), zz.width(), 1.0);
        });
        const EditPlan plan = full_mask_plan(h, w, false);
        CHECK(apply_regularizer("ones", z, z0, plan).max_abs() == 0.0);
    }
    SUBCASE("unknown hook id is a configuration error") {
        const EditPlan plan = full_mask_plan(h, w, true);
        CHECK_THROWS_AS(apply_regularizer("no-such-hook", z, z0, plan), Error);
        try {
            apply_regularizer("no-such-hook", z, z0, plan);
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::config);
        }
    }
    SUBCASE("hook output is clipped to the preserve_form union") {
        register_regularizer("ones", [](const LatentGrid& zz, const LatentGrid&, const EditPlan&) {
            return LatentGrid(zz.channels(), zz.height(), zz.width(), 1.0);
        });
        const Mask preserve = Mask::rect(h, w, 0, 0, 2, 2);
        Subtask kept{"x1", "y1", preserve, true, false, std::nullopt};
        Subtask free{"x2", "y2", Mask::rect(h, w, 2, 2, 4, 4), false, false, std::nullopt};
        const EditPlan plan = make_edit_plan("X", "Y", {kept, free});
        const LatentGrid term = apply_regularizer("ones", z, z0, plan);
        const std::size_t plane = term.plane_size();
        for (std::size_t i = 0; i < plane; ++i) {
            CHECK(term[i] == (preserve.at_index(i) ? 1.0 : 0.0));
        }
    }
}

TEST_CASE("regularizer term is additive in the update") {
    // With a zero-noise backend the editing gradient vanishes, so the run
    // with a constant hook must land exactly at z0 minus the accumulated hook
    // steps, and the run without it must not move at all.
    const int h = 4, w = 4;
    const ZeroBackend backend;
    const DiffusionSchedule s = DiffusionSchedule::linear_beta(1000);
    const Mask preserve = Mask::rect(h, w, 0, 0, 2, 2);
    Subtask kept{"x1", "y1", preserve, true, false, std::nullopt};
    Subtask free{"x2", "y2", Mask::rect(h, w, 2, 2, 4, 4), false, false, std::nullopt};
    const EditPlan plan = make_edit_plan("X", "Y", {kept, free});
    const LatentGrid z0(1, h, w, 0.5);

    register_regularizer("constant-pull",
                         [](const LatentGrid& zz, const LatentGrid&, const EditPlan&) {
                             return LatentGrid(zz.channels(), zz.height(), zz.width(), 0.25);
                         });

    OptimizerConfig opt;
    opt.max_steps = 8;
    opt.step_size = 0.1;
    opt.convergence_tol = 0.0;

    OptimizerConfig with_hook = opt;
    with_hook.regularizer = "constant-pull";

    const EditResult plain = run_edit(z0, plan, backend, s, GasConfig{}, opt);
    const EditResult hooked = run_edit(z0, plan, backend, s, GasConfig{}, with_hook);

    CHECK(plain.final_latent == z0);
    // Replay the eight hook updates with the same arithmetic the loop uses.
    double accumulated = 0.5;
    for (int step = 0; step < 8; ++step) accumulated -= 0.1 * 0.25;
    const std::size_t plane = z0.plane_size();
    for (std::size_t i = 0; i < plane; ++i) {
        const double expected = preserve.at_index(i) ? accumulated : 0.5;
        CHECK(hooked.final_latent[i] == expected);
    }
}

TEST_CASE("checkpoint callback fires on the configured cadence") {
    const int h = 4, w = 4;
    const ZeroBackend backend;
    const DiffusionSchedule s = DiffusionSchedule::linear_beta(1000);
    const EditPlan plan = full_mask_plan(h, w);
    const LatentGrid z0(1, h, w, 0.0);

    OptimizerConfig opt;
    opt.max_steps = 25;
    opt.step_size = 0.1;
    opt.convergence_tol = 0.0;
    opt.checkpoint_every = 10;

    std::vector<int> seen_steps;
    std::vector<std::size_t> seen_report_counts;
    run_edit(z0, plan, backend, s, GasConfig{}, opt,
             [&](int step, const LatentGrid&, const std::vector<GradientReport>& reports) {
                 seen_steps.push_back(step);
                 seen_report_counts.push_back(reports.size());
             });
    CHECK(seen_steps == std::vector<int>{10, 20});
    CHECK(seen_report_counts == std::vector<std::size_t>{10, 20});
}
