#include <doctest.h>

#include <cmath>

#include "gas/error.hpp"
#include "gas/score_backend.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace gas;
using test_support::constant_spec;

TEST_CASE("perturb endpoints and arithmetic") {
    SampleRng rng(11);
    const LatentGrid z = test_support::random_grid(2, 3, 3, rng);
    const LatentGrid eps = test_support::random_grid(2, 3, 3, rng);

    // alpha_bar = 1: zero-noise endpoint, exact.
    const DiffusionSchedule ones = DiffusionSchedule::from_alpha_bar({1.0, 0.5});
    CHECK(perturb(z, 0, eps, ones) == z);

    // alpha_bar -> 0: pure-noise endpoint, up to the vanishing signal term.
    const DiffusionSchedule tiny = DiffusionSchedule::from_alpha_bar({0.5, 1e-30});
    const LatentGrid noisy = perturb(z, 1, eps, tiny);
    for (std::size_t i = 0; i < noisy.size(); ++i) {
        CHECK(noisy[i] == doctest::Approx(eps[i]).epsilon(1e-12));
    }

    // alpha_bar = 0.64, z = 1, eps = 0.5 -> 0.8 + 0.3 = 1.1.
    const DiffusionSchedule s = test_support::schedule_with_alpha(0.64);
    const LatentGrid out = perturb(LatentGrid(1, 2, 2, 1.0), 0, LatentGrid(1, 2, 2, 0.5), s);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(1.1));

    CHECK_THROWS_AS(perturb(z, 0, LatentGrid(1, 3, 3, 0.0), s), Error);
}

TEST_CASE("cfg_combine endpoints, arithmetic and affine property") {
    SampleRng rng(12);
    const LatentGrid a = test_support::random_grid(2, 4, 4, rng);
    const LatentGrid b = test_support::random_grid(2, 4, 4, rng);

    CHECK(cfg_combine(a, b, 1.0) == a);
    CHECK(cfg_combine(a, b, 0.0) == b);

    const LatentGrid guided = cfg_combine(LatentGrid(1, 2, 2, 0.2), LatentGrid(1, 2, 2, 0.1), 7.5);
    for (std::size_t i = 0; i < guided.size(); ++i) CHECK(guided[i] == doctest::Approx(0.85));

    // Affine identity holds bit-exactly for any omega.
    for (double omega : {0.0, 0.3, 1.0, 2.0, 7.5}) {
        const LatentGrid combined = cfg_combine(a, b, omega);
        for (std::size_t i = 0; i < combined.size(); ++i) {
            const double expected = omega == 1.0 ? a[i] : b[i] + omega * (a[i] - b[i]);
            CHECK(combined[i] == expected);
        }
        // Idempotent when both branches agree.
        const LatentGrid same = cfg_combine(a, a, omega);
        CHECK(same == a);
    }

    CHECK_THROWS_AS(cfg_combine(a, LatentGrid(1, 4, 4, 0.0), 7.5), Error);
    CHECK_THROWS_AS(cfg_combine(a, b, -0.5), Error);
}

TEST_CASE("analytic noise closed-form spot values") {
    // At the conditional mean the prediction is exactly zero.
    {
        const DiffusionSchedule s = test_support::schedule_with_alpha(0.36);
        const auto spec = constant_spec(1, 2, 2, 1.0, {{"c", 0.5}});
        const LatentGrid z_t(1, 2, 2, std::sqrt(0.36) * 0.5);
        const LatentGrid out = analytic_noise(spec, z_t, 0, Condition::phrase("c"), s);
        CHECK(out.max_abs() == 0.0);
    }
    // alpha_bar = 0.64, sigma^2 = 1, mean 0, z_t = 1 -> 0.6.
    {
        const DiffusionSchedule s = test_support::schedule_with_alpha(0.64);
        const auto spec = constant_spec(1, 2, 2, 1.0, {{"c", 0.0}});
        const LatentGrid out =
            analytic_noise(spec, LatentGrid(1, 2, 2, 1.0), 0, Condition::phrase("c"), s);
        for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(0.6));
    }
    // alpha_bar = 0.25, sigma^2 = 3, mean 0, z_t = 2 -> sqrt(0.75)*2/1.5.
    {
        const DiffusionSchedule s = test_support::schedule_with_alpha(0.25);
        const auto spec = constant_spec(1, 2, 2, 3.0, {{"c", 0.0}});
        const LatentGrid out =
            analytic_noise(spec, LatentGrid(1, 2, 2, 2.0), 0, Condition::phrase("c"), s);
        for (std::size_t i = 0; i < out.size(); ++i) {
            CHECK(out[i] == doctest::Approx(std::sqrt(0.75) * 2.0 / 1.5));
        }
    }
}

TEST_CASE("analytic noise recovers injected noise at zero variance") {
    SampleRng rng(21);
    const DiffusionSchedule s = DiffusionSchedule::linear_beta(100);
    const auto spec = constant_spec(2, 3, 4, 0.0, {{"c", 0.7}});
    const Condition cond = Condition::phrase("c");
    for (int trial = 0; trial < 10; ++trial) {
        const int t = rng.uniform_int(0, 99);
        const LatentGrid eps = test_support::random_grid(2, 3, 4, rng);
        const LatentGrid z_t = perturb(spec.means.at("c"), t, eps, s);
        const LatentGrid recovered = analytic_noise(spec, z_t, t, cond, s);
        for (std::size_t i = 0; i < eps.size(); ++i) {
            CHECK(recovered[i] == doctest::Approx(eps[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("analytic noise matches finite-difference score") {
    SampleRng rng(22);
    const DiffusionSchedule s = DiffusionSchedule::linear_beta(1000);
    const double variance = 0.8;
    const auto spec = constant_spec(2, 3, 3, variance, {{"c", 0.4}});
    const Condition cond = Condition::phrase("c");

    for (int trial = 0; trial < 25; ++trial) {
        const int t = rng.uniform_int(0, 999);
        const LatentGrid z_t = test_support::random_grid(2, 3, 3, rng, 2.0);
        const LatentGrid eps_hat = analytic_noise(spec, z_t, t, cond, s);
        const LatentGrid fd = oracles::finite_difference_score(z_t, spec.means.at("c"),
                                                               s.alpha_bar(t), variance);
        const double scale = -1.0 / std::sqrt(1.0 - s.alpha_bar(t));
        for (std::size_t i = 0; i < z_t.size(); ++i) {
            CHECK(std::abs(scale * eps_hat[i] - fd[i]) < 1e-4);
        }
    }
}

TEST_CASE("analytic backend error paths") {
    const DiffusionSchedule s = test_support::schedule_with_alpha(0.5);
    const auto spec = constant_spec(1, 2, 2, 1.0, {{"known", 0.0}});
    const AnalyticBackend backend(spec, s);
    const LatentGrid z_t(1, 2, 2, 0.0);

    CHECK_THROWS_AS(backend.predict_noise(z_t, 0, Condition::phrase("unknown")), Error);
    try {
        backend.predict_noise(z_t, 0, Condition::phrase("unknown"));
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::condition_not_found);
    }

    // Null condition resolves to the null mean, no registration needed.
    CHECK_NOTHROW(backend.predict_noise(z_t, 0, Condition::null_text()));

    // alpha_bar = 1 with zero variance leaves the posterior undefined.
    const DiffusionSchedule ones = DiffusionSchedule::from_alpha_bar({1.0, 0.5});
    const auto degenerate = constant_spec(1, 2, 2, 0.0, {{"c", 0.0}});
    CHECK_THROWS_AS(analytic_noise(degenerate, z_t, 0, Condition::phrase("c"), ones), Error);
}

TEST_CASE("condition kind/text invariant") {
    CHECK_THROWS_AS(Condition::phrase(""), Error);
    Condition bad;
    bad.kind = ConditionKind::null_text;
    bad.text = "not empty";
    CHECK_THROWS_AS(bad.validate(), Error);
    CHECK(Condition::null_text().is_null());
}

TEST_CASE("batched prediction matches sequential") {
    const DiffusionSchedule s = test_support::schedule_with_alpha(0.5);
    const auto spec = constant_spec(1, 2, 2, 1.0, {{"a", 0.2}, {"b", -0.3}});
    const AnalyticBackend backend(spec, s);
    SampleRng rng(31);
    const LatentGrid z1 = test_support::random_grid(1, 2, 2, rng);
    const LatentGrid z2 = test_support::random_grid(1, 2, 2, rng);
    const Condition ca = Condition::phrase("a");
    const Condition cb = Condition::phrase("b");

    const std::vector<ScoreBackend::BatchItem> items = {{&z1, &ca}, {&z2, &cb}, {&z1, &cb}};
    const auto batch = backend.predict_noise_batch(items, 0);
    REQUIRE(batch.size() == 3);
    CHECK(batch[0] == backend.predict_noise(z1, 0, ca));
    CHECK(batch[1] == backend.predict_noise(z2, 0, cb));
    CHECK(batch[2] == backend.predict_noise(z1, 0, cb));
}

TEST_CASE("analytic predictor is optimal among affine predictors (Monte Carlo)") {
    // 10,000 draws of (z0, eps) at a fixed timestep; the analytic coefficients
    // must match the least-squares fit of eps on z_t within sampling error,
    // and its mean squared error must not exceed the fitted optimum by more
    // than sampling noise.
    const DiffusionSchedule s = DiffusionSchedule::linear_beta(1000);
    const int t = 400;
    const double alpha = s.alpha_bar(t);
    const double variance = 0.8;
    const double mean_value = 0.7;

    SampleRng rng(777);
    const int draws = 10000;
    const int cells = 4;
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    std::vector<double> xs, ys;
    xs.reserve(draws * cells);
    ys.reserve(draws * cells);
    for (int i = 0; i < draws; ++i) {
        for (int c = 0; c < cells; ++c) {
            const double z0 = mean_value + std::sqrt(variance) * rng.normal();
            const double eps = rng.normal();
            const double z_t = std::sqrt(alpha) * z0 + std::sqrt(1.0 - alpha) * eps;
            xs.push_back(z_t);
            ys.push_back(eps);
            sx += z_t;
            sy += eps;
            sxx += z_t * z_t;
            sxy += z_t * eps;
        }
    }
    const double n = double(xs.size());
    const double a_fit = (sxy - sx * sy / n) / (sxx - sx * sx / n);
    const double b_fit = sy / n - a_fit * sx / n;

    const double denom = alpha * variance + (1.0 - alpha);
    const double a_star = std::sqrt(1.0 - alpha) / denom;
    const double b_star = -std::sqrt(alpha) * std::sqrt(1.0 - alpha) * mean_value / denom;

    CHECK(std::abs(a_fit - a_star) < 0.02);
    CHECK(std::abs(b_fit - b_star) < 0.02);

    double mse_fit = 0.0, mse_star = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r_fit = a_fit * xs[i] + b_fit - ys[i];
        const double r_star = a_star * xs[i] + b_star - ys[i];
        mse_fit += r_fit * r_fit;
        mse_star += r_star * r_star;
    }
    mse_fit /= n;
    mse_star /= n;
    CHECK(mse_star >= mse_fit);  // the empirical fit is the argmin by construction
    CHECK(mse_star - mse_fit < 0.01);
}
