#include "gas/optimizer.hpp"

#include <cmath>
#include <deque>
#include <map>
#include <mutex>

#include "gas/error.hpp"
#include "gas/rng.hpp"

namespace gas {

namespace {

constexpr double kDivergenceGuard = 1e6;

std::map<std::string, RegularizerFn>& hook_registry() {
    static std::map<std::string, RegularizerFn> registry;
    return registry;
}

std::mutex& hook_mutex() {
    static std::mutex m;
    return m;
}

Mask preserve_union(const EditPlan& plan) {
    std::vector<Mask> masks;
    for (const Subtask& s : plan.subtasks) {
        if (s.preserve_form) masks.push_back(s.mask);
    }
    if (masks.empty()) return Mask(plan.union_mask.height(), plan.union_mask.width(), 0);
    return Mask::union_of(masks);
}

// Root-mean-square of the masked gradient per cell, the convergence metric.
double masked_rms(const LatentGrid& grad, const Mask& mask) {
    double sum = 0.0;
    const std::size_t plane = grad.plane_size();
    for (int c = 0; c < grad.channels(); ++c) {
        const std::size_t base = std::size_t(c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
            if (!mask.at_index(i)) continue;
            sum += grad[base + i] * grad[base + i];
        }
    }
    return std::sqrt(sum / (double(grad.channels()) * double(mask.area())));
}

}  // namespace

void OptimizerConfig::validate(const DiffusionSchedule& schedule) const {
    if (max_steps < 1) throw Error(ErrorCode::config, "max_steps must be >= 1");
    if (!(step_size >= 0.0) || !std::isfinite(step_size)) {
        throw Error(ErrorCode::config, "step_size must be finite and >= 0");
    }
    if (t_min < 0 || t_min >= t_max || t_max >= schedule.num_timesteps()) {
        throw Error(ErrorCode::config, "timestep bounds must satisfy 0 <= t_min < t_max < T");
    }
    if (convergence_window < 1) throw Error(ErrorCode::config, "convergence_window must be >= 1");
    if (!(convergence_tol >= 0.0)) throw Error(ErrorCode::config, "convergence_tol must be >= 0");
    if (checkpoint_every < 0) throw Error(ErrorCode::config, "checkpoint_every must be >= 0");
}

void register_regularizer(const std::string& hook_id, RegularizerFn fn) {
    if (hook_id.empty()) throw Error(ErrorCode::config, "hook id must be nonempty");
    std::lock_guard<std::mutex> lock(hook_mutex());
    hook_registry()[hook_id] = std::move(fn);
}

LatentGrid apply_regularizer(const std::string& hook_id, const LatentGrid& z,
                             const LatentGrid& z0, const EditPlan& plan) {
    if (hook_id.empty()) return LatentGrid(z.channels(), z.height(), z.width(), 0.0);

    RegularizerFn fn;
    {
        std::lock_guard<std::mutex> lock(hook_mutex());
        const auto it = hook_registry().find(hook_id);
        if (it == hook_registry().end()) {
            throw Error(ErrorCode::config, "unknown regularizer hook '" + hook_id + "'");
        }
        fn = it->second;
    }

    const Mask support = preserve_union(plan);
    if (support.area() == 0) return LatentGrid(z.channels(), z.height(), z.width(), 0.0);

    LatentGrid term = fn(z, z0, plan);
    if (!term.same_shape(z)) {
        throw Error(ErrorCode::invalid_argument, "regularizer returned a mismatched shape");
    }
    const std::size_t plane = z.plane_size();
    for (int c = 0; c < term.channels(); ++c) {
        const std::size_t base = std::size_t(c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
            if (!support.at_index(i)) term[base + i] = 0.0;
        }
    }
    return term;
}

EditResult run_edit(const LatentGrid& z0, const EditPlan& plan, const ScoreBackend& backend,
                    const DiffusionSchedule& schedule, const GasConfig& gas_config,
                    const OptimizerConfig& opt_config, const CheckpointFn& checkpoint) {
    plan.validate();
    gas_config.validate();
    opt_config.validate(schedule);
    if (!z0.all_finite()) {
        throw Error(ErrorCode::invalid_argument, "initial latent contains non-finite values");
    }

    const bool any_preserve = [&] {
        for (const Subtask& s : plan.subtasks) {
            if (s.preserve_form) return true;
        }
        return false;
    }();
    if (!opt_config.regularizer.empty()) {
        // Surface an unknown hook id before the first step, not mid-run.
        apply_regularizer(opt_config.regularizer, z0, z0, plan);
    }

    SampleRng rng(opt_config.seed);
    LatentGrid z = z0;

    EditResult result;
    result.reports.reserve(opt_config.max_steps);

    std::deque<double> window;
    double window_sum = 0.0;

    for (int step = 0; step < opt_config.max_steps; ++step) {
        const int t = rng.uniform_int(opt_config.t_min, opt_config.t_max);
        const LatentGrid eps =
            LatentGrid::standard_normal(z.channels(), z.height(), z.width(), rng);

        auto [grad, report] = gas_gradient(backend, z, z0, plan, t, eps, schedule, gas_config);
        if (any_preserve && !opt_config.regularizer.empty()) {
            grad += apply_regularizer(opt_config.regularizer, z, z0, plan);
        }

        for (std::size_t i = 0; i < z.size(); ++i) z[i] -= opt_config.step_size * grad[i];

        result.reports.push_back(std::move(report));
        result.steps_run = step + 1;

        if (z.l2_norm() > kDivergenceGuard) {
            throw DivergedError("latent norm exceeded divergence guard", step);
        }

        if (checkpoint && opt_config.checkpoint_every > 0 &&
            (step + 1) % opt_config.checkpoint_every == 0) {
            checkpoint(step + 1, z, result.reports);
        }

        window.push_back(masked_rms(grad, plan.union_mask));
        window_sum += window.back();
        if (int(window.size()) > opt_config.convergence_window) {
            window_sum -= window.front();
            window.pop_front();
        }
        if (int(window.size()) == opt_config.convergence_window &&
            window_sum / double(window.size()) < opt_config.convergence_tol) {
            result.converged = true;
            break;
        }
    }

    result.final_latent = std::move(z);
    return result;
}

}  // namespace gas
