#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gas/grad_engine.hpp"

namespace gas {

// Latent optimization loop parameters. Defaults: 500 plain-SGD steps,
// timesteps drawn uniformly from {50..950}, convergence when the moving
// average of the per-cell masked gradient norm over a 50-step window drops
// below 1e-3, whichever comes first.
struct OptimizerConfig {
    int max_steps = 500;
    double step_size = 0.1;
    int t_min = 50;
    int t_max = 950;
    std::uint64_t seed = 0;
    int convergence_window = 50;
    double convergence_tol = 1e-3;
    // Structure-preservation hook id; empty selects the built-in no-op.
    std::string regularizer;
    // Checkpoint callback cadence in steps; 0 disables.
    int checkpoint_every = 0;

    void validate(const DiffusionSchedule& schedule) const;
};

struct EditResult {
    LatentGrid final_latent;
    int steps_run = 0;
    std::vector<GradientReport> reports;
    bool converged = false;
};

// Additive gradient hook: f(z, z0, plan) evaluated each step and masked to
// the union of preserve_form subtask masks.
using RegularizerFn =
    std::function<LatentGrid(const LatentGrid& z, const LatentGrid& z0, const EditPlan& plan)>;

// Process-wide hook registry. Registration is expected at startup; lookups
// are thread-safe afterwards.
void register_regularizer(const std::string& hook_id, RegularizerFn fn);

// Resolves the hook and applies the gating rules: the default (empty id)
// hook and plans without any preserve_form subtask both yield a zero grid.
// The hook output is masked to the preserve_form union so it can never touch
// cells its contract excludes. Unknown ids throw Error(config).
LatentGrid apply_regularizer(const std::string& hook_id, const LatentGrid& z,
                             const LatentGrid& z0, const EditPlan& plan);

// Called every checkpoint_every steps with the current latent and the
// reports accumulated so far.
using CheckpointFn =
    std::function<void(int step, const LatentGrid& z, const std::vector<GradientReport>& reports)>;

// Runs the edit loop from z0. The reference latent fed to the gradient is
// always the original z0; only the working copy moves. Throws DivergedError
// when the latent norm passes 1e6.
EditResult run_edit(const LatentGrid& z0, const EditPlan& plan, const ScoreBackend& backend,
                    const DiffusionSchedule& schedule, const GasConfig& gas_config,
                    const OptimizerConfig& opt_config, const CheckpointFn& checkpoint = {});

}  // namespace gas
