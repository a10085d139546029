#pragma once

#include <utility>
#include <vector>

#include "gas/edit_plan.hpp"
#include "gas/latent_grid.hpp"
#include "gas/schedule.hpp"
#include "gas/score_backend.hpp"

namespace gas {

// Tuning knobs for the aggregated editing gradient. Defaults follow the
// reference operating point: guidance 7.5, penalty range 5, five SNR-banded
// full-prompt weights from 0.5 down to 0.1, overlap down-weight 0.3 and a 15%
// mask-area eligibility threshold for the null-text penalty.
struct GasConfig {
    double omega = 7.5;
    double eta = 5.0;
    std::vector<double> alpha_values = {0.5, 0.4, 0.3, 0.2, 0.1};
    double overlap_factor = 0.3;
    double area_threshold = 0.15;
    double loss_weight = 1.0;

    void validate() const;
};

// Per-step telemetry emitted alongside every aggregated gradient.
struct GradientReport {
    int timestep = 0;
    double alpha_used = 0.0;
    std::vector<double> gamma;
    double grad_norm_inside = 0.0;
    double grad_norm_outside = 0.0;
};

// Score-distillation gradient for a single condition:
//   loss_weight * (cfg(eps_hat(z_t, cond), eps_hat(z_t, null), omega) - eps)
// with z_t = perturb(z, t, eps).
LatentGrid sds_gradient(const ScoreBackend& backend, const LatentGrid& z, int t,
                        const LatentGrid& eps, const Condition& cond,
                        const DiffusionSchedule& schedule, const GasConfig& config);

// Delta gradient between the moving latent under cond and the fixed reference
// under cond_ref, sharing one (t, eps) draw.
LatentGrid dds_gradient(const ScoreBackend& backend, const LatentGrid& z,
                        const LatentGrid& z_ref, int t, const LatentGrid& eps,
                        const Condition& cond, const Condition& cond_ref,
                        const DiffusionSchedule& schedule, const GasConfig& config);

// Penalty coefficient in [0, 1] that damps a subtask whose guided target
// prediction stays close to the null prediction inside its mask:
//   min(eta / area * sum(|eps_target_cfg - eps_null| inside mask), 1).
double null_text_penalty(const LatentGrid& eps_target_cfg, const LatentGrid& eps_null,
                         const Mask& mask, double eta);

// Per-subtask weight planes: overlap_factor where a smaller mask (ties broken
// toward the lower subtask index) also covers the cell, 1 elsewhere. Values
// outside the subtask's own mask are left at 1; masking is applied separately.
std::vector<LatentGrid> overlap_weights(const std::vector<Mask>& masks, double overlap_factor);

// Full-prompt guidance weight for the SNR band containing t.
double alpha_for_timestep(int t, const DiffusionSchedule& schedule, const GasConfig& config);

// The aggregated editing gradient: penalty- and overlap-weighted masked
// per-subtask deltas plus the SNR-banded full-prompt delta over the union
// mask. Exactly zero outside the union mask. Costs 2n + 4 backend calls; the
// two null predictions are computed once and shared.
std::pair<LatentGrid, GradientReport> gas_gradient(const ScoreBackend& backend,
                                                   const LatentGrid& z, const LatentGrid& z_ref,
                                                   const EditPlan& plan, int t,
                                                   const LatentGrid& eps,
                                                   const DiffusionSchedule& schedule,
                                                   const GasConfig& config);

// Diagnostic (height, width) map: per-cell mean over channels of
// |cfg(eps_hat(z_t, cond), eps_hat(z_t, null), omega) - eps_hat(z_t, null)|.
// Large values mark regions the model considers salient for cond.
LatentGrid null_text_divergence_map(const ScoreBackend& backend, const LatentGrid& z, int t,
                                    const LatentGrid& eps, const Condition& cond,
                                    const DiffusionSchedule& schedule, const GasConfig& config);

}  // namespace gas
