#include "gas/grad_engine.hpp"

#include <algorithm>
#include <cmath>

#include "gas/error.hpp"

namespace gas {

void GasConfig::validate() const {
    if (!(omega >= 0.0)) throw Error(ErrorCode::config, "omega must be >= 0");
    if (!(eta > 0.0)) throw Error(ErrorCode::config, "eta must be > 0");
    if (alpha_values.empty()) throw Error(ErrorCode::config, "alpha_values must be nonempty");
    for (std::size_t i = 1; i < alpha_values.size(); ++i) {
        if (alpha_values[i] > alpha_values[i - 1]) {
            throw Error(ErrorCode::config, "alpha_values must be nonincreasing");
        }
    }
    if (!(overlap_factor > 0.0 && overlap_factor <= 1.0)) {
        throw Error(ErrorCode::config, "overlap_factor must lie in (0, 1]");
    }
    if (!(area_threshold > 0.0 && area_threshold <= 1.0)) {
        throw Error(ErrorCode::config, "area_threshold must lie in (0, 1]");
    }
    if (!std::isfinite(loss_weight)) throw Error(ErrorCode::config, "loss_weight must be finite");
}

LatentGrid sds_gradient(const ScoreBackend& backend, const LatentGrid& z, int t,
                        const LatentGrid& eps, const Condition& cond,
                        const DiffusionSchedule& schedule, const GasConfig& config) {
    const LatentGrid z_t = perturb(z, t, eps, schedule);
    const Condition null_cond = Condition::null_text();
    const LatentGrid eps_cond = backend.predict_noise(z_t, t, cond);
    const LatentGrid eps_null = backend.predict_noise(z_t, t, null_cond);
    const LatentGrid guided = cfg_combine(eps_cond, eps_null, config.omega);
    LatentGrid out(z.channels(), z.height(), z.width());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = config.loss_weight * (guided[i] - eps[i]);
    }
    return out;
}

LatentGrid dds_gradient(const ScoreBackend& backend, const LatentGrid& z,
                        const LatentGrid& z_ref, int t, const LatentGrid& eps,
                        const Condition& cond, const Condition& cond_ref,
                        const DiffusionSchedule& schedule, const GasConfig& config) {
    if (!z.same_shape(z_ref)) {
        throw Error(ErrorCode::invalid_argument, "dds_gradient: z and z_ref shapes differ");
    }
    const LatentGrid z_t = perturb(z, t, eps, schedule);
    const LatentGrid z_ref_t = perturb(z_ref, t, eps, schedule);
    const Condition null_cond = Condition::null_text();
    const LatentGrid guided = cfg_combine(backend.predict_noise(z_t, t, cond),
                                          backend.predict_noise(z_t, t, null_cond), config.omega);
    const LatentGrid guided_ref =
        cfg_combine(backend.predict_noise(z_ref_t, t, cond_ref),
                    backend.predict_noise(z_ref_t, t, null_cond), config.omega);
    LatentGrid out(z.channels(), z.height(), z.width());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = config.loss_weight * (guided[i] - guided_ref[i]);
    }
    return out;
}

double null_text_penalty(const LatentGrid& eps_target_cfg, const LatentGrid& eps_null,
                         const Mask& mask, double eta) {
    if (!eps_target_cfg.same_shape(eps_null)) {
        throw Error(ErrorCode::invalid_argument, "null_text_penalty: shape mismatch");
    }
    if (eps_target_cfg.height() != mask.height() || eps_target_cfg.width() != mask.width()) {
        throw Error(ErrorCode::invalid_argument, "null_text_penalty: mask shape mismatch");
    }
    if (mask.area() == 0) {
        throw Error(ErrorCode::invalid_argument, "null_text_penalty: empty mask");
    }
    double sum = 0.0;
    const std::size_t plane = eps_target_cfg.plane_size();
    for (int c = 0; c < eps_target_cfg.channels(); ++c) {
        const std::size_t base = std::size_t(c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
            if (mask.at_index(i)) sum += std::abs(eps_target_cfg[base + i] - eps_null[base + i]);
        }
    }
    return std::min(eta / double(mask.area()) * sum, 1.0);
}

std::vector<LatentGrid> overlap_weights(const std::vector<Mask>& masks, double overlap_factor) {
    std::vector<LatentGrid> weights;
    if (masks.empty()) return weights;
    const int height = masks.front().height();
    const int width = masks.front().width();
    for (const Mask& m : masks) {
        if (m.height() != height || m.width() != width) {
            throw Error(ErrorCode::invalid_argument, "overlap_weights: mask shape mismatch");
        }
    }
    weights.reserve(masks.size());
    for (std::size_t k = 0; k < masks.size(); ++k) weights.emplace_back(1, height, width, 1.0);

    const std::size_t cells = std::size_t(height) * width;
    for (std::size_t i = 0; i < cells; ++i) {
        // The covering mask of smallest area (ties to the lower index) keeps
        // weight 1; every larger covering mask is down-weighted.
        std::size_t smallest = masks.size();
        for (std::size_t k = 0; k < masks.size(); ++k) {
            if (!masks[k].at_index(i)) continue;
            if (smallest == masks.size() || masks[k].area() < masks[smallest].area()) {
                smallest = k;
            }
        }
        if (smallest == masks.size()) continue;
        for (std::size_t k = 0; k < masks.size(); ++k) {
            if (k != smallest && masks[k].at_index(i)) weights[k][i] = overlap_factor;
        }
    }
    return weights;
}

double alpha_for_timestep(int t, const DiffusionSchedule& schedule, const GasConfig& config) {
    const int bands = int(config.alpha_values.size());
    return config.alpha_values[snr_band(t, schedule, bands)];
}

std::pair<LatentGrid, GradientReport> gas_gradient(const ScoreBackend& backend,
                                                   const LatentGrid& z, const LatentGrid& z_ref,
                                                   const EditPlan& plan, int t,
                                                   const LatentGrid& eps,
                                                   const DiffusionSchedule& schedule,
                                                   const GasConfig& config) {
    plan.validate();
    config.validate();
    if (!z.same_shape(z_ref) || !z.same_shape(eps)) {
        throw Error(ErrorCode::invalid_argument, "gas_gradient: latent shape mismatch");
    }
    if (z.height() != plan.union_mask.height() || z.width() != plan.union_mask.width()) {
        throw Error(ErrorCode::invalid_argument, "gas_gradient: plan masks are not at latent resolution");
    }

    const std::size_t n = plan.subtasks.size();
    const LatentGrid z_t = perturb(z, t, eps, schedule);
    const LatentGrid z_ref_t = perturb(z_ref, t, eps, schedule);
    const Condition null_cond = Condition::null_text();
    const Condition target_full = Condition::full_prompt(plan.target_prompt);
    const Condition source_full = Condition::full_prompt(plan.source_prompt);

    // One batch of 2n + 4 predictions at the shared timestep: the two null
    // branches first, then per-subtask (target, source) pairs, then the full
    // prompts.
    std::vector<Condition> subtask_conds;
    subtask_conds.reserve(2 * n);
    for (const Subtask& s : plan.subtasks) {
        subtask_conds.push_back(Condition::phrase(s.target_phrase));
        subtask_conds.push_back(Condition::phrase(s.source_phrase));
    }
    std::vector<ScoreBackend::BatchItem> items;
    items.reserve(2 * n + 4);
    items.push_back({&z_t, &null_cond});
    items.push_back({&z_ref_t, &null_cond});
    for (std::size_t k = 0; k < n; ++k) {
        items.push_back({&z_t, &subtask_conds[2 * k]});
        items.push_back({&z_ref_t, &subtask_conds[2 * k + 1]});
    }
    items.push_back({&z_t, &target_full});
    items.push_back({&z_ref_t, &source_full});
    const std::vector<LatentGrid> preds = backend.predict_noise_batch(items, t);

    const LatentGrid& eps_null = preds[0];
    const LatentGrid& eps_null_ref = preds[1];

    const std::vector<Mask> masks = [&] {
        std::vector<Mask> ms;
        ms.reserve(n);
        for (const Subtask& s : plan.subtasks) ms.push_back(s.mask);
        return ms;
    }();
    const std::vector<LatentGrid> weights = overlap_weights(masks, config.overlap_factor);
    const double alpha = alpha_for_timestep(t, schedule, config);

    GradientReport report;
    report.timestep = t;
    report.alpha_used = alpha;
    report.gamma.reserve(n);

    LatentGrid grad(z.channels(), z.height(), z.width(), 0.0);
    const std::size_t plane = z.plane_size();

    for (std::size_t k = 0; k < n; ++k) {
        const Subtask& sub = plan.subtasks[k];
        const LatentGrid guided_target = cfg_combine(preds[2 + 2 * k], eps_null, config.omega);
        const LatentGrid guided_source =
            cfg_combine(preds[2 + 2 * k + 1], eps_null_ref, config.omega);

        const double gamma = sub.penalty_eligible
                                 ? null_text_penalty(guided_target, eps_null, sub.mask, config.eta)
                                 : 1.0;
        report.gamma.push_back(gamma);

        // Accumulate only inside the subtask mask so cells outside the union
        // stay bitwise zero. The overlap weight multiplies last, which keeps
        // the down-weighted contribution an exact overlap_factor multiple of
        // the unweighted one.
        const double coef = gamma * config.loss_weight;
        const LatentGrid& w = weights[k];
        for (int c = 0; c < grad.channels(); ++c) {
            const std::size_t base = std::size_t(c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                if (!sub.mask.at_index(i)) continue;
                grad[base + i] += coef * (guided_target[base + i] - guided_source[base + i]) * w[i];
            }
        }
    }

    if (alpha != 0.0) {
        const LatentGrid guided_target_full = cfg_combine(preds[2 + 2 * n], eps_null, config.omega);
        const LatentGrid guided_source_full =
            cfg_combine(preds[2 + 2 * n + 1], eps_null_ref, config.omega);
        for (int c = 0; c < grad.channels(); ++c) {
            const std::size_t base = std::size_t(c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                if (!plan.union_mask.at_index(i)) continue;
                grad[base + i] +=
                    alpha * (guided_target_full[base + i] - guided_source_full[base + i]);
            }
        }
    }

    double inside = 0.0, outside = 0.0;
    for (int c = 0; c < grad.channels(); ++c) {
        const std::size_t base = std::size_t(c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
            const double v = grad[base + i];
            if (plan.union_mask.at_index(i)) {
                inside += v * v;
            } else {
                outside += v * v;
            }
        }
    }
    report.grad_norm_inside = std::sqrt(inside);
    report.grad_norm_outside = std::sqrt(outside);

    return {std::move(grad), std::move(report)};
}

LatentGrid null_text_divergence_map(const ScoreBackend& backend, const LatentGrid& z, int t,
                                    const LatentGrid& eps, const Condition& cond,
                                    const DiffusionSchedule& schedule, const GasConfig& config) {
    const LatentGrid z_t = perturb(z, t, eps, schedule);
    const Condition null_cond = Condition::null_text();
    const LatentGrid eps_null = backend.predict_noise(z_t, t, null_cond);
    const LatentGrid guided =
        cfg_combine(backend.predict_noise(z_t, t, cond), eps_null, config.omega);

    LatentGrid map(1, z.height(), z.width(), 0.0);
    const std::size_t plane = z.plane_size();
    for (int c = 0; c < z.channels(); ++c) {
        const std::size_t base = std::size_t(c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
            map[i] += std::abs(guided[base + i] - eps_null[base + i]);
        }
    }
    const double inv_channels = 1.0 / double(z.channels());
    for (std::size_t i = 0; i < plane; ++i) map[i] *= inv_channels;
    return map;
}

}  // namespace gas
