#include "gas/score_backend.hpp"

#include <cmath>

#include "gas/error.hpp"

namespace gas {

Condition Condition::phrase(std::string text) {
    Condition c;
    c.kind = ConditionKind::phrase;
    c.text = std::move(text);
    c.validate();
    return c;
}

Condition Condition::full_prompt(std::string text) {
    Condition c;
    c.kind = ConditionKind::full_prompt;
    c.text = std::move(text);
    c.validate();
    return c;
}

void Condition::validate() const {
    if (is_null() != text.empty()) {
        throw Error(ErrorCode::invalid_argument,
                    "null condition must have empty text and vice versa");
    }
}

std::vector<LatentGrid> ScoreBackend::predict_noise_batch(const std::vector<BatchItem>& items,
                                                          int t) const {
    std::vector<LatentGrid> out;
    out.reserve(items.size());
    for (const BatchItem& item : items) out.push_back(predict_noise(*item.z_t, t, *item.cond));
    return out;
}

LatentGrid perturb(const LatentGrid& z, int t, const LatentGrid& eps,
                   const DiffusionSchedule& schedule) {
    if (!z.same_shape(eps)) {
        throw Error(ErrorCode::invalid_argument, "perturb: z and eps shapes differ");
    }
    const double a = schedule.alpha_bar(t);
    const double signal = std::sqrt(a);
    const double noise = std::sqrt(1.0 - a);
    LatentGrid out(z.channels(), z.height(), z.width());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = signal * z[i] + noise * eps[i];
    return out;
}

LatentGrid cfg_combine(const LatentGrid& eps_cond, const LatentGrid& eps_null, double omega) {
    if (!eps_cond.same_shape(eps_null)) {
        throw Error(ErrorCode::invalid_argument, "cfg_combine: shape mismatch");
    }
    if (omega < 0.0) throw Error(ErrorCode::invalid_argument, "cfg_combine: omega must be >= 0");
    if (omega == 1.0) return eps_cond;
    LatentGrid out(eps_cond.channels(), eps_cond.height(), eps_cond.width());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = eps_null[i] + omega * (eps_cond[i] - eps_null[i]);
    }
    return out;
}

void GaussianBackendSpec::validate() const {
    if (!(variance >= 0.0)) {
        throw Error(ErrorCode::invalid_argument, "gaussian spec variance must be >= 0");
    }
    if (null_mean.size() == 0) {
        throw Error(ErrorCode::invalid_argument, "gaussian spec needs a null mean grid");
    }
    for (const auto& [text, mean] : means) {
        if (!mean.same_shape(null_mean)) {
            throw Error(ErrorCode::invalid_argument,
                        "gaussian spec mean shape mismatch for '" + text + "'");
        }
    }
}

LatentGrid analytic_noise(const GaussianBackendSpec& spec, const LatentGrid& z_t, int t,
                          const Condition& cond, const DiffusionSchedule& schedule) {
    const LatentGrid* mean = nullptr;
    if (cond.is_null()) {
        mean = &spec.null_mean;
    } else {
        const auto it = spec.means.find(cond.text);
        if (it == spec.means.end()) {
            throw Error(ErrorCode::condition_not_found,
                        "no registered mean for condition '" + cond.text + "'");
        }
        mean = &it->second;
    }
    if (!z_t.same_shape(*mean)) {
        throw Error(ErrorCode::invalid_argument, "analytic_noise: latent shape mismatch");
    }

    const double a = schedule.alpha_bar(t);
    const double denom = a * spec.variance + (1.0 - a);
    if (!(denom > 0.0)) {
        throw Error(ErrorCode::invalid_argument,
                    "analytic_noise undefined at alpha_bar = 1 with zero variance");
    }
    const double signal = std::sqrt(a);
    const double scale = std::sqrt(1.0 - a) / denom;
    LatentGrid out(z_t.channels(), z_t.height(), z_t.width());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = scale * (z_t[i] - signal * (*mean)[i]);
    }
    return out;
}

AnalyticBackend::AnalyticBackend(GaussianBackendSpec spec, DiffusionSchedule schedule)
    : spec_(std::move(spec)), schedule_(std::move(schedule)) {
    spec_.validate();
}

LatentGrid AnalyticBackend::predict_noise(const LatentGrid& z_t, int t,
                                          const Condition& cond) const {
    return analytic_noise(spec_, z_t, t, cond, schedule_);
}

}  // namespace gas
