#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "gas/latent_grid.hpp"
#include "gas/schedule.hpp"

namespace gas {

enum class ConditionKind { phrase, full_prompt, null_text };

// A text condition as presented to the noise predictor. The null condition is
// a first-class value, not an empty-string convention, so adapters can cache
// its embedding via the opaque handle.
struct Condition {
    ConditionKind kind = ConditionKind::null_text;
    std::string text;
    std::shared_ptr<void> embedding_handle;

    static Condition phrase(std::string text);
    static Condition full_prompt(std::string text);
    static Condition null_text() { return Condition{}; }

    bool is_null() const { return kind == ConditionKind::null_text; }
    void validate() const;

    friend bool operator==(const Condition& a, const Condition& b) {
        return a.kind == b.kind && a.text == b.text;
    }
};

// Noise-prediction interface. Implementations must be deterministic in
// (z_t, t, cond) and safe for concurrent read-only use.
class ScoreBackend {
public:
    virtual ~ScoreBackend() = default;

    virtual LatentGrid predict_noise(const LatentGrid& z_t, int t, const Condition& cond) const = 0;

    // Batched entry point for adapters that amortize model calls; semantics
    // are identical to predicting each item in order.
    struct BatchItem {
        const LatentGrid* z_t;
        const Condition* cond;
    };
    virtual std::vector<LatentGrid> predict_noise_batch(const std::vector<BatchItem>& items,
                                                        int t) const;
};

// Forward perturbation z_t = sqrt(alpha_bar_t) z + sqrt(1 - alpha_bar_t) eps.
LatentGrid perturb(const LatentGrid& z, int t, const LatentGrid& eps,
                   const DiffusionSchedule& schedule);

// Guided prediction eps_null + omega * (eps_cond - eps_null); omega = 1
// returns eps_cond bit-exactly.
LatentGrid cfg_combine(const LatentGrid& eps_cond, const LatentGrid& eps_null, double omega);

// Parameters of the exact Gaussian oracle: per-condition data law
// N(mean, variance I). variance = 0 is the deterministic-data limit.
struct GaussianBackendSpec {
    std::map<std::string, LatentGrid> means;
    double variance = 1.0;
    LatentGrid null_mean;

    void validate() const;
};

// Posterior-mean noise prediction for the Gaussian data law: the exact
// minimizer of the denoising loss in expectation,
//   sqrt(1 - a) (z_t - sqrt(a) mean) / (a variance + 1 - a),  a = alpha_bar_t.
LatentGrid analytic_noise(const GaussianBackendSpec& spec, const LatentGrid& z_t, int t,
                          const Condition& cond, const DiffusionSchedule& schedule);

// ScoreBackend wrapper over analytic_noise; the repository's test oracle.
class AnalyticBackend : public ScoreBackend {
public:
    AnalyticBackend(GaussianBackendSpec spec, DiffusionSchedule schedule);

    LatentGrid predict_noise(const LatentGrid& z_t, int t, const Condition& cond) const override;

    const GaussianBackendSpec& spec() const { return spec_; }
    const DiffusionSchedule& schedule() const { return schedule_; }

private:
    GaussianBackendSpec spec_;
    DiffusionSchedule schedule_;
};

}  // namespace gas
