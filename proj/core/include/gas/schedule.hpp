#pragma once

#include <vector>

namespace gas {

// Discrete forward-process schedule: cumulative signal coefficients
// alpha_bar[t], strictly decreasing in t, each in (0, 1].
class DiffusionSchedule {
public:
    // Linear beta ramp, the convention of the latent-diffusion family this
    // engine drives. alpha_bar[t] = prod_{i<=t} (1 - beta_i).
    static DiffusionSchedule linear_beta(int num_timesteps = 1000,
                                         double beta_start = 8.5e-4,
                                         double beta_end = 1.2e-2);

    // Injectable schedule for tests; validates monotonicity and range.
    static DiffusionSchedule from_alpha_bar(std::vector<double> alpha_bar);

    int num_timesteps() const { return int(alpha_bar_.size()); }
    double alpha_bar(int t) const;
    // Signal-to-noise ratio alpha_bar / (1 - alpha_bar); strictly decreasing.
    double snr(int t) const;

private:
    std::vector<double> alpha_bar_;
};

// Index of the equal-width timestep band containing t; band 0 holds the
// smallest timesteps (highest SNR).
int snr_band(int t, const DiffusionSchedule& schedule, int num_bands);

}  // namespace gas
