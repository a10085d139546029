#include "gas/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gas/error.hpp"

namespace gas {

DiffusionSchedule DiffusionSchedule::linear_beta(int num_timesteps, double beta_start,
                                                 double beta_end) {
    if (num_timesteps < 1) {
        throw Error(ErrorCode::invalid_argument, "schedule needs at least one timestep");
    }
    if (!(beta_start > 0.0) || !(beta_end < 1.0) || !(beta_start <= beta_end)) {
        throw Error(ErrorCode::invalid_argument, "beta range must satisfy 0 < start <= end < 1");
    }
    std::vector<double> alpha_bar(num_timesteps);
    double acc = 1.0;
    for (int t = 0; t < num_timesteps; ++t) {
        const double frac = num_timesteps == 1 ? 0.0 : double(t) / double(num_timesteps - 1);
        const double beta = beta_start + (beta_end - beta_start) * frac;
        acc *= 1.0 - beta;
        alpha_bar[t] = acc;
    }
    return from_alpha_bar(std::move(alpha_bar));
}

DiffusionSchedule DiffusionSchedule::from_alpha_bar(std::vector<double> alpha_bar) {
    if (alpha_bar.empty()) {
        throw Error(ErrorCode::invalid_argument, "schedule needs at least one timestep");
    }
    for (std::size_t t = 0; t < alpha_bar.size(); ++t) {
        const double a = alpha_bar[t];
        if (!std::isfinite(a) || a <= 0.0 || a > 1.0) {
            throw Error(ErrorCode::invalid_argument, "alpha_bar values must lie in (0, 1]");
        }
        if (t > 0 && !(a < alpha_bar[t - 1])) {
            throw Error(ErrorCode::invalid_argument, "alpha_bar must be strictly decreasing");
        }
    }
    if (alpha_bar.size() > 1 && alpha_bar.back() >= 1.0) {
        throw Error(ErrorCode::invalid_argument, "final alpha_bar must be below 1");
    }
    DiffusionSchedule s;
    s.alpha_bar_ = std::move(alpha_bar);
    return s;
}

double DiffusionSchedule::alpha_bar(int t) const {
    if (t < 0 || t >= num_timesteps()) {
        throw Error(ErrorCode::invalid_argument, "timestep out of schedule range");
    }
    return alpha_bar_[t];
}

double DiffusionSchedule::snr(int t) const {
    const double a = alpha_bar(t);
    if (a >= 1.0) return std::numeric_limits<double>::infinity();
    return a / (1.0 - a);
}

int snr_band(int t, const DiffusionSchedule& schedule, int num_bands) {
    if (num_bands < 1) throw Error(ErrorCode::invalid_argument, "num_bands must be >= 1");
    if (t < 0 || t >= schedule.num_timesteps()) {
        throw Error(ErrorCode::invalid_argument, "timestep out of schedule range");
    }
    const long long band = (long long)(t)*num_bands / schedule.num_timesteps();
    return int(std::clamp(band, 0LL, (long long)(num_bands)-1));
}

}  // namespace gas
