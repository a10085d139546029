#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace gas {

// Deterministic sampling stream for (timestep, noise) draws. mt19937_64 has a
// standard-mandated sequence, and the uniform/normal mappings below avoid
// std::*_distribution, whose outputs differ between standard libraries, so a
// seed reproduces bit-identical draws on every platform.
class SampleRng {
public:
    explicit SampleRng(std::uint64_t seed) : engine_(seed) {}

    // Independent stream for one job of a batch, mixed from (seed, job_id).
    static SampleRng for_job(std::uint64_t seed, std::string_view job_id);

    // Uniform integer in [lo, hi], both inclusive.
    int uniform_int(int lo, int hi);

    // Uniform double in [0, 1), 53-bit resolution.
    double uniform01();

    // Standard normal via Box-Muller; generates pairs and caches the spare.
    double normal();

    std::uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace gas
