#include "gas/rng.hpp"

#include <cmath>
#include <numbers>

#include "gas/error.hpp"
#include "gas/sha256.hpp"

namespace gas {

SampleRng SampleRng::for_job(std::uint64_t seed, std::string_view job_id) {
    Sha256 h;
    char seed_bytes[16];
    for (int i = 0; i < 8; ++i) seed_bytes[i] = char((seed >> (8 * i)) & 0xff);
    h.update(std::string(seed_bytes, 8));
    h.update(std::string(job_id));
    const std::string hex = h.hex_digest();
    std::uint64_t mixed = 0;
    for (int i = 0; i < 16; ++i) {
        const char c = hex[i];
        const std::uint64_t nibble = (c <= '9') ? std::uint64_t(c - '0') : std::uint64_t(c - 'a' + 10);
        mixed = (mixed << 4) | nibble;
    }
    return SampleRng(mixed);
}

int SampleRng::uniform_int(int lo, int hi) {
    if (lo > hi) throw Error(ErrorCode::invalid_argument, "uniform_int: lo > hi");
    const std::uint64_t range = std::uint64_t(hi) - std::uint64_t(lo) + 1;
    // Modulo bias is < 2^-50 for any range that fits an int; acceptable for
    // timestep sampling and fully deterministic.
    return lo + int(engine_() % range);
}

double SampleRng::uniform01() {
    return double(engine_() >> 11) * 0x1.0p-53;
}

double SampleRng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // u1 in (0, 1] so the log is finite.
    const double u1 = (double(engine_() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = double(engine_() >> 11) * 0x1.0p-53;
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

}  // namespace gas
