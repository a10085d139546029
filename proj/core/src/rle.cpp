#include "gas/rle.hpp"

#include "gas/error.hpp"

namespace gas {

std::vector<std::uint32_t> rle_encode(const std::vector<std::uint8_t>& bits) {
    std::vector<std::uint32_t> runs;
    std::uint8_t current = 0;
    std::uint32_t count = 0;
    for (std::uint8_t b : bits) {
        const std::uint8_t v = b ? 1 : 0;
        if (v == current) {
            ++count;
        } else {
            runs.push_back(count);
            current = v;
            count = 1;
        }
    }
    runs.push_back(count);
    if (bits.empty()) runs.clear();
    return runs;
}

std::vector<std::uint8_t> rle_decode(const std::vector<std::uint32_t>& runs,
                                     std::size_t expected_size) {
    std::vector<std::uint8_t> bits;
    bits.reserve(expected_size);
    std::uint8_t current = 0;
    for (std::uint32_t run : runs) {
        bits.insert(bits.end(), run, current);
        current = current ? 0 : 1;
        if (bits.size() > expected_size) break;
    }
    if (bits.size() != expected_size) {
        throw Error(ErrorCode::invalid_argument, "run-length totals do not match mask size");
    }
    return bits;
}

}  // namespace gas
