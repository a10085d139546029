#pragma once

#include <cstdint>
#include <vector>

namespace gas {

// Row-major run-length encoding for binary masks. Runs alternate starting
// with the count of zeros, so an all-ones mask encodes as {0, n}.
std::vector<std::uint32_t> rle_encode(const std::vector<std::uint8_t>& bits);

// Throws Error(invalid_argument) when the run total disagrees with
// expected_size.
std::vector<std::uint8_t> rle_decode(const std::vector<std::uint32_t>& runs,
                                     std::size_t expected_size);

}  // namespace gas
