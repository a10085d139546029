#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gas {

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::string base64_encode(const std::string& bytes);

// Throws ParseError on characters outside the standard alphabet or bad padding.
std::vector<std::uint8_t> base64_decode(const std::string& text);

}  // namespace gas
