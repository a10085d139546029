#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace gas {

// Streaming SHA-256. Used for cache keys, fixture lookup, and run manifests,
// where a platform-stable content hash is required (std::hash is not).
class Sha256 {
public:
    Sha256();

    void update(std::span<const std::uint8_t> bytes);
    void update(const std::string& bytes);

    // Finalizes and returns the lowercase hex digest. The object must not be
    // updated afterwards.
    std::string hex_digest();

    static std::string hash_hex(const std::string& bytes);
    static std::string hash_hex(std::span<const std::uint8_t> bytes);

private:
    void process_block(const std::uint8_t* block);

    std::uint32_t state_[8];
    std::uint64_t bit_count_ = 0;
    std::uint8_t buffer_[64];
    std::size_t buffer_len_ = 0;
    bool finalized_ = false;
};

}  // namespace gas
