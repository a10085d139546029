#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gas/score_backend.hpp"

namespace gas {

// Wire codec for latents: float32, little-endian, C order.
std::string latent_to_base64_f32(const LatentGrid& grid);
LatentGrid latent_from_base64_f32(const std::string& payload, int channels, int height,
                                  int width);

// Adapter for a real model behind POST <endpoint>/predict_noise with body
//   {latent, shape: [C, H, W], timestep, text, is_null}
// and a response mirroring the latent encoding. Transport failures are
// retried once and then raised as BackendError with the attempt count.
class RemoteBackend : public ScoreBackend {
public:
    explicit RemoteBackend(std::string endpoint);

    LatentGrid predict_noise(const LatentGrid& z_t, int t, const Condition& cond) const override;

private:
    std::string endpoint_;
};

}  // namespace gas
