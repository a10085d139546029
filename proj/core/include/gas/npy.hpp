#pragma once

#include <string>

#include "gas/latent_grid.hpp"

namespace gas {

// Latent file format: NumPy .npy version 1.0, shape (channels, height,
// width), C order, little-endian float32 or float64. Writing always emits
// float64 so a saved latent round-trips bit-exactly.
LatentGrid load_latent_npy(const std::string& path);
void save_latent_npy(const std::string& path, const LatentGrid& grid);

}  // namespace gas
