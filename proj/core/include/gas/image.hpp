#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gas/latent_grid.hpp"

namespace gas {

// 8-bit RGB raster with its provenance path. Binary PPM (P6) is the
// interchange format.
struct Image {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel
    std::string path;

    std::size_t pixel_count() const { return std::size_t(height) * width; }
    std::uint8_t channel(int y, int x, int c) const {
        return rgb[(std::size_t(y) * width + x) * 3 + c];
    }

    bool same_dims(const Image& other) const {
        return height == other.height && width == other.width;
    }
};

Image load_ppm(const std::string& path);
void save_ppm(const std::string& path, const Image& image);

// Crop to rows [y0, y1) x cols [x0, x1); bounds are clamped to the image.
Image crop(const Image& image, int y0, int x0, int y1, int x1);

// Pixel-space latent bridge used when a job optimizes RGB directly: channels
// become (R, G, B) planes scaled to [0, 1]; conversion back clamps to [0, 1]
// and rounds to 8 bits.
LatentGrid image_to_latent(const Image& image);
Image latent_to_image(const LatentGrid& grid);

// Content hash of dimensions plus raw pixels; stable cache/fixture key.
std::string image_sha256(const Image& image);

}  // namespace gas
