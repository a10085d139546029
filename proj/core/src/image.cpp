#include "gas/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gas/error.hpp"
#include "gas/sha256.hpp"

namespace gas {

namespace {

// Reads the next whitespace-delimited token, skipping '#' comments.
std::string next_token(std::istream& in) {
    std::string token;
    while (in) {
        const int c = in.get();
        if (c == EOF) break;
        if (c == '#') {
            std::string line;
            std::getline(in, line);
            continue;
        }
        if (std::isspace(c)) {
            if (!token.empty()) return token;
            continue;
        }
        token.push_back(char(c));
    }
    return token;
}

}  // namespace

Image load_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::invalid_argument, "cannot open image: " + path);

    if (next_token(in) != "P6") throw ParseError("image must be binary PPM (P6): " + path, "");
    const int width = std::stoi(next_token(in));
    const int height = std::stoi(next_token(in));
    const int maxval = std::stoi(next_token(in));
    if (width <= 0 || height <= 0) throw ParseError("PPM has non-positive dimensions", "");
    if (maxval != 255) throw ParseError("only 8-bit PPM (maxval 255) is supported", "");

    Image img;
    img.width = width;
    img.height = height;
    img.path = path;
    img.rgb.resize(std::size_t(width) * height * 3);
    in.read(reinterpret_cast<char*>(img.rgb.data()), std::streamsize(img.rgb.size()));
    if (!in) throw ParseError("truncated PPM payload: " + path, "");
    return img;
}

void save_ppm(const std::string& path, const Image& image) {
    if (image.width <= 0 || image.height <= 0 ||
        image.rgb.size() != std::size_t(image.width) * image.height * 3) {
        throw Error(ErrorCode::invalid_argument, "image buffer does not match its dimensions");
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::invalid_argument, "cannot write image: " + path);
    out << "P6\n" << image.width << " " << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.rgb.data()), std::streamsize(image.rgb.size()));
    if (!out) throw Error(ErrorCode::invalid_argument, "failed writing image: " + path);
}

Image crop(const Image& image, int y0, int x0, int y1, int x1) {
    y0 = std::clamp(y0, 0, image.height);
    y1 = std::clamp(y1, 0, image.height);
    x0 = std::clamp(x0, 0, image.width);
    x1 = std::clamp(x1, 0, image.width);
    if (y1 <= y0 || x1 <= x0) {
        throw Error(ErrorCode::invalid_argument, "empty crop region");
    }
    Image out;
    out.height = y1 - y0;
    out.width = x1 - x0;
    out.path = image.path;
    out.rgb.resize(std::size_t(out.height) * out.width * 3);
    for (int y = 0; y < out.height; ++y) {
        const auto* src = &image.rgb[(std::size_t(y0 + y) * image.width + x0) * 3];
        std::copy(src, src + std::size_t(out.width) * 3,
                  &out.rgb[std::size_t(y) * out.width * 3]);
    }
    return out;
}

LatentGrid image_to_latent(const Image& image) {
    if (image.width <= 0 || image.height <= 0) {
        throw Error(ErrorCode::invalid_argument, "empty image");
    }
    LatentGrid grid(3, image.height, image.width);
    const std::size_t plane = grid.plane_size();
    for (std::size_t i = 0; i < plane; ++i) {
        for (int c = 0; c < 3; ++c) {
            grid[std::size_t(c) * plane + i] = double(image.rgb[i * 3 + c]) / 255.0;
        }
    }
    return grid;
}

Image latent_to_image(const LatentGrid& grid) {
    if (grid.channels() != 3) {
        throw Error(ErrorCode::invalid_argument, "pixel-space latent must have 3 channels");
    }
    Image img;
    img.height = grid.height();
    img.width = grid.width();
    img.rgb.resize(grid.plane_size() * 3);
    const std::size_t plane = grid.plane_size();
    for (std::size_t i = 0; i < plane; ++i) {
        for (int c = 0; c < 3; ++c) {
            const double v = std::clamp(grid[std::size_t(c) * plane + i], 0.0, 1.0);
            img.rgb[i * 3 + c] = std::uint8_t(std::lround(v * 255.0));
        }
    }
    return img;
}

std::string image_sha256(const Image& image) {
    Sha256 h;
    std::ostringstream head;
    head << "rgb8 " << image.width << "x" << image.height << "\n";
    h.update(head.str());
    h.update(std::span<const std::uint8_t>(image.rgb.data(), image.rgb.size()));
    return h.hex_digest();
}

}  // namespace gas
