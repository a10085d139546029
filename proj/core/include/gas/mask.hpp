#pragma once

#include <cstdint>
#include <vector>

namespace gas {

// Binary (height, width) mask at latent resolution. The cached area always
// equals the number of set cells.
class Mask {
public:
    Mask() = default;
    Mask(int height, int width, std::uint8_t fill = 0);

    static Mask from_bits(int height, int width, std::vector<std::uint8_t> bits);
    // Filled axis-aligned rectangle, rows [y0, y1) x cols [x0, x1).
    static Mask rect(int height, int width, int y0, int x0, int y1, int x1);
    static Mask union_of(const std::vector<Mask>& masks);

    int height() const { return height_; }
    int width() const { return width_; }
    int area() const { return area_; }
    std::size_t size() const { return bits_.size(); }
    bool empty_shape() const { return height_ == 0 || width_ == 0; }

    bool at(int y, int x) const { return bits_[std::size_t(y) * width_ + x] != 0; }
    bool at_index(std::size_t i) const { return bits_[i] != 0; }
    void set(int y, int x, bool value);

    const std::vector<std::uint8_t>& bits() const { return bits_; }

    bool same_shape(const Mask& other) const {
        return height_ == other.height_ && width_ == other.width_;
    }

    // Tight bounds of set cells: {y0, x0, y1, x1}, half-open. Throws on an
    // empty mask.
    struct Bounds {
        int y0, x0, y1, x1;
    };
    Bounds tight_bounds() const;

    friend bool operator==(const Mask& a, const Mask& b) = default;

private:
    int height_ = 0;
    int width_ = 0;
    int area_ = 0;
    std::vector<std::uint8_t> bits_;
};

}  // namespace gas
