#include "gas/mask.hpp"

#include <algorithm>
#include <utility>

#include "gas/error.hpp"

namespace gas {

Mask::Mask(int height, int width, std::uint8_t fill) : height_(height), width_(width) {
    if (height <= 0 || width <= 0) {
        throw Error(ErrorCode::invalid_argument, "mask dimensions must be positive");
    }
    bits_.assign(std::size_t(height) * width, fill ? 1 : 0);
    area_ = fill ? height * width : 0;
}

Mask Mask::from_bits(int height, int width, std::vector<std::uint8_t> bits) {
    if (height <= 0 || width <= 0) {
        throw Error(ErrorCode::invalid_argument, "mask dimensions must be positive");
    }
    if (bits.size() != std::size_t(height) * width) {
        throw Error(ErrorCode::invalid_argument, "bit count does not match mask shape");
    }
    Mask m;
    m.height_ = height;
    m.width_ = width;
    m.bits_ = std::move(bits);
    m.area_ = 0;
    for (auto& b : m.bits_) {
        b = b ? 1 : 0;
        m.area_ += b;
    }
    return m;
}

Mask Mask::rect(int height, int width, int y0, int x0, int y1, int x1) {
    Mask m(height, width);
    y0 = std::max(0, y0);
    x0 = std::max(0, x0);
    y1 = std::min(height, y1);
    x1 = std::min(width, x1);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) m.set(y, x, true);
    }
    return m;
}

Mask Mask::union_of(const std::vector<Mask>& masks) {
    if (masks.empty()) throw Error(ErrorCode::invalid_argument, "union of zero masks");
    Mask out(masks.front().height(), masks.front().width());
    for (const Mask& m : masks) {
        if (!m.same_shape(out)) {
            throw Error(ErrorCode::invalid_argument, "mask shape mismatch in union");
        }
        for (std::size_t i = 0; i < out.bits_.size(); ++i) {
            if (m.bits_[i] && !out.bits_[i]) {
                out.bits_[i] = 1;
                ++out.area_;
            }
        }
    }
    return out;
}

void Mask::set(int y, int x, bool value) {
    std::uint8_t& cell = bits_[std::size_t(y) * width_ + x];
    area_ += int(value) - int(cell);
    cell = value ? 1 : 0;
}

Mask::Bounds Mask::tight_bounds() const {
    if (area_ == 0) throw Error(ErrorCode::invalid_argument, "tight_bounds of an empty mask");
    int y0 = height_, x0 = width_, y1 = 0, x1 = 0;
    for (int y = 0; y < height_; ++y) {
        for (int x = 0; x < width_; ++x) {
            if (!at(y, x)) continue;
            y0 = std::min(y0, y);
            x0 = std::min(x0, x);
            y1 = std::max(y1, y + 1);
            x1 = std::max(x1, x + 1);
        }
    }
    return {y0, x0, y1, x1};
}

}  // namespace gas
