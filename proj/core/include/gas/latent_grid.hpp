#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gas {

class SampleRng;

// Dense real-valued (channels, height, width) array. Holds the optimized
// latent z, injected noise, and every noise prediction. Plane-shaped results
// (divergence maps, weights) use channels == 1.
class LatentGrid {
public:
    LatentGrid() = default;
    LatentGrid(int channels, int height, int width, double fill = 0.0);

    static LatentGrid from_values(int channels, int height, int width,
                                  std::vector<double> values);
    // Seeded i.i.d. standard normal grid.
    static LatentGrid standard_normal(int channels, int height, int width, SampleRng& rng);

    int channels() const { return channels_; }
    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t size() const { return values_.size(); }
    std::size_t plane_size() const { return std::size_t(height_) * std::size_t(width_); }

    bool same_shape(const LatentGrid& other) const {
        return channels_ == other.channels_ && height_ == other.height_ && width_ == other.width_;
    }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }
    double& at(int c, int y, int x) { return values_[index(c, y, x)]; }
    double at(int c, int y, int x) const { return values_[index(c, y, x)]; }
    std::size_t index(int c, int y, int x) const {
        return (std::size_t(c) * height_ + y) * width_ + x;
    }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    bool all_finite() const;
    double l2_norm() const;
    double max_abs() const;

    LatentGrid& operator+=(const LatentGrid& other);
    LatentGrid& operator-=(const LatentGrid& other);
    LatentGrid& operator*=(double scalar);

    friend bool operator==(const LatentGrid& a, const LatentGrid& b) = default;

private:
    int channels_ = 0;
    int height_ = 0;
    int width_ = 0;
    std::vector<double> values_;
};

LatentGrid operator+(LatentGrid a, const LatentGrid& b);
LatentGrid operator-(LatentGrid a, const LatentGrid& b);
LatentGrid operator*(double scalar, LatentGrid g);

}  // namespace gas
