#include "gas/latent_grid.hpp"

#include <cmath>
#include <utility>

#include "gas/error.hpp"
#include "gas/rng.hpp"

namespace gas {

namespace {
void require_positive_dims(int channels, int height, int width) {
    if (channels <= 0 || height <= 0 || width <= 0) {
        throw Error(ErrorCode::invalid_argument, "latent grid dimensions must be positive");
    }
}
}  // namespace

LatentGrid::LatentGrid(int channels, int height, int width, double fill)
    : channels_(channels), height_(height), width_(width) {
    require_positive_dims(channels, height, width);
    values_.assign(std::size_t(channels) * height * width, fill);
}

LatentGrid LatentGrid::from_values(int channels, int height, int width,
                                   std::vector<double> values) {
    require_positive_dims(channels, height, width);
    if (values.size() != std::size_t(channels) * height * width) {
        throw Error(ErrorCode::invalid_argument, "value count does not match grid shape");
    }
    LatentGrid g;
    g.channels_ = channels;
    g.height_ = height;
    g.width_ = width;
    g.values_ = std::move(values);
    return g;
}

LatentGrid LatentGrid::standard_normal(int channels, int height, int width, SampleRng& rng) {
    LatentGrid g(channels, height, width);
    for (double& v : g.values_) v = rng.normal();
    return g;
}

bool LatentGrid::all_finite() const {
    for (double v : values_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

double LatentGrid::l2_norm() const {
    double sum = 0.0;
    for (double v : values_) sum += v * v;
    return std::sqrt(sum);
}

double LatentGrid::max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

LatentGrid& LatentGrid::operator+=(const LatentGrid& other) {
    if (!same_shape(other)) throw Error(ErrorCode::invalid_argument, "grid shape mismatch");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
}

LatentGrid& LatentGrid::operator-=(const LatentGrid& other) {
    if (!same_shape(other)) throw Error(ErrorCode::invalid_argument, "grid shape mismatch");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
    return *this;
}

LatentGrid& LatentGrid::operator*=(double scalar) {
    for (double& v : values_) v *= scalar;
    return *this;
}

LatentGrid operator+(LatentGrid a, const LatentGrid& b) {
    a += b;
    return a;
}

LatentGrid operator-(LatentGrid a, const LatentGrid& b) {
    a -= b;
    return a;
}

LatentGrid operator*(double scalar, LatentGrid g) {
    g *= scalar;
    return g;
}

}  // namespace gas
