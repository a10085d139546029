#include "gas/metrics.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

#include "gas/error.hpp"
#include "gas/rng.hpp"
#include "gas/sha256.hpp"

namespace gas {

namespace {

std::string normalize_whitespace(const std::string& text) {
    std::string out;
    bool in_space = true;  // leading whitespace drops
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_space = true;
        } else {
            if (in_space && !out.empty()) out.push_back(' ');
            in_space = false;
            out.push_back(c);
        }
    }
    return out;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty()) {
        throw Error(ErrorCode::invalid_argument, "embedding dimensions disagree");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (!(na > 0.0) || !(nb > 0.0)) {
        throw Error(ErrorCode::invalid_argument, "zero-norm embedding");
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Latent-cell range [c0, c1) scaled up to the covered pixel range.
std::pair<int, int> cell_range_to_pixels(int c0, int c1, int latent, int px) {
    const int p0 = int((long long)(c0)*px / latent);
    const long long hi = (long long)(c1)*px;
    const int p1 = int((hi + latent - 1) / latent);
    return {p0, p1};
}

std::vector<double> hash_unit_vector(const std::string& key, int dimension) {
    // Seed a deterministic stream from the content hash, then draw a gaussian
    // vector and normalize it.
    const std::string hex = Sha256::hash_hex(key);
    std::uint64_t seed = 0;
    for (int i = 0; i < 16; ++i) {
        const char c = hex[i];
        const std::uint64_t nibble =
            (c <= '9') ? std::uint64_t(c - '0') : std::uint64_t(c - 'a' + 10);
        seed = (seed << 4) | nibble;
    }
    SampleRng rng(seed);
    std::vector<double> v(dimension);
    double norm_sq = 0.0;
    do {
        norm_sq = 0.0;
        for (double& x : v) {
            x = rng.normal();
            norm_sq += x * x;
        }
    } while (!(norm_sq > 0.0));
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (double& x : v) x *= inv;
    return v;
}

}  // namespace

double clip_score(const Image& image, const std::string& text, const EmbeddingBackend& embedder) {
    return 100.0 * cosine(embedder.embed_image(image), embedder.embed_text(text));
}

double masked_clip_score(const Image& image, const EditPlan& plan,
                         const EmbeddingBackend& embedder) {
    plan.validate();
    const int latent_h = plan.union_mask.height();
    const int latent_w = plan.union_mask.width();
    double sum = 0.0;
    for (const Subtask& sub : plan.subtasks) {
        if (sub.mask.area() == 0) {
            throw Error(ErrorCode::invalid_argument,
                        "empty mask for subtask '" + sub.source_phrase + "'");
        }
        const Mask::Bounds b = sub.mask.tight_bounds();
        const auto [py0, py1] = cell_range_to_pixels(b.y0, b.y1, latent_h, image.height);
        const auto [px0, px1] = cell_range_to_pixels(b.x0, b.x1, latent_w, image.width);
        const Image region = crop(image, py0, px0, py1, px1);
        sum += 100.0 * cosine(embedder.embed_image(region), embedder.embed_text(sub.target_phrase));
    }
    return sum / double(plan.subtasks.size());
}

double lpips_score(const Image& image_a, const Image& image_b, const PerceptualBackend& backend) {
    if (!image_a.same_dims(image_b)) {
        throw Error(ErrorCode::invalid_argument, "lpips_score: image dimensions differ");
    }
    return backend.distance(image_a, image_b);
}

MetricReport evaluate_edit(const Image& edited, const Image& source, const EditPlan& plan,
                           const EmbeddingBackend& embedder, const PerceptualBackend& perceptual) {
    plan.validate();
    MetricReport report;
    report.clip_full = clip_score(edited, plan.target_prompt, embedder);
    report.lpips = lpips_score(source, edited, perceptual);

    const int latent_h = plan.union_mask.height();
    const int latent_w = plan.union_mask.width();
    double sum = 0.0;
    for (const Subtask& sub : plan.subtasks) {
        const Mask::Bounds b = sub.mask.tight_bounds();
        const auto [py0, py1] = cell_range_to_pixels(b.y0, b.y1, latent_h, edited.height);
        const auto [px0, px1] = cell_range_to_pixels(b.x0, b.x1, latent_w, edited.width);
        const Image region = crop(edited, py0, px0, py1, px1);
        const double score =
            100.0 * cosine(embedder.embed_image(region), embedder.embed_text(sub.target_phrase));
        report.per_subtask.emplace_back(sub.target_phrase, score);
        sum += score;
    }
    report.clip_masked = sum / double(plan.subtasks.size());
    return report;
}

HashEmbeddingBackend::HashEmbeddingBackend(int dimension) : dimension_(dimension) {
    if (dimension < 2) throw Error(ErrorCode::config, "embedding dimension must be >= 2");
}

std::vector<double> HashEmbeddingBackend::embed_image(const Image& region) const {
    std::ostringstream key;
    key << "img " << region.width << "x" << region.height << "\n" << image_sha256(region);
    return hash_unit_vector(key.str(), dimension_);
}

std::vector<double> HashEmbeddingBackend::embed_text(const std::string& text) const {
    return hash_unit_vector("txt\n" + normalize_whitespace(text), dimension_);
}

double MeanAbsDiffPerceptual::distance(const Image& a, const Image& b) const {
    if (!a.same_dims(b)) {
        throw Error(ErrorCode::invalid_argument, "perceptual distance: dimension mismatch");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.rgb.size(); ++i) {
        sum += std::abs(double(a.rgb[i]) - double(b.rgb[i]));
    }
    return sum / (255.0 * double(a.rgb.size()));
}

}  // namespace gas
