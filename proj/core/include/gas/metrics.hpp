#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "gas/edit_plan.hpp"
#include "gas/image.hpp"

namespace gas {

// Embedding adapter contract: unit-norm vectors, identical dimension for
// image and text, and whitespace-insensitive text embedding (runs of
// whitespace are collapsed before encoding).
class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    virtual std::vector<double> embed_image(const Image& region) const = 0;
    virtual std::vector<double> embed_text(const std::string& text) const = 0;
    virtual int dimension() const = 0;
};

// Perceptual distance adapter contract: nonnegative, zero for identical
// images.
class PerceptualBackend {
public:
    virtual ~PerceptualBackend() = default;
    virtual double distance(const Image& a, const Image& b) const = 0;
};

struct MetricReport {
    double clip_full = 0.0;
    double clip_masked = 0.0;
    double lpips = 0.0;
    std::vector<std::pair<std::string, double>> per_subtask;
};

// 100 * cosine(embed_image(full image), embed_text(text)).
double clip_score(const Image& image, const std::string& text, const EmbeddingBackend& embedder);

// Mean over subtasks of the clip score between the tight pixel crop of each
// subtask mask and its target phrase. Masks live at latent resolution; their
// bounds are scaled up to pixels before cropping.
double masked_clip_score(const Image& image, const EditPlan& plan,
                         const EmbeddingBackend& embedder);

// Backend-delegated perceptual distance; identical images score 0 under any
// conforming backend.
double lpips_score(const Image& image_a, const Image& image_b,
                   const PerceptualBackend& backend);

MetricReport evaluate_edit(const Image& edited, const Image& source, const EditPlan& plan,
                           const EmbeddingBackend& embedder, const PerceptualBackend& perceptual);

// Deterministic procedural mock: every distinct normalized input hashes to a
// reproducible unit vector, so identical crops and identical (normalized)
// texts embed identically on every platform.
class HashEmbeddingBackend : public EmbeddingBackend {
public:
    explicit HashEmbeddingBackend(int dimension = 32);
    std::vector<double> embed_image(const Image& region) const override;
    std::vector<double> embed_text(const std::string& text) const override;
    int dimension() const override { return dimension_; }

private:
    int dimension_;
};

// Mock perceptual distance: mean absolute difference of pixel values scaled
// to [0, 1].
class MeanAbsDiffPerceptual : public PerceptualBackend {
public:
    double distance(const Image& a, const Image& b) const override;
};

// Reference scores of the full-scale Visual Genome benchmark protocol
// (Stable Diffusion + GPT-4V + groundingDINO, 300 images). Recorded for
// documentation; not reproducible by the desk-scale test suite.
namespace benchmark_reference {
inline constexpr double kLpips = 0.3668;
inline constexpr double kClip = 30.49;
inline constexpr double kMaskedClip = 25.07;
inline constexpr double kDdsLpips = 0.4022;
inline constexpr double kDdsMaskedClip = 24.47;
}  // namespace benchmark_reference

}  // namespace gas
