#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace capens {

/// Fixed-dimension embedding. Values are held in 64-bit floats regardless of
/// what the provider delivered.
class EmbeddingVector {
public:
    /// Throws Error(InvalidArgument) for an empty vector, Error(NonFinite) for
    /// NaN/inf entries, and Error(InvalidArgument) if `normalized` is claimed
    /// but the norm is off by more than 1e-6.
    EmbeddingVector(std::vector<double> values, std::string model_id, bool normalized = false);

    std::size_t dim() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    const std::string& model_id() const noexcept { return model_id_; }
    bool normalized() const noexcept { return normalized_; }

    double norm() const;

    bool operator==(const EmbeddingVector&) const = default;

private:
    std::vector<double> values_;
    std::string model_id_;
    bool normalized_;
};

double dot(const EmbeddingVector& a, const EmbeddingVector& b);

/// <a,b> / (|a||b|), clamped to [-1, 1].
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

EmbeddingVector l2_normalize(const EmbeddingVector& v);

/// Mean of cosine_similarity(image, p) over all prompts; the divisor is the
/// number of prompts.
double mean_similarity(const EmbeddingVector& image, std::span<const EmbeddingVector> prompts);

}  // namespace capens
