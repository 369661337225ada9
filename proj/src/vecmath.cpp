#include "capens/vecmath.hpp"

#include "capens/error.hpp"

#include <algorithm>
#include <cmath>

namespace capens {

namespace {

void require_same_dim(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) throw DimensionMismatchError(a.dim(), b.dim());
}

}  // namespace

EmbeddingVector::EmbeddingVector(std::vector<double> values, std::string model_id,
                                 bool normalized)
    : values_(std::move(values)), model_id_(std::move(model_id)), normalized_(normalized) {
    if (values_.empty()) throw Error(ErrorCode::InvalidArgument, "embedding has zero dimension");
    for (double x : values_) {
        if (!std::isfinite(x)) throw Error(ErrorCode::NonFinite, "embedding has non-finite value");
    }
    if (normalized_ && std::abs(norm() - 1.0) > 1e-6) {
        throw Error(ErrorCode::InvalidArgument, "embedding flagged normalized but norm is " +
                                                    std::to_string(norm()));
    }
}

double EmbeddingVector::norm() const {
    double s = 0.0;
    for (double x : values_) s += x * x;
    return std::sqrt(s);
}

double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
    require_same_dim(a, b);
    double s = 0.0;
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
    return s;
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    require_same_dim(a, b);
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::ZeroVector, "cosine of a zero vector");
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

EmbeddingVector l2_normalize(const EmbeddingVector& v) {
    const double n = v.norm();
    if (n == 0.0) throw Error(ErrorCode::ZeroVector, "cannot normalize a zero vector");
    std::vector<double> out(v.values().begin(), v.values().end());
    for (double& x : out) x /= n;
    return EmbeddingVector(std::move(out), v.model_id(), true);
}

double mean_similarity(const EmbeddingVector& image, std::span<const EmbeddingVector> prompts) {
    if (prompts.empty()) throw Error(ErrorCode::EmptyPromptSet, "no prompts to average over");
    for (const auto& p : prompts) require_same_dim(image, p);
    double sum = 0.0;
    for (const auto& p : prompts) sum += cosine_similarity(image, p);
    return sum / static_cast<double>(prompts.size());
}

}  // namespace capens
