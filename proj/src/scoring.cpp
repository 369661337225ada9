#include "capens/scoring.hpp"

#include "capens/error.hpp"

#include <cmath>

namespace capens {

std::vector<double> score_candidates(std::span<const EmbeddingVector> prompts,
                                     std::span<const EmbeddingVector> candidates) {
    if (prompts.empty()) throw Error(ErrorCode::EmptyPromptSet, "no prompts to score with");
    std::vector<double> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) out.push_back(mean_similarity(c, prompts));
    return out;
}

int judge_instance(double s_pos, double s_neg1, double s_neg2) {
    if (!std::isfinite(s_pos) || !std::isfinite(s_neg1) || !std::isfinite(s_neg2)) {
        throw Error(ErrorCode::NonFiniteScore, "non-finite similarity score");
    }
    return (s_pos > s_neg1 && s_pos > s_neg2) ? 1 : 0;
}

}  // namespace capens
