#pragma once

#include "capens/vecmath.hpp"

#include <span>
#include <string>
#include <vector>

namespace capens {

struct InstanceScore {
    std::string instance_id;
    double s_pos = 0.0;
    double s_neg1 = 0.0;
    double s_neg2 = 0.0;
    int win = 0;

    bool operator==(const InstanceScore&) const = default;
};

/// Mean prompt similarity of every candidate, in candidate order.
std::vector<double> score_candidates(std::span<const EmbeddingVector> prompts,
                                     std::span<const EmbeddingVector> candidates);

/// 1 iff the positive strictly beats both negatives; ties lose.
/// Throws Error(NonFiniteScore) on NaN or infinite input.
int judge_instance(double s_pos, double s_neg1, double s_neg2);

}  // namespace capens
