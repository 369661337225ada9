#include "capens/error.hpp"
#include "capens/scoring.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

using namespace capens;
using namespace capens::testkit;

namespace {

EmbeddingVector vec(std::vector<double> v) { return EmbeddingVector(std::move(v), "m"); }

}  // namespace

TEST(Judge, Examples) {
    EXPECT_EQ(judge_instance(0.30, 0.20, 0.10), 1);
    EXPECT_EQ(judge_instance(0.20, 0.30, 0.10), 0);
    EXPECT_EQ(judge_instance(0.30, 0.30, 0.10), 0);
    EXPECT_EQ(judge_instance(0.30, 0.10, 0.30), 0);
    EXPECT_EQ(judge_instance(0.5, 0.5, 0.5), 0);
    EXPECT_EQ(judge_instance(-0.1, -0.2, -0.3), 1);
}

TEST(Judge, NonFinite) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double inf = std::numeric_limits<double>::infinity();
    for (auto [a, b, c] : {std::tuple{nan, 0.0, 0.0}, {0.0, nan, 0.0}, {0.0, 0.0, inf}, {-inf, 0.0, 0.0}}) {
        try {
            judge_instance(a, b, c);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::NonFiniteScore);
        }
    }
}

TEST(Judge, MatchesArgmaxOracle) {
    std::mt19937_64 rng(17);
    int ties = 0;
    for (int t = 0; t < 5000; ++t) {
        const bool tie = t % 10 == 0;
        ties += tie;
        auto s = random_triple(rng, tie);
        EXPECT_EQ(judge_instance(s[0], s[1], s[2]), oracle_unique_argmax(s));
    }
    EXPECT_GE(ties, 100);
}

TEST(Judge, InvariantUnderIncreasingTransform) {
    std::mt19937_64 rng(18);
    auto f = [](double x) { return std::exp(3 * x) + 2; };
    for (int t = 0; t < 2000; ++t) {
        auto s = random_triple(rng, t % 7 == 0);
        EXPECT_EQ(judge_instance(s[0], s[1], s[2]), judge_instance(f(s[0]), f(s[1]), f(s[2])));
    }
}

TEST(ScoreCandidates, Examples) {
    std::vector<EmbeddingVector> prompts{vec({1, 0, 0})};
    std::vector<EmbeddingVector> cands{vec({1, 0, 0}), vec({0, 1, 0})};
    auto s = score_candidates(prompts, cands);
    EXPECT_EQ(s, (std::vector<double>{1.0, 0.0}));

    std::vector<EmbeddingVector> none;
    try {
        score_candidates(none, cands);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyPromptSet);
    }
    std::vector<EmbeddingVector> wrong{vec({1, 0})};
    EXPECT_THROW(score_candidates(prompts, wrong), DimensionMismatchError);
}

TEST(ScoreCandidates, BruteForceOracle) {
    std::mt19937_64 rng(19);
    for (int t = 0; t < 200; ++t) {
        const std::size_t dim = 8 + rng() % 120;
        std::vector<std::vector<double>> raw_prompts;
        std::vector<EmbeddingVector> prompts;
        for (int i = 0; i < 5; ++i) {
            raw_prompts.push_back(random_values(rng, dim));
            prompts.push_back(vec(raw_prompts.back()));
        }
        std::vector<std::vector<double>> raw_cands;
        std::vector<EmbeddingVector> cands;
        for (int i = 0; i < 3; ++i) {
            raw_cands.push_back(random_values(rng, dim));
            cands.push_back(vec(raw_cands.back()));
        }
        auto s = score_candidates(prompts, cands);
        ASSERT_EQ(s.size(), 3u);
        for (int i = 0; i < 3; ++i) EXPECT_NEAR(s[i], oracle_mean_cosine(raw_cands[i], raw_prompts), 1e-12);

        std::shuffle(prompts.begin(), prompts.end(), rng);
        auto shuffled = score_candidates(prompts, cands);
        for (int i = 0; i < 3; ++i) EXPECT_NEAR(shuffled[i], s[i], 1e-12);
    }
}
