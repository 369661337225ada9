#pragma once

#include "capens/captions.hpp"
#include "capens/embedding.hpp"
#include "capens/manifest.hpp"
#include "capens/prompts.hpp"
#include "capens/scoring.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace capens {

struct RunOptions {
    std::size_t jobs = 1;
    bool fail_soft = false;
    std::uint64_t seed = 0;
    bool record_prompts = true;
    bool timestamps = false;  // wall-clock start/finish in the report
};

struct InstanceRecord {
    InstanceScore score;
    std::string compound_noun;
    Category category = Category::Unlabeled;
    std::vector<std::string> prompts;
};

struct CategoryStats {
    std::size_t count = 0;
    std::size_t errors = 0;
    std::optional<double> accuracy;                 // percent, absent when count == 0
    std::optional<double> mean_winning_similarity;  // absent without wins
};

struct RunMetadata {
    std::uint64_t seed = 0;
    std::size_t k = 0;
    std::optional<std::string> started_at;
    std::optional<std::string> finished_at;
};

struct EvaluationReport {
    std::string benchmark_name;
    std::string benchmark_version;
    nlohmann::json strategy;
    std::string provider_id;
    std::string model_id;
    double accuracy = 0.0;  // percent over scored instances
    std::map<Category, CategoryStats> per_category;
    std::optional<double> mean_winning_similarity;
    std::vector<InstanceRecord> per_instance;
    std::vector<std::string> failed_instances;  // fail-soft runs only
    std::optional<double> all_negatives_recall;
    RunMetadata meta;
};

/// Evaluates every instance: prompts, embeddings, mean-similarity scores and
/// the strict win rule. Provider and data errors are rethrown as
/// InstanceError unless options.fail_soft, in which case the failing ids are
/// listed in failed_instances and left out of the aggregates.
EvaluationReport run_benchmark(const BenchmarkManifest& manifest, const PromptStrategy& strategy,
                               EmbeddingProvider& provider, CaptionSource* captions = nullptr,
                               const RunOptions& options = {});

/// Fills accuracy, per_category and mean_winning_similarity from per_instance.
void aggregate(EvaluationReport& report);

struct CategoryRow {
    Category category;
    CategoryStats stats;
};

/// Rows for either/both/none/unlabeled, in that order, then the total.
struct CategoryTable {
    std::vector<CategoryRow> rows;
    CategoryStats total;
};

CategoryTable category_breakdown(const EvaluationReport& report);

/// Ranks every manifest image for each compound noun; an instance counts when
/// its positive is the unique top-1. Returns percent. Throws
/// Error(DuplicateImageIds) when image ids repeat.
double all_negatives_retrieval(const BenchmarkManifest& manifest, const PromptStrategy& strategy,
                               EmbeddingProvider& provider, CaptionSource* captions = nullptr,
                               const RunOptions& options = {});

struct SweepRow {
    std::size_t k = 0;
    double accuracy = 0.0;

    bool operator==(const SweepRow&) const = default;
};

struct SweepReport {
    std::string benchmark_name;
    std::string benchmark_version;
    std::string provider_id;
    std::string model_id;
    std::string captioner;
    std::vector<SweepRow> rows;  // ascending k
};

/// One caption-ensemble run per k in [k_min, k_max], each using the first k
/// captions of a single k_max-sized set per compound noun.
SweepReport sweep_caption_count(const BenchmarkManifest& manifest, std::size_t k_min,
                                std::size_t k_max, EmbeddingProvider& provider,
                                CaptionSource& captions, const RunOptions& options = {});

struct LabeledImage {
    ImageRef image;
    std::optional<std::string> label;  // true class name, when known
};

struct ClassPrediction {
    std::string image_id;
    std::size_t predicted = 0;  // index into classes
    bool tie = false;
    std::vector<double> scores;  // per class
};

struct ClassificationReport {
    std::vector<std::string> classes;
    std::vector<ClassPrediction> predictions;
    std::optional<double> top1_accuracy;  // percent over labeled images
};

/// Assigns each image the class with the highest mean prompt similarity.
/// Ties go to the earlier class and set the tie flag.
ClassificationReport classify_zero_shot(const std::vector<CompoundNoun>& classes,
                                        const std::vector<LabeledImage>& images,
                                        const PromptStrategy& strategy,
                                        EmbeddingProvider& provider,
                                        CaptionSource* captions = nullptr,
                                        const RunOptions& options = {});

struct RandomBaselineResult {
    double mean = 0.0;            // percent
    double standard_error = 0.0;  // percent
    std::vector<double> trial_accuracies;
};

/// Base-template runs against the synthetic-random provider, re-seeded per
/// trial.
RandomBaselineResult random_baseline(const BenchmarkManifest& manifest, std::size_t trials,
                                     std::uint64_t seed, std::size_t dim = 64,
                                     std::size_t jobs = 1);

}  // namespace capens
