#include "capens/evaluation.hpp"

#include "capens/error.hpp"
#include "parallel.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <numeric>
#include <optional>
#include <unordered_map>
#include <unordered_set>

namespace capens {

namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Serves prefixes of caption sets fetched up front.
class PrefixCaptionSource final : public CaptionSource {
public:
    explicit PrefixCaptionSource(std::string describe) : describe_(std::move(describe)) {}

    void add(const CompoundNoun& cn, CaptionSet set) { sets_.insert_or_assign(cn.lowered(), std::move(set)); }

    CaptionSet captions_for(const CompoundNoun& cn, std::size_t k) override {
        auto it = sets_.find(cn.lowered());
        if (it == sets_.end()) throw InsufficientCaptionsError(cn.text(), 0, k);
        return it->second.prefix(k);
    }

    std::string describe() const override { return describe_; }

private:
    std::string describe_;
    std::unordered_map<std::string, CaptionSet> sets_;
};

}  // namespace

void aggregate(EvaluationReport& report) {
    report.per_category.clear();
    std::vector<double> win_sims;
    std::map<Category, std::vector<double>> cat_sims;
    for (const auto& rec : report.per_instance) {
        auto& stats = report.per_category[rec.category];
        ++stats.count;
        if (rec.score.win) {
            win_sims.push_back(rec.score.s_pos);
            cat_sims[rec.category].push_back(rec.score.s_pos);
        } else {
            ++stats.errors;
        }
    }
    auto sorted_sum = [](std::vector<double>& v) {
        std::sort(v.begin(), v.end());
        return std::accumulate(v.begin(), v.end(), 0.0);
    };
    const auto n = report.per_instance.size();
    const auto wins = win_sims.size();
    report.accuracy = n ? 100.0 * static_cast<double>(wins) / static_cast<double>(n) : 0.0;
    report.mean_winning_similarity.reset();
    if (wins) report.mean_winning_similarity = sorted_sum(win_sims) / static_cast<double>(wins);
    for (auto& [cat, stats] : report.per_category) {
        const auto w = stats.count - stats.errors;
        stats.accuracy = 100.0 * static_cast<double>(w) / static_cast<double>(stats.count);
        if (w) stats.mean_winning_similarity = sorted_sum(cat_sims[cat]) / static_cast<double>(w);
    }
}

EvaluationReport run_benchmark(const BenchmarkManifest& manifest, const PromptStrategy& strategy,
                               EmbeddingProvider& provider, CaptionSource* captions,
                               const RunOptions& options) {
    const PromptBuilder builder(strategy, captions);

    EvaluationReport report;
    report.benchmark_name = manifest.name;
    report.benchmark_version = manifest.version;
    report.strategy = builder.describe();
    report.provider_id = provider.spec().provider_id();
    report.model_id = provider.spec().model_id;
    report.meta.seed = options.seed;
    report.meta.k = strategy.k;
    if (options.timestamps) report.meta.started_at = utc_now();

    const auto n = manifest.instances.size();
    std::vector<std::optional<InstanceRecord>> records(n);
    std::vector<std::optional<Error>> failures(n);

    detail::parallel_for(n, options.jobs, [&](std::size_t i) {
        const auto& inst = manifest.instances[i];
        try {
            const auto prompts = builder.build(inst.compound_noun);
            const auto text_vecs = provider.embed_texts(prompts.prompts);
            const std::vector<ImageRef> images{inst.positive, inst.negatives.at(0),
                                               inst.negatives.at(1)};
            const auto image_vecs = provider.embed_images(images);
            const auto s = score_candidates(text_vecs, image_vecs);
            InstanceRecord rec{{inst.id, s[0], s[1], s[2], judge_instance(s[0], s[1], s[2])},
                               inst.compound_noun.text(),
                               inst.category,
                               {}};
            if (options.record_prompts) rec.prompts = prompts.prompts;
            records[i] = std::move(rec);
        } catch (const Error& e) {
            failures[i] = e;
        }
    });

    for (std::size_t i = 0; i < n; ++i) {
        if (failures[i]) {
            const auto& id = manifest.instances[i].id;
            if (!options.fail_soft) throw InstanceError(id, *failures[i]);
            spdlog::warn("instance {} skipped: {}", id, failures[i]->what());
            report.failed_instances.push_back(id);
        } else {
            report.per_instance.push_back(std::move(*records[i]));
        }
    }
    aggregate(report);
    if (options.timestamps) report.meta.finished_at = utc_now();
    return report;
}

CategoryTable category_breakdown(const EvaluationReport& report) {
    CategoryTable table;
    std::size_t wins = 0;
    double sim = 0.0;
    for (Category c : kAllCategories) {
        CategoryStats stats;
        if (auto it = report.per_category.find(c); it != report.per_category.end()) {
            stats = it->second;
        }
        table.total.count += stats.count;
        table.total.errors += stats.errors;
        const auto w = stats.count - stats.errors;
        wins += w;
        if (stats.mean_winning_similarity) sim += *stats.mean_winning_similarity * static_cast<double>(w);
        table.rows.push_back({c, stats});
    }
    if (table.total.count) {
        table.total.accuracy =
            100.0 * static_cast<double>(wins) / static_cast<double>(table.total.count);
    }
    if (wins) table.total.mean_winning_similarity = sim / static_cast<double>(wins);
    return table;
}

double all_negatives_retrieval(const BenchmarkManifest& manifest, const PromptStrategy& strategy,
                               EmbeddingProvider& provider, CaptionSource* captions,
                               const RunOptions& options) {
    const auto images = manifest.all_images();
    std::unordered_set<std::string> ids;
    for (const auto& img : images) {
        if (!ids.insert(img.id).second) {
            throw Error(ErrorCode::DuplicateImageIds, "image id '" + img.id + "' appears twice");
        }
    }
    if (manifest.instances.empty()) return 0.0;

    const PromptBuilder builder(strategy, captions);
    const auto image_vecs = provider.embed_images(images);

    std::vector<int> correct(manifest.instances.size(), 0);
    std::size_t offset = 0;
    std::vector<std::size_t> positive_at(manifest.instances.size());
    for (std::size_t i = 0; i < manifest.instances.size(); ++i) {
        positive_at[i] = offset;
        offset += 1 + manifest.instances[i].negatives.size();
    }

    detail::parallel_for(manifest.instances.size(), options.jobs, [&](std::size_t i) {
        const auto& inst = manifest.instances[i];
        try {
            const auto prompts = builder.build(inst.compound_noun);
            const auto text_vecs = provider.embed_texts(prompts.prompts);
            const auto p = positive_at[i];
            const double s_pos = mean_similarity(image_vecs[p], text_vecs);
            for (std::size_t j = 0; j < image_vecs.size(); ++j) {
                if (j != p && mean_similarity(image_vecs[j], text_vecs) >= s_pos) return;
            }
            correct[i] = 1;
        } catch (const Error& e) {
            throw InstanceError(inst.id, e);
        }
    });
    const auto hits = std::accumulate(correct.begin(), correct.end(), std::size_t{0});
    return 100.0 * static_cast<double>(hits) / static_cast<double>(manifest.instances.size());
}

SweepReport sweep_caption_count(const BenchmarkManifest& manifest, std::size_t k_min,
                                std::size_t k_max, EmbeddingProvider& provider,
                                CaptionSource& captions, const RunOptions& options) {
    if (k_min < 1 || k_min > k_max || k_max > kMaxCaptions) {
        throw Error(ErrorCode::InvalidArgument, "sweep needs 1 <= k_min <= k_max <= 16, got " +
                                                    std::to_string(k_min) + ".." +
                                                    std::to_string(k_max));
    }
    PrefixCaptionSource pool(captions.describe());
    for (const auto& inst : manifest.instances) {
        try {
            pool.add(inst.compound_noun, captions.captions_for(inst.compound_noun, k_max));
        } catch (const TooFewCaptionsError& e) {
            throw InsufficientCaptionsError(inst.compound_noun.text(), e.got(), k_max);
        } catch (const InsufficientCaptionsError& e) {
            throw InsufficientCaptionsError(inst.compound_noun.text(), e.have(), k_max);
        }
    }

    SweepReport sweep{manifest.name, manifest.version, provider.spec().provider_id(),
                      provider.spec().model_id, captions.describe(), {}};
    for (std::size_t k = k_min; k <= k_max; ++k) {
        const auto report =
            run_benchmark(manifest, PromptStrategy::ensemble(k), provider, &pool, options);
        sweep.rows.push_back({k, report.accuracy});
    }
    return sweep;
}

ClassificationReport classify_zero_shot(const std::vector<CompoundNoun>& classes,
                                        const std::vector<LabeledImage>& images,
                                        const PromptStrategy& strategy,
                                        EmbeddingProvider& provider, CaptionSource* captions,
                                        const RunOptions& options) {
    if (classes.empty()) throw Error(ErrorCode::EmptyClassList, "no classes to classify into");
    if (classes.size() < 2) {
        throw Error(ErrorCode::InvalidArgument, "zero-shot classification needs at least 2 classes");
    }
    const PromptBuilder builder(strategy, captions);

    std::vector<std::vector<EmbeddingVector>> class_prompts(classes.size());
    detail::parallel_for(classes.size(), options.jobs, [&](std::size_t c) {
        class_prompts[c] = provider.embed_texts(builder.build(classes[c]).prompts);
    });

    std::vector<ImageRef> refs;
    refs.reserve(images.size());
    for (const auto& li : images) refs.push_back(li.image);
    const auto image_vecs = provider.embed_images(refs);

    ClassificationReport report;
    for (const auto& c : classes) report.classes.push_back(c.text());
    report.predictions.resize(images.size());
    detail::parallel_for(images.size(), options.jobs, [&](std::size_t i) {
        ClassPrediction pred{images[i].image.id, 0, false, {}};
        for (const auto& prompts : class_prompts) {
            pred.scores.push_back(mean_similarity(image_vecs[i], prompts));
        }
        for (std::size_t c = 1; c < pred.scores.size(); ++c) {
            if (pred.scores[c] > pred.scores[pred.predicted]) pred.predicted = c;
        }
        for (std::size_t c = 0; c < pred.scores.size(); ++c) {
            if (c != pred.predicted && pred.scores[c] == pred.scores[pred.predicted]) pred.tie = true;
        }
        report.predictions[i] = std::move(pred);
    });

    std::size_t labeled = 0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (!images[i].label) continue;
        ++labeled;
        if (CompoundNoun(*images[i].label).lowered() ==
            classes[report.predictions[i].predicted].lowered()) {
            ++hits;
        }
    }
    if (labeled) report.top1_accuracy = 100.0 * static_cast<double>(hits) / static_cast<double>(labeled);
    return report;
}

RandomBaselineResult random_baseline(const BenchmarkManifest& manifest, std::size_t trials,
                                     std::uint64_t seed, std::size_t dim, std::size_t jobs) {
    if (trials < 1) throw Error(ErrorCode::InvalidArgument, "random baseline needs >= 1 trial");
    RandomBaselineResult result;
    RunOptions options;
    options.jobs = jobs;
    options.record_prompts = false;
    for (std::size_t t = 0; t < trials; ++t) {
        EmbeddingProviderSpec spec;
        spec.kind = ProviderKind::SyntheticRandom;
        spec.model_id = "random";
        spec.dim = dim;
        spec.seed = splitmix64(seed ^ splitmix64(t));
        auto provider = make_provider(spec);
        result.trial_accuracies.push_back(
            run_benchmark(manifest, PromptStrategy::base(), *provider, nullptr, options).accuracy);
    }
    const double n = static_cast<double>(trials);
    result.mean = std::accumulate(result.trial_accuracies.begin(), result.trial_accuracies.end(), 0.0) / n;
    if (trials > 1) {
        double ss = 0.0;
        for (double a : result.trial_accuracies) ss += (a - result.mean) * (a - result.mean);
        result.standard_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
    return result;
}

}  // namespace capens
