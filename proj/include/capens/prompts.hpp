#pragma once

#include "capens/captions.hpp"
#include "capens/manifest.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace capens {

enum class StrategyKind { BaseTemplate, ReversedTemplate, CaptionEnsemble, PromptsFromFile };

std::string_view to_string(StrategyKind kind);

struct PromptStrategy {
    StrategyKind kind = StrategyKind::BaseTemplate;
    std::size_t k = 0;        // caption-ensemble only
    std::string source_path;  // prompts-from-file only

    static PromptStrategy base() { return {StrategyKind::BaseTemplate, 0, {}}; }
    static PromptStrategy reversed() { return {StrategyKind::ReversedTemplate, 0, {}}; }
    static PromptStrategy ensemble(std::size_t k) { return {StrategyKind::CaptionEnsemble, k, {}}; }
    static PromptStrategy from_file(std::string path) {
        return {StrategyKind::PromptsFromFile, 0, std::move(path)};
    }

    /// Accepts base|reversed|ensemble|file and the long kind names.
    static PromptStrategy parse(std::string_view name, std::size_t k, std::string source_path);

    void validate() const;
    nlohmann::json describe() const;
};

struct PromptSet {
    std::string compound_noun;
    PromptStrategy strategy;
    std::vector<std::string> prompts;
};

/// "A photo of a {cn}" with the CN lower-cased.
std::string build_base_prompt(const CompoundNoun& cn);

/// The base template over the reversed compound. Throws NotTwoTokensError.
std::string build_reversed_prompt(const CompoundNoun& cn);

/// One prompt per caption:
/// "a photo of a {cn}. An example of {cn} in an image is {caption}".
/// Throws Error(CaptionSetMismatch) if the set belongs to another noun.
PromptSet build_example_prompts(const CompoundNoun& cn, const CaptionSet& captions);

/// Prompt lines keyed by compound noun. The index sits next to the prompt
/// file as "<path>.index.json" and maps each compound noun to a half-open,
/// zero-based line range [start, end).
class PromptFile {
public:
    static PromptFile load(const std::string& path);

    /// Throws Error(InvalidArgument) when the noun has no entry.
    std::vector<std::string> prompts_for(const CompoundNoun& cn) const;

    const std::string& digest() const noexcept { return digest_; }

private:
    std::vector<std::string> lines_;
    std::map<std::string, std::pair<std::size_t, std::size_t>> index_;  // lowered CN -> range
    std::string digest_;
};

/// Produces the PromptSet of a compound noun under one strategy.
class PromptBuilder {
public:
    /// `captions` is required for caption-ensemble and ignored otherwise.
    PromptBuilder(PromptStrategy strategy, CaptionSource* captions = nullptr);

    PromptSet build(const CompoundNoun& cn) const;

    const PromptStrategy& strategy() const noexcept { return strategy_; }

    /// Strategy descriptor plus the caption source or prompt-file identity.
    nlohmann::json describe() const;

private:
    PromptStrategy strategy_;
    CaptionSource* captions_;
    std::shared_ptr<const PromptFile> file_;
};

}  // namespace capens
