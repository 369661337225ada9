#include "capens/prompts.hpp"

#include "capens/digest.hpp"
#include "capens/error.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace capens {

using nlohmann::json;

std::string_view to_string(StrategyKind kind) {
    switch (kind) {
    case StrategyKind::BaseTemplate: return "base-template";
    case StrategyKind::ReversedTemplate: return "reversed-template";
    case StrategyKind::CaptionEnsemble: return "caption-ensemble";
    case StrategyKind::PromptsFromFile: return "prompts-from-file";
    }
    return "unknown";
}

PromptStrategy PromptStrategy::parse(std::string_view name, std::size_t k, std::string source_path) {
    PromptStrategy s;
    if (name == "base" || name == "base-template") {
        s = base();
    } else if (name == "reversed" || name == "reversed-template") {
        s = reversed();
    } else if (name == "ensemble" || name == "caption-ensemble") {
        s = ensemble(k);
    } else if (name == "file" || name == "prompts-from-file") {
        s = from_file(std::move(source_path));
    } else {
        throw Error(ErrorCode::InvalidArgument, "unknown strategy '" + std::string(name) + "'");
    }
    s.validate();
    return s;
}

void PromptStrategy::validate() const {
    if (kind == StrategyKind::CaptionEnsemble && (k < 1 || k > kMaxCaptions)) {
        throw Error(ErrorCode::InvalidArgument, "caption-ensemble needs 1 <= k <= 16");
    }
    if (kind == StrategyKind::PromptsFromFile && source_path.empty()) {
        throw Error(ErrorCode::InvalidArgument, "prompts-from-file needs a source path");
    }
}

json PromptStrategy::describe() const {
    json j{{"kind", std::string(to_string(kind))}};
    if (kind == StrategyKind::CaptionEnsemble) j["k"] = k;
    if (kind == StrategyKind::PromptsFromFile) j["source"] = source_path;
    return j;
}

std::string build_base_prompt(const CompoundNoun& cn) { return "A photo of a " + cn.lowered(); }

std::string build_reversed_prompt(const CompoundNoun& cn) {
    return build_base_prompt(CompoundNoun(reverse_compound(cn)));
}

PromptSet build_example_prompts(const CompoundNoun& cn, const CaptionSet& captions) {
    if (CompoundNoun(captions.compound_noun).lowered() != cn.lowered()) {
        throw Error(ErrorCode::CaptionSetMismatch, "captions for '" + captions.compound_noun +
                                                       "' used for '" + cn.text() + "'");
    }
    const std::string name = cn.lowered();
    PromptSet set{cn.text(), PromptStrategy::ensemble(captions.captions.size()), {}};
    set.prompts.reserve(captions.captions.size());
    for (const auto& c : captions.captions) {
        set.prompts.push_back("a photo of a " + name + ". An example of " + name +
                              " in an image is " + c);
    }
    return set;
}

PromptFile PromptFile::load(const std::string& path) {
    PromptFile pf;
    const std::string text = read_file(path);
    const std::string index_raw = read_file(path + ".index.json");
    pf.digest_ = sha256_hex(text + '\0' + index_raw);

    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        pf.lines_.push_back(std::move(line));
    }

    json idx = json::parse(index_raw, nullptr, false);
    if (idx.is_discarded() || !idx.is_object()) {
        throw Error(ErrorCode::MalformedJson, "prompt index " + path + ".index.json is not an object");
    }
    for (const auto& [cn, range] : idx.items()) {
        if (!range.is_array() || range.size() != 2 || !range[0].is_number_unsigned() ||
            !range[1].is_number_unsigned()) {
            throw Error(ErrorCode::SchemaViolation, "prompt index entry for '" + cn +
                                                        "' must be [start, end]");
        }
        const auto start = range[0].get<std::size_t>();
        const auto end = range[1].get<std::size_t>();
        if (start >= end || end > pf.lines_.size()) {
            throw Error(ErrorCode::SchemaViolation, "prompt index range for '" + cn +
                                                        "' is empty or out of bounds");
        }
        pf.index_[CompoundNoun(cn).lowered()] = {start, end};
    }
    return pf;
}

std::vector<std::string> PromptFile::prompts_for(const CompoundNoun& cn) const {
    auto it = index_.find(cn.lowered());
    if (it == index_.end()) {
        throw Error(ErrorCode::InvalidArgument, "prompt file has no entry for '" + cn.text() + "'");
    }
    return {lines_.begin() + static_cast<std::ptrdiff_t>(it->second.first),
            lines_.begin() + static_cast<std::ptrdiff_t>(it->second.second)};
}

PromptBuilder::PromptBuilder(PromptStrategy strategy, CaptionSource* captions)
    : strategy_(std::move(strategy)), captions_(captions) {
    strategy_.validate();
    if (strategy_.kind == StrategyKind::CaptionEnsemble && !captions_) {
        throw Error(ErrorCode::InvalidArgument, "caption-ensemble strategy needs a caption source");
    }
    if (strategy_.kind == StrategyKind::PromptsFromFile) {
        file_ = std::make_shared<PromptFile>(PromptFile::load(strategy_.source_path));
    }
}

PromptSet PromptBuilder::build(const CompoundNoun& cn) const {
    switch (strategy_.kind) {
    case StrategyKind::BaseTemplate: return {cn.text(), strategy_, {build_base_prompt(cn)}};
    case StrategyKind::ReversedTemplate: return {cn.text(), strategy_, {build_reversed_prompt(cn)}};
    case StrategyKind::CaptionEnsemble:
        return build_example_prompts(cn, captions_->captions_for(cn, strategy_.k));
    case StrategyKind::PromptsFromFile: return {cn.text(), strategy_, file_->prompts_for(cn)};
    }
    throw Error(ErrorCode::InvalidArgument, "unknown strategy");
}

json PromptBuilder::describe() const {
    json j = strategy_.describe();
    if (strategy_.kind == StrategyKind::CaptionEnsemble) j["captioner"] = captions_->describe();
    if (file_) j["source_digest"] = file_->digest();
    return j;
}

}  // namespace capens
