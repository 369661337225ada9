#pragma once

#include "capens/manifest.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace capens {

class Cache;

inline constexpr std::size_t kMaxCaptions = 16;

/// Caption-generation instruction. "{k}" and "{compound_noun}" are
/// substituted; everything else is sent verbatim.
inline constexpr std::string_view kDefaultInstructionTemplate =
    "Return a list of {k}  diverse captions with a {compound_noun} in a photo. The captions "
    "should be a maximum of 10 words and one-liners. All {k} captions should describe the "
    "compound noun in diverse settings with different verbs and actions being performed with "
    "the compound noun. An example output for \"chicken burger\": ['Sizzling chicken burger "
    "grilling at a lively backyard BBQ.,' 'Chef expertly flipping a juicy chicken burger in a "
    "diner.',' Family enjoying homemade chicken burgers on a sunny picnic.', 'Athlete fueling "
    "up with a protein-packed chicken burger post-workout.', 'Friends sharing a chicken burger "
    "at a vibrant street festival.']. Only return a list of strings and nothing else.";

/// Renders an instruction template for one compound noun (lower-cased).
std::string render_instruction(std::string_view tmpl, const CompoundNoun& cn, std::size_t k);

struct CaptionRequest {
    CompoundNoun compound_noun;
    std::size_t k = 5;
    double temperature = 0.1;
    double top_p = 1.0;
    std::string instruction;

    /// Request with the default instruction rendered for (cn, k).
    static CaptionRequest make(const CompoundNoun& cn, std::size_t k);

    /// Throws Error(InvalidArgument) unless 1 <= k <= 16, temperature >= 0
    /// and 0 < top_p <= 1.
    void validate() const;
};

struct CaptionFlags {
    bool missing_compound_noun = false;  // caption does not mention the CN
    bool over_length = false;            // more than 10 words

    bool any() const { return missing_compound_noun || over_length; }
    bool operator==(const CaptionFlags&) const = default;
};

struct CaptionSet {
    std::string compound_noun;
    std::vector<std::string> captions;
    std::vector<CaptionFlags> flags;  // parallel to captions
    std::string provider_id;
    std::string created_at;  // ISO-8601 UTC

    std::size_t flagged() const;

    /// First k captions. Throws InsufficientCaptionsError when fewer exist.
    CaptionSet prefix(std::size_t k) const;

    nlohmann::json to_json() const;
    static CaptionSet from_json(const nlohmann::json& j);
};

CaptionFlags inspect_caption(std::string_view caption, const CompoundNoun& cn);

/// Extracts a list of strings from a model reply. Accepts JSON arrays and the
/// single-quoted list form; tolerates surrounding prose and code fences.
std::optional<std::vector<std::string>> parse_caption_list(std::string_view reply);

struct ChatRequest {
    std::string user_message;
    double temperature = 0.1;
    double top_p = 1.0;
    std::string compound_noun;  // context for local captioners; not sent over the wire
};

/// Anything that answers a chat-style prompt with text.
class Captioner {
public:
    virtual ~Captioner() = default;
    virtual std::string provider_id() const = 0;
    virtual std::string complete(const ChatRequest& request) = 0;
};

/// Chat-completion endpoint client: POSTs {"model", "messages", "temperature",
/// "top_p"} and reads choices[0].message.content.
class HttpChatCaptioner final : public Captioner {
public:
    HttpChatCaptioner(std::string endpoint, std::string model, int timeout_s = 30);

    std::string provider_id() const override;
    std::string complete(const ChatRequest& request) override;

private:
    std::string endpoint_;
    std::string model_;
    int timeout_s_;
};

/// Answers from a JSON document mapping compound noun -> list of captions.
/// Used to replay captions generated elsewhere.
class TableCaptioner final : public Captioner {
public:
    explicit TableCaptioner(std::string path);

    std::string provider_id() const override;
    std::string complete(const ChatRequest& request) override;

private:
    std::string path_;
    std::string digest_;
    nlohmann::json table_;
};

/// Delegates to a callable; handy for fixtures.
class FunctionCaptioner final : public Captioner {
public:
    using Fn = std::function<std::string(const ChatRequest&)>;

    FunctionCaptioner(std::string id, Fn fn) : id_(std::move(id)), fn_(std::move(fn)) {}

    std::string provider_id() const override { return id_; }
    std::string complete(const ChatRequest& request) override { return fn_(request); }

private:
    std::string id_;
    Fn fn_;
};

/// "http:endpoint=URL,model=NAME" or "file:path=captions.json".
std::unique_ptr<Captioner> make_captioner(std::string_view compact);

struct GenerateOptions {
    std::size_t retries = 3;
};

/// Queries the captioner until it has k distinct non-empty captions or the
/// retry budget is spent. Errors: MalformedCompletion when no reply ever
/// parsed; TooFewCaptions otherwise; ProviderUnavailable from the transport.
CaptionSet generate_captions(Captioner& captioner, const CaptionRequest& request,
                             const GenerateOptions& options = {});

/// Where evaluation gets caption sets from.
class CaptionSource {
public:
    virtual ~CaptionSource() = default;

    /// A set of exactly k captions for cn.
    virtual CaptionSet captions_for(const CompoundNoun& cn, std::size_t k) = 0;

    /// Identity recorded in reports.
    virtual std::string describe() const = 0;
};

struct CaptionLibraryOptions {
    std::string instruction_template{kDefaultInstructionTemplate};
    double temperature = 0.1;
    double top_p = 1.0;
    std::size_t retries = 3;
};

/// Cache-backed caption source. Sets are cached under
/// (compound noun, k, instruction digest, captioner). A lookup for k is also
/// satisfied by a cached larger set, truncated to its first k captions.
class CaptionLibrary final : public CaptionSource {
public:
    /// Either pointer may be null: no captioner means cache-only, no cache
    /// means always generate.
    CaptionLibrary(Captioner* captioner, Cache* cache, CaptionLibraryOptions options = {});

    CaptionSet captions_for(const CompoundNoun& cn, std::size_t k) override;
    std::string describe() const override;

    std::optional<CaptionSet> cached(const CompoundNoun& cn, std::size_t k);

    std::size_t generated() const { return generated_; }
    std::size_t served_from_cache() const { return from_cache_; }

private:
    std::string provider_id() const;

    Captioner* captioner_;
    Cache* cache_;
    CaptionLibraryOptions options_;
    std::atomic<std::size_t> generated_{0};
    std::atomic<std::size_t> from_cache_{0};
};

}  // namespace capens
