#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace capens {

/// A class name under test, e.g. "snow ball". The original casing is kept in
/// text(); whitespace is collapsed and trimmed on construction.
class CompoundNoun {
public:
    /// Throws Error(SchemaViolation) when the text is blank.
    explicit CompoundNoun(std::string_view raw);

    const std::string& text() const noexcept { return text_; }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }

    /// Lower-cased text, used for every prompt built from this noun.
    std::string lowered() const;

    bool operator==(const CompoundNoun& other) const { return text_ == other.text_; }

private:
    std::string text_;
    std::vector<std::string> tokens_;
};

struct CompoundParts {
    std::string modifier;
    std::string head;
};

/// Throws NotTwoTokensError unless the noun is an open two-token compound.
CompoundParts split_compound(const CompoundNoun& cn);

/// "{head} {modifier}". Throws NotTwoTokensError.
std::string reverse_compound(const CompoundNoun& cn);

enum class Category { Either, Both, None, Unlabeled };

inline constexpr Category kAllCategories[] = {Category::Either, Category::Both, Category::None,
                                              Category::Unlabeled};

/// "either" / "both" / "none" / "unlabeled".
std::string_view to_string(Category c);

struct ImageRef {
    std::string id;
    std::string uri;
    std::optional<std::string> content_hash;  // lowercase hex sha256

    bool operator==(const ImageRef&) const = default;
};

struct BenchmarkInstance {
    std::string id;
    CompoundNoun compound_noun;
    ImageRef positive;
    std::vector<ImageRef> negatives;
    Category category = Category::Unlabeled;
};

struct BenchmarkManifest {
    std::string name;
    std::string version;
    std::vector<BenchmarkInstance> instances;

    /// Positive then negatives, instance by instance.
    std::vector<ImageRef> all_images() const;
};

/// Parses and fully checks a manifest document. Throws Error with codes
/// MalformedJson, SchemaViolation, DuplicateId or BadNegativeCount.
BenchmarkManifest parse_manifest(std::string_view raw);

BenchmarkManifest load_manifest(const std::string& path);

/// Canonical JSON form; parse_manifest(serialize_manifest(m)) reproduces m.
std::string serialize_manifest(const BenchmarkManifest& m);

struct Violation {
    std::string instance_id;  // empty for manifest-wide rules
    std::string rule;
    std::string detail;

    bool operator==(const Violation&) const = default;
};

enum class ManifestProfile {
    Generic,
    Official,  // 400 instances, 1200 distinct images, categories 199/106/95
};

inline constexpr std::size_t kOfficialInstanceCount = 400;
inline constexpr std::size_t kOfficialImageCount = 1200;
inline constexpr std::size_t kOfficialEither = 199;
inline constexpr std::size_t kOfficialBoth = 106;
inline constexpr std::size_t kOfficialNone = 95;

/// Lists every invariant violation; an empty list means the manifest is valid.
std::vector<Violation> validate_manifest(const BenchmarkManifest& m,
                                         ManifestProfile profile = ManifestProfile::Generic);

}  // namespace capens
