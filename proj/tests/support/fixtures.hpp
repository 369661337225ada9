#pragma once

#include "capens/captions.hpp"
#include "capens/embedding.hpp"
#include "capens/manifest.hpp"
#include "capens/prompts.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <memory>
#include <vector>

namespace capens::testkit {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

void write_text(const std::string& path, const std::string& contents);

/// Provider backed by in-memory tables; unknown keys raise MissingEmbedding.
class MapProvider final : public EmbeddingProvider {
public:
    explicit MapProvider(std::size_t dim, std::string model = "fixture");

    void set_text(const std::string& text, std::vector<double> v);
    void set_image(const std::string& digest, std::vector<double> v);

    const EmbeddingProviderSpec& spec() const override { return spec_; }
    std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts) override;
    std::vector<EmbeddingVector> embed_images(std::span<const ImageRef> images) override;

    /// Every table entry as embedding-store records.
    std::vector<StoreRecord> records() const;

private:
    EmbeddingProviderSpec spec_;
    std::map<std::string, std::vector<double>> texts_;
    std::map<std::string, std::vector<double>> images_;
};

std::vector<double> random_unit(std::mt19937_64& rng, std::size_t dim, std::size_t from,
                                std::size_t to);

enum class FixtureKind {
    Separable,    // positive = mean of its prompts, negatives orthogonal to every prompt
    Adversarial,  // a negative = mean of the prompts, positive orthogonal
    Random,       // all vectors independent
};

struct Fixture {
    BenchmarkManifest manifest;
    std::map<std::string, std::vector<std::string>> captions;  // CN -> captions
    std::unique_ptr<MapProvider> provider;
};

/// Two-token compound nouns "modN headN", categories cycling either/both/none.
BenchmarkManifest make_manifest(std::size_t n, const std::string& name = "fixture",
                                const std::string& version = "1");

/// Manifest plus embeddings for every prompt the base, reversed and
/// caption-ensemble (up to k_max captions) strategies can produce. Each
/// instance has a direction c in the first half of the dimensions; its
/// prompts are noisy copies of c. Separable puts the positive on c and the
/// negatives in the second half; Adversarial swaps the positive and the first
/// negative.
Fixture make_fixture(std::size_t n, std::size_t dim, FixtureKind kind, std::uint64_t seed,
                     std::size_t k_max = 7);

/// Caption source over a fixed table.
class TableSource final : public CaptionSource {
public:
    explicit TableSource(std::map<std::string, std::vector<std::string>> table)
        : table_(std::move(table)) {}
    CaptionSet captions_for(const CompoundNoun& cn, std::size_t k) override;
    std::string describe() const override { return "table-source"; }

private:
    std::map<std::string, std::vector<std::string>> table_;
};

std::vector<std::string> fixture_captions(const CompoundNoun& cn, std::size_t k);

/// Writes the manifest, a JSON Lines embedding store and a caption table.
struct FixtureFiles {
    std::string manifest;
    std::string store;
    std::string captions;
};

FixtureFiles write_fixture(const Fixture& f, const TempDir& dir);

}  // namespace capens::testkit
