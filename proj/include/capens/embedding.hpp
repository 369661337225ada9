#pragma once

#include "capens/manifest.hpp"
#include "capens/vecmath.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace capens {

class Cache;

enum class ProviderKind { FileStore, Http, SyntheticRandom, SyntheticHash };

std::string_view to_string(ProviderKind kind);

struct EmbeddingProviderSpec {
    ProviderKind kind = ProviderKind::SyntheticHash;
    std::optional<std::string> endpoint;  // http: base URL of the embedding service
    std::optional<std::string> path;      // file-store: JSON Lines file
    std::string model_id = "synthetic";
    std::size_t dim = 64;
    std::optional<std::uint64_t> seed;  // synthetic kinds

    /// Throws Error(InvalidArgument) on a broken spec.
    void validate() const;

    /// Stable identity used in cache keys and reports; excludes the model.
    std::string provider_id() const;

    /// Compact form "kind[:key=value,...]" with keys endpoint, path, model,
    /// dim, seed; e.g. "synthetic-hash:dim=64,seed=7".
    static EmbeddingProviderSpec parse(std::string_view compact);
};

/// A source of text and image embeddings. Implementations are safe to call
/// from several threads at once.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    virtual const EmbeddingProviderSpec& spec() const = 0;

    /// One vector per text, in order.
    virtual std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts) = 0;

    /// One vector per image, in order, keyed by image content.
    virtual std::vector<EmbeddingVector> embed_images(std::span<const ImageRef> images) = 0;
};

/// Builds the provider for a spec. With a cache, every result is written
/// through it and served from it on later calls.
std::unique_ptr<EmbeddingProvider> make_provider(const EmbeddingProviderSpec& spec,
                                                 Cache* cache = nullptr);

/// Hex SHA-256 identifying an image's content: the manifest hash when given,
/// otherwise the digest of the file bytes. Throws Error(ProviderUnavailable)
/// naming the uri when the file cannot be read.
std::string image_digest(const ImageRef& image);

/// Bytes behind an image uri (plain path or file:// URL).
std::string read_image_bytes(const ImageRef& image);

/// One record of the JSON Lines embedding store.
struct StoreRecord {
    std::string ns;  // "text" | "image"
    std::string model;
    std::string key;  // prompt text or image sha256
    std::vector<double> values;
};

std::string to_jsonl(const StoreRecord& record);

}  // namespace capens
