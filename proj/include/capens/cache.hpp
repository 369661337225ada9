#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <atomic>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>

namespace capens {

enum class CacheNamespace { TextEmbedding, ImageEmbedding, Captions };

std::string_view to_string(CacheNamespace ns);

struct CacheKey {
    CacheNamespace ns;
    std::string provider_id;
    std::string model_id;
    std::string payload_digest;  // hex digest of the exact bytes sent to the provider

    bool operator==(const CacheKey&) const = default;
};

struct CacheStats {
    std::size_t hits = 0;
    std::size_t misses = 0;
    std::size_t stores = 0;
    std::size_t corrupt = 0;
};

/// Content-addressed on-disk cache. One file per key, each carrying a
/// checksum of its payload. Entries are published by atomic rename, so
/// readers take no locks; writers of the same key are serialized.
class Cache {
public:
    explicit Cache(std::filesystem::path root);

    Cache(const Cache&) = delete;
    Cache& operator=(const Cache&) = delete;

    /// A corrupt entry (bad JSON, wrong key, checksum mismatch) is reported
    /// as a miss and logged as a warning.
    std::optional<nlohmann::json> lookup(const CacheKey& key);
    void store(const CacheKey& key, const nlohmann::json& value);

    std::filesystem::path path_for(const CacheKey& key) const;
    const std::filesystem::path& root() const noexcept { return root_; }

    CacheStats stats() const;

private:
    std::filesystem::path root_;
    std::array<std::mutex, 64> write_locks_;
    std::atomic<std::size_t> hits_{0};
    std::atomic<std::size_t> misses_{0};
    std::atomic<std::size_t> stores_{0};
    std::atomic<std::size_t> corrupt_{0};
};

}  // namespace capens
