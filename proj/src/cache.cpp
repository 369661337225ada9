#include "capens/cache.hpp"

#include "capens/digest.hpp"
#include "capens/error.hpp"

#include <spdlog/spdlog.h>

#include <fstream>
#include <sstream>

namespace capens {

using nlohmann::json;

std::string_view to_string(CacheNamespace ns) {
    switch (ns) {
    case CacheNamespace::TextEmbedding: return "text-embedding";
    case CacheNamespace::ImageEmbedding: return "image-embedding";
    case CacheNamespace::Captions: return "captions";
    }
    return "unknown";
}

namespace {

json key_to_json(const CacheKey& key) {
    return json{{"ns", std::string(to_string(key.ns))},
                {"provider", key.provider_id},
                {"model", key.model_id},
                {"digest", key.payload_digest}};
}

}  // namespace

Cache::Cache(std::filesystem::path root) : root_(std::move(root)) {
    std::error_code ec;
    std::filesystem::create_directories(root_, ec);
    if (ec) throw Error(ErrorCode::IoError, "cache directory not writable: " + root_.string());
}

std::filesystem::path Cache::path_for(const CacheKey& key) const {
    std::string material = key.provider_id;
    material += '\0';
    material += key.model_id;
    material += '\0';
    material += key.payload_digest;
    const std::string name = sha256_hex(material);
    return root_ / std::string(to_string(key.ns)) / name.substr(0, 2) / (name + ".json");
}

std::optional<json> Cache::lookup(const CacheKey& key) {
    const auto path = path_for(key);
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        ++misses_;
        return std::nullopt;
    }
    std::ostringstream ss;
    ss << in.rdbuf();

    auto corrupt = [&](const char* why) -> std::optional<json> {
        ++corrupt_;
        ++misses_;
        spdlog::warn("cache entry {} is corrupt ({}); treating as a miss", path.string(), why);
        return std::nullopt;
    };

    json entry = json::parse(ss.str(), nullptr, /*allow_exceptions=*/false);
    if (entry.is_discarded() || !entry.is_object()) return corrupt("unparseable");
    if (!entry.contains("key") || !entry.contains("value") || !entry.contains("checksum")) {
        return corrupt("missing fields");
    }
    if (entry["key"] != key_to_json(key)) return corrupt("key mismatch");
    if (!entry["checksum"].is_string() ||
        entry["checksum"].get<std::string>() != sha256_hex(entry["value"].dump())) {
        return corrupt("checksum mismatch");
    }
    ++hits_;
    return std::move(entry["value"]);
}

void Cache::store(const CacheKey& key, const json& value) {
    const auto path = path_for(key);
    json entry{{"key", key_to_json(key)},
               {"value", value},
               {"checksum", sha256_hex(value.dump())}};
    auto& lock = write_locks_[std::hash<std::string>{}(path.string()) % write_locks_.size()];
    std::lock_guard guard(lock);
    write_file_atomic(path.string(), entry.dump());
    ++stores_;
}

CacheStats Cache::stats() const {
    return {hits_.load(), misses_.load(), stores_.load(), corrupt_.load()};
}

}  // namespace capens
