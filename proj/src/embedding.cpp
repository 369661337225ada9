#include "capens/embedding.hpp"

#include "capens/cache.hpp"
#include "capens/digest.hpp"
#include "capens/error.hpp"
#include "http_util.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <mutex>
#include <numbers>
#include <random>
#include <unordered_map>

namespace capens {

using nlohmann::json;

std::string_view to_string(ProviderKind kind) {
    switch (kind) {
    case ProviderKind::FileStore: return "file-store";
    case ProviderKind::Http: return "http";
    case ProviderKind::SyntheticRandom: return "synthetic-random";
    case ProviderKind::SyntheticHash: return "synthetic-hash";
    }
    return "unknown";
}

void EmbeddingProviderSpec::validate() const {
    if (dim == 0) throw Error(ErrorCode::InvalidArgument, "provider dim must be positive");
    if (model_id.empty()) throw Error(ErrorCode::InvalidArgument, "provider model must be set");
    switch (kind) {
    case ProviderKind::Http:
        if (!endpoint || endpoint->empty()) {
            throw Error(ErrorCode::InvalidArgument, "http provider requires an endpoint");
        }
        break;
    case ProviderKind::FileStore:
        if (!path || path->empty()) {
            throw Error(ErrorCode::InvalidArgument, "file-store provider requires a path");
        }
        break;
    case ProviderKind::SyntheticRandom:
    case ProviderKind::SyntheticHash:
        if (!seed) throw Error(ErrorCode::InvalidArgument, "synthetic provider requires a seed");
        break;
    }
}

std::string EmbeddingProviderSpec::provider_id() const {
    std::string id(to_string(kind));
    switch (kind) {
    case ProviderKind::Http: return id + ":" + endpoint.value_or("");
    case ProviderKind::FileStore: return id + ":" + path.value_or("");
    case ProviderKind::SyntheticRandom:
    case ProviderKind::SyntheticHash: return id + ":seed=" + std::to_string(seed.value_or(0));
    }
    return id;
}

EmbeddingProviderSpec EmbeddingProviderSpec::parse(std::string_view compact) {
    EmbeddingProviderSpec spec;
    const auto colon = compact.find(':');
    const std::string kind(compact.substr(0, colon));
    if (kind == "file-store") {
        spec.kind = ProviderKind::FileStore;
    } else if (kind == "http") {
        spec.kind = ProviderKind::Http;
    } else if (kind == "synthetic-random") {
        spec.kind = ProviderKind::SyntheticRandom;
        spec.seed = 0;
    } else if (kind == "synthetic-hash") {
        spec.kind = ProviderKind::SyntheticHash;
        spec.seed = 0;
    } else {
        throw Error(ErrorCode::InvalidArgument, "unknown provider kind '" + kind + "'");
    }

    std::string_view rest = colon == std::string_view::npos ? "" : compact.substr(colon + 1);
    while (!rest.empty()) {
        const auto comma = rest.find(',');
        std::string_view item = rest.substr(0, comma);
        rest = comma == std::string_view::npos ? "" : rest.substr(comma + 1);
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorCode::InvalidArgument, "provider option without '=': " + std::string(item));
        }
        const std::string key(item.substr(0, eq));
        const std::string value(item.substr(eq + 1));
        try {
            if (key == "endpoint") spec.endpoint = value;
            else if (key == "path") spec.path = value;
            else if (key == "model") spec.model_id = value;
            else if (key == "dim") spec.dim = std::stoul(value);
            else if (key == "seed") spec.seed = std::stoull(value);
            else throw Error(ErrorCode::InvalidArgument, "unknown provider option '" + key + "'");
        } catch (const std::logic_error&) {
            throw Error(ErrorCode::InvalidArgument, "bad value for provider option " + key);
        }
    }
    spec.validate();
    return spec;
}

std::string read_image_bytes(const ImageRef& image) {
    std::string path = image.uri;
    if (path.rfind("file://", 0) == 0) path = path.substr(7);
    if (path.find("://") != std::string::npos) {
        throw Error(ErrorCode::ProviderUnavailable,
                    "image " + image.id + " at " + image.uri + " is remote; fetch it locally first");
    }
    try {
        return read_file(path);
    } catch (const Error&) {
        throw Error(ErrorCode::ProviderUnavailable,
                    "cannot read image " + image.id + " at " + image.uri);
    }
}

std::string image_digest(const ImageRef& image) {
    if (image.content_hash) return *image.content_hash;
    return sha256_hex(read_image_bytes(image));
}

std::string to_jsonl(const StoreRecord& record) {
    json j{{"ns", record.ns},
           {"model", record.model},
           {"key", record.key},
           {"dim", record.values.size()},
           {"v", record.values}};
    return j.dump();
}

namespace {

/// Unit-norm Gaussian direction drawn from a stream keyed by (seed, ns, key).
/// mt19937_64 is fully specified, and Box-Muller is done by hand so the
/// values do not depend on the standard library's distribution code.
EmbeddingVector synthetic_vector(std::uint64_t seed, std::string_view ns, std::string_view key,
                                 std::size_t dim, const std::string& model) {
    std::string material = std::to_string(seed);
    material += '\0';
    material += ns;
    material += '\0';
    material += key;
    const auto digest = sha256_raw(material);
    std::uint64_t s = 0;
    for (int i = 0; i < 8; ++i) s = (s << 8) | digest[static_cast<std::size_t>(i)];
    std::mt19937_64 rng(s);
    auto uniform = [&rng] {
        // (0, 1], never zero so log() is finite
        return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
    };
    std::vector<double> v(dim);
    for (std::size_t i = 0; i < dim; i += 2) {
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double theta = 2.0 * std::numbers::pi * uniform();
        v[i] = r * std::cos(theta);
        if (i + 1 < dim) v[i + 1] = r * std::sin(theta);
    }
    return l2_normalize(EmbeddingVector(std::move(v), model));
}

class SyntheticProvider final : public EmbeddingProvider {
public:
    explicit SyntheticProvider(EmbeddingProviderSpec spec) : spec_(std::move(spec)) {}

    const EmbeddingProviderSpec& spec() const override { return spec_; }

    std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts) override {
        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        for (const auto& t : texts) {
            const std::string key = by_content() ? sha256_hex(t) : t;
            out.push_back(synthetic_vector(*spec_.seed, "text", key, spec_.dim, spec_.model_id));
        }
        return out;
    }

    std::vector<EmbeddingVector> embed_images(std::span<const ImageRef> images) override {
        std::vector<EmbeddingVector> out;
        out.reserve(images.size());
        for (const auto& img : images) {
            const std::string key = by_content() ? image_digest(img) : img.id;
            out.push_back(synthetic_vector(*spec_.seed, "image", key, spec_.dim, spec_.model_id));
        }
        return out;
    }

private:
    bool by_content() const { return spec_.kind == ProviderKind::SyntheticHash; }

    EmbeddingProviderSpec spec_;
};

class FileStoreProvider final : public EmbeddingProvider {
public:
    explicit FileStoreProvider(EmbeddingProviderSpec spec) : spec_(std::move(spec)) {
        std::ifstream in(*spec_.path);
        if (!in) {
            throw Error(ErrorCode::ProviderUnavailable, "cannot open embedding store " + *spec_.path);
        }
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            json j = json::parse(line, nullptr, false);
            const std::string where = *spec_.path + ":" + std::to_string(lineno);
            if (j.is_discarded() || !j.is_object()) {
                throw Error(ErrorCode::ProviderUnavailable, "malformed store record at " + where);
            }
            try {
                if (j.at("model").get<std::string>() != spec_.model_id) continue;
                const auto ns = j.at("ns").get<std::string>();
                auto values = j.at("v").get<std::vector<double>>();
                const auto dim = j.at("dim").get<std::size_t>();
                if (values.size() != dim) throw DimensionMismatchError(values.size(), dim);
                if (dim != spec_.dim) throw DimensionMismatchError(dim, spec_.dim);
                auto& table = ns == "text" ? texts_ : ns == "image" ? images_ : unknown_ns(where);
                table.insert_or_assign(j.at("key").get<std::string>(), std::move(values));
            } catch (const json::exception& e) {
                throw Error(ErrorCode::ProviderUnavailable,
                            "bad store record at " + where + ": " + e.what());
            }
        }
    }

    const EmbeddingProviderSpec& spec() const override { return spec_; }

    std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts) override {
        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back(find(texts_, t, "text '" + t + "'"));
        return out;
    }

    std::vector<EmbeddingVector> embed_images(std::span<const ImageRef> images) override {
        std::vector<EmbeddingVector> out;
        out.reserve(images.size());
        for (const auto& img : images) {
            out.push_back(find(images_, image_digest(img), "image " + img.id));
        }
        return out;
    }

private:
    using Table = std::unordered_map<std::string, std::vector<double>>;

    [[noreturn]] static Table& unknown_ns(const std::string& where) {
        throw Error(ErrorCode::ProviderUnavailable, "unknown record namespace at " + where);
    }

    EmbeddingVector find(const Table& table, const std::string& key, const std::string& what) const {
        auto it = table.find(key);
        if (it == table.end()) {
            throw Error(ErrorCode::MissingEmbedding,
                        "no stored embedding for " + what + " (model " + spec_.model_id + ")");
        }
        return EmbeddingVector(it->second, spec_.model_id);
    }

    EmbeddingProviderSpec spec_;
    Table texts_;
    Table images_;
};

class HttpProvider final : public EmbeddingProvider {
public:
    static constexpr std::size_t kBatch = 32;

    explicit HttpProvider(EmbeddingProviderSpec spec)
        : spec_(std::move(spec)), endpoint_(detail::split_endpoint(*spec_.endpoint)) {}

    const EmbeddingProviderSpec& spec() const override { return spec_; }

    std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts) override {
        std::vector<EmbeddingVector> out;
        for (std::size_t i = 0; i < texts.size(); i += kBatch) {
            const auto chunk = texts.subspan(i, std::min(kBatch, texts.size() - i));
            json body{{"model", spec_.model_id},
                      {"texts", std::vector<std::string>(chunk.begin(), chunk.end())}};
            append(out, post("/v1/embed/text", body), chunk.size());
        }
        return out;
    }

    std::vector<EmbeddingVector> embed_images(std::span<const ImageRef> images) override {
        std::vector<EmbeddingVector> out;
        for (std::size_t i = 0; i < images.size(); i += kBatch) {
            const auto chunk = images.subspan(i, std::min(kBatch, images.size() - i));
            json payloads = json::array();
            for (const auto& img : chunk) payloads.push_back(base64_encode(read_image_bytes(img)));
            json body{{"model", spec_.model_id}, {"images_b64", std::move(payloads)}};
            append(out, post("/v1/embed/image", body), chunk.size());
        }
        return out;
    }

private:
    void check_health() {
        std::call_once(health_once_, [this] {
            auto cli = detail::make_client(endpoint_, 10);
            auto res = cli->Get(endpoint_.path + "/v1/health");
            if (!res) {
                throw Error(ErrorCode::ProviderUnavailable,
                            "embedding service at " + *spec_.endpoint +
                                " unreachable: " + httplib::to_string(res.error()));
            }
            if (res->status != 200) {
                throw Error(ErrorCode::ProviderUnavailable,
                            "embedding service health returned " + std::to_string(res->status));
            }
            json j = json::parse(res->body, nullptr, false);
            if (j.is_discarded() || j.value("status", "") != "ok") {
                throw Error(ErrorCode::ProviderUnavailable, "embedding service not ready");
            }
            const auto dim = j.value("dim", std::size_t{0});
            if (dim != spec_.dim) throw DimensionMismatchError(dim, spec_.dim);
        });
    }

    json post(const std::string& route, const json& body) {
        check_health();
        auto cli = detail::make_client(endpoint_, 10);
        auto res = cli->Post(endpoint_.path + route, body.dump(), "application/json");
        if (!res) {
            throw Error(ErrorCode::ProviderUnavailable,
                        "POST " + route + " failed: " + httplib::to_string(res.error()));
        }
        if (res->status != 200) {
            throw Error(ErrorCode::ProviderUnavailable, "POST " + route + " returned " +
                                                            std::to_string(res->status) + ": " +
                                                            res->body.substr(0, 200));
        }
        json j = json::parse(res->body, nullptr, false);
        if (j.is_discarded()) {
            throw Error(ErrorCode::ProviderUnavailable, "POST " + route + " returned non-JSON");
        }
        return j;
    }

    void append(std::vector<EmbeddingVector>& out, const json& reply, std::size_t expected) const {
        try {
            const auto dim = reply.at("dim").get<std::size_t>();
            if (dim != spec_.dim) throw DimensionMismatchError(dim, spec_.dim);
            const auto& rows = reply.at("embeddings");
            if (!rows.is_array() || rows.size() != expected) {
                throw Error(ErrorCode::ProviderUnavailable,
                            "expected " + std::to_string(expected) + " embeddings, got " +
                                std::to_string(rows.size()));
            }
            for (const auto& row : rows) {
                auto values = row.get<std::vector<double>>();
                if (values.size() != dim) throw DimensionMismatchError(values.size(), dim);
                out.emplace_back(std::move(values), spec_.model_id);
            }
        } catch (const json::exception& e) {
            throw Error(ErrorCode::ProviderUnavailable,
                        std::string("malformed embedding response: ") + e.what());
        }
    }

    EmbeddingProviderSpec spec_;
    detail::Endpoint endpoint_;
    std::once_flag health_once_;
};

/// Write-through cache in front of another provider. Only misses reach the
/// inner provider, in one batch per call.
class CachedProvider final : public EmbeddingProvider {
public:
    CachedProvider(std::unique_ptr<EmbeddingProvider> inner, Cache& cache)
        : inner_(std::move(inner)), cache_(cache) {}

    const EmbeddingProviderSpec& spec() const override { return inner_->spec(); }

    std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts) override {
        std::vector<std::string> digests;
        digests.reserve(texts.size());
        for (const auto& t : texts) digests.push_back(sha256_hex(t));
        return resolve<std::string>(CacheNamespace::TextEmbedding, texts, digests,
                                    [this](std::span<const std::string> miss) {
                                        return inner_->embed_texts(miss);
                                    });
    }

    std::vector<EmbeddingVector> embed_images(std::span<const ImageRef> images) override {
        std::vector<std::string> digests;
        digests.reserve(images.size());
        for (const auto& img : images) digests.push_back(image_digest(img));
        return resolve<ImageRef>(CacheNamespace::ImageEmbedding, images, digests,
                                 [this](std::span<const ImageRef> miss) {
                                     return inner_->embed_images(miss);
                                 });
    }

private:
    template <typename T, typename Fetch>
    std::vector<EmbeddingVector> resolve(CacheNamespace ns, std::span<const T> items,
                                         const std::vector<std::string>& digests, Fetch fetch) {
        const auto& s = inner_->spec();
        std::vector<std::optional<EmbeddingVector>> slots(items.size());
        std::vector<T> missing;
        std::vector<std::size_t> missing_at;
        for (std::size_t i = 0; i < items.size(); ++i) {
            CacheKey key{ns, s.provider_id(), s.model_id, digests[i]};
            if (auto hit = cache_.lookup(key)) {
                auto values = hit->value("v", std::vector<double>{});
                if (values.size() == s.dim) {
                    slots[i].emplace(std::move(values), s.model_id, hit->value("normalized", false));
                    continue;
                }
            }
            missing.push_back(items[i]);
            missing_at.push_back(i);
        }
        if (!missing.empty()) {
            auto fetched = fetch(std::span<const T>(missing));
            for (std::size_t j = 0; j < fetched.size(); ++j) {
                const auto i = missing_at[j];
                const auto vals = fetched[j].values();
                cache_.store(CacheKey{ns, s.provider_id(), s.model_id, digests[i]},
                             json{{"dim", fetched[j].dim()},
                                  {"normalized", fetched[j].normalized()},
                                  {"v", std::vector<double>(vals.begin(), vals.end())}});
                slots[i].emplace(std::move(fetched[j]));
            }
        }
        std::vector<EmbeddingVector> out;
        out.reserve(items.size());
        for (auto& slot : slots) out.push_back(std::move(*slot));
        return out;
    }

    std::unique_ptr<EmbeddingProvider> inner_;
    Cache& cache_;
};

}  // namespace

std::unique_ptr<EmbeddingProvider> make_provider(const EmbeddingProviderSpec& spec, Cache* cache) {
    spec.validate();
    std::unique_ptr<EmbeddingProvider> p;
    switch (spec.kind) {
    case ProviderKind::FileStore: p = std::make_unique<FileStoreProvider>(spec); break;
    case ProviderKind::Http: p = std::make_unique<HttpProvider>(spec); break;
    case ProviderKind::SyntheticRandom:
    case ProviderKind::SyntheticHash: p = std::make_unique<SyntheticProvider>(spec); break;
    }
    if (cache) p = std::make_unique<CachedProvider>(std::move(p), *cache);
    return p;
}

}  // namespace capens
