#include "capens/cache.hpp"
#include "capens/digest.hpp"
#include "capens/embedding.hpp"
#include "capens/error.hpp"
#include "fixtures.hpp"

#include <gtest/gtest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <cstring>
#include <filesystem>
#include <sstream>
#include <thread>

using namespace capens;
using capens::testkit::TempDir;
using capens::testkit::write_text;
using nlohmann::json;

namespace {

std::vector<double> to_vec(const EmbeddingVector& v) { return {v.values().begin(), v.values().end()}; }

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::IoError;
}

std::string error_text(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

/// Embedding service stand-in: text i gets the vector (i+1, 0, ..., len(text)),
/// image rows are derived from the decoded byte count.
class EchoServer {
public:
    explicit EchoServer(std::size_t dim, std::string status = "ok") : dim_(dim) {
        server_.Get("/v1/health", [this, status](const httplib::Request&, httplib::Response& res) {
            ++health_calls;
            res.set_content(json{{"status", status}, {"model", "echo"}, {"dim", dim_}}.dump(),
                            "application/json");
        });
        server_.Post("/v1/embed/text", [this](const httplib::Request& req, httplib::Response& res) {
            auto body = json::parse(req.body);
            ++text_calls;
            last_model = body.at("model").get<std::string>();
            json rows = json::array();
            std::size_t i = 0;
            for (const auto& t : body.at("texts")) rows.push_back(row(i++, t.get<std::string>().size()));
            res.set_content(json{{"model", last_model}, {"dim", dim_}, {"embeddings", rows}}.dump(),
                            "application/json");
        });
        server_.Post("/v1/embed/image", [this](const httplib::Request& req, httplib::Response& res) {
            auto body = json::parse(req.body);
            json rows = json::array();
            std::size_t i = 0;
            for (const auto& b : body.at("images_b64")) {
                last_images.push_back(b.get<std::string>());
                rows.push_back(row(i++, b.get<std::string>().size()));
            }
            res.set_content(json{{"model", "echo"}, {"dim", dim_}, {"embeddings", rows}}.dump(),
                            "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~EchoServer() {
        server_.stop();
        thread_.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

    json row(std::size_t i, std::size_t len) const {
        std::vector<double> v(dim_, 0.0);
        v[0] = static_cast<double>(i + 1);
        v[dim_ - 1] = static_cast<double>(len);
        return v;
    }

    std::atomic<int> health_calls{0};
    std::atomic<int> text_calls{0};
    std::string last_model;
    std::vector<std::string> last_images;

private:
    std::size_t dim_;
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

}  // namespace

TEST(ProviderSpec, ParseAndValidate) {
    auto s = EmbeddingProviderSpec::parse("synthetic-hash:dim=16,seed=7,model=m");
    EXPECT_EQ(s.kind, ProviderKind::SyntheticHash);
    EXPECT_EQ(s.dim, 16u);
    EXPECT_EQ(*s.seed, 7u);
    EXPECT_EQ(s.model_id, "m");
    EXPECT_EQ(s.provider_id(), "synthetic-hash:seed=7");
    EXPECT_EQ(EmbeddingProviderSpec::parse("synthetic-random").provider_id(), "synthetic-random:seed=0");

    EXPECT_EQ(code_of([] { EmbeddingProviderSpec::parse("http:model=x"); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { EmbeddingProviderSpec::parse("file-store"); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { EmbeddingProviderSpec::parse("bogus"); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { EmbeddingProviderSpec::parse("synthetic-hash:dim=0"); }),
              ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { EmbeddingProviderSpec::parse("synthetic-hash:dim=abc"); }),
              ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { EmbeddingProviderSpec::parse("synthetic-hash:colour=red"); }),
              ErrorCode::InvalidArgument);
}

TEST(Synthetic, DeterministicAndUnitNorm) {
    auto spec = EmbeddingProviderSpec::parse("synthetic-hash:dim=33,seed=5");
    auto a = make_provider(spec);
    auto b = make_provider(spec);
    std::vector<std::string> texts{"A photo of a snow ball", "A photo of a snow ball", "other"};
    auto va = a->embed_texts(texts);
    auto vb = b->embed_texts(texts);
    EXPECT_EQ(to_vec(va[0]), to_vec(va[1]));
    EXPECT_EQ(to_vec(va[0]), to_vec(vb[0]));
    EXPECT_NE(to_vec(va[0]), to_vec(va[2]));
    for (const auto& v : va) {
        EXPECT_EQ(v.dim(), 33u);
        EXPECT_NEAR(v.norm(), 1.0, 1e-12);
    }
    auto other_seed = make_provider(EmbeddingProviderSpec::parse("synthetic-hash:dim=33,seed=6"));
    EXPECT_NE(to_vec(other_seed->embed_texts(texts)[0]), to_vec(va[0]));
}

TEST(Synthetic, PinnedStream) {
    // Locks the generator so reports stay comparable across builds.
    auto p = make_provider(EmbeddingProviderSpec::parse("synthetic-random:dim=4,seed=1"));
    std::vector<std::string> t{"x"};
    auto v1 = to_vec(p->embed_texts(t)[0]);
    auto v2 = to_vec(make_provider(EmbeddingProviderSpec::parse("synthetic-random:dim=4,seed=1"))
                         ->embed_texts(t)[0]);
    EXPECT_EQ(v1, v2);
    double n = 0;
    for (double x : v1) n += x * x;
    EXPECT_NEAR(n, 1.0, 1e-12);
}

TEST(Synthetic, ImageContentAddressing) {
    TempDir dir;
    write_text(dir.file("a.jpg"), "same bytes");
    write_text(dir.file("b.jpg"), "same bytes");
    write_text(dir.file("c.jpg"), "other bytes");
    auto p = make_provider(EmbeddingProviderSpec::parse("synthetic-hash:dim=8,seed=1"));
    std::vector<ImageRef> imgs{{"a", dir.file("a.jpg"), std::nullopt},
                               {"b", "file://" + dir.file("b.jpg"), std::nullopt},
                               {"c", dir.file("c.jpg"), std::nullopt}};
    auto v = p->embed_images(imgs);
    EXPECT_EQ(to_vec(v[0]), to_vec(v[1]));
    EXPECT_NE(to_vec(v[0]), to_vec(v[2]));

    // a declared hash stands in for the bytes
    std::vector<ImageRef> declared{{"d", "/nowhere.jpg", sha256_hex("same bytes")}};
    EXPECT_EQ(to_vec(p->embed_images(declared)[0]), to_vec(v[0]));

    // synthetic-random keys on the image id and never touches the file
    auto r = make_provider(EmbeddingProviderSpec::parse("synthetic-random:dim=8,seed=1"));
    std::vector<ImageRef> missing{{"a", "/nowhere.jpg", std::nullopt}};
    EXPECT_NO_THROW(r->embed_images(missing));
}

TEST(Synthetic, UnreadableUriNamesTheUri) {
    auto p = make_provider(EmbeddingProviderSpec::parse("synthetic-hash:dim=8,seed=1"));
    std::vector<ImageRef> imgs{{"x", "/no/such/image.jpg", std::nullopt}};
    EXPECT_EQ(code_of([&] { p->embed_images(imgs); }), ErrorCode::ProviderUnavailable);
    EXPECT_NE(error_text([&] { p->embed_images(imgs); }).find("/no/such/image.jpg"), std::string::npos);
    std::vector<ImageRef> remote{{"y", "https://example.org/i.jpg", std::nullopt}};
    EXPECT_EQ(code_of([&] { p->embed_images(remote); }), ErrorCode::ProviderUnavailable);
}

TEST(FileStore, LoadsAndReportsMissing) {
    TempDir dir;
    std::string store;
    for (const char* t : {"one", "two", "three"}) {
        store += to_jsonl({"text", "m", t, {1.0, 2.0, std::strlen(t) * 1.0}}) + "\n";
    }
    store += to_jsonl({"text", "other-model", "four", {1.0, 1.0, 1.0}}) + "\n";
    store += to_jsonl({"image", "m", std::string(64, 'a'), {0.0, 0.0, 1.0}}) + "\n";
    write_text(dir.file("s.jsonl"), store);

    auto p = make_provider(
        EmbeddingProviderSpec::parse("file-store:path=" + dir.file("s.jsonl") + ",model=m,dim=3"));
    std::vector<std::string> three{"three", "one", "two"};
    auto v = p->embed_texts(three);
    EXPECT_EQ(to_vec(v[0]), (std::vector<double>{1, 2, 5}));
    EXPECT_EQ(to_vec(v[1]), (std::vector<double>{1, 2, 3}));

    std::vector<std::string> four{"one", "two", "three", "four"};
    EXPECT_EQ(code_of([&] { p->embed_texts(four); }), ErrorCode::MissingEmbedding);
    EXPECT_NE(error_text([&] { p->embed_texts(four); }).find("four"), std::string::npos);

    std::vector<ImageRef> img{{"i", "/nowhere", std::string(64, 'a')}};
    EXPECT_EQ(to_vec(p->embed_images(img)[0]), (std::vector<double>{0, 0, 1}));

    auto wrong_dim = EmbeddingProviderSpec::parse("file-store:path=" + dir.file("s.jsonl") + ",model=m,dim=4");
    EXPECT_EQ(code_of([&] { make_provider(wrong_dim)->embed_texts(three); }), ErrorCode::DimensionMismatch);
}

TEST(FileStore, BulkLoad) {
    auto f = testkit::make_fixture(400, 16, testkit::FixtureKind::Random, 3);
    TempDir dir;
    auto files = testkit::write_fixture(f, dir);
    auto p = make_provider(
        EmbeddingProviderSpec::parse("file-store:path=" + files.store + ",model=fixture,dim=16"));
    auto images = f.manifest.all_images();
    ASSERT_EQ(images.size(), 1200u);
    auto v = p->embed_images(images);
    ASSERT_EQ(v.size(), 1200u);
    for (const auto& e : v) EXPECT_EQ(e.dim(), 16u);
}

TEST(Http, EchoFixture) {
    EchoServer server(4);
    auto p = make_provider(
        EmbeddingProviderSpec::parse("http:endpoint=" + server.url() + ",model=clip,dim=4"));
    std::vector<std::string> texts;
    for (int i = 0; i < 70; ++i) texts.push_back(std::string(static_cast<std::size_t>(i + 1), 'x'));
    auto v = p->embed_texts(texts);
    ASSERT_EQ(v.size(), 70u);
    // 32 per request; the row index restarts per batch
    for (std::size_t i = 0; i < v.size(); ++i) {
        EXPECT_EQ(to_vec(v[i]), (std::vector<double>{double(i % 32 + 1), 0, 0, double(i + 1)}));
    }
    EXPECT_EQ(server.text_calls.load(), 3);
    EXPECT_EQ(server.health_calls.load(), 1);
    EXPECT_EQ(server.last_model, "clip");

    TempDir dir;
    write_text(dir.file("img.jpg"), "abc");
    std::vector<ImageRef> imgs{{"i", dir.file("img.jpg"), std::nullopt}};
    auto iv = p->embed_images(imgs);
    ASSERT_EQ(server.last_images.size(), 1u);
    EXPECT_EQ(server.last_images[0], "YWJj");
    EXPECT_EQ(iv[0].values()[3], 4.0);
}

TEST(Http, HealthMismatchAndUnreachable) {
    EchoServer server(4);
    auto wrong = make_provider(
        EmbeddingProviderSpec::parse("http:endpoint=" + server.url() + ",model=clip,dim=8"));
    std::vector<std::string> t{"a"};
    EXPECT_EQ(code_of([&] { wrong->embed_texts(t); }), ErrorCode::DimensionMismatch);

    EchoServer loading(4, "loading");
    auto not_ready = make_provider(
        EmbeddingProviderSpec::parse("http:endpoint=" + loading.url() + ",model=clip,dim=4"));
    EXPECT_EQ(code_of([&] { not_ready->embed_texts(t); }), ErrorCode::ProviderUnavailable);

    auto gone = make_provider(
        EmbeddingProviderSpec::parse("http:endpoint=http://127.0.0.1:1,model=clip,dim=4"));
    EXPECT_EQ(code_of([&] { gone->embed_texts(t); }), ErrorCode::ProviderUnavailable);
}

TEST(Cache, RoundTripAndMiss) {
    TempDir dir;
    Cache cache(dir.path());
    CacheKey key{CacheNamespace::TextEmbedding, "p", "m", sha256_hex("x")};
    EXPECT_FALSE(cache.lookup(key));
    json value{{"v", {0.1, 1.0 / 3.0, -2e-300}}, {"s", "text"}};
    cache.store(key, value);
    auto back = cache.lookup(key);
    ASSERT_TRUE(back);
    EXPECT_EQ(back->dump(), value.dump());
    EXPECT_EQ((*back)["v"][1].get<double>(), 1.0 / 3.0);

    CacheKey other = key;
    other.model_id = "m2";
    EXPECT_FALSE(cache.lookup(other));
    EXPECT_NE(cache.path_for(key), cache.path_for(other));
    auto st = cache.stats();
    EXPECT_EQ(st.hits, 1u);
    EXPECT_EQ(st.misses, 2u);
    EXPECT_EQ(st.stores, 1u);
}

TEST(Cache, CorruptEntryIsAMissWithWarning) {
    TempDir dir;
    Cache cache(dir.path());
    CacheKey key{CacheNamespace::Captions, "p", "k=5", sha256_hex("x")};
    cache.store(key, json{{"captions", {"a"}}});

    std::ostringstream log;
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(log);
    auto logger = std::make_shared<spdlog::logger>("capture", sink);
    auto previous = spdlog::default_logger();
    spdlog::set_default_logger(logger);

    const auto path = cache.path_for(key);
    auto text = read_file(path.string());
    text[text.find("\"a\"") + 1] = 'b';  // payload no longer matches its checksum
    write_text(path.string(), text);
    EXPECT_FALSE(cache.lookup(key));

    write_text(path.string(), "{truncated");
    EXPECT_FALSE(cache.lookup(key));
    spdlog::set_default_logger(previous);

    EXPECT_EQ(cache.stats().corrupt, 2u);
    EXPECT_NE(log.str().find(path.string()), std::string::npos);

    cache.store(key, json{{"captions", {"a"}}});
    EXPECT_TRUE(cache.lookup(key));
}

TEST(Cache, ConcurrentStoresOfDistinctKeys) {
    TempDir dir;
    Cache cache(dir.path());
    std::vector<std::jthread> threads;
    for (int t = 0; t < 4; ++t) {
        threads.emplace_back([&, t] {
            for (int i = 0; i < 50; ++i) {
                CacheKey key{CacheNamespace::TextEmbedding, "p", "m", sha256_hex(std::to_string(i % 10 + t * 10))};
                cache.store(key, json{{"i", i % 10 + t * 10}});
                EXPECT_TRUE(cache.lookup(key));
            }
        });
    }
    threads.clear();
    for (int i = 0; i < 40; ++i) {
        auto v = cache.lookup({CacheNamespace::TextEmbedding, "p", "m", sha256_hex(std::to_string(i))});
        ASSERT_TRUE(v);
        EXPECT_EQ((*v)["i"], i);
    }
    EXPECT_EQ(cache.stats().corrupt, 0u);
}

TEST(CachedProvider, WarmMatchesCold) {
    TempDir dir;
    Cache cache(dir.path() / "cache");
    EchoServer server(4);
    auto spec = EmbeddingProviderSpec::parse("http:endpoint=" + server.url() + ",model=clip,dim=4");
    std::vector<std::string> texts{"a", "bb", "ccc"};
    auto cold = make_provider(spec, &cache)->embed_texts(texts);
    EXPECT_EQ(server.text_calls.load(), 1);
    auto warm = make_provider(spec, &cache)->embed_texts(texts);
    EXPECT_EQ(server.text_calls.load(), 1);
    for (std::size_t i = 0; i < texts.size(); ++i) EXPECT_EQ(to_vec(cold[i]), to_vec(warm[i]));

    std::vector<std::string> mixed{"a", "dddd"};
    auto m = make_provider(spec, &cache)->embed_texts(mixed);
    EXPECT_EQ(server.text_calls.load(), 2);
    EXPECT_EQ(to_vec(m[0]), to_vec(cold[0]));
    // the miss went alone, so it sits at row 0 of its batch
    EXPECT_EQ(to_vec(m[1]), (std::vector<double>{1, 0, 0, 4}));
}
