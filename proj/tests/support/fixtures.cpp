#include "fixtures.hpp"

#include "capens/digest.hpp"
#include "capens/error.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>

namespace capens::testkit {

namespace fs = std::filesystem;

TempDir::TempDir() {
    static std::atomic<unsigned> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = fs::temp_directory_path() /
            ("capens-test-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

void write_text(const std::string& path, const std::string& contents) {
    fs::create_directories(fs::path(path).parent_path());
    std::ofstream out(path, std::ios::binary);
    out << contents;
}

MapProvider::MapProvider(std::size_t dim, std::string model) {
    spec_.kind = ProviderKind::FileStore;
    spec_.path = "memory";
    spec_.model_id = std::move(model);
    spec_.dim = dim;
}

void MapProvider::set_text(const std::string& text, std::vector<double> v) {
    texts_[text] = std::move(v);
}

void MapProvider::set_image(const std::string& digest, std::vector<double> v) {
    images_[digest] = std::move(v);
}

std::vector<EmbeddingVector> MapProvider::embed_texts(std::span<const std::string> texts) {
    std::vector<EmbeddingVector> out;
    for (const auto& t : texts) {
        auto it = texts_.find(t);
        if (it == texts_.end()) throw Error(ErrorCode::MissingEmbedding, "no text '" + t + "'");
        out.emplace_back(it->second, spec_.model_id);
    }
    return out;
}

std::vector<EmbeddingVector> MapProvider::embed_images(std::span<const ImageRef> images) {
    std::vector<EmbeddingVector> out;
    for (const auto& img : images) {
        auto it = images_.find(image_digest(img));
        if (it == images_.end()) throw Error(ErrorCode::MissingEmbedding, "no image " + img.id);
        out.emplace_back(it->second, spec_.model_id);
    }
    return out;
}

std::vector<StoreRecord> MapProvider::records() const {
    std::vector<StoreRecord> out;
    for (const auto& [k, v] : texts_) out.push_back({"text", spec_.model_id, k, v});
    for (const auto& [k, v] : images_) out.push_back({"image", spec_.model_id, k, v});
    return out;
}

std::vector<double> random_unit(std::mt19937_64& rng, std::size_t dim, std::size_t from,
                                std::size_t to) {
    std::normal_distribution<double> g;
    std::vector<double> v(dim, 0.0);
    double n2 = 0;
    while (n2 == 0) {
        for (std::size_t i = from; i < to; ++i) {
            v[i] = g(rng);
            n2 += v[i] * v[i];
        }
    }
    for (auto& x : v) x /= std::sqrt(n2);
    return v;
}

BenchmarkManifest make_manifest(std::size_t n, const std::string& name,
                                const std::string& version) {
    BenchmarkManifest m;
    m.name = name;
    m.version = version;
    const Category cats[] = {Category::Either, Category::Both, Category::None};
    for (std::size_t i = 0; i < n; ++i) {
        const std::string id = "inst-" + std::to_string(i);
        auto image = [&](const std::string& role) {
            const std::string img_id = id + "-" + role;
            return ImageRef{img_id, "images/" + img_id + ".jpg", sha256_hex(img_id)};
        };
        m.instances.push_back(BenchmarkInstance{
            id,
            CompoundNoun("mod" + std::to_string(i) + " head" + std::to_string(i)),
            image("p"),
            {image("n1"), image("n2")},
            cats[i % 3],
        });
    }
    return m;
}

std::vector<std::string> fixture_captions(const CompoundNoun& cn, std::size_t k) {
    std::vector<std::string> out;
    for (std::size_t j = 0; j < k; ++j) {
        out.push_back("A " + cn.lowered() + " seen in setting " + std::to_string(j) + ".");
    }
    return out;
}

CaptionSet TableSource::captions_for(const CompoundNoun& cn, std::size_t k) {
    auto it = table_.find(cn.text());
    if (it == table_.end()) throw InsufficientCaptionsError(cn.text(), 0, k);
    CaptionSet set;
    set.compound_noun = cn.text();
    set.provider_id = "table-source";
    for (const auto& c : it->second) {
        set.captions.push_back(c);
        set.flags.push_back(inspect_caption(c, cn));
    }
    return set.prefix(k);
}

Fixture make_fixture(std::size_t n, std::size_t dim, FixtureKind kind, std::uint64_t seed,
                     std::size_t k_max) {
    Fixture f;
    f.manifest = make_manifest(n);
    f.provider = std::make_unique<MapProvider>(dim);
    std::mt19937_64 rng(seed);
    const std::size_t half = dim / 2;
    for (const auto& inst : f.manifest.instances) {
        const auto& cn = inst.compound_noun;
        f.captions[cn.text()] = fixture_captions(cn, k_max);

        CaptionSet set;
        set.compound_noun = cn.text();
        set.captions = f.captions[cn.text()];
        set.flags.assign(set.captions.size(), {});
        std::vector<std::string> texts = build_example_prompts(cn, set).prompts;
        texts.push_back(build_base_prompt(cn));
        texts.push_back(build_reversed_prompt(cn));

        const auto c = random_unit(rng, dim, 0, half);
        for (const auto& t : texts) {
            if (kind == FixtureKind::Random) {
                f.provider->set_text(t, random_unit(rng, dim, 0, dim));
                continue;
            }
            auto noise = random_unit(rng, dim, 0, half);
            std::vector<double> v(dim);
            for (std::size_t i = 0; i < dim; ++i) v[i] = c[i] + 0.3 * noise[i];
            f.provider->set_text(t, v);
        }

        std::vector<double> pos, n1, n2;
        switch (kind) {
            case FixtureKind::Separable:
                pos = c;
                n1 = random_unit(rng, dim, half, dim);
                n2 = random_unit(rng, dim, half, dim);
                break;
            case FixtureKind::Adversarial:
                pos = random_unit(rng, dim, half, dim);
                n1 = c;
                n2 = random_unit(rng, dim, half, dim);
                break;
            case FixtureKind::Random:
                pos = random_unit(rng, dim, 0, dim);
                n1 = random_unit(rng, dim, 0, dim);
                n2 = random_unit(rng, dim, 0, dim);
                break;
        }
        f.provider->set_image(*inst.positive.content_hash, pos);
        f.provider->set_image(*inst.negatives[0].content_hash, n1);
        f.provider->set_image(*inst.negatives[1].content_hash, n2);
    }
    return f;
}

FixtureFiles write_fixture(const Fixture& f, const TempDir& dir) {
    FixtureFiles files{dir.file("manifest.json"), dir.file("store.jsonl"),
                       dir.file("captions.json")};
    write_text(files.manifest, serialize_manifest(f.manifest));
    std::string store;
    for (const auto& r : f.provider->records()) store += to_jsonl(r) + "\n";
    write_text(files.store, store);
    write_text(files.captions, nlohmann::json(f.captions).dump(2));
    return files;
}

}  // namespace capens::testkit
