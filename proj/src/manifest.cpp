#include "capens/manifest.hpp"

#include "capens/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace capens {

using nlohmann::json;

namespace {

std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t j = i;
        while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
        if (j > i) out.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
    throw Error(ErrorCode::SchemaViolation, "schema violation at " + path + ": " + what);
}

void reject_unknown(const json& obj, std::initializer_list<std::string_view> allowed,
                    const std::string& path) {
    for (const auto& [key, _] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            schema_error(path + "." + key, "unknown field");
        }
    }
}

std::string require_string(const json& obj, const char* key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) schema_error(path + "." + key, "missing field");
    if (!it->is_string()) schema_error(path + "." + key, "expected string");
    return it->get<std::string>();
}

bool is_hex_digest(std::string_view s) {
    return s.size() == 64 && std::all_of(s.begin(), s.end(), [](char c) {
               return std::isxdigit(static_cast<unsigned char>(c)) != 0;
           });
}

ImageRef parse_image(const json& j, const std::string& path) {
    if (!j.is_object()) schema_error(path, "expected object");
    reject_unknown(j, {"id", "uri", "sha256"}, path);
    ImageRef img;
    img.id = require_string(j, "id", path);
    img.uri = require_string(j, "uri", path);
    if (img.id.empty()) schema_error(path + ".id", "empty id");
    if (img.uri.empty()) schema_error(path + ".uri", "empty uri");
    if (auto it = j.find("sha256"); it != j.end() && !it->is_null()) {
        if (!it->is_string() || !is_hex_digest(it->get_ref<const std::string&>())) {
            schema_error(path + ".sha256", "expected 64 hex digits or null");
        }
        std::string h = it->get<std::string>();
        std::transform(h.begin(), h.end(), h.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        img.content_hash = std::move(h);
    }
    return img;
}

Category parse_category(const json& obj, const std::string& path) {
    auto it = obj.find("category");
    if (it == obj.end() || it->is_null()) return Category::Unlabeled;
    if (!it->is_string()) schema_error(path + ".category", "expected string or null");
    const auto& s = it->get_ref<const std::string&>();
    if (s == "either") return Category::Either;
    if (s == "both") return Category::Both;
    if (s == "none") return Category::None;
    schema_error(path + ".category", "expected either|both|none|null, got '" + s + "'");
}

json image_to_json(const ImageRef& img) {
    json j{{"id", img.id}, {"uri", img.uri}};
    j["sha256"] = img.content_hash ? json(*img.content_hash) : json(nullptr);
    return j;
}

}  // namespace

CompoundNoun::CompoundNoun(std::string_view raw) : tokens_(split_ws(raw)) {
    if (tokens_.empty()) {
        throw Error(ErrorCode::SchemaViolation, "compound noun is empty");
    }
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (i) text_ += ' ';
        text_ += tokens_[i];
    }
}

std::string CompoundNoun::lowered() const {
    std::string out = text_;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

CompoundParts split_compound(const CompoundNoun& cn) {
    if (cn.tokens().size() != 2) throw NotTwoTokensError(cn.text(), cn.tokens().size());
    return {cn.tokens()[0], cn.tokens()[1]};
}

std::string reverse_compound(const CompoundNoun& cn) {
    auto parts = split_compound(cn);
    return parts.head + " " + parts.modifier;
}

std::string_view to_string(Category c) {
    switch (c) {
    case Category::Either: return "either";
    case Category::Both: return "both";
    case Category::None: return "none";
    case Category::Unlabeled: return "unlabeled";
    }
    return "unlabeled";
}

std::vector<ImageRef> BenchmarkManifest::all_images() const {
    std::vector<ImageRef> out;
    out.reserve(instances.size() * 3);
    for (const auto& inst : instances) {
        out.push_back(inst.positive);
        out.insert(out.end(), inst.negatives.begin(), inst.negatives.end());
    }
    return out;
}

BenchmarkManifest parse_manifest(std::string_view raw) {
    json doc;
    try {
        doc = json::parse(raw.begin(), raw.end());
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::MalformedJson, std::string("malformed manifest JSON: ") + e.what());
    }
    if (!doc.is_object()) schema_error("$", "expected object");
    reject_unknown(doc, {"name", "version", "instances"}, "$");

    BenchmarkManifest m;
    m.name = require_string(doc, "name", "$");
    m.version = require_string(doc, "version", "$");
    auto it = doc.find("instances");
    if (it == doc.end()) schema_error("$.instances", "missing field");
    if (!it->is_array()) schema_error("$.instances", "expected array");

    for (std::size_t i = 0; i < it->size(); ++i) {
        const json& ji = (*it)[i];
        const std::string path = "$.instances[" + std::to_string(i) + "]";
        if (!ji.is_object()) schema_error(path, "expected object");
        reject_unknown(ji, {"id", "compound_noun", "category", "positive", "negatives"}, path);

        std::string id = require_string(ji, "id", path);
        if (id.empty()) schema_error(path + ".id", "empty id");
        std::string cn_text = require_string(ji, "compound_noun", path);
        if (split_ws(cn_text).empty()) schema_error(path + ".compound_noun", "blank");
        auto pos = ji.find("positive");
        if (pos == ji.end()) schema_error(path + ".positive", "missing field");
        auto negs = ji.find("negatives");
        if (negs == ji.end()) schema_error(path + ".negatives", "missing field");
        if (!negs->is_array()) schema_error(path + ".negatives", "expected array");
        if (negs->size() != 2) {
            throw Error(ErrorCode::BadNegativeCount,
                        "instance " + id + " has " + std::to_string(negs->size()) +
                            " negatives, expected 2");
        }

        BenchmarkInstance inst{id, CompoundNoun(cn_text), parse_image(*pos, path + ".positive"),
                               {}, parse_category(ji, path)};
        for (std::size_t n = 0; n < negs->size(); ++n) {
            inst.negatives.push_back(
                parse_image((*negs)[n], path + ".negatives[" + std::to_string(n) + "]"));
        }
        m.instances.push_back(std::move(inst));
    }

    for (const auto& v : validate_manifest(m)) {
        if (v.rule == "negative-count") {
            throw Error(ErrorCode::BadNegativeCount, v.detail);
        }
        throw Error(ErrorCode::DuplicateId, v.detail);
    }
    return m;
}

BenchmarkManifest load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open manifest " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_manifest(ss.str());
}

std::string serialize_manifest(const BenchmarkManifest& m) {
    json instances = json::array();
    for (const auto& inst : m.instances) {
        json negs = json::array();
        for (const auto& n : inst.negatives) negs.push_back(image_to_json(n));
        json ji{{"id", inst.id},
                {"compound_noun", inst.compound_noun.text()},
                {"positive", image_to_json(inst.positive)},
                {"negatives", std::move(negs)}};
        ji["category"] = inst.category == Category::Unlabeled
                             ? json(nullptr)
                             : json(std::string(to_string(inst.category)));
        instances.push_back(std::move(ji));
    }
    json doc{{"name", m.name}, {"version", m.version}, {"instances", std::move(instances)}};
    return doc.dump(2);
}

std::vector<Violation> validate_manifest(const BenchmarkManifest& m, ManifestProfile profile) {
    std::vector<Violation> out;
    std::unordered_set<std::string> instance_ids;
    std::unordered_map<std::string, std::string> image_owner;  // image id -> instance id

    for (const auto& inst : m.instances) {
        if (!instance_ids.insert(inst.id).second) {
            out.push_back({inst.id, "duplicate-instance-id",
                           "duplicate instance id '" + inst.id + "'"});
        }
        if (inst.negatives.size() != 2) {
            out.push_back({inst.id, "negative-count",
                           "instance " + inst.id + " has " +
                               std::to_string(inst.negatives.size()) + " negatives, expected 2"});
        }
        for (const auto& n : inst.negatives) {
            if (n.id == inst.positive.id) {
                out.push_back({inst.id, "positive-in-negatives",
                               "positive image '" + n.id + "' reused as a negative in instance " +
                                   inst.id});
            }
        }
        for (std::size_t a = 0; a < inst.negatives.size(); ++a) {
            for (std::size_t b = a + 1; b < inst.negatives.size(); ++b) {
                if (inst.negatives[a].id == inst.negatives[b].id &&
                    inst.negatives[a].id != inst.positive.id) {
                    out.push_back({inst.id, "duplicate-negatives",
                                   "negative image '" + inst.negatives[a].id +
                                       "' repeated in instance " + inst.id});
                }
            }
        }

        std::set<std::string> local{inst.positive.id};
        for (const auto& n : inst.negatives) local.insert(n.id);
        for (const auto& img_id : local) {
            auto [pos, inserted] = image_owner.emplace(img_id, inst.id);
            if (!inserted) {
                out.push_back({inst.id, "duplicate-image-id",
                               "image id '" + img_id + "' used by instances " + pos->second +
                                   " and " + inst.id});
            }
        }

        if (inst.positive.uri.empty()) {
            out.push_back({inst.id, "empty-uri", "positive image has empty uri"});
        }
        for (const auto& n : inst.negatives) {
            if (n.uri.empty()) out.push_back({inst.id, "empty-uri", "negative image has empty uri"});
        }
    }

    if (profile == ManifestProfile::Official) {
        if (m.instances.size() != kOfficialInstanceCount) {
            out.push_back({"", "official-instance-count",
                           "expected " + std::to_string(kOfficialInstanceCount) +
                               " instances, found " + std::to_string(m.instances.size())});
        }
        if (image_owner.size() != kOfficialImageCount) {
            out.push_back({"", "official-image-count",
                           "expected " + std::to_string(kOfficialImageCount) +
                               " distinct images, found " + std::to_string(image_owner.size())});
        }
        std::map<Category, std::size_t> counts;
        for (const auto& inst : m.instances) ++counts[inst.category];
        if (counts[Category::Either] != kOfficialEither || counts[Category::Both] != kOfficialBoth ||
            counts[Category::None] != kOfficialNone) {
            out.push_back({"", "official-category-counts",
                           "expected (either, both, none) = (199, 106, 95), found (" +
                               std::to_string(counts[Category::Either]) + ", " +
                               std::to_string(counts[Category::Both]) + ", " +
                               std::to_string(counts[Category::None]) + ")"});
        }
    }
    return out;
}

}  // namespace capens
