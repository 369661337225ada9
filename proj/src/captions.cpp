#include "capens/captions.hpp"

#include "capens/cache.hpp"
#include "capens/digest.hpp"
#include "capens/error.hpp"
#include "http_util.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <ctime>
#include <set>

namespace capens {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
    for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
        s.replace(pos, from.size(), to);
    }
    return s;
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Reads one quoted literal starting at s[i] (the opening quote). Returns the
// index one past the closing quote, or npos.
std::size_t read_quoted(std::string_view s, std::size_t i, std::string& out) {
    const char quote = s[i++];
    out.clear();
    while (i < s.size()) {
        const char c = s[i];
        if (c == '\\' && i + 1 < s.size()) {
            const char n = s[i + 1];
            switch (n) {
            case 'n': out += '\n'; break;
            case 't': out += '\t'; break;
            default: out += n; break;
            }
            i += 2;
            continue;
        }
        if (c == quote) return i + 1;
        out += c;
        ++i;
    }
    return std::string_view::npos;
}

}  // namespace

std::string render_instruction(std::string_view tmpl, const CompoundNoun& cn, std::size_t k) {
    std::string out = replace_all(std::string(tmpl), "{k}", std::to_string(k));
    return replace_all(std::move(out), "{compound_noun}", cn.lowered());
}

CaptionRequest CaptionRequest::make(const CompoundNoun& cn, std::size_t k) {
    return CaptionRequest{cn, k, 0.1, 1.0, render_instruction(kDefaultInstructionTemplate, cn, k)};
}

void CaptionRequest::validate() const {
    if (k < 1 || k > kMaxCaptions) {
        throw Error(ErrorCode::InvalidArgument,
                    "caption count must be in 1..16, got " + std::to_string(k));
    }
    if (!(temperature >= 0.0)) throw Error(ErrorCode::InvalidArgument, "temperature must be >= 0");
    if (!(top_p > 0.0 && top_p <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "top_p must be in (0, 1]");
    }
    if (instruction.empty()) throw Error(ErrorCode::InvalidArgument, "empty instruction");
}

std::size_t CaptionSet::flagged() const {
    return static_cast<std::size_t>(
        std::count_if(flags.begin(), flags.end(), [](const CaptionFlags& f) { return f.any(); }));
}

CaptionSet CaptionSet::prefix(std::size_t k) const {
    if (captions.size() < k) throw InsufficientCaptionsError(compound_noun, captions.size(), k);
    CaptionSet out = *this;
    out.captions.resize(k);
    out.flags.resize(std::min(flags.size(), k));
    return out;
}

json CaptionSet::to_json() const {
    json jf = json::array();
    for (const auto& f : flags) {
        jf.push_back({{"missing_compound_noun", f.missing_compound_noun},
                      {"over_length", f.over_length}});
    }
    return json{{"compound_noun", compound_noun},
                {"captions", captions},
                {"flags", std::move(jf)},
                {"provider", provider_id},
                {"created_at", created_at}};
}

CaptionSet CaptionSet::from_json(const json& j) {
    CaptionSet s;
    try {
        s.compound_noun = j.at("compound_noun").get<std::string>();
        s.captions = j.at("captions").get<std::vector<std::string>>();
        for (const auto& f : j.at("flags")) {
            s.flags.push_back({f.at("missing_compound_noun").get<bool>(),
                               f.at("over_length").get<bool>()});
        }
        s.provider_id = j.at("provider").get<std::string>();
        s.created_at = j.at("created_at").get<std::string>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, std::string("bad caption set: ") + e.what());
    }
    if (s.flags.size() != s.captions.size()) {
        throw Error(ErrorCode::SchemaViolation, "caption flags do not match captions");
    }
    return s;
}

CaptionFlags inspect_caption(std::string_view caption, const CompoundNoun& cn) {
    CaptionFlags f;
    f.missing_compound_noun = lower(caption).find(cn.lowered()) == std::string::npos;
    std::size_t words = 0;
    bool in_word = false;
    for (char c : caption) {
        const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (!space && !in_word) ++words;
        in_word = !space;
    }
    f.over_length = words > 10;
    return f;
}

std::optional<std::vector<std::string>> parse_caption_list(std::string_view reply) {
    const auto open = reply.find('[');
    const auto close = reply.rfind(']');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
        return std::nullopt;
    }
    const std::string_view body = reply.substr(open, close - open + 1);

    json j = json::parse(body, nullptr, false);
    if (!j.is_discarded()) {
        if (!j.is_array()) return std::nullopt;
        std::vector<std::string> out;
        for (const auto& e : j) {
            if (!e.is_string()) return std::nullopt;
            out.push_back(e.get<std::string>());
        }
        return out;
    }

    // Python-style list: quoted literals separated by commas and/or whitespace.
    std::vector<std::string> out;
    std::size_t i = 1;
    std::string item;
    while (i < body.size()) {
        const char c = body[i];
        if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
            ++i;
        } else if (c == ']') {
            return i + 1 == body.size() ? std::optional(out) : std::nullopt;
        } else if (c == '\'' || c == '"') {
            i = read_quoted(body, i, item);
            if (i == std::string_view::npos) return std::nullopt;
            out.push_back(item);
        } else {
            return std::nullopt;
        }
    }
    return std::nullopt;
}

HttpChatCaptioner::HttpChatCaptioner(std::string endpoint, std::string model, int timeout_s)
    : endpoint_(std::move(endpoint)), model_(std::move(model)), timeout_s_(timeout_s) {
    detail::split_endpoint(endpoint_);
}

std::string HttpChatCaptioner::provider_id() const { return "chat:" + endpoint_ + "#" + model_; }

std::string HttpChatCaptioner::complete(const ChatRequest& request) {
    const auto ep = detail::split_endpoint(endpoint_);
    auto cli = detail::make_client(ep, timeout_s_);
    json body{{"model", model_},
              {"messages", json::array({{{"role", "user"}, {"content", request.user_message}}})},
              {"temperature", request.temperature},
              {"top_p", request.top_p}};
    auto res = cli->Post(ep.path.empty() ? "/" : ep.path, body.dump(), "application/json");
    if (!res) {
        throw Error(ErrorCode::ProviderUnavailable,
                    "captioner " + endpoint_ + " unreachable: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw Error(ErrorCode::ProviderUnavailable, "captioner " + endpoint_ + " returned " +
                                                        std::to_string(res->status));
    }
    json j = json::parse(res->body, nullptr, false);
    try {
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
        // Not chat-shaped; let the list parser decide.
        return res->body;
    }
}

TableCaptioner::TableCaptioner(std::string path) : path_(std::move(path)) {
    const std::string raw = read_file(path_);
    digest_ = sha256_hex(raw);
    table_ = json::parse(raw, nullptr, false);
    if (table_.is_discarded() || !table_.is_object()) {
        throw Error(ErrorCode::MalformedJson, "caption table " + path_ + " is not a JSON object");
    }
}

std::string TableCaptioner::provider_id() const { return "table:" + digest_.substr(0, 16); }

std::string TableCaptioner::complete(const ChatRequest& request) {
    if (auto it = table_.find(request.compound_noun); it != table_.end()) return it->dump();
    const std::string want = lower(request.compound_noun);
    for (const auto& [key, value] : table_.items()) {
        if (lower(trim(key)) == want) return value.dump();
    }
    throw Error(ErrorCode::ProviderUnavailable,
                "caption table " + path_ + " has no entry for '" + request.compound_noun + "'");
}

std::unique_ptr<Captioner> make_captioner(std::string_view compact) {
    const auto colon = compact.find(':');
    const std::string kind(compact.substr(0, colon));
    std::string endpoint;
    std::string model = "gpt-4";
    std::string path;
    std::string_view rest = colon == std::string_view::npos ? "" : compact.substr(colon + 1);
    while (!rest.empty()) {
        const auto comma = rest.find(',');
        const std::string_view item = rest.substr(0, comma);
        rest = comma == std::string_view::npos ? "" : rest.substr(comma + 1);
        const auto eq = item.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorCode::InvalidArgument, "captioner option without '=': " + std::string(item));
        }
        const auto key = item.substr(0, eq);
        const std::string value(item.substr(eq + 1));
        if (key == "endpoint") endpoint = value;
        else if (key == "model") model = value;
        else if (key == "path") path = value;
        else throw Error(ErrorCode::InvalidArgument, "unknown captioner option '" + std::string(key) + "'");
    }
    if (kind == "http") {
        if (endpoint.empty()) throw Error(ErrorCode::InvalidArgument, "http captioner needs endpoint");
        return std::make_unique<HttpChatCaptioner>(endpoint, model);
    }
    if (kind == "file") {
        if (path.empty()) throw Error(ErrorCode::InvalidArgument, "file captioner needs path");
        return std::make_unique<TableCaptioner>(path);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown captioner kind '" + kind + "'");
}

CaptionSet generate_captions(Captioner& captioner, const CaptionRequest& request,
                             const GenerateOptions& options) {
    request.validate();
    const ChatRequest chat{request.instruction, request.temperature, request.top_p,
                           request.compound_noun.text()};

    std::vector<std::string> captions;
    std::set<std::string> seen;
    bool parsed_any = false;
    for (std::size_t attempt = 0; attempt <= options.retries && captions.size() < request.k;
         ++attempt) {
        auto list = parse_caption_list(captioner.complete(chat));
        if (!list) {
            spdlog::debug("unparseable caption reply for '{}' (attempt {})",
                          request.compound_noun.text(), attempt + 1);
            continue;
        }
        parsed_any = true;
        for (auto& raw : *list) {
            std::string c = trim(raw);
            if (c.empty() || !seen.insert(c).second) continue;
            captions.push_back(std::move(c));
            if (captions.size() == request.k) break;
        }
    }
    if (!parsed_any) {
        throw Error(ErrorCode::MalformedCompletion,
                    "no parseable caption list for '" + request.compound_noun.text() + "' after " +
                        std::to_string(options.retries + 1) + " attempts");
    }
    if (captions.size() < request.k) throw TooFewCaptionsError(captions.size(), request.k);

    CaptionSet set{request.compound_noun.text(), std::move(captions), {}, captioner.provider_id(),
                   utc_now()};
    for (const auto& c : set.captions) {
        set.flags.push_back(inspect_caption(c, request.compound_noun));
    }
    if (const auto n = set.flagged()) {
        spdlog::debug("{} caption(s) for '{}' flagged", n, set.compound_noun);
    }
    return set;
}

CaptionLibrary::CaptionLibrary(Captioner* captioner, Cache* cache, CaptionLibraryOptions options)
    : captioner_(captioner), cache_(cache), options_(std::move(options)) {}

std::string CaptionLibrary::provider_id() const {
    return captioner_ ? captioner_->provider_id() : std::string("none");
}

std::string CaptionLibrary::describe() const { return provider_id(); }

namespace {

CacheKey caption_key(const CompoundNoun& cn, std::size_t k, const std::string& instruction,
                     const std::string& provider) {
    const std::string material =
        cn.lowered() + '\n' + std::to_string(k) + '\n' + sha256_hex(instruction);
    return CacheKey{CacheNamespace::Captions, provider, "k=" + std::to_string(k),
                    sha256_hex(material)};
}

}  // namespace

std::optional<CaptionSet> CaptionLibrary::cached(const CompoundNoun& cn, std::size_t k) {
    if (!cache_) return std::nullopt;
    for (std::size_t have = k; have <= kMaxCaptions; ++have) {
        const auto instruction = render_instruction(options_.instruction_template, cn, have);
        auto hit = cache_->lookup(caption_key(cn, have, instruction, provider_id()));
        if (!hit) continue;
        try {
            auto set = CaptionSet::from_json(*hit);
            if (set.captions.size() >= k) return set.prefix(k);
        } catch (const Error& e) {
            spdlog::warn("ignoring cached captions for '{}': {}", cn.text(), e.what());
        }
    }
    return std::nullopt;
}

CaptionSet CaptionLibrary::captions_for(const CompoundNoun& cn, std::size_t k) {
    if (auto hit = cached(cn, k)) {
        ++from_cache_;
        return *hit;
    }
    if (!captioner_) throw InsufficientCaptionsError(cn.text(), 0, k);

    CaptionRequest req{cn, k, options_.temperature, options_.top_p,
                       render_instruction(options_.instruction_template, cn, k)};
    auto set = generate_captions(*captioner_, req, GenerateOptions{options_.retries});
    if (cache_) cache_->store(caption_key(cn, k, req.instruction, provider_id()), set.to_json());
    ++generated_;
    return set;
}

}  // namespace capens
