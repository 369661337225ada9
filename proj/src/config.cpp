#include "capens/config.hpp"

#include "capens/digest.hpp"
#include "capens/error.hpp"

#include <cctype>
#include <sstream>

namespace capens {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw Error(ErrorCode::InvalidArgument, "config key " + std::string(key) + " expects a boolean");
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
    const std::string s(v);
    try {
        std::size_t used = 0;
        T out{};
        if constexpr (std::is_floating_point_v<T>) {
            out = static_cast<T>(std::stod(s, &used));
        } else {
            if (!s.empty() && s[0] == '-') throw std::invalid_argument("negative");
            out = static_cast<T>(std::stoull(s, &used));
        }
        if (used != s.size()) throw std::invalid_argument("trailing");
        return out;
    } catch (const std::logic_error&) {
        throw Error(ErrorCode::InvalidArgument,
                    "config key " + std::string(key) + " expects a number, got '" + s + "'");
    }
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view value) {
    const std::string v = trim(value);
    if (key == "manifest") manifest = v;
    else if (key == "strategy.kind") strategy = v;
    else if (key == "strategy.k") k = parse_number<std::size_t>(key, v);
    else if (key == "strategy.prompts_file") prompts_file = v;
    else if (key == "provider") provider = v;
    else if (key == "captioner") captioner = v;
    else if (key == "run.seed") seed = parse_number<std::uint64_t>(key, v);
    else if (key == "run.jobs") jobs = parse_number<std::size_t>(key, v);
    else if (key == "run.fail_soft") fail_soft = parse_bool(key, v);
    else if (key == "cache.dir") cache_dir = v;
    else if (key == "output.dir") out = v;
    else if (key == "captions.retries") retries = parse_number<std::size_t>(key, v);
    else if (key == "captions.temperature") temperature = parse_number<double>(key, v);
    else if (key == "captions.top_p") top_p = parse_number<double>(key, v);
    else if (key == "captions.instruction_file") instruction_file = v;
    else if (key == "eval.all_negatives") all_negatives = parse_bool(key, v);
    else if (key == "report.timestamps") timestamps = parse_bool(key, v);
    else if (key == "sweep.k_min") k_min = parse_number<std::size_t>(key, v);
    else if (key == "sweep.k_max") k_max = parse_number<std::size_t>(key, v);
    else throw Error(ErrorCode::InvalidArgument, "unknown config key '" + std::string(key) + "'");
}

void RunConfig::validate() const {
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
    if (jobs < 1) throw Error(ErrorCode::InvalidArgument, "jobs must be >= 1");
}

std::map<std::string, std::string> parse_flat_config(std::string_view text) {
    std::map<std::string, std::string> out;
    std::istringstream in{std::string(text)};
    std::size_t lineno = 0;
    for (std::string line; std::getline(in, line);) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::InvalidArgument,
                        "config line " + std::to_string(lineno) + " is not 'key = value'");
        }
        out[trim(std::string_view(t).substr(0, eq))] = trim(std::string_view(t).substr(eq + 1));
    }
    return out;
}

RunConfig load_run_config(const std::string& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const Error&) {
        throw Error(ErrorCode::InvalidArgument, "cannot read config file " + path);
    }
    RunConfig cfg;
    for (const auto& [k, v] : parse_flat_config(text)) cfg.set(k, v);
    return cfg;
}

}  // namespace capens
