#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace capens {

/// Everything one CLI run needs. Loaded from a flat "dotted.key = value"
/// file, then overridden by flags.
struct RunConfig {
    std::string manifest;
    std::string strategy = "base";
    std::size_t k = 5;
    std::string prompts_file;
    std::string provider;   // compact provider spec
    std::string captioner;  // compact captioner spec, may be empty
    std::uint64_t seed = 0;
    std::string cache_dir = ".capens-cache";
    std::string out = "out";
    std::size_t jobs = 1;
    bool fail_soft = false;
    std::size_t retries = 3;
    double temperature = 0.1;
    double top_p = 1.0;
    std::string instruction_file;  // optional custom instruction template
    bool all_negatives = false;
    bool timestamps = false;
    std::size_t k_min = 1;
    std::size_t k_max = 7;

    /// Applies one dotted key. Throws Error(InvalidArgument) for unknown keys
    /// or unparseable values.
    void set(std::string_view key, std::string_view value);

    /// Throws Error(InvalidArgument) when k < 1 or jobs < 1.
    void validate() const;
};

/// Parses "key = value" lines; '#' starts a comment line.
std::map<std::string, std::string> parse_flat_config(std::string_view text);

RunConfig load_run_config(const std::string& path);

}  // namespace capens
