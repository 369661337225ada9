#pragma once

#include "capens/error.hpp"

#include <httplib.h>

#include <cstdlib>
#include <memory>
#include <string>

namespace capens::detail {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string path;    // "" or "/prefix"
};

inline Endpoint split_endpoint(const std::string& url) {
    auto scheme = url.find("://");
    if (scheme == std::string::npos) {
        throw Error(ErrorCode::InvalidArgument, "endpoint needs a scheme: " + url);
    }
    auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, ""};
    std::string path = url.substr(slash);
    while (!path.empty() && path.back() == '/') path.pop_back();
    return {url.substr(0, slash), path};
}

inline std::unique_ptr<httplib::Client> make_client(const Endpoint& ep, int timeout_s) {
    auto cli = std::make_unique<httplib::Client>(ep.origin);
    if (!cli->is_valid()) {
        throw Error(ErrorCode::ProviderUnavailable, "unsupported endpoint " + ep.origin);
    }
    cli->set_connection_timeout(timeout_s, 0);
    cli->set_read_timeout(timeout_s * 6, 0);
    cli->set_write_timeout(timeout_s * 6, 0);
    if (const char* key = std::getenv("CAPENS_API_KEY"); key && *key) {
        cli->set_bearer_token_auth(key);
    }
    return cli;
}

}  // namespace capens::detail
