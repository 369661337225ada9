#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace capens {

/// Lowercase hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

std::array<std::uint8_t, 32> sha256_raw(std::string_view bytes);

std::string base64_encode(std::string_view bytes);

/// Reads a whole file; throws Error(IoError) if it cannot be opened.
std::string read_file(const std::string& path);

/// Writes via a temporary sibling and rename, so readers never see a torn file.
void write_file_atomic(const std::string& path, std::string_view contents);

}  // namespace capens
