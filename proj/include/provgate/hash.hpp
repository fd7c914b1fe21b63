#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace provgate {

using Digest256 = std::array<std::uint8_t, 32>;

// SHA-256 / HMAC-SHA256 wrappers over libcrypto. The log replayer
// deliberately does not use these: it carries its own standalone digest so
// verification shares no code with the production path.
Digest256 sha256(std::string_view bytes);
std::string sha256_hex(std::string_view bytes);

Digest256 hmac_sha256(std::string_view key, std::string_view msg);
std::string hmac_sha256_hex(std::string_view key, std::string_view msg);

std::string to_hex(const std::uint8_t* data, std::size_t n);
std::string to_hex(const Digest256& d);
std::optional<std::vector<std::uint8_t>> from_hex(std::string_view hex);

}  // namespace provgate
