#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace ksprune {

/// 16-byte BLAKE2b digest; the key type of the embedding vector file.
using ContentHash = std::array<std::uint8_t, 16>;

ContentHash content_hash(std::string_view text);
std::string to_hex(const ContentHash& hash);
/// Hex of a 16-byte BLAKE2b digest, used for config fingerprints and
/// text-keyed pairing.
std::string hex_digest(std::string_view text);

}  // namespace ksprune
