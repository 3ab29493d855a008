#include "ksprune/hashing.hpp"

#include <mutex>
#include <stdexcept>

#include <sodium.h>

namespace ksprune {

namespace {
void ensure_sodium() {
  static std::once_flag once;
  std::call_once(once, [] {
    if (sodium_init() < 0) throw std::runtime_error("libsodium initialization failed");
  });
}
}  // namespace

ContentHash content_hash(std::string_view text) {
  ensure_sodium();
  ContentHash out{};
  crypto_generichash(out.data(), out.size(), reinterpret_cast<const unsigned char*>(text.data()), text.size(),
                     nullptr, 0);
  return out;
}

std::string to_hex(const ContentHash& hash) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(hash.size() * 2);
  for (auto b : hash) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xF]);
  }
  return out;
}

std::string hex_digest(std::string_view text) { return to_hex(content_hash(text)); }

}  // namespace ksprune
