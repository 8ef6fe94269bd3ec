#pragma once

// FNV-1a hashing, used for seeded template selection and input content
// hashes in build manifests. Stable across platforms, unlike std::hash.

#include <cstdint>
#include <string>
#include <string_view>

namespace drivelang {

inline constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

inline std::uint64_t fnv1a(std::string_view data,
                           std::uint64_t h = kFnvOffset) {
  for (char c : data) {
    h ^= static_cast<std::uint8_t>(c);
    h *= kFnvPrime;
  }
  return h;
}

inline std::uint64_t fnv1a_u64(std::uint64_t value, std::uint64_t h = kFnvOffset) {
  for (int i = 0; i < 8; ++i) {
    h ^= (value >> (i * 8)) & 0xFFu;
    h *= kFnvPrime;
  }
  return h;
}

inline std::string to_hex(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

}  // namespace drivelang
