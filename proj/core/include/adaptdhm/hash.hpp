#pragma once

#include <cstdint>
#include <string_view>

namespace adaptdhm {

// FNV-1a, 64-bit. Feature hashing depends on this exact function staying
// fixed across platforms and releases: a categorical cell maps to
// fnv1a64("<field>:<raw value>") % vocab_size. Golden values are pinned in
// the data tests.
inline constexpr uint64_t kFnv64Offset = 0xcbf29ce484222325ull;
inline constexpr uint64_t kFnv64Prime = 0x100000001b3ull;

constexpr uint64_t fnv1a64(std::string_view s, uint64_t h = kFnv64Offset) {
  for (unsigned char c : s) {
    h ^= c;
    h *= kFnv64Prime;
  }
  return h;
}

constexpr uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace adaptdhm
