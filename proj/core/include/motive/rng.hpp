#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace motive {

/// splitmix64 step; used to derive independent stream seeds from one master
/// seed so parallel work stays deterministic regardless of scheduling.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Mix a master seed with one or more stream labels.
inline uint64_t derive_seed(uint64_t base, uint64_t stream) {
  return splitmix64(base ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}
inline uint64_t derive_seed(uint64_t base, uint64_t a, uint64_t b) {
  return derive_seed(derive_seed(base, a), b);
}
inline uint64_t derive_seed(uint64_t base, uint64_t a, uint64_t b, uint64_t c) {
  return derive_seed(derive_seed(base, a, b), c);
}

/// FNV-1a over bytes; stable across platforms, used for token hashing.
inline uint64_t fnv1a(std::string_view bytes, uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline uint64_t fnv1a_u64(uint64_t v, uint64_t h = 1469598103934665603ULL) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (i * 8)) & 0xffULL;
    h *= 1099511628211ULL;
  }
  return h;
}

/// Named-stream variants; the label is hashed so call sites stay readable.
inline uint64_t derive_seed(uint64_t base, std::string_view label) {
  return derive_seed(base, fnv1a(label));
}
inline uint64_t derive_seed(uint64_t base, std::string_view label, uint64_t a) {
  return derive_seed(derive_seed(base, fnv1a(label)), a);
}
inline uint64_t derive_seed(uint64_t base, std::string_view label, uint64_t a, uint64_t b) {
  return derive_seed(derive_seed(base, fnv1a(label), a), b);
}

using Rng = std::mt19937_64;

inline Rng make_rng(uint64_t seed) { return Rng(splitmix64(seed)); }

}  // namespace motive
