#pragma once
#include <cstdint>
#include <random>

namespace drflex {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Hierarchical stream key. child(tag) derives an independent stream, so
// per-customer / per-event / per-purpose streams never collide and results
// do not depend on scheduling order.
struct StreamKey {
  std::uint64_t key = 0;

  StreamKey child(std::uint64_t tag) const {
    return {splitmix64(key ^ splitmix64(tag + 0x632be59bd9b4e019ULL))};
  }
  std::mt19937_64 engine() const {
    return std::mt19937_64(splitmix64(key ^ 0xd6e8feb86659fd93ULL));
  }
};

// Stream purposes used by the event loop and the harness.
namespace stream {
inline constexpr std::uint64_t population = 1;
inline constexpr std::uint64_t events = 2;
inline constexpr std::uint64_t exogenous = 3;
inline constexpr std::uint64_t target = 4;
inline constexpr std::uint64_t sample = 5;
inline constexpr std::uint64_t optout = 6;
inline constexpr std::uint64_t solver = 7;
inline constexpr std::uint64_t baseline = 8;
inline constexpr std::uint64_t calibrate = 9;
}  // namespace stream

}  // namespace drflex
