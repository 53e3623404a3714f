#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

#include <boost/random/mersenne_twister.hpp>

namespace fragsim {

/// Same sequence as std::mt19937_64; Boost's implementation is faster. The constexpr bounds let
/// std distributions accept it.
class Rng : public boost::random::mt19937_64 {
 public:
  using boost::random::mt19937_64::mt19937_64;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
};

/// Seed for an independent stream, derived from a master seed and a path of stream ids.
///
/// Each id is folded in with the SplitMix64 finaliser:
///   h_0 = mix(master), h_{k+1} = mix(h_k ^ (id_k + 0x9e3779b97f4a7c15)).
/// Changing any id changes the seed; the map is deterministic across platforms.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(master, path));
}

/// Uniform on the open interval (0, 1).
inline double open_unit(Rng& rng) {
  for (;;) {
    const double u = static_cast<double>(rng() >> 11) * 0x1p-53;
    if (u > 0.0) return u;
  }
}

inline double exponential(Rng& rng, double rate) { return -std::log(open_unit(rng)) / rate; }

// Stream tags used when deriving per-component seeds.
namespace stream {
inline constexpr std::uint64_t kFragmentation = 0x46524147;  // "FRAG"
inline constexpr std::uint64_t kImmigration = 0x494d4d49;    // "IMMI"
inline constexpr std::uint64_t kAtom = 0x41544f4d;           // "ATOM"
inline constexpr std::uint64_t kTarget = 0x54415247;         // "TARG"
inline constexpr std::uint64_t kPool = 0x504f4f4c;           // "POOL"
}  // namespace stream

}  // namespace fragsim
