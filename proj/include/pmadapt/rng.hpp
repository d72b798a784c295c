#pragma once

#include <cstdint>
#include <span>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

namespace pmadapt {

/// A seeded random stream identified by (seed, stream_id).
///
/// The engine is a 64-bit Mersenne twister whose initial state is derived from
/// a SplitMix64 mix of the pair, so distinct stream ids give statistically
/// independent sequences. Boost's distributions are used instead of the
/// standard library ones because their output is specified by the source and
/// therefore identical across toolchains.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  /// Independent child stream; deterministic in (seed, stream_id, key).
  RngStream substream(std::uint64_t key) const;

  double normal() { return normal_(engine_); }
  /// Uniform on [0, 1).
  double uniform() { return uniform_(engine_); }
  void fill_normal(std::span<double> out);

  /// Raw 64-bit output, for hashing-style uses in tests.
  std::uint64_t next_u64() { return engine_(); }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  boost::random::mt19937_64 engine_;
  boost::random::normal_distribution<double> normal_;
  boost::random::uniform_01<double> uniform_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace pmadapt
