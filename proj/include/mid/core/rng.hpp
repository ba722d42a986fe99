#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace mid {

/// Named, seeded random stream.
///
/// A stream is identified by (seed, stream_id, index). Identical identities
/// produce identical draw sequences on every run and regardless of which
/// thread owns the stream. Streams must not be shared between threads; derive
/// a child per worker instead.
///
/// The engine is std::mt19937_64, but the conversions to uniform and normal
/// variates are done here rather than through <random> distributions, whose
/// output is implementation-defined.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view stream_id, std::uint64_t index = 0);

  /// Child stream keyed by this stream's identity plus (label, index).
  /// Does not consume draws from the parent.
  [[nodiscard]] RngStream derive(std::string_view label, std::uint64_t index = 0) const;

  /// 64-bit key identifying this stream; logged as the "seed" of masks etc.
  [[nodiscard]] std::uint64_t key() const { return key_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] const std::string& stream_id() const { return stream_id_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via the Box-Muller transform.
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  /// Rebuild a stream directly from a previously logged key.
  static RngStream from_key(std::uint64_t key, std::string_view stream_id = "replay");

 private:
  struct FromKey {};
  RngStream(FromKey, std::uint64_t key, std::string_view stream_id);

  std::uint64_t seed_ = 0;
  std::string stream_id_;
  std::uint64_t key_ = 0;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace mid
