#include "mid/core/rng.hpp"

#include <cmath>
#include <numbers>

#include "mid/core/error.hpp"

namespace mid {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  return h;
}

namespace {

std::uint64_t mix_key(std::uint64_t base, std::string_view label, std::uint64_t index) {
  std::uint64_t k = splitmix64(base);
  k = splitmix64(k ^ fnv1a64(label));
  k = splitmix64(k ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
  return k;
}

std::seed_seq::result_type lo32(std::uint64_t v) { return static_cast<std::uint32_t>(v); }
std::seed_seq::result_type hi32(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }

std::mt19937_64 make_engine(std::uint64_t key) {
  std::seed_seq seq{lo32(key), hi32(key), lo32(splitmix64(key)), hi32(splitmix64(key))};
  return std::mt19937_64(seq);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::string_view stream_id, std::uint64_t index)
    : seed_(seed), stream_id_(stream_id), key_(mix_key(seed, stream_id, index)),
      engine_(make_engine(key_)) {}

RngStream::RngStream(FromKey, std::uint64_t key, std::string_view stream_id)
    : seed_(key), stream_id_(stream_id), key_(key), engine_(make_engine(key)) {}

RngStream RngStream::from_key(std::uint64_t key, std::string_view stream_id) {
  return RngStream(FromKey{}, key, stream_id);
}

RngStream RngStream::derive(std::string_view label, std::uint64_t index) const {
  std::string id = stream_id_;
  id += '/';
  id += label;
  return RngStream(FromKey{}, mix_key(key_, label, index), id);
}

double RngStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n == 0) throw InvalidArgument("RngStream::below: n must be positive");
  // Lemire-style rejection keeps the result unbiased.
  const std::uint64_t limit = -n % n;
  for (;;) {
    const std::uint64_t r = engine_();
    if (r >= limit) return r % n;
  }
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(theta);
  has_spare_ = true;
  return radius * std::cos(theta);
}

}  // namespace mid
