#pragma once

#include <cstdint>

#include <boost/random/mersenne_twister.hpp>

namespace perfectsim {

/// SplitMix64 finalizer; used to derive stream keys.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// A reproducible random stream identified by (seed, stream_id).
///
/// Identical keys give identical sequences. Streams are single-owner: hand a
/// separate stream (split/fork) to every concurrent task.
class RngStream {
 public:
  using engine_type = boost::random::mt19937_64;

  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  /// Child stream that depends only on this stream's key and k.
  RngStream split(std::uint64_t k) const;
  /// Child stream keyed by a value drawn from this stream (advances state).
  RngStream fork();

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1).
  double uniform();
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  /// Uniform on (0, 1]; safe to take the log of.
  double uniform_pos() { return 1.0 - uniform(); }
  double exponential(double rate);
  std::uint64_t poisson(double mean);
  double normal(double mean, double sd);
  double gamma(double shape, double scale);
  bool bernoulli(double p) { return uniform() < p; }
  std::uint64_t uniform_index(std::uint64_t n);

  engine_type& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  engine_type engine_;
};

}  // namespace perfectsim
