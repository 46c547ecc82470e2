#include "perfectsim/rng.hpp"

#include <cmath>
#include <limits>

#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "perfectsim/error.hpp"

namespace perfectsim {

namespace {

std::uint64_t engine_key(std::uint64_t seed, std::uint64_t stream_id) {
  return mix64(mix64(seed) ^ (stream_id * 0xd1b54a32d192ed03ULL + 0x2545f4914f6cdd1dULL));
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(engine_key(seed, stream_id)) {}

RngStream RngStream::split(std::uint64_t k) const {
  return RngStream(seed_, mix64(stream_id_ ^ mix64(k + 0x632be59bd9b4e019ULL)));
}

RngStream RngStream::fork() { return RngStream(seed_, mix64(engine_())); }

double RngStream::uniform() {
  // 53 random bits; exactly representable, never 1.
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::exponential(double rate) {
  if (!(rate > 0.0)) throw ConfigError("exponential rate must be positive");
  return -std::log(uniform_pos()) / rate;
}

std::uint64_t RngStream::poisson(double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) {
    throw SamplingError("poisson mean must be finite and non-negative");
  }
  if (mean == 0.0) return 0;
  if (mean > 1e15) throw SamplingError("poisson mean too large to sample");
  boost::random::poisson_distribution<std::uint64_t, double> dist(mean);
  return dist(engine_);
}

double RngStream::normal(double mean, double sd) {
  boost::random::normal_distribution<double> dist(mean, sd);
  return dist(engine_);
}

double RngStream::gamma(double shape, double scale) {
  boost::random::gamma_distribution<double> dist(shape, scale);
  return dist(engine_);
}

std::uint64_t RngStream::uniform_index(std::uint64_t n) {
  boost::random::uniform_int_distribution<std::uint64_t> dist(0, n - 1);
  return dist(engine_);
}

}  // namespace perfectsim
