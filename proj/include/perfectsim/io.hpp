#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

#include <json.hpp>

#include "perfectsim/core.hpp"

namespace perfectsim {

/// Provenance recorded next to a serialized pattern.
struct PatternMeta {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  std::string sampler;
  std::string config_hash;
  nlohmann::json extra = nlohmann::json::object();

  bool operator==(const PatternMeta&) const = default;
};

/// Shortest round-tripping decimal form of v.
std::string format_double(double v);

/// CSV: header x1..xm,m1..mk then one point per row.
void write_csv(std::ostream& out, const PointPattern& p);
std::string to_csv(const PointPattern& p);

/// {dim, points, marks, meta:{seed, stream_id, sampler, config_hash}}.
nlohmann::json to_json(const PointPattern& p, const PatternMeta& meta);
PointPattern pattern_from_json(const nlohmann::json& j);
PatternMeta meta_from_json(const nlohmann::json& j);

/// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace perfectsim
