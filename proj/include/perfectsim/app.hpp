#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "perfectsim/core.hpp"
#include "perfectsim/rng.hpp"
#include "perfectsim/validation.hpp"

namespace perfectsim::app {

inline constexpr int kSchemaVersion = 1;

/// Strict reader over a JSON object: typed access by key, with the dotted
/// path in every error, and `finish()` rejecting keys that were never read.
class ConfigReader {
 public:
  ConfigReader(const nlohmann::json& j, std::string path);

  const std::string& path() const noexcept { return path_; }
  bool has(const std::string& key) const;
  double number(const std::string& key);
  double number_or(const std::string& key, double def);
  std::uint64_t integer(const std::string& key);
  std::uint64_t integer_or(const std::string& key, std::uint64_t def);
  bool boolean_or(const std::string& key, bool def);
  std::string string(const std::string& key);
  std::string string_or(const std::string& key, std::string def);
  std::vector<double> numbers(const std::string& key);
  ConfigReader object(const std::string& key);
  std::vector<ConfigReader> objects(const std::string& key);
  void finish() const;

 private:
  const nlohmann::json& at(const std::string& key);
  std::string where(const std::string& key) const;

  const nlohmann::json& j_;
  std::string path_;
  std::vector<std::string> seen_;
};

struct OutputSpec {
  bool csv = true;
  bool json = true;
  std::string prefix = "pattern";
};

struct ValidationSpec {
  bool enabled = false;
  double alpha = 0.05;
  std::uint64_t replicates = 10000;
  std::uint64_t oracle_seed = 0;  // 0: seed + 1
};

struct RunConfig {
  nlohmann::json raw;
  std::string sampler;
  std::uint64_t seed = 0;
  std::uint64_t replicates = 1;
  std::optional<Window> window;
  nlohmann::json params;
  OutputSpec output;
  ValidationSpec validation;
  std::string hash;  // of the canonical dump
};

/// Parses and schema-checks a config document. Errors carry line/column
/// (syntax) or the offending field path (schema).
RunConfig parse_config(std::string_view text, std::string_view source = "config");
RunConfig load_config(const std::filesystem::path& path);

struct Replicate {
  PointPattern pattern;
  nlohmann::json extra = nlohmann::json::object();
};

class Sampler {
 public:
  virtual ~Sampler() = default;
  virtual Replicate run(RngStream& rng) const = 0;
  /// Per-run facts worth recording (certificates, envelopes).
  virtual nlohmann::json describe() const { return nlohmann::json::object(); }
};

/// Builds the sampler named in the config; all parameters are validated
/// here, before any sampling.
std::unique_ptr<Sampler> make_sampler(const RunConfig& cfg);

/// Replicates with RngStream(seed, i), parallel over i.
std::vector<Replicate> sample_replicates(const Sampler& s, std::uint64_t seed, std::size_t n,
                                         bool parallel = true);

/// Writes <prefix>_<i>.csv / .json per replicate and summary.json.
void write_samples(const RunConfig& cfg, const std::filesystem::path& dir);

/// Runs the validation suite for the config's sampler (Holm-corrected).
std::vector<TestReport> validate(const RunConfig& cfg);

/// Plot data as CSV: points-2d, counts-histogram, sandwich-curves,
/// coverage-raster.
void plot_data(const RunConfig& cfg, std::string_view kind, std::ostream& out);

}  // namespace perfectsim::app
