#include <algorithm>
#include <fstream>
#include <sstream>

#include "perfectsim/app.hpp"
#include "perfectsim/io.hpp"

namespace perfectsim::app {

ConfigReader::ConfigReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
  if (!j_.is_object()) throw ConfigError((path_.empty() ? std::string("config") : path_) + ": expected an object");
}

std::string ConfigReader::where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

bool ConfigReader::has(const std::string& key) const { return j_.contains(key); }

const nlohmann::json& ConfigReader::at(const std::string& key) {
  if (!j_.contains(key)) throw ConfigError(where(key) + ": required field missing");
  seen_.push_back(key);
  return j_.at(key);
}

double ConfigReader::number(const std::string& key) {
  const auto& v = at(key);
  if (!v.is_number()) throw ConfigError(where(key) + ": expected a number");
  return v.get<double>();
}

double ConfigReader::number_or(const std::string& key, double def) { return has(key) ? number(key) : def; }

std::uint64_t ConfigReader::integer(const std::string& key) {
  const auto& v = at(key);
  if (!v.is_number_unsigned()) throw ConfigError(where(key) + ": expected a non-negative integer");
  return v.get<std::uint64_t>();
}

std::uint64_t ConfigReader::integer_or(const std::string& key, std::uint64_t def) {
  return has(key) ? integer(key) : def;
}

bool ConfigReader::boolean_or(const std::string& key, bool def) {
  if (!has(key)) return def;
  const auto& v = at(key);
  if (!v.is_boolean()) throw ConfigError(where(key) + ": expected true or false");
  return v.get<bool>();
}

std::string ConfigReader::string(const std::string& key) {
  const auto& v = at(key);
  if (!v.is_string()) throw ConfigError(where(key) + ": expected a string");
  return v.get<std::string>();
}

std::string ConfigReader::string_or(const std::string& key, std::string def) {
  return has(key) ? string(key) : def;
}

std::vector<double> ConfigReader::numbers(const std::string& key) {
  const auto& v = at(key);
  if (!v.is_array()) throw ConfigError(where(key) + ": expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ConfigError(where(key) + "[" + std::to_string(i) + "]: expected a number");
    out.push_back(v[i].get<double>());
  }
  return out;
}

ConfigReader ConfigReader::object(const std::string& key) {
  const auto& v = at(key);
  if (!v.is_object()) throw ConfigError(where(key) + ": expected an object");
  return ConfigReader(v, where(key));
}

std::vector<ConfigReader> ConfigReader::objects(const std::string& key) {
  const auto& v = at(key);
  if (!v.is_array()) throw ConfigError(where(key) + ": expected an array of objects");
  std::vector<ConfigReader> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.emplace_back(v[i], where(key) + "[" + std::to_string(i) + "]");
  }
  return out;
}

void ConfigReader::finish() const {
  for (auto it = j_.begin(); it != j_.end(); ++it) {
    if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end()) {
      throw ConfigError(where(it.key()) + ": unknown key");
    }
  }
}

namespace {

std::string line_col(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

RunConfig parse_config(std::string_view text, std::string_view source) {
  RunConfig cfg;
  try {
    cfg.raw = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    std::string msg = e.what();
    if (auto p = msg.find("parse error"); p != std::string::npos) msg = msg.substr(p);
    throw ConfigError(std::string(source) + ": " + line_col(text, e.byte) + ": " + msg);
  }
  ConfigReader top(cfg.raw, "");
  const auto version = top.integer("schema_version");
  if (version != kSchemaVersion) {
    throw ConfigError("schema_version: unsupported version " + std::to_string(version) + " (expected " +
                      std::to_string(kSchemaVersion) + ")");
  }
  cfg.sampler = top.string("sampler");
  cfg.seed = top.integer("seed");
  cfg.replicates = top.integer_or("replicates", 1);
  if (cfg.replicates == 0) throw ConfigError("replicates: must be >= 1");
  if (top.has("window")) {
    auto w = top.object("window");
    auto lo = w.numbers("lower");
    auto hi = w.numbers("upper");
    w.finish();
    try {
      cfg.window = Window(lo, hi);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("window: ") + e.what());
    }
  }
  if (top.has("params")) {
    top.object("params");  // marks as seen; checked by the sampler factory
    cfg.params = cfg.raw.at("params");
  } else {
    cfg.params = nlohmann::json::object();
  }
  if (top.has("output")) {
    auto o = top.object("output");
    const auto fmt = o.string_or("format", "both");
    if (fmt != "csv" && fmt != "json" && fmt != "both") throw ConfigError("output.format: expected csv, json or both");
    cfg.output.csv = fmt != "json";
    cfg.output.json = fmt != "csv";
    cfg.output.prefix = o.string_or("prefix", "pattern");
    if (cfg.output.prefix.empty() || cfg.output.prefix.find('/') != std::string::npos) {
      throw ConfigError("output.prefix: must be a plain file name stem");
    }
    o.finish();
  }
  if (top.has("validation")) {
    auto v = top.object("validation");
    cfg.validation.enabled = v.boolean_or("enabled", true);
    cfg.validation.alpha = v.number_or("alpha", 0.05);
    if (!(cfg.validation.alpha > 0.0 && cfg.validation.alpha < 1.0)) {
      throw ConfigError("validation.alpha: must be in (0, 1)");
    }
    cfg.validation.replicates = v.integer_or("replicates", 10000);
    cfg.validation.oracle_seed = v.integer_or("oracle_seed", 0);
    v.finish();
  }
  top.finish();
  cfg.hash = fnv1a_hex(cfg.raw.dump());
  // Parameter blocks are checked now so that errors surface before sampling.
  make_sampler(cfg);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return parse_config(s.str(), path.string());
}

}  // namespace perfectsim::app
