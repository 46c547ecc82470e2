#include "perfectsim/io.hpp"

#include <charconv>
#include <ostream>
#include <sstream>

namespace perfectsim {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_csv(std::ostream& out, const PointPattern& p) {
  const std::size_t dim = p.dim() == 0 ? 1 : p.dim();
  for (std::size_t i = 0; i < dim; ++i) out << (i ? "," : "") << 'x' << (i + 1);
  for (std::size_t k = 0; k < p.mark_dim(); ++k) out << ",m" << (k + 1);
  out << '\n';
  for (std::size_t n = 0; n < p.size(); ++n) {
    auto x = p.point(n);
    for (std::size_t i = 0; i < x.size(); ++i) out << (i ? "," : "") << format_double(x[i]);
    for (double m : p.marks(n)) out << ',' << format_double(m);
    out << '\n';
  }
}

std::string to_csv(const PointPattern& p) {
  std::ostringstream s;
  write_csv(s, p);
  return s.str();
}

nlohmann::json to_json(const PointPattern& p, const PatternMeta& meta) {
  nlohmann::json points = nlohmann::json::array();
  nlohmann::json marks = nlohmann::json::array();
  for (std::size_t n = 0; n < p.size(); ++n) {
    auto x = p.point(n);
    points.push_back(std::vector<double>(x.begin(), x.end()));
    if (p.mark_dim() > 0) {
      auto m = p.marks(n);
      marks.push_back(std::vector<double>(m.begin(), m.end()));
    }
  }
  nlohmann::json j;
  j["dim"] = p.dim();
  j["mark_dim"] = p.mark_dim();
  j["points"] = std::move(points);
  j["marks"] = p.mark_dim() > 0 ? std::move(marks) : nlohmann::json(nullptr);
  j["meta"] = {{"seed", meta.seed},
               {"stream_id", meta.stream_id},
               {"sampler", meta.sampler},
               {"config_hash", meta.config_hash}};
  if (!meta.extra.empty()) j["meta"]["extra"] = meta.extra;
  return j;
}

PointPattern pattern_from_json(const nlohmann::json& j) {
  const auto dim = j.at("dim").get<std::size_t>();
  const auto mark_dim = j.value("mark_dim", std::size_t{0});
  PointPattern p(dim, mark_dim);
  const auto& pts = j.at("points");
  const auto& marks = j.at("marks");
  for (std::size_t n = 0; n < pts.size(); ++n) {
    auto x = pts[n].get<std::vector<double>>();
    std::vector<double> m;
    if (mark_dim > 0) m = marks.at(n).get<std::vector<double>>();
    p.push_back(x, m);
  }
  return p;
}

PatternMeta meta_from_json(const nlohmann::json& j) {
  const auto& m = j.at("meta");
  PatternMeta meta;
  meta.seed = m.at("seed").get<std::uint64_t>();
  meta.stream_id = m.at("stream_id").get<std::uint64_t>();
  meta.sampler = m.at("sampler").get<std::string>();
  meta.config_hash = m.at("config_hash").get<std::string>();
  if (m.contains("extra")) meta.extra = m["extra"];
  return meta;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  static constexpr char digits[] = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) {
    buf[i] = digits[h & 0xf];
    h >>= 4;
  }
  buf[16] = '\0';
  return buf;
}

}  // namespace perfectsim
