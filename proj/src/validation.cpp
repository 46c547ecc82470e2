#include "perfectsim/validation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>

namespace perfectsim {

TestReport TestReport::make(std::string name, double value, double threshold, double p_value,
                            std::uint64_t replicates, std::vector<std::uint64_t> seeds) {
  TestReport r;
  r.name = std::move(name);
  r.value = value;
  r.threshold = threshold;
  r.p_value = p_value;
  r.reject = value > threshold;
  r.replicates = replicates;
  r.seeds = std::move(seeds);
  return r;
}

nlohmann::json to_json(const TestReport& r) {
  return {{"name", r.name},           {"value", r.value},
          {"threshold", r.threshold}, {"p_value", r.p_value},
          {"decision", r.reject ? "reject" : "accept"},
          {"replicates", r.replicates}, {"seeds", r.seeds}};
}

nlohmann::json to_json(std::span<const TestReport> rs) {
  auto j = nlohmann::json::array();
  for (const auto& r : rs) j.push_back(to_json(r));
  return j;
}

Estimate mean_estimate(std::span<const double> xs, double z) {
  if (xs.size() < 2) throw ConfigError("need at least 2 replicates");
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double se = std::sqrt(ss / (n - 1.0) / n);
  return {mean, se, mean - z * se, mean + z * se};
}

std::vector<double> counts_in(std::span<const PointPattern> patterns, const Window& w) {
  std::vector<double> c(patterns.size());
  for (std::size_t i = 0; i < patterns.size(); ++i) c[i] = static_cast<double>(patterns[i].count_in(w));
  return c;
}

Estimate empirical_intensity(std::span<const PointPattern> patterns, const Window& w, double z) {
  const auto c = counts_in(patterns, w);
  auto e = mean_estimate(c, z);
  const double v = w.volume();
  e.value /= v;
  e.se /= v;
  e.lower = std::max(0.0, e.lower / v);
  e.upper /= v;
  if (e.value == 0.0) e.upper = 3.0 / (static_cast<double>(c.size()) * v);
  return e;
}

std::vector<Estimate> empirical_laplace(std::span<const PointPattern> patterns, const Window& w,
                                        std::span<const double> cs, double z) {
  const auto counts = counts_in(patterns, w);
  std::vector<Estimate> out;
  for (double c : cs) {
    if (!(c >= 0.0)) throw ConfigError("Laplace argument must be >= 0");
    std::vector<double> v(counts.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::exp(-c * counts[i]);
    out.push_back(mean_estimate(v, z));
  }
  return out;
}

std::vector<Estimate> void_probability(std::span<const PointPattern> patterns, std::span<const Window> probes,
                                       double z) {
  std::vector<Estimate> out;
  for (const auto& b : probes) {
    std::vector<double> v(patterns.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = patterns[i].count_in(b) == 0 ? 1.0 : 0.0;
    out.push_back(mean_estimate(v, z));
  }
  return out;
}

double kolmogorov_tail(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 0.2) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    s += (k % 2 == 1 ? term : -term);
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

namespace {

// c(alpha) with P(K > c) = alpha.
double kolmogorov_quantile(double alpha) {
  double lo = 0.2, hi = 5.0;
  for (int i = 0; i < 100; ++i) {
    const double mid = 0.5 * (lo + hi);
    (kolmogorov_tail(mid) > alpha ? lo : hi) = mid;
  }
  return hi;
}

}  // namespace

TestReport two_sample_ks(std::span<const double> a, std::span<const double> b, double alpha, std::string name) {
  if (a.size() < kMinSample || b.size() < kMinSample) {
    throw ConfigError("sample too small for the asymptotic KS threshold (need >= " +
                      std::to_string(kMinSample) + ")");
  }
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n = static_cast<double>(x.size()), m = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  const double scale = std::sqrt(n * m / (n + m));
  return TestReport::make(std::move(name), d, kolmogorov_quantile(alpha) / scale, kolmogorov_tail(d * scale),
                          a.size() + b.size());
}

TestReport chi_square(std::span<const double> observed, std::span<const double> expected, double alpha, int ddof,
                      std::string name) {
  if (observed.size() != expected.size()) throw ConfigError("chi-square: observed and expected differ in length");
  const double total = std::accumulate(observed.begin(), observed.end(), 0.0);
  if (total < static_cast<double>(kMinSample)) {
    throw ConfigError("sample too small for the chi-square threshold (need >= " + std::to_string(kMinSample) + ")");
  }
  std::vector<double> o, e;
  double ob = 0.0, eb = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    if (!(expected[k] >= 0.0)) throw ConfigError("chi-square: expected counts must be >= 0");
    ob += observed[k];
    eb += expected[k];
    if (eb >= 5.0) {
      o.push_back(ob);
      e.push_back(eb);
      ob = eb = 0.0;
    }
  }
  if (eb > 0.0 || ob > 0.0) {
    if (e.empty()) throw ConfigError("chi-square: expected counts too small");
    o.back() += ob;
    e.back() += eb;
  }
  const int df = static_cast<int>(e.size()) - 1 - ddof;
  if (df < 1) throw ConfigError("chi-square: not enough bins after pooling");
  double stat = 0.0;
  for (std::size_t k = 0; k < e.size(); ++k) stat += (o[k] - e[k]) * (o[k] - e[k]) / e[k];
  boost::math::chi_squared dist(df);
  return TestReport::make(std::move(name), stat, boost::math::quantile(boost::math::complement(dist, alpha)),
                          boost::math::cdf(boost::math::complement(dist, stat)),
                          static_cast<std::uint64_t>(total));
}

void holm_correct(std::span<TestReport> reports, double alpha) {
  std::vector<std::size_t> order(reports.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return reports[a].p_value < reports[b].p_value; });
  const double m = static_cast<double>(reports.size());
  bool stop = false;
  for (std::size_t r = 0; r < order.size(); ++r) {
    auto& rep = reports[order[r]];
    const double level = alpha / (m - static_cast<double>(r));
    // Decision on the p-value scale: value = p, threshold = Holm level,
    // reject iff 1 - p > 1 - level.
    rep.value = 1.0 - rep.p_value;
    rep.threshold = 1.0 - level;
    if (stop || rep.p_value > level) {
      stop = true;
      rep.threshold = 1.0;
    }
    rep.reject = rep.value > rep.threshold;
  }
}

HistogramDiscrepancy histogram_discrepancy(std::span<const double> a, std::span<const double> b, double z) {
  if (a.empty() || b.empty()) throw ConfigError("histogram discrepancy needs non-empty samples");
  std::map<std::int64_t, std::pair<double, double>> h;
  for (double x : a) h[std::llround(x)].first += 1.0;
  for (double x : b) h[std::llround(x)].second += 1.0;
  const double n = static_cast<double>(a.size()), m = static_cast<double>(b.size());
  HistogramDiscrepancy out;
  for (const auto& [k, c] : h) {
    const double pa = c.first / n, pb = c.second / m;
    const double d = std::abs(pa - pb);
    if (d > out.value || (d == out.value && out.half_width == 0.0)) {
      out.value = d;
      out.at = k;
      out.half_width = z * std::sqrt(pa * (1.0 - pa) / n + pb * (1.0 - pb) / m);
    }
  }
  return out;
}

}  // namespace perfectsim
