#include "perfectsim/germ.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include <boost/math/special_functions/trigamma.hpp>

#include "perfectsim/poisson.hpp"

namespace perfectsim {

namespace {

constexpr double kNeglectedSum = 1e-14;

// Suffix sums of log(1 - p_k) for k < n_terms; -inf once some p_k = 1.
std::function<double(std::uint64_t)> suffix_log_tail(const std::function<double(std::uint64_t)>& p,
                                                     std::uint64_t n_terms) {
  auto tail = std::make_shared<std::vector<double>>(n_terms + 1, 0.0);
  double sum = 0.0, comp = 0.0;
  bool certain = false;
  for (std::uint64_t k = n_terms; k-- > 0;) {
    const double pk = p(k);
    if (pk >= 1.0) certain = true;
    if (!certain) {
      const double term = std::log1p(-pk);
      const double t = sum + term;
      comp += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
      sum = t;
    }
    (*tail)[k] = certain ? -std::numeric_limits<double>::infinity() : sum + comp;
  }
  return [tail](std::uint64_t n) { return n < tail->size() ? (*tail)[n] : 0.0; };
}

void check_prob(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(what) + " must lie in [0, 1]");
}

}  // namespace

GridSequence GridSequence::table(std::vector<double> values) {
  for (double v : values) check_prob(v, "grid table entry");
  auto vals = std::make_shared<std::vector<double>>(std::move(values));
  GridSequence s;
  s.p_ = [vals](std::uint64_t n) { return n < vals->size() ? (*vals)[n] : 0.0; };
  s.log_tail_ = suffix_log_tail(s.p_, vals->size());
  return s;
}

GridSequence GridSequence::geometric(double p0, double ratio) {
  check_prob(p0, "geometric p0");
  if (!(ratio >= 0.0 && ratio < 1.0)) throw ConfigError("geometric ratio must lie in [0, 1)");
  GridSequence s;
  s.p_ = [p0, ratio](std::uint64_t n) { return p0 * std::pow(ratio, static_cast<double>(n)); };
  std::uint64_t n_terms = 1;
  while (p0 * std::pow(ratio, static_cast<double>(n_terms)) / (1.0 - ratio) >= kNeglectedSum) ++n_terms;
  s.log_tail_ = suffix_log_tail(s.p_, n_terms);
  return s;
}

GridSequence GridSequence::inverse_square(double c) {
  if (!(c >= 0.0) || !std::isfinite(c)) throw ConfigError("inverse-square constant must be >= 0");
  GridSequence s;
  s.p_ = [c](std::uint64_t n) {
    const double m = static_cast<double>(n) + 1.0;
    return -std::expm1(-c / (m * m));
  };
  s.log_tail_ = [c](std::uint64_t n) {
    return -c * boost::math::trigamma(static_cast<double>(n) + 1.0);
  };
  return s;
}

GridSequence GridSequence::z2_inverse_square(double c) {
  if (!(c >= 0.0) || !std::isfinite(c)) throw ConfigError("inverse-square constant must be >= 0");
  GridSequence s;
  s.p_ = [c](std::uint64_t n) {
    const auto z = z2_site(n);
    const double r2 = 1.0 + static_cast<double>(z[0]) * z[0] + static_cast<double>(z[1]) * z[1];
    return -std::expm1(-c / (r2 * r2));
  };
  return s;
}

GridSequence GridSequence::custom(std::function<double(std::uint64_t)> p) {
  if (!p) throw ConfigError("custom grid sequence needs a function");
  GridSequence s;
  s.p_ = std::move(p);
  return s;
}

double GridSequence::value(std::uint64_t n) const {
  const double v = p_(n);
  check_prob(v, "grid retention probability");
  return v;
}

double GridSequence::log_tail(std::uint64_t n) const {
  if (!log_tail_) throw ConfigError("distribution of T not computable");
  return std::min(0.0, log_tail_(n));
}

double grid_last_point_pmf(const GridSequence& s, std::uint64_t n) {
  return s.value(n) * std::exp(s.log_tail(n + 1));
}

double grid_empty_prob(const GridSequence& s) { return std::exp(s.log_tail(0)); }

std::optional<std::uint64_t> grid_last_point(const GridSequence& s, RngStream& rng) {
  if (!s.has_tails()) throw ConfigError("distribution of T not computable");
  const double log_u = std::log(rng.uniform());
  if (log_u <= s.log_tail(0)) return std::nullopt;
  // Smallest n with P(T <= n or empty) = exp(log_tail(n+1)) >= U.
  auto ok = [&](std::uint64_t n) { return s.log_tail(n + 1) >= log_u; };
  std::uint64_t hi = 0;
  while (!ok(hi)) {
    hi = hi == 0 ? 1 : 2 * hi;
    if (hi > (std::uint64_t{1} << 62)) throw SamplingError("grid last point beyond 2^62");
  }
  std::uint64_t lo = hi / 2;
  if (ok(lo)) return lo;  // only when hi == 0 or 1
  while (hi - lo > 1) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    (ok(mid) ? hi : lo) = mid;
  }
  return hi;
}

std::vector<std::uint64_t> thin_grid(const GridThinningSpec& spec, RngStream& rng) {
  const GridSequence& base = spec.q ? *spec.q : spec.p;
  if (!base.has_tails()) throw ConfigError("distribution of T not computable");
  std::vector<std::uint64_t> out;
  const auto t = grid_last_point(base, rng);
  if (!t) return out;
  auto keep = [&](std::uint64_t k) {
    if (!spec.q) return true;
    const double p = spec.p.value(k), q = spec.q->value(k);
    if (p > q) throw SamplingError("dominating sequence violated at index " + std::to_string(k));
    return q > 0.0 && rng.uniform() * q < p;
  };
  for (std::uint64_t k = 0; k < *t; ++k) {
    if (rng.uniform() < base.value(k) && keep(k)) out.push_back(k);
  }
  if (keep(*t)) out.push_back(*t);
  return out;
}

std::optional<std::uint64_t> grid_last_point(const GridThinningSpec& spec, RngStream& rng) {
  if (!spec.q) return grid_last_point(spec.p, rng);
  const auto kept = thin_grid(spec, rng);
  if (kept.empty()) return std::nullopt;
  return kept.back();
}

std::array<std::int64_t, 2> z2_site(std::uint64_t n) {
  if (n == 0) return {0, 0};
  auto r = static_cast<std::uint64_t>(std::sqrt(static_cast<double>(n)));
  while (r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  const auto s = static_cast<std::int64_t>((r + 1) / 2);
  const auto base = static_cast<std::uint64_t>((2 * s - 1) * (2 * s - 1));
  const auto k = static_cast<std::int64_t>(n - base);
  if (k < 2 * s) return {s, -s + 1 + k};
  if (k < 4 * s) return {s - 1 - (k - 2 * s), s};
  if (k < 6 * s) return {-s, s - 1 - (k - 4 * s)};
  return {-s + 1 + (k - 6 * s), -s};
}

std::uint64_t z2_index(std::int64_t i, std::int64_t j) {
  const std::int64_t s = std::max(std::abs(i), std::abs(j));
  if (s == 0) return 0;
  const auto base = static_cast<std::uint64_t>((2 * s - 1) * (2 * s - 1));
  std::int64_t k;
  if (i == s && j > -s) {
    k = j + s - 1;
  } else if (j == s) {
    k = 2 * s + (s - 1 - i);
  } else if (i == -s) {
    k = 4 * s + (s - 1 - j);
  } else {
    k = 6 * s + (i + s - 1);
  }
  return base + static_cast<std::uint64_t>(k);
}

RenewalThinResult renewal_thin_first_run(const RenewalSpec& spec, const RenewalRetention& retain,
                                         double horizon, RngStream& rng) {
  const double m = spec.bound;
  if (!(m > 0.0) || !std::isfinite(m)) throw ConfigError("renewal: hazard bound must be positive");
  if (!spec.hazard || !retain.p) throw ConfigError("renewal: hazard and retention are required");
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw ConfigError("renewal: horizon must be finite");
  RenewalThinResult res;
  res.retained = PointPattern(1);
  res.renewal = PointPattern(1);
  auto p_at = [&](double t) {
    const double v = retain.p(t);
    check_prob(v, "renewal retention");
    return v;
  };

  // (1) Poisson(M p) candidates.
  std::vector<double> flagged;
  if (retain.cumulative && retain.inverse_cumulative) {
    const double mass = retain.cumulative(horizon);
    const auto n = rng.poisson(m * mass);
    for (std::uint64_t i = 0; i < n; ++i) {
      flagged.push_back(std::clamp(retain.inverse_cumulative(rng.uniform() * mass), 0.0, horizon));
    }
    std::sort(flagged.begin(), flagged.end());
  } else {
    for (double t = rng.exponential(m); t <= horizon; t += rng.exponential(m)) {
      if (rng.uniform() < p_at(t)) flagged.push_back(t);
    }
  }
  if (flagged.empty()) return res;
  const double last = flagged.back();

  // (2) Poisson(M (1 - p)) on [0, t_k].
  std::vector<double> other;
  for (double t = rng.exponential(m); t <= last; t += rng.exponential(m)) {
    if (rng.uniform() >= p_at(t)) other.push_back(t);
  }

  // (3) merge into one rate-M stream with flags.
  std::vector<std::pair<double, bool>> stream;
  stream.reserve(flagged.size() + other.size());
  for (double t : flagged) stream.emplace_back(t, true);
  for (double t : other) stream.emplace_back(t, false);
  std::sort(stream.begin(), stream.end());
  res.dominating_points = stream.size();

  // (4) renewal under y = r(t - theta).
  double theta = 0.0;
  bool first = true;
  for (const auto& [t, flag] : stream) {
    const double y = rng.uniform() * m;
    const auto& hz = first && spec.delay_hazard ? spec.delay_hazard : spec.hazard;
    const double r = hz(t - theta);
    if (!(r >= 0.0) || r > m) throw SamplingError("failure rate exceeds its declared bound");
    if (y < r) {
      theta = t;
      first = false;
      res.renewal.push_back(t);
      if (flag) res.retained.push_back(t);
    }
  }
  return res;
}

PointPattern renewal_thin_first(const RenewalSpec& spec, const RenewalRetention& retain,
                                double horizon, RngStream& rng) {
  return renewal_thin_first_run(spec, retain, horizon, rng).retained;
}

namespace {

double dist2(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

PointPattern matern_thin_first(double rate, double hardcore,
                               const std::function<double(std::span<const double>)>& p,
                               const Window& w, RngStream& rng) {
  if (!(rate >= 0.0) || !std::isfinite(rate)) throw ConfigError("matern: rate must be >= 0");
  if (!(hardcore >= 0.0) || !std::isfinite(hardcore)) throw ConfigError("matern: radius must be >= 0");
  const std::size_t m = w.dim();
  PointPattern out(m);
  auto p_at = [&](std::span<const double> x) {
    if (!w.contains(x)) return 0.0;
    const double v = p(x);
    check_prob(v, "matern retention");
    return v;
  };

  PointPattern n1(m);
  const auto cand = sample_homogeneous(w, rate, rng);
  for (std::size_t i = 0; i < cand.size(); ++i) {
    if (rng.uniform() < p_at(cand.point(i))) n1.push_back(cand.point(i));
  }
  if (n1.empty()) return out;

  std::vector<double> lo(m, std::numeric_limits<double>::infinity());
  std::vector<double> hi(m, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n1.size(); ++i) {
    for (std::size_t k = 0; k < m; ++k) {
      lo[k] = std::min(lo[k], n1.coord(i, k) - hardcore);
      hi[k] = std::max(hi[k], n1.coord(i, k) + hardcore);
    }
  }
  const double r2 = hardcore * hardcore;
  PointPattern n2(m);
  if (hardcore > 0.0) {
    const auto box = sample_homogeneous(Window(lo, hi), rate, rng);
    for (std::size_t i = 0; i < box.size(); ++i) {
      const auto y = box.point(i);
      bool near = false;
      for (std::size_t j = 0; j < n1.size() && !near; ++j) near = dist2(y, n1.point(j)) <= r2;
      if (near && rng.uniform() >= p_at(y)) n2.push_back(y);
    }
  }

  std::vector<double> u1(n1.size()), u2(n2.size());
  for (auto& v : u1) v = rng.uniform();
  for (auto& v : u2) v = rng.uniform();
  for (std::size_t i = 0; i < n1.size(); ++i) {
    const auto x = n1.point(i);
    bool survives = true;
    for (std::size_t j = 0; j < n1.size() && survives; ++j) {
      if (j != i && u1[j] <= u1[i] && dist2(x, n1.point(j)) <= r2) survives = false;
    }
    for (std::size_t j = 0; j < n2.size() && survives; ++j) {
      if (u2[j] <= u1[i] && dist2(x, n2.point(j)) <= r2) survives = false;
    }
    if (survives) out.push_back(x);
  }
  return out;
}

double nonlinear_intensity(const NonlinearHawkesSpec& spec, std::span<const double> events,
                           double start, double t) {
  double s = 0.0;
  for (double e : events) {
    if (e >= start && e < t) s += spec.h(t - e);
  }
  const double v = spec.phi(s);
  if (!(v >= 0.0) || v > spec.bound) throw SamplingError("dominating bound violated");
  return v;
}

NonlinearHawkesResult nonlinear_hawkes_run(const NonlinearHawkesSpec& spec, double lo, double hi,
                                           RngStream& rng) {
  const double lam = spec.bound;
  const double a = spec.support;
  if (!spec.phi || !spec.h) throw ConfigError("nonlinear hawkes: phi and h are required");
  if (!(lam > 0.0) || !std::isfinite(lam)) throw ConfigError("nonlinear hawkes: bound must be positive");
  if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("nonlinear hawkes: support must be finite");
  if (!(lo < hi)) throw ConfigError("nonlinear hawkes: need lo < hi");
  NonlinearHawkesResult res;
  res.pattern = PointPattern(1);
  res.history = PointPattern(1);

  // Backward search in the dominating stream for a gap longer than a.
  std::vector<double> back;
  double cur = lo;
  while (true) {
    const double s = cur - rng.exponential(lam);
    if (lo - s > spec.search_horizon) {
      throw SamplingError("regeneration search exceeded horizon " + std::to_string(spec.search_horizon) +
                          " (expected distance e^{La}/L = " + std::to_string(std::exp(lam * a) / lam) + ")");
    }
    if (!back.empty() && back.back() - s > a) break;
    back.push_back(s);
    cur = s;
  }
  res.regeneration = back.back();
  std::vector<double> stream(back.rbegin(), back.rend());
  for (double t = lo + rng.exponential(lam); t <= hi; t += rng.exponential(lam)) stream.push_back(t);

  std::vector<double> accepted;
  std::size_t first_live = 0;
  for (double t : stream) {
    const double y = rng.uniform() * lam;
    while (first_live < accepted.size() && t - accepted[first_live] > a) ++first_live;
    const std::span<const double> live(accepted.data() + first_live, accepted.size() - first_live);
    if (y < nonlinear_intensity(spec, live, res.regeneration, t)) accepted.push_back(t);
  }
  for (double t : accepted) {
    if (t < lo) {
      res.history.push_back(t);
    } else {
      res.pattern.push_back(t);
    }
  }
  return res;
}

PointPattern nonlinear_hawkes_germ(const NonlinearHawkesSpec& spec, double lo, double hi,
                                   RngStream& rng) {
  return nonlinear_hawkes_run(spec, lo, hi, rng).pattern;
}

}  // namespace perfectsim
