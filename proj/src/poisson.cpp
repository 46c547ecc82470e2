#include "perfectsim/poisson.hpp"
#include "perfectsim/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>


namespace perfectsim {

PointPattern sample_homogeneous(const Window& w, double rate, RngStream& rng) {
  if (!(rate >= 0.0) || !std::isfinite(rate)) throw ConfigError("Poisson rate must be >= 0");
  PointPattern out(w.dim());
  const auto n = rng.poisson(rate * w.volume());
  out.reserve(n);
  std::vector<double> x(w.dim());
  for (std::uint64_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < w.dim(); ++i) x[i] = rng.uniform(w.lower(i), w.upper(i));
    out.push_back(x);
  }
  return out;
}

StripSample sample_inhomogeneous_strip(double horizon, const DominatedIntensity& dom,
                                       RngStream& rng) {
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw ConfigError("strip horizon must be finite");
  if (!(dom.bound >= 0.0) || !std::isfinite(dom.bound)) throw ConfigError("strip bound must be >= 0");
  StripSample s;
  s.accepted = PointPattern(1);
  if (dom.bound == 0.0) return s;
  std::vector<double> history;
  double t = 0.0;
  while (true) {
    t += rng.exponential(dom.bound);
    if (t > horizon) break;
    const double y = dom.bound * rng.uniform();
    const double lam = dom.rate(t, history);
    if (!(lam >= 0.0) || lam > dom.bound) throw SamplingError("dominating bound violated");
    const bool keep = y < lam;
    s.times.push_back(t);
    s.heights.push_back(y);
    s.is_accepted.push_back(keep);
    if (keep) {
      history.push_back(t);
      s.accepted.push_back(t);
    }
  }
  return s;
}

FiniteDensitySampler::FiniteDensitySampler(FiniteDensity d) : spec_(std::move(d)) {
  if (!spec_.density && !spec_.cumulative) throw ConfigError("finite density needs r or its cumulative");
  if (!(spec_.truncation > 0.0) || !std::isfinite(spec_.truncation)) {
    if (spec_.truncation == 0.0) {
      total_ = 0.0;
      return;
    }
    throw SamplingError("retention mass diverges: exact sampling impossible");
  }
  if (!(spec_.grid_fraction > 0.0 && spec_.grid_fraction <= 1.0)) {
    throw ConfigError("grid fraction must lie in (0, 1]");
  }
  const auto cells = static_cast<std::size_t>(std::ceil(1.0 / spec_.grid_fraction));
  step_ = spec_.truncation / static_cast<double>(cells);
  cdf_.assign(cells + 1, 0.0);
  for (std::size_t k = 0; k < cells; ++k) {
    const double a = step_ * static_cast<double>(k);
    const double b = k + 1 == cells ? spec_.truncation : a + step_;
    double m = spec_.cumulative ? spec_.cumulative(b) - spec_.cumulative(a)
                                : integrate(spec_.density, a, b, 1e-10);
    if (!std::isfinite(m)) throw SamplingError("retention mass diverges: exact sampling impossible");
    if (m < 0.0) {
      if (m < -1e-12 * std::abs(cdf_[k]) - 1e-300) throw ConfigError("density must be non-negative");
      m = 0.0;
    }
    cdf_[k + 1] = cdf_[k] + m;
  }
  total_ = cdf_.back();
  if (!std::isfinite(total_)) throw SamplingError("retention mass diverges: exact sampling impossible");
}

double FiniteDensitySampler::draw_position(RngStream& rng) const {
  const double target = rng.uniform() * total_;
  if (spec_.inverse_cumulative) {
    return std::clamp(spec_.inverse_cumulative(target), 0.0, spec_.truncation);
  }
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
  auto k = static_cast<std::size_t>(std::distance(cdf_.begin(), it));
  k = std::clamp<std::size_t>(k, 1, cdf_.size() - 1) - 1;
  const double a = step_ * static_cast<double>(k);
  const double b = std::min(spec_.truncation, a + step_);
  return rng.uniform(a, b);
}

PointPattern FiniteDensitySampler::sample(RngStream& rng) const {
  PointPattern out(1);
  if (total_ <= 0.0) return out;
  const auto n = rng.poisson(total_);
  std::vector<double> t(n);
  for (auto& v : t) v = draw_position(rng);
  std::sort(t.begin(), t.end());
  out.reserve(n);
  for (double v : t) out.push_back(v);
  return out;
}

PointPattern sample_poisson_finite_density(const FiniteDensity& d, RngStream& rng) {
  return FiniteDensitySampler(d).sample(rng);
}

}  // namespace perfectsim
