#include "perfectsim/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "perfectsim/parallel.hpp"
#include "perfectsim/poisson.hpp"
#include "perfectsim/quadrature.hpp"

namespace perfectsim {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

void check_dim(const ClusterKernel& k, std::span<const double> x, const Window& w) {
  if (x.size() != k.dim() || w.dim() != k.dim()) {
    throw ConfigError("cluster kernel dimension mismatch");
  }
}

}  // namespace

std::optional<double> ClusterKernel::retention_prob(std::span<const double>,
                                                    const Window&) const {
  return std::nullopt;
}

std::optional<double> ClusterKernel::mean_mass() const { return std::nullopt; }

std::optional<double> ClusterKernel::support_radius() const { return std::nullopt; }

double ClusterKernel::retention_envelope(double d) const {
  const auto r = support_radius();
  return r && d > *r ? 0.0 : 1.0;
}

DiracClusterKernel::DiracClusterKernel(std::vector<double> offset) : offset_(std::move(offset)) {
  if (offset_.empty()) throw ConfigError("dirac kernel needs a dimension");
  for (double v : offset_) {
    if (!std::isfinite(v)) throw ConfigError("dirac kernel offset must be finite");
  }
}

PointPattern DiracClusterKernel::sample(std::span<const double> x, RngStream&) const {
  PointPattern out(dim());
  std::vector<double> y(x.begin(), x.end());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += offset_[i];
  out.push_back(y);
  return out;
}

std::optional<double> DiracClusterKernel::retention_prob(std::span<const double> x,
                                                         const Window& w) const {
  check_dim(*this, x, w);
  std::vector<double> y(x.begin(), x.end());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += offset_[i];
  return w.contains(y) ? 1.0 : 0.0;
}

std::optional<double> DiracClusterKernel::support_radius() const {
  double s = 0.0;
  for (double v : offset_) s += v * v;
  return std::sqrt(s);
}

CoxClusterKernel::CoxClusterKernel(std::size_t dim, double mean, Displacement displacement,
                                   bool includes_germ, std::size_t point_cap)
    : dim_(dim),
      mean_(mean),
      displacement_(std::move(displacement)),
      includes_germ_(includes_germ),
      point_cap_(point_cap) {
  if (dim_ == 0) throw ConfigError("cox kernel: dimension must be positive");
  if (!(mean_ >= 0.0) || !std::isfinite(mean_)) throw ConfigError("cox kernel: mean must be finite and >= 0");
  if (auto* box = std::get_if<UniformBoxDisplacement>(&displacement_)) {
    if (box->lower.size() != dim_ || box->upper.size() != dim_) {
      throw ConfigError("cox kernel: displacement box has wrong dimension");
    }
    for (std::size_t i = 0; i < dim_; ++i) {
      if (!std::isfinite(box->lower[i]) || !std::isfinite(box->upper[i]) ||
          !(box->lower[i] < box->upper[i])) {
        throw ConfigError("cox kernel: displacement box needs finite lower < upper");
      }
    }
  } else {
    const double s = std::get<GaussianDisplacement>(displacement_).sigma;
    if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("cox kernel: sigma must be positive");
  }
}

double CoxClusterKernel::kernel_mass(std::span<const double> x, const Window& w) const {
  check_dim(*this, x, w);
  double prob = 1.0;
  if (auto* box = std::get_if<UniformBoxDisplacement>(&displacement_)) {
    for (std::size_t i = 0; i < dim_ && prob > 0.0; ++i) {
      const double lo = std::max(x[i] + box->lower[i], w.lower(i));
      const double hi = std::min(x[i] + box->upper[i], w.upper(i));
      prob *= std::max(0.0, hi - lo) / (box->upper[i] - box->lower[i]);
    }
  } else {
    const double s = std::get<GaussianDisplacement>(displacement_).sigma;
    for (std::size_t i = 0; i < dim_ && prob > 0.0; ++i) {
      prob *= std::max(0.0, normal_cdf((w.upper(i) - x[i]) / s) - normal_cdf((w.lower(i) - x[i]) / s));
    }
  }
  return mean_ * prob;
}

PointPattern CoxClusterKernel::sample(std::span<const double> x, RngStream& rng) const {
  if (x.size() != dim_) throw ConfigError("cox kernel: germ has wrong dimension");
  const auto n = rng.poisson(mean_);
  if (n + (includes_germ_ ? 1 : 0) > point_cap_) {
    throw SamplingError("cluster point cap exceeded (" + std::to_string(n) + " points, cap " +
                        std::to_string(point_cap_) + ")");
  }
  PointPattern out(dim_);
  out.reserve(n + 1);
  if (includes_germ_) out.push_back(x);
  std::vector<double> y(dim_);
  for (std::uint64_t k = 0; k < n; ++k) {
    if (auto* box = std::get_if<UniformBoxDisplacement>(&displacement_)) {
      for (std::size_t i = 0; i < dim_; ++i) y[i] = x[i] + rng.uniform(box->lower[i], box->upper[i]);
    } else {
      const double s = std::get<GaussianDisplacement>(displacement_).sigma;
      for (std::size_t i = 0; i < dim_; ++i) y[i] = x[i] + rng.normal(0.0, s);
    }
    out.push_back(y);
  }
  return out;
}

std::optional<double> CoxClusterKernel::retention_prob(std::span<const double> x,
                                                       const Window& w) const {
  if (includes_germ_ && w.contains(x)) return 1.0;
  return retention_prob_cox(kernel_mass(x, w));
}

std::optional<double> CoxClusterKernel::mean_mass() const {
  return mean_ + (includes_germ_ ? 1.0 : 0.0);
}

std::optional<double> CoxClusterKernel::support_radius() const {
  auto* box = std::get_if<UniformBoxDisplacement>(&displacement_);
  if (!box) return std::nullopt;
  double s = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) {
    const double a = std::max(std::abs(box->lower[i]), std::abs(box->upper[i]));
    s += a * a;
  }
  return std::sqrt(s);
}

double CoxClusterKernel::retention_envelope(double d) const {
  if (auto* g = std::get_if<GaussianDisplacement>(&displacement_)) {
    // A point at distance >= d has some coordinate at distance >= d / sqrt(m).
    const double m = static_cast<double>(dim_);
    const double tail = 2.0 * m * normal_cdf(-d / (g->sigma * std::sqrt(m)));
    return std::min(1.0, mean_ * tail);
  }
  return ClusterKernel::retention_envelope(d);
}

double retention_prob_cox(double kernel_mass) {
  if (!(kernel_mass >= 0.0)) throw ConfigError("kernel mass must be >= 0");
  return -std::expm1(-kernel_mass);
}

ConditionedCluster sample_conditioned_cluster(const ClusterKernel& kernel,
                                              std::span<const double> x, const Window& w,
                                              RngStream& rng, const ConditioningOptions& opts) {
  check_dim(kernel, x, w);
  if (const auto p = kernel.retention_prob(x, w); p && *p < opts.rejection_floor) {
    throw SamplingError("conditioning event too rare for rejection (p = " + std::to_string(*p) + ")");
  }
  ConditionedCluster res;
  while (res.attempts < opts.max_attempts) {
    ++res.attempts;
    auto c = kernel.sample(x, rng);
    if (c.count_in(w) > 0) {
      res.cluster = std::move(c);
      return res;
    }
  }
  throw SamplingError("conditioned cluster: no hit after " + std::to_string(res.attempts) +
                      " attempts");
}

PointPattern sample_thinned_germ(const IntensityMeasure& germ,
                                 const std::function<double(std::span<const double>)>& p,
                                 const Window& region, RngStream& rng) {
  if (germ.dim() != region.dim()) throw ConfigError("germ/window dimension mismatch");
  PointPattern out(germ.dim());
  if (germ.is_zero()) return out;
  if (auto* atoms = std::get_if<AtomicIntensity>(&germ.form())) {
    for (std::size_t i = 0; i < atoms->atoms.size(); ++i) {
      const auto x = atoms->atoms.point(i);
      if (!region.contains(x)) continue;
      const auto n = rng.poisson(atoms->weights[i] * p(x));
      for (std::uint64_t k = 0; k < n; ++k) out.push_back(x);
    }
    return out;
  }
  std::optional<Window> box = region;
  if (auto* dens = std::get_if<DensityIntensity>(&germ.form()); dens && dens->support) {
    std::vector<double> lo(region.dim()), hi(region.dim());
    for (std::size_t i = 0; i < region.dim(); ++i) {
      lo[i] = std::max(region.lower(i), dens->support->lower(i));
      hi[i] = std::min(region.upper(i), dens->support->upper(i));
      if (!(lo[i] < hi[i])) return out;
    }
    box = Window(lo, hi);
  }
  const double bound = germ.bound();
  const auto candidates = sample_homogeneous(*box, bound, rng);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto x = candidates.point(i);
    const double keep = p(x) * germ.density(x) / bound;
    if (rng.uniform() < keep) out.push_back(x);
  }
  return out;
}

double brix_kendall_truncation(const IntensityMeasure& germ, const ClusterKernel& kernel,
                               const BrixKendallOptions& opts) {
  if (opts.truncation_radius) {
    if (!(*opts.truncation_radius >= 0.0) || !std::isfinite(*opts.truncation_radius)) {
      throw ConfigError("truncation radius must be finite and >= 0");
    }
    return *opts.truncation_radius;
  }
  if (const auto r = kernel.support_radius()) return *r;
  const double scale = std::holds_alternative<AtomicIntensity>(germ.form()) ? 1.0 : germ.bound();
  auto ok = [&](double d) { return kernel.retention_envelope(d) * scale <= opts.envelope_level; };
  double hi = 1.0;
  while (!ok(hi)) {
    hi *= 2.0;
    if (hi > 1e9) throw SamplingError("retention mass diverges: exact sampling impossible");
  }
  double lo = 0.0;
  for (int it = 0; it < 80 && hi - lo > 1e-9 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (ok(mid) ? hi : lo) = mid;
  }
  return hi;
}

namespace {

double retention_or_throw(const ClusterKernel& kernel, std::span<const double> x, const Window& w) {
  const auto p = kernel.retention_prob(x, w);
  if (!p) throw ConfigError("cluster kernel has no closed-form retention probability");
  return std::clamp(*p, 0.0, 1.0);
}

}  // namespace

double thinned_germ_mass(const IntensityMeasure& germ, const ClusterKernel& kernel,
                         const Window& w, const BrixKendallOptions& opts) {
  const Window region = w.buffered(brix_kendall_truncation(germ, kernel, opts));
  if (germ.is_zero()) return 0.0;
  if (auto* atoms = std::get_if<AtomicIntensity>(&germ.form())) {
    double s = 0.0;
    for (std::size_t i = 0; i < atoms->atoms.size(); ++i) {
      const auto x = atoms->atoms.point(i);
      if (region.contains(x)) s += atoms->weights[i] * retention_or_throw(kernel, x, w);
    }
    return s;
  }
  Window box = region;
  if (auto* dens = std::get_if<DensityIntensity>(&germ.form()); dens && dens->support) {
    std::vector<double> lo(region.dim()), hi(region.dim());
    for (std::size_t i = 0; i < region.dim(); ++i) {
      lo[i] = std::max(region.lower(i), dens->support->lower(i));
      hi[i] = std::min(region.upper(i), dens->support->upper(i));
      if (!(lo[i] < hi[i])) return 0.0;
    }
    box = Window(lo, hi);
  }
  return integrate_box(
      [&](std::span<const double> x) { return retention_or_throw(kernel, x, w) * germ.density(x); },
      box);
}

BrixKendallResult brix_kendall_run(const IntensityMeasure& germ, const ClusterKernel& kernel,
                                   const Window& w, RngStream& rng,
                                   const BrixKendallOptions& opts) {
  if (germ.dim() != w.dim() || kernel.dim() != w.dim()) {
    throw ConfigError("germ, kernel and window dimensions differ");
  }
  BrixKendallResult res;
  res.pattern = PointPattern(w.dim());
  res.thinned_germ = PointPattern(w.dim());
  if (germ.is_zero()) return res;
  const Window region = w.buffered(brix_kendall_truncation(germ, kernel, opts));
  auto base = rng.fork();
  res.thinned_germ = sample_thinned_germ(
      germ, [&](std::span<const double> x) { return retention_or_throw(kernel, x, w); }, region,
      rng);
  const std::size_t n = res.thinned_germ.size();
  std::vector<ConditionedCluster> clusters(n);
  parallel_for(n, [&](std::size_t i) {
    auto stream = base.split(i);
    clusters[i] = sample_conditioned_cluster(kernel, res.thinned_germ.point(i), w, stream,
                                             opts.conditioning);
  });
  for (auto& c : clusters) {
    res.attempts += c.attempts;
    res.pattern.append(c.cluster.restricted(w));
  }
  return res;
}

PointPattern brix_kendall_sample(const IntensityMeasure& germ, const ClusterKernel& kernel,
                                 const Window& w, RngStream& rng, const BrixKendallOptions& opts) {
  return brix_kendall_run(germ, kernel, w, rng, opts).pattern;
}

}  // namespace perfectsim
