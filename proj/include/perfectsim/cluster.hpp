#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "perfectsim/core.hpp"
#include "perfectsim/rng.hpp"

namespace perfectsim {

/// Generator of the typical cluster attached to a germ point.
class ClusterKernel {
 public:
  virtual ~ClusterKernel() = default;

  virtual std::size_t dim() const = 0;
  /// The cluster of a germ at x, translated to x.
  virtual PointPattern sample(std::span<const double> x, RngStream& rng) const = 0;
  /// P(Z(x, W - x) > 0) in closed form, or nullopt when unavailable.
  virtual std::optional<double> retention_prob(std::span<const double> x, const Window& w) const;
  /// nu_Z(E), the mean number of points of one cluster.
  virtual std::optional<double> mean_mass() const;
  /// True when the germ point itself belongs to its cluster.
  virtual bool includes_germ() const { return false; }
  /// R such that the cluster lies a.s. in the closed ball B(x, R).
  virtual std::optional<double> support_radius() const;
  /// Upper bound on the retention probability of a germ at distance >= d
  /// from the window.
  virtual double retention_envelope(double d) const;
};

/// Single point at x + offset.
class DiracClusterKernel final : public ClusterKernel {
 public:
  explicit DiracClusterKernel(std::vector<double> offset);

  std::size_t dim() const override { return offset_.size(); }
  PointPattern sample(std::span<const double> x, RngStream& rng) const override;
  std::optional<double> retention_prob(std::span<const double> x, const Window& w) const override;
  std::optional<double> mean_mass() const override { return 1.0; }
  std::optional<double> support_radius() const override;

 private:
  std::vector<double> offset_;
};

/// Displacement uniform on the box [lower, upper] (relative to the germ).
struct UniformBoxDisplacement {
  std::vector<double> lower;
  std::vector<double> upper;
};

/// Isotropic Gaussian displacement (Thomas process).
struct GaussianDisplacement {
  double sigma = 1.0;
};

using Displacement = std::variant<UniformBoxDisplacement, GaussianDisplacement>;

/// Cluster = Poisson(mean) i.i.d. displaced points, optionally plus the germ.
class CoxClusterKernel final : public ClusterKernel {
 public:
  CoxClusterKernel(std::size_t dim, double mean, Displacement displacement,
                   bool includes_germ = false, std::size_t point_cap = 1'000'000);

  std::size_t dim() const override { return dim_; }
  double mean() const noexcept { return mean_; }
  const Displacement& displacement() const noexcept { return displacement_; }

  /// K(x, W - x) = mean * P(x + D in W).
  double kernel_mass(std::span<const double> x, const Window& w) const;
  PointPattern sample(std::span<const double> x, RngStream& rng) const override;
  /// 1 - exp(-K(x, W - x)), or 1 when the germ is kept and lies in W.
  std::optional<double> retention_prob(std::span<const double> x, const Window& w) const override;
  std::optional<double> mean_mass() const override;
  bool includes_germ() const override { return includes_germ_; }
  std::optional<double> support_radius() const override;
  double retention_envelope(double d) const override;

 private:
  std::size_t dim_;
  double mean_;
  Displacement displacement_;
  bool includes_germ_;
  std::size_t point_cap_;
};

/// 1 - e^{-K}; K must be >= 0.
double retention_prob_cox(double kernel_mass);

struct ConditioningOptions {
  double rejection_floor = 1e-9;
  std::uint64_t max_attempts = 100'000'000;
};

struct ConditionedCluster {
  PointPattern cluster;  // full cluster; callers restrict to W
  std::uint64_t attempts = 0;
};

/// Cluster at x conditioned on hitting w, by rejection.
ConditionedCluster sample_conditioned_cluster(const ClusterKernel& kernel,
                                              std::span<const double> x, const Window& w,
                                              RngStream& rng,
                                              const ConditioningOptions& opts = {});

struct BrixKendallOptions {
  /// Germs farther than this from W are ignored; derived from the kernel's
  /// support or envelope when not given.
  std::optional<double> truncation_radius;
  /// Envelope level that defines the automatic truncation radius.
  double envelope_level = 1e-12;
  ConditioningOptions conditioning;
};

struct BrixKendallResult {
  PointPattern pattern;          // restricted to W
  PointPattern thinned_germ;     // retained germ points
  std::uint64_t attempts = 0;    // total rejection attempts
};

/// Poisson process with intensity p(x) mu~(dx) on `region` (Lebesgue and
/// density germs: thinning of a dominating homogeneous process; atomic
/// germs: Poisson(weight * p) copies of each atom inside `region`).
PointPattern sample_thinned_germ(const IntensityMeasure& germ,
                                 const std::function<double(std::span<const double>)>& p,
                                 const Window& region, RngStream& rng);

/// Truncation radius used by the sampler for this germ/kernel pair.
double brix_kendall_truncation(const IntensityMeasure& germ, const ClusterKernel& kernel,
                               const BrixKendallOptions& opts);

/// int p(x) mu~(dx) over the truncated region (quadrature; dim <= 3).
double thinned_germ_mass(const IntensityMeasure& germ, const ClusterKernel& kernel,
                         const Window& w, const BrixKendallOptions& opts = {});

/// Exact sample of the cluster process restricted to w, Poisson germ.
BrixKendallResult brix_kendall_run(const IntensityMeasure& germ, const ClusterKernel& kernel,
                                   const Window& w, RngStream& rng,
                                   const BrixKendallOptions& opts = {});

PointPattern brix_kendall_sample(const IntensityMeasure& germ, const ClusterKernel& kernel,
                                 const Window& w, RngStream& rng,
                                 const BrixKendallOptions& opts = {});

}  // namespace perfectsim
