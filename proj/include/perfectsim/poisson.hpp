#pragma once

#include <functional>
#include <span>
#include <vector>

#include "perfectsim/core.hpp"
#include "perfectsim/rng.hpp"

namespace perfectsim {

/// Homogeneous Poisson process of the given rate on w.
PointPattern sample_homogeneous(const Window& w, double rate, RngStream& rng);

/// Time-varying rate bounded by `bound`. The rate may look at the accepted
/// history (times strictly before t, in increasing order).
struct DominatedIntensity {
  double bound = 0.0;
  std::function<double(double t, std::span<const double> accepted)> rate;
};

/// Output of the strip sampler. The dominating rate-M stream is kept in full
/// (times, heights in [0, M)) because thin-first algorithms reuse it.
struct StripSample {
  PointPattern accepted;
  std::vector<double> times;
  std::vector<double> heights;
  std::vector<bool> is_accepted;
};

/// Points of a unit-rate Poisson process on [0,T] x [0,M] lying under the
/// curve y = rate(t), projected to the time axis (Ogata/Lewis thinning).
StripSample sample_inhomogeneous_strip(double horizon, const DominatedIntensity& dom,
                                       RngStream& rng);

/// A non-negative density r on [0, truncation] with finite mass.
///
/// Positions are drawn from a piecewise-linear CDF on a uniform grid (cell
/// masses exact or Gauss-Kronrod, uniform within a cell): a drawn point is
/// within one grid step of an exact draw under the natural coupling. When
/// `inverse_cumulative` is given the draw is exact.
struct FiniteDensity {
  std::function<double(double)> density;
  double truncation = 0.0;
  /// Optional closed form of int_0^t r.
  std::function<double(double)> cumulative;
  /// Optional closed-form inverse of `cumulative` on [0, total mass].
  std::function<double(double)> inverse_cumulative;
  /// Optional bound on the mass beyond `truncation` (reported, not sampled).
  double neglected_tail = 0.0;
  /// Grid step as a fraction of the truncation length.
  double grid_fraction = 1e-3;
};

/// Precomputed sampler for a FiniteDensity; reusable across replicates.
class FiniteDensitySampler {
 public:
  explicit FiniteDensitySampler(FiniteDensity d);

  double total_mass() const noexcept { return total_; }
  double neglected_tail() const noexcept { return spec_.neglected_tail; }
  double grid_step() const noexcept { return step_; }
  /// One position with density r / total_mass.
  double draw_position(RngStream& rng) const;
  /// Poisson(total_mass) points, sorted.
  PointPattern sample(RngStream& rng) const;

 private:
  FiniteDensity spec_;
  double total_ = 0.0;
  double step_ = 0.0;
  std::vector<double> cdf_;  // cumulative mass at grid nodes
};

PointPattern sample_poisson_finite_density(const FiniteDensity& d, RngStream& rng);

}  // namespace perfectsim
