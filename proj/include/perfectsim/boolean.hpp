#pragma once

#include <array>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "perfectsim/core.hpp"
#include "perfectsim/rng.hpp"

namespace perfectsim {

/// Closed disk in the plane; the target window of line grains.
struct Disk {
  std::array<double, 2> center{0.0, 0.0};
  double radius = 1.0;

  bool contains(std::span<const double> y) const;
  bool operator==(const Disk&) const = default;
};

using Target = std::variant<Window, Disk>;

/// Law of the radius of disk grains.
struct RadiusLaw {
  enum class Kind { fixed, exponential, uniform };
  Kind kind = Kind::fixed;
  double a = 1.0;  // fixed: radius; exponential: rate; uniform: lower end
  double b = 0.0;  // uniform: upper end

  static RadiusLaw fixed(double r) { return {Kind::fixed, r, 0.0}; }
  static RadiusLaw exponential(double rate) { return {Kind::exponential, rate, 0.0}; }
  static RadiusLaw uniform(double lo, double hi) { return {Kind::uniform, lo, hi}; }

  void validate() const;
  /// P(R >= r).
  double tail(double r) const;
  double mean() const;
  /// Largest possible radius, if bounded.
  std::optional<double> max() const;
  double sample(RngStream& rng) const;
  /// A draw from the law of R given R >= d (requires tail(d) > 0).
  double sample_at_least(double d, RngStream& rng) const;
};

struct DiskGrain {
  std::array<double, 2> center{};
  double radius = 0.0;
};

/// Closed segment between two endpoints, optionally fattened to its closed
/// epsilon-neighbourhood.
struct SegmentGrain {
  std::array<double, 2> a{};
  std::array<double, 2> b{};
  double fattening = 0.0;
};

/// Half-line from `origin` in direction `angle`, or the full line through
/// `origin` when `full` is set.
struct LineGrain {
  std::array<double, 2> origin{};
  double angle = 0.0;
  bool full = false;
};

using Grain = std::variant<DiskGrain, SegmentGrain, LineGrain>;

/// Closed-form geometry; segments and lines are hit when touched.
bool intersects(const Grain& g, const Window& w);
bool intersects(const Grain& g, const Disk& d);
bool intersects(const Grain& g, const Target& t);
/// y belongs to the grain (closed set).
bool covers(const Grain& g, std::span<const double> y);
/// The visible part of the grain: disks are returned unchanged (to be
/// intersected with the window), segments and lines become the segment
/// inside the target. nullopt when the grain misses the target.
std::optional<Grain> clip(const Grain& g, const Target& t);

/// Euclidean distance between a segment and a box.
double segment_box_distance(const SegmentGrain& s, const Window& w);

struct DiskGrains {
  RadiusLaw radius;
};

/// Segments of fixed length centred at the germ with orientation uniform
/// on [angle_lo, angle_hi] (within [0, pi]). A positive `fattening` turns the
/// grain into the closed epsilon-neighbourhood of the segment.
struct SegmentGrains {
  double length = 1.0;
  double angle_lo = 0.0;
  double angle_hi = 3.141592653589793;
  double fattening = 0.0;
};

/// Lines through the germ with uniform orientation, targeting a disk.
/// Default: half-lines (the retention is (1/pi) arcsin(R/|x|)); `full`
/// gives whole lines with retention (2/pi) arcsin(R/|x|). The germ lives in
/// the disk of radius germ_radius around the target centre.
struct LineGrains {
  bool full = false;
  double germ_radius = 10.0;
};

using GrainDistribution = std::variant<DiskGrains, SegmentGrains, LineGrains>;

double hit_prob_disk_grain(std::span<const double> x, const RadiusLaw& law, const Window& w);
/// (1/pi) arcsin(R/|x|) for |x| >= R, 1 inside the disk of radius R.
double hit_prob_poisson_line(std::span<const double> x, double disk_radius);
double hit_prob_full_line(std::span<const double> x, double disk_radius);
double hit_prob_segment(std::span<const double> x, const SegmentGrains& law, const Window& w);
/// P((S + x) hits the target) for any supported grain law.
double hit_prob(const GrainDistribution& grains, std::span<const double> x, const Target& t);

/// Angles (as disjoint intervals inside [angle_lo, angle_hi]) for which the
/// segment centred at x hits w.
std::vector<std::array<double, 2>> segment_hit_angles(std::span<const double> x,
                                                      const SegmentGrains& law, const Window& w);

struct BooleanSample {
  Target target;
  PointPattern germs;         // retained germ points, one per grain
  std::vector<Grain> grains;  // every grain hits the target
  double neglected_mass = 0.0;

  /// Indicator of the union of grains at y (y must lie in the target).
  bool covered(std::span<const double> y) const;
  std::vector<Grain> clipped() const;
};

/// Exact sample of the Boolean model restricted to the target.
BooleanSample boolean_exact_sample(const IntensityMeasure& germ, const GrainDistribution& grains,
                                   const Target& target, RngStream& rng);

}  // namespace perfectsim
