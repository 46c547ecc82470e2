#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "perfectsim/error.hpp"

namespace perfectsim {

/// Axis-aligned box [lower, upper] in R^m with strictly positive volume.
class Window {
 public:
  Window(std::vector<double> lower, std::vector<double> upper);

  /// [0,1]^dim.
  static Window unit(std::size_t dim);
  /// [lo, hi] on the line.
  static Window interval(double lo, double hi);

  std::size_t dim() const noexcept { return lower_.size(); }
  const std::vector<double>& lower() const noexcept { return lower_; }
  const std::vector<double>& upper() const noexcept { return upper_; }
  double lower(std::size_t i) const { return lower_[i]; }
  double upper(std::size_t i) const { return upper_[i]; }
  double side(std::size_t i) const { return upper_[i] - lower_[i]; }

  double volume() const;
  /// Closed-box membership.
  bool contains(std::span<const double> x) const;
  /// Euclidean distance from x to the box (0 inside).
  double distance(std::span<const double> x) const;
  /// The box grown by r >= 0 in every direction (Minkowski sum with the
  /// cube, which contains the ball of radius r).
  Window buffered(double r) const;
  bool operator==(const Window&) const = default;

 private:
  std::vector<double> lower_;
  std::vector<double> upper_;
};

double window_volume(const Window& w);

/// Finite point pattern in R^m with optional mark columns, stored flat.
class PointPattern {
 public:
  PointPattern() = default;
  explicit PointPattern(std::size_t dim, std::size_t mark_dim = 0);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t mark_dim() const noexcept { return mark_dim_; }
  std::size_t size() const noexcept { return dim_ == 0 ? 0 : coords_.size() / dim_; }
  bool empty() const noexcept { return coords_.empty(); }

  std::span<const double> point(std::size_t i) const {
    return {coords_.data() + i * dim_, dim_};
  }
  double coord(std::size_t i, std::size_t axis) const { return coords_[i * dim_ + axis]; }
  std::span<const double> marks(std::size_t i) const {
    return {marks_.data() + i * mark_dim_, mark_dim_};
  }
  const std::vector<double>& coords() const noexcept { return coords_; }
  const std::vector<double>& mark_values() const noexcept { return marks_; }

  void reserve(std::size_t n);
  /// Appends a point; marks must have mark_dim() entries. Rejects
  /// non-finite coordinates.
  void push_back(std::span<const double> x, std::span<const double> marks = {});
  void push_back(double t) { push_back(std::span<const double>(&t, 1)); }
  /// Appends every point of other (same dim and mark_dim).
  void append(const PointPattern& other);

  /// Number of points inside the closed box c (with multiplicity).
  std::size_t count_in(const Window& c) const;
  PointPattern restricted(const Window& c) const;
  /// True when no two points coincide exactly.
  bool is_simple() const;
  /// Lexicographic sort of points (marks follow their point).
  void sort();

  bool operator==(const PointPattern&) const = default;

 private:
  std::size_t dim_ = 0;
  std::size_t mark_dim_ = 0;
  std::vector<double> coords_;
  std::vector<double> marks_;
};

/// lambda0 * nu_Z(E): intensity of a cluster process with homogeneous germ.
double cluster_intensity(double germ_rate, double cluster_mean_mass);

/// lambda0 / (1 - |nu_alpha|): intensity of a subcritical branching process.
double branching_total_intensity(double germ_rate, double progeny_mass);

/// Intensity measure of a (Poisson) germ process.
struct LebesgueIntensity {
  double rate = 0.0;
};

struct DensityIntensity {
  std::function<double(std::span<const double>)> density;
  double bound = 0.0;  // density(x) <= bound everywhere
  std::optional<Window> support;  // density vanishes outside, if given
};

struct AtomicIntensity {
  PointPattern atoms;
  std::vector<double> weights;
};

class IntensityMeasure {
 public:
  using Form = std::variant<LebesgueIntensity, DensityIntensity, AtomicIntensity>;

  IntensityMeasure(Form form, std::size_t dim);

  static IntensityMeasure lebesgue(double rate, std::size_t dim);

  const Form& form() const noexcept { return form_; }
  std::size_t dim() const noexcept { return dim_; }
  /// Declared sup of the density (lebesgue: the rate). Not defined for atoms.
  double bound() const;
  /// Density at x; throws when the declared bound is exceeded.
  double density(std::span<const double> x) const;
  /// mu(C).
  double total_on(const Window& c) const;
  bool is_zero() const;

 private:
  Form form_;
  std::size_t dim_;
};

}  // namespace perfectsim
