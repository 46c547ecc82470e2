#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "perfectsim/core.hpp"
#include "perfectsim/rng.hpp"

namespace perfectsim {

/// A retention sequence p_0, p_1, ... in [0,1] with finite sum.
///
/// `log_tail(n)` = sum_{k>=n} log(1 - p_k) is available for the named
/// families (closed form, or compensated suffix sums truncated where the
/// declared tail of sum p_k drops below 1e-14). Custom sequences carry no
/// tails and can only be used through a dominating sequence.
class GridSequence {
 public:
  /// p_n = values[n], zero beyond the table.
  static GridSequence table(std::vector<double> values);
  /// p_n = p0 * ratio^n.
  static GridSequence geometric(double p0, double ratio);
  /// p_n = 1 - exp(-C / (n+1)^2).
  static GridSequence inverse_square(double c);
  /// p_n = 1 - exp(-C / (1 + i^2 + j^2)^2) at the lattice site z2_site(n).
  /// No closed-form tails; inverse_square(25 C) dominates it.
  static GridSequence z2_inverse_square(double c);
  static GridSequence custom(std::function<double(std::uint64_t)> p);

  double value(std::uint64_t n) const;
  bool has_tails() const noexcept { return static_cast<bool>(log_tail_); }
  /// sum_{k>=n} log(1 - p_k); throws when tails are unavailable.
  double log_tail(std::uint64_t n) const;

 private:
  std::function<double(std::uint64_t)> p_;
  std::function<double(std::uint64_t)> log_tail_;
};

struct GridThinningSpec {
  GridSequence p;
  /// Optional q_n >= p_n with computable tails.
  std::optional<GridSequence> q;
};

/// P(T = n) = p_n prod_{k>n} (1 - p_k) under the sequence used for T.
double grid_last_point_pmf(const GridSequence& s, std::uint64_t n);
/// P(no retained point) = prod_k (1 - p_k).
double grid_empty_prob(const GridSequence& s);

/// Index of the last retained site, or nullopt when nothing is retained.
/// Uses the dominating sequence q when one is given.
std::optional<std::uint64_t> grid_last_point(const GridSequence& s, RngStream& rng);
std::optional<std::uint64_t> grid_last_point(const GridThinningSpec& spec, RngStream& rng);

/// Independent Bernoulli(p_n) retention of every site, in increasing order.
std::vector<std::uint64_t> thin_grid(const GridThinningSpec& spec, RngStream& rng);

/// Spiral enumeration of Z^2: shells max(|i|,|j|) = s in increasing order.
std::array<std::int64_t, 2> z2_site(std::uint64_t n);
std::uint64_t z2_index(std::int64_t i, std::int64_t j);

/// Renewal process with bounded failure rate, started by a renewal at 0
/// (not itself a point). The optional delay hazard replaces r for the
/// first interval.
struct RenewalSpec {
  std::function<double(double)> hazard;
  double bound = 1.0;
  std::function<double(double)> delay_hazard;
};

/// Retention t -> p(t) in [0,1]. When `cumulative` (int_0^t p) and its
/// inverse are given the retained candidates are drawn by inversion,
/// otherwise by thinning a rate-M stream over the horizon.
struct RenewalRetention {
  std::function<double(double)> p;
  std::function<double(double)> cumulative;
  std::function<double(double)> inverse_cumulative;
};

struct RenewalThinResult {
  PointPattern retained;
  PointPattern renewal;           // renewal points up to the last candidate
  std::size_t dominating_points = 0;
};

RenewalThinResult renewal_thin_first_run(const RenewalSpec& spec, const RenewalRetention& retain,
                                         double horizon, RngStream& rng);
PointPattern renewal_thin_first(const RenewalSpec& spec, const RenewalRetention& retain,
                                double horizon, RngStream& rng);

/// Matern (type II, uniform marks) hard-core process thinned by p, built
/// thin-first. p is evaluated only on w and is zero outside.
PointPattern matern_thin_first(double rate, double hardcore, const std::function<double(std::span<const double>)>& p,
                               const Window& w, RngStream& rng);

/// lambda(t) = phi(sum_{s in N, s < t} h(t - s)) with 0 <= phi <= bound and
/// h supported on [0, a].
struct NonlinearHawkesSpec {
  std::function<double(double)> phi;
  double bound = 1.0;
  std::function<double(double)> h;
  double support = 1.0;
  /// Largest distance searched to the left of the window for a gap.
  double search_horizon = 1e6;
};

/// phi(sum over events in [start, t) of h(t - s)); events sorted.
double nonlinear_intensity(const NonlinearHawkesSpec& spec, std::span<const double> events,
                           double start, double t);

struct NonlinearHawkesResult {
  PointPattern pattern;        // points in the window
  double regeneration = 0.0;   // T~, the later point of the first gap
  PointPattern history;        // points of N in [T~, window start)
};

NonlinearHawkesResult nonlinear_hawkes_run(const NonlinearHawkesSpec& spec, double lo, double hi,
                                           RngStream& rng);
PointPattern nonlinear_hawkes_germ(const NonlinearHawkesSpec& spec, double lo, double hi,
                                   RngStream& rng);

}  // namespace perfectsim
