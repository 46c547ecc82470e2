#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "perfectsim/convolution.hpp"
#include "perfectsim/core.hpp"
#include "perfectsim/rng.hpp"

namespace perfectsim {

/// h(t) = beta * exp(-gamma t).
struct ExponentialShape {
  double beta = 0.5;
  double gamma = 1.0;
};

/// h(t) = beta * (1 - t/support)^degree on [0, support); degree 0 is the
/// uniform kernel.
struct PolynomialShape {
  double beta = 0.5;
  double support = 1.0;
  unsigned degree = 0;
};

/// Piecewise-constant h: values[p] on [knots[p], knots[p+1]), knots[0] = 0.
struct TableShape {
  std::vector<double> knots;
  std::vector<double> values;
};

using FertilityShape = std::variant<ExponentialShape, PolynomialShape, TableShape>;

/// One mark value z_j of the finite mark mixture, i.e. h(., z_j).
struct MarkComponent {
  double weight = 1.0;
  FertilityShape shape;
};

/// Hawkes reproduction function h(t, Z) with a finite mark mixture.
class FertilityKernel {
 public:
  /// Weights are normalised; rejects rho >= 1.
  explicit FertilityKernel(std::vector<MarkComponent> components);

  static FertilityKernel exponential(double beta, double gamma);
  static FertilityKernel uniform(double height, double support);
  /// h == 0.
  static FertilityKernel none();

  std::size_t components() const noexcept { return comps_.size(); }
  double weight(std::size_t j) const { return comps_[j].weight; }
  const FertilityShape& shape(std::size_t j) const { return comps_[j].shape; }

  double h(double t, std::size_t j) const;
  /// nu(t, z_j) = int_0^t h(s, z_j) ds.
  double nu(double t, std::size_t j) const;
  double nu_inf(std::size_t j) const;
  /// nu_inf(j) - nu(t, j), computed without cancellation.
  double nu_tail(double t, std::size_t j) const;
  /// int_a^b h(s, z_j) ds for 0 <= a <= b, computed without cancellation.
  double cell_mass(double a, double b, std::size_t j) const;
  /// E[h(t, Z)].
  double mean_h(double t) const;
  /// rho = E int h.
  double rho() const noexcept { return rho_; }
  /// int t E[h(t, Z)] dt.
  double first_moment() const;
  /// Support bound of h(., z_j), nullopt when unbounded.
  std::optional<double> support(std::size_t j) const;
  std::optional<double> support() const;
  bool is_zero() const noexcept { return rho_ == 0.0; }
  /// E int e^{k s} h(s, Z) ds (infinite when k is beyond an exponential rate).
  double exponential_moment(double k) const;
  /// kappa with exponential_moment(kappa) = 1 (infinite when rho = 0).
  double growth_rate() const;

  std::size_t sample_mark(RngStream& rng) const;
  /// Offset with density h(., z_j) / nu_inf(j).
  double sample_offset(std::size_t j, RngStream& rng) const;

 private:
  std::vector<MarkComponent> comps_;
  std::vector<double> nu_inf_;
  double rho_ = 0.0;
};

enum class Rounding { down, up, nearest };

/// Phi(f)(t) = E exp(-nu(inf, Z) + int_0^t f(t - s) h(s, Z) ds) on the grid
/// tau_i = i * step, i = 0..nodes-1, for f read as a step function. Its
/// fixed point is the CDF F(t) = P(L <= t) of the extinction time.
///
/// Rounding::down treats f on each cell as the smaller endpoint value and
/// subtracts a bound on the floating-point error, so the result is a lower
/// bound of Phi(g) for every g >= that step function; Rounding::up is the
/// mirror image. Rounding::nearest uses cell averages (trapezoid rule).
class PhiOperator {
 public:
  PhiOperator(const FertilityKernel& kernel, double step, std::size_t nodes,
              ConvMethod method = ConvMethod::automatic);
  ~PhiOperator();
  PhiOperator(const PhiOperator&) = delete;
  PhiOperator& operator=(const PhiOperator&) = delete;

  double step() const noexcept { return step_; }
  std::size_t nodes() const noexcept { return nodes_; }
  /// `tol` bounds the trapezoid error estimate in nearest mode.
  std::vector<double> apply(std::span<const double> f, Rounding r,
                            double tol = std::numeric_limits<double>::infinity());
  /// Same operator acting on tails q = 1 - f and returning 1 - Phi(f). `r`
  /// keeps its CDF meaning (Rounding::down rounds the returned tail up).
  /// Errors are relative, so small tails keep full precision.
  std::vector<double> apply_tail(std::span<const double> q, Rounding r,
                                 double tol = std::numeric_limits<double>::infinity());

 private:
  struct Component;
  const FertilityKernel& kernel_;
  double step_;
  std::size_t nodes_;
  ConvMethod method_;
  std::vector<std::unique_ptr<Component>> comps_;
};

std::vector<double> phi_apply(const FertilityKernel& kernel, std::span<const double> f, double step,
                              Rounding r, ConvMethod method = ConvMethod::automatic);

/// Sandwich on the grid tau_i = i * step for the extinction tail P(L > t).
/// ell <= P(L > t) <= u at every node. Read as step functions (ell from the
/// right node, u from the left node) they bound the tail on every interval.
struct BoundPair {
  double step = 0.0;
  std::vector<double> ell;
  std::vector<double> u;
  int iteration = 0;

  std::size_t nodes() const noexcept { return ell.size(); }
  double time(std::size_t i) const { return step * static_cast<double>(i); }
  double lower_cdf(std::size_t i) const { return 1.0 - u[i]; }
  double upper_cdf(std::size_t i) const { return 1.0 - ell[i]; }
  /// Valid lower bound of P(L > t) for any t >= 0 (0 beyond the grid).
  double ell_at(double t) const;
  /// Valid upper bound of P(L > t) for any t >= 0.
  double u_at(double t) const;
  double gap() const;
};

/// Tail envelope 1 - G(t) = min(1, c e^{-delta t}).
struct Envelope {
  double c = 1.0;
  double delta = 1.0;

  double tail(double t) const;
  double cdf(double t) const { return 1.0 - tail(t); }
};

struct SandwichOptions {
  int n_max = 500;
  /// Stop once u - ell <= tol at every node (0: iterate to convergence).
  double tol = 0.0;
  /// Convergence: stop when no node moves by more than this.
  double conv_tol = 1e-14;
  ConvMethod method = ConvMethod::automatic;
  bool keep_history = false;
};

struct SandwichResult {
  BoundPair bounds;
  std::vector<BoundPair> history;  // iterates 0..n when kept
  std::vector<double> gaps;        // gap after each iteration (index 0: start)
  double residual_lower = 0.0;     // sup |Phi(a0) - a0|
  double residual_upper = 0.0;     // sup |Phi(b0) - b0|
  double max_nudge = 0.0;          // largest relative rounding allowance used
};

/// Grid check that Phi(G) >= G at every node (G read as a left step).
/// G is passed through its tail 1 - G.
bool envelope_brackets(const FertilityKernel& kernel, const std::function<double(double)>& g_tail,
                       double step, std::size_t nodes, ConvMethod method = ConvMethod::automatic);

/// Iterates u <- 1 - Phi_down(1 - u) from u = 1 - G and ell <- 1 - Phi_up(1 - ell)
/// from ell = 0. Throws when G fails the bracket check, and when tol > 0 is not
/// reached within n_max iterations.
SandwichResult build_sandwich(const FertilityKernel& kernel,
                              const std::function<double(double)>& g_tail, double step,
                              std::size_t nodes, const SandwichOptions& opts = {});

/// Continues an existing sandwich (warm start) on the same grid.
SandwichResult refine_sandwich(const FertilityKernel& kernel, BoundPair start,
                               const SandwichOptions& opts = {});

/// Default envelope: delta a fraction of the growth rate, smallest c passing
/// the grid bracket check on [0, t_max] with the given number of cells.
struct EnvelopeChoice {
  Envelope envelope;
  double t_max = 0.0;
  std::size_t cells = 0;
};
EnvelopeChoice choose_envelope(const FertilityKernel& kernel, double intensity_bound,
                               std::size_t cells = 1024, double truncation = 1e-12,
                               ConvMethod method = ConvMethod::automatic);

struct GWCluster {
  double ancestor = 0.0;
  std::vector<double> times;            // times[0] is the ancestor
  std::vector<unsigned> generation;
  std::vector<std::int64_t> parent;     // -1 for the ancestor
  std::vector<std::size_t> marks;

  std::size_t size() const noexcept { return times.size(); }
  /// L: last point minus ancestor.
  double extinction() const;
};

GWCluster sample_gw_cluster(const FertilityKernel& kernel, double ancestor, RngStream& rng,
                            std::size_t point_cap = 1'000'000);

/// Immigrant intensity t -> mu~(t) on the real line with a declared bound.
struct ImmigrantIntensity {
  std::function<double(double)> rate;
  double bound = 0.0;

  static ImmigrantIntensity constant(double mu);
};

struct MROptions {
  std::optional<Envelope> envelope;
  std::size_t base_cells = 1024;
  double truncation = 1e-12;
  int max_level = 40;
  std::size_t max_nodes = std::size_t{1} << 24;
  ConvMethod method = ConvMethod::automatic;
  std::uint64_t max_attempts = 100'000'000;
  std::size_t point_cap = 1'000'000;
};

struct MRRun {
  PointPattern pattern;                 // on [0, a]
  std::vector<double> ancestors;        // reversed times t of dominating points
  std::vector<double> retained;         // reversed times of retained ancestors
  std::vector<int> levels;              // ladder level that classified each
  std::uint64_t rejection_attempts = 0;
  std::size_t immigrants = 0;
};

/// Moller-Rasmussen perfect sampler for a linear Hawkes process on [0, a].
/// Sandwich levels are cached and shared by all calls (thread-safe).
class MRSampler {
 public:
  MRSampler(FertilityKernel kernel, ImmigrantIntensity mu, double a, MROptions opts = {});

  const FertilityKernel& kernel() const noexcept { return kernel_; }
  double window_length() const noexcept { return a_; }
  const Envelope& envelope() const noexcept { return envelope_; }
  double t_max() const noexcept { return t_max_; }
  double base_step() const noexcept { return step0_; }

  MRRun run(RngStream& rng) const;
  PointPattern sample(RngStream& rng) const { return run(rng).pattern; }

  /// Bounds at ladder level `level` covering [0, extent_cells * base_step].
  std::shared_ptr<const BoundPair> bounds(int level, std::size_t extent_cells) const;

 private:
  FertilityKernel kernel_;
  ImmigrantIntensity mu_;
  double a_;
  MROptions opts_;
  Envelope envelope_;
  double t_max_ = 0.0;
  double step0_ = 0.0;
  std::size_t cells0_ = 0;
  std::vector<double> dominating_;  // 1 - g_j on level-0 cells
  mutable std::mutex mutex_;
  mutable std::map<std::pair<int, std::size_t>, std::shared_ptr<const BoundPair>> cache_;
};

PointPattern mr_perfect_sample(const ImmigrantIntensity& mu, const FertilityKernel& kernel, double a,
                               RngStream& rng, const MROptions& opts = {});

}  // namespace perfectsim
