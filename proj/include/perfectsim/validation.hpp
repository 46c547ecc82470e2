#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "perfectsim/core.hpp"
#include "perfectsim/parallel.hpp"
#include "perfectsim/rng.hpp"

namespace perfectsim {

/// Outcome of one statistical check. `reject` is a pure function of
/// (value, threshold): reject iff value > threshold.
struct TestReport {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  double p_value = 1.0;
  bool reject = false;
  std::uint64_t replicates = 0;
  std::vector<std::uint64_t> seeds;

  static TestReport make(std::string name, double value, double threshold, double p_value,
                         std::uint64_t replicates, std::vector<std::uint64_t> seeds = {});
};

nlohmann::json to_json(const TestReport& r);
nlohmann::json to_json(std::span<const TestReport> rs);

/// Estimate with a symmetric normal interval [lower, upper] = estimate -/+ z se.
struct Estimate {
  double value = 0.0;
  double se = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

Estimate mean_estimate(std::span<const double> xs, double z = 3.0);

/// Mean count per unit volume in w. When every replicate is empty the upper
/// end is the rule-of-three bound 3 / (n vol).
Estimate empirical_intensity(std::span<const PointPattern> patterns, const Window& w, double z = 3.0);

/// E exp(-c N(w)) for each c.
std::vector<Estimate> empirical_laplace(std::span<const PointPattern> patterns, const Window& w,
                                        std::span<const double> cs, double z = 3.0);

/// P(N(b) = 0) for each probe box.
std::vector<Estimate> void_probability(std::span<const PointPattern> patterns, std::span<const Window> probes,
                                       double z = 3.0);

std::vector<double> counts_in(std::span<const PointPattern> patterns, const Window& w);

/// Smallest sample size accepted by the asymptotic tests.
inline constexpr std::size_t kMinSample = 1000;

/// Two-sample Kolmogorov-Smirnov test; value = sup |F_a - F_b|, threshold =
/// c(alpha) sqrt((n+m)/(nm)). Ties make it conservative.
TestReport two_sample_ks(std::span<const double> a, std::span<const double> b, double alpha = 0.05,
                         std::string name = "two-sample KS");

/// Kolmogorov distribution tail P(K > x).
double kolmogorov_tail(double x);

/// Pearson chi-square against expected counts; adjacent bins are pooled
/// until each expected count is at least 5. value = statistic, threshold =
/// the (1 - alpha) quantile with (bins - 1 - ddof) degrees of freedom.
TestReport chi_square(std::span<const double> observed, std::span<const double> expected, double alpha = 0.05,
                      int ddof = 0, std::string name = "chi-square");

/// Holm step-down over the p-values; rewrites `reject` (and threshold) of
/// every report in place.
void holm_correct(std::span<TestReport> reports, double alpha = 0.05);

/// max_k |P_a(N = k) - P_b(N = k)| over integer counts, with the normal
/// half-width (z sigma) of the difference at the maximising k.
struct HistogramDiscrepancy {
  double value = 0.0;
  double half_width = 0.0;
  std::int64_t at = 0;
};
HistogramDiscrepancy histogram_discrepancy(std::span<const double> a, std::span<const double> b,
                                           double z = 1.96);

/// Runs f(rng, i) with rng = RngStream(seed, i) for i in [0, n).
template <class R, class F>
std::vector<R> run_replicates(std::size_t n, std::uint64_t seed, F&& f, bool parallel = true) {
  std::vector<R> out(n);
  parallel_for(
      n,
      [&](std::size_t i) {
        RngStream rng(seed, i);
        out[i] = f(rng, i);
      },
      parallel);
  return out;
}

}  // namespace perfectsim
