#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "perfectsim/germ.hpp"
#include "perfectsim/validation.hpp"

using namespace perfectsim;

namespace {

// One-sample KS distance of xs against the Exp(rate) CDF.
double ks_exponential(std::vector<double> xs, double rate) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = -std::expm1(-rate * xs[i]);
    d = std::max({d, std::abs(f - i / n), std::abs(f - (i + 1) / n)});
  }
  return d;
}

std::vector<double> gaps_of(const PointPattern& p, double start) {
  std::vector<double> g;
  double prev = start;
  for (std::size_t i = 0; i < p.size(); ++i) {
    g.push_back(p.coord(i, 0) - prev);
    prev = p.coord(i, 0);
  }
  return g;
}

}  // namespace

TEST_CASE("grid: two-site enumeration law") {
  const auto s = GridSequence::table({0.5, 0.5});
  CHECK(grid_last_point_pmf(s, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(grid_last_point_pmf(s, 0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(grid_empty_prob(s) == doctest::Approx(0.25).epsilon(1e-15));
  std::vector<double> obs(3, 0.0);
  for (std::size_t i = 0; i < 100000; ++i) {
    RngStream r(80, i);
    const auto t = grid_last_point(s, r);
    obs[t ? *t + 1 : 0] += 1.0;
  }
  const std::vector<double> e{25000, 25000, 50000};
  CHECK_FALSE(chi_square(obs, e, 0.05).reject);
}

TEST_CASE("grid: all-zero sequence is always empty") {
  const auto s = GridSequence::table({0.0, 0.0, 0.0});
  for (std::uint64_t i = 0; i < 100; ++i) {
    RngStream r(81, i);
    CHECK_FALSE(grid_last_point(s, r).has_value());
  }
  CHECK(grid_empty_prob(s) == 1.0);
}

TEST_CASE("grid: inverse-square sequence with itself as dominating sequence") {
  const auto p = GridSequence::inverse_square(1.0);
  const GridThinningSpec spec{p, p};
  std::map<std::int64_t, double> hist;
  constexpr std::size_t n = 100000;
  for (std::size_t i = 0; i < n; ++i) {
    RngStream r(82, i);
    const auto t = grid_last_point(spec, r);
    hist[t ? static_cast<std::int64_t>(*t) : -1] += 1.0;
  }
  std::vector<double> obs{hist[-1]}, exp{n * grid_empty_prob(p)};
  double acc = exp.back();
  for (std::uint64_t k = 0; k < 30; ++k) {
    obs.push_back(hist[static_cast<std::int64_t>(k)]);
    exp.push_back(n * grid_last_point_pmf(p, k));
    acc += exp.back();
  }
  double rest = 0.0;
  for (const auto& [k, v] : hist) {
    if (k >= 30) rest += v;
  }
  obs.push_back(rest);
  exp.push_back(n - acc);
  CHECK_FALSE(chi_square(obs, exp, 0.05).reject);
}

TEST_CASE("grid: pmf plus empty sums to one") {
  for (const auto& s : {GridSequence::table({0.5, 0.5}), GridSequence::geometric(0.7, 0.5)}) {
    double total = grid_empty_prob(s);
    for (std::uint64_t k = 0; k < 200; ++k) total += grid_last_point_pmf(s, k);
    CHECK(std::abs(total - 1.0) <= 1e-12);
  }
}

TEST_CASE("thin grid: single certain site") {
  const GridThinningSpec spec{GridSequence::table({1.0}), std::nullopt};
  for (std::uint64_t i = 0; i < 50; ++i) {
    RngStream r(83, i);
    CHECK(thin_grid(spec, r) == std::vector<std::uint64_t>{0});
  }
}

TEST_CASE("thin grid: two fair sites are independent") {
  const GridThinningSpec spec{GridSequence::table({0.5, 0.5}), std::nullopt};
  std::vector<double> obs(4, 0.0);
  for (std::size_t i = 0; i < 100000; ++i) {
    RngStream r(84, i);
    int code = 0;
    for (auto s : thin_grid(spec, r)) code |= 1 << s;
    obs[code] += 1.0;
  }
  CHECK_FALSE(chi_square(obs, std::vector<double>(4, 25000.0), 0.05).reject);
}

TEST_CASE("z2 enumeration is a bijection") {
  for (std::uint64_t n = 0; n < 2000; ++n) {
    const auto s = z2_site(n);
    CHECK(z2_index(s[0], s[1]) == n);
  }
  CHECK(z2_site(0) == std::array<std::int64_t, 2>{0, 0});
}

TEST_CASE("thin grid: z2 marginal retention") {
  const double c = 2.0;
  const GridThinningSpec spec{GridSequence::z2_inverse_square(c), GridSequence::inverse_square(25.0 * c)};
  constexpr std::size_t n = 20000;
  const std::vector<std::array<std::int64_t, 2>> sites{{0, 0}, {1, 0}, {1, -1}, {2, 1}};
  std::vector<double> hits(sites.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    RngStream r(85, i);
    const auto kept = thin_grid(spec, r);
    for (std::size_t s = 0; s < sites.size(); ++s) {
      hits[s] += std::binary_search(kept.begin(), kept.end(), z2_index(sites[s][0], sites[s][1]));
    }
  }
  for (std::size_t s = 0; s < sites.size(); ++s) {
    const double r2 = static_cast<double>(sites[s][0] * sites[s][0] + sites[s][1] * sites[s][1]);
    const double p = -std::expm1(-c / ((1 + r2) * (1 + r2)));
    const double se = std::sqrt(p * (1 - p) / n);
    CHECK(std::abs(hits[s] / n - p) <= 3.0 * se);
  }
}

TEST_CASE("renewal: exponential renewal kept in full is poisson") {
  const double m = 2.0;
  const RenewalSpec spec{[m](double) { return m; }, m, nullptr};
  const RenewalRetention keep{[](double) { return 1.0; }, [](double t) { return t; }, [](double y) { return y; }};
  std::vector<double> gaps;
  for (std::size_t i = 0; i < 20000; ++i) {
    RngStream r(86, i);
    const auto p = renewal_thin_first(spec, keep, 5.0, r);
    auto g = gaps_of(p, 0.0);
    if (!g.empty()) gaps.push_back(g.front());
  }
  // First gaps are Exp(m) truncated at the horizon; 5 m = 10 makes it negligible.
  CHECK(ks_exponential(gaps, m) < 1.36 / std::sqrt(static_cast<double>(gaps.size())));
}

TEST_CASE("renewal: zero retention is empty") {
  const RenewalSpec spec{[](double) { return 1.0; }, 1.0, nullptr};
  const RenewalRetention none{[](double) { return 0.0; }, nullptr, nullptr};
  RngStream r(87, 0);
  CHECK(renewal_thin_first(spec, none, 10.0, r).empty());
}

TEST_CASE("matern: isolated points survive and clumps keep at most one") {
  const Window w = Window::unit(2);
  auto one = [](std::span<const double>) { return 1.0; };
  for (std::uint64_t i = 0; i < 200; ++i) {
    RngStream r(88, i);
    CHECK(matern_thin_first(3.0, 10.0, one, w, r).size() <= 1);
  }
  const auto c = run_replicates<double>(20000, 89, [&](RngStream& r, std::size_t) {
    return static_cast<double>(matern_thin_first(3.0, 0.0, one, w, r).size());
  });
  const auto m = mean_estimate(c);
  CHECK(std::abs(m.value - 3.0) <= 3.0 * m.se);
}

TEST_CASE("matern: zero retention is empty") {
  RngStream r(90, 0);
  CHECK(matern_thin_first(5.0, 0.1, [](std::span<const double>) { return 0.0; }, Window::unit(2), r).empty());
}

TEST_CASE("nonlinear hawkes: constant phi is poisson") {
  const NonlinearHawkesSpec spec{[](double) { return 1.5; }, 2.0, [](double t) { return t < 1 ? 0.5 : 0.0; }, 1.0};
  std::vector<double> gaps;
  for (std::size_t i = 0; i < 20000; ++i) {
    RngStream r(91, i);
    const auto p = nonlinear_hawkes_germ(spec, 0.0, 10.0, r);
    if (!p.empty()) gaps.push_back(p.coord(0, 0));
  }
  CHECK(ks_exponential(gaps, 1.5) < 1.36 / std::sqrt(static_cast<double>(gaps.size())));
}

TEST_CASE("nonlinear hawkes: zero h gives poisson(phi(0))") {
  const NonlinearHawkesSpec spec{[](double u) { return std::min(0.7 + u, 3.0); }, 3.0, [](double) { return 0.0; }, 1.0};
  const auto c = run_replicates<double>(20000, 92, [&](RngStream& r, std::size_t) {
    return static_cast<double>(nonlinear_hawkes_germ(spec, 0.0, 10.0, r).size());
  });
  const auto m = mean_estimate(c);
  CHECK(std::abs(m.value - 7.0) <= 3.0 * m.se);
}

TEST_CASE("nonlinear hawkes: regeneration precedes the window") {
  const NonlinearHawkesSpec spec{[](double u) { return std::min(0.5 + u, 2.0); }, 2.0,
                                 [](double t) { return t < 1 ? 0.5 : 0.0; }, 1.0};
  RngStream r(93, 0);
  const auto res = nonlinear_hawkes_run(spec, 0.0, 10.0, r);
  CHECK(res.regeneration <= 0.0);
  for (std::size_t i = 0; i < res.history.size(); ++i) {
    CHECK(res.history.coord(i, 0) >= res.regeneration);
    CHECK(res.history.coord(i, 0) < 0.0);
  }
  CHECK(res.pattern.count_in(Window::interval(0, 10)) == res.pattern.size());
}
