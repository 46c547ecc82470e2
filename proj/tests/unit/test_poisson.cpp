#include <doctest.h>

#include <cmath>
#include <vector>

#include <boost/math/distributions/poisson.hpp>

#include "perfectsim/poisson.hpp"
#include "perfectsim/validation.hpp"

using namespace perfectsim;

namespace {

Estimate variance_estimate(const std::vector<double>& c) {
  const double n = static_cast<double>(c.size());
  double m = 0.0;
  for (double v : c) m += v;
  m /= n;
  std::vector<double> sq;
  for (double v : c) sq.push_back((v - m) * (v - m) * n / (n - 1.0));
  return mean_estimate(sq);
}

}  // namespace

TEST_CASE("homogeneous: zero rate is empty") {
  RngStream r(1, 0);
  CHECK(sample_homogeneous(Window::unit(2), 0.0, r).empty());
  CHECK_THROWS_AS(sample_homogeneous(Window::unit(2), -1.0, r), ConfigError);
}

TEST_CASE("homogeneous: count mean and variance") {
  const auto c = run_replicates<double>(100000, 41, [](RngStream& r, std::size_t) {
    return static_cast<double>(sample_homogeneous(Window::unit(2), 5.0, r).size());
  });
  const auto m = mean_estimate(c);
  CHECK(std::abs(m.value - 5.0) <= 0.05);
  CHECK(std::abs(variance_estimate(c).value - 5.0) <= 0.15);
}

TEST_CASE("homogeneous: points lie in the window") {
  RngStream r(2, 0);
  const Window w({-1, 2}, {0, 5});
  const auto p = sample_homogeneous(w, 10.0, r);
  CHECK(p.count_in(w) == p.size());
}

TEST_CASE("strip: constant rate keeps the dominating stream") {
  RngStream r(3, 0);
  const auto s = sample_inhomogeneous_strip(10.0, {2.0, [](double, std::span<const double>) { return 2.0; }}, r);
  CHECK(s.accepted.size() == s.times.size());
  RngStream r2(3, 0);
  const auto z = sample_inhomogeneous_strip(10.0, {2.0, [](double, std::span<const double>) { return 0.0; }}, r2);
  CHECK(z.accepted.empty());
  CHECK(z.times.size() == s.times.size());
}

TEST_CASE("strip: linear ramp has mean MT/2") {
  const double M = 3.0, T = 4.0;
  const auto c = run_replicates<double>(100000, 42, [&](RngStream& r, std::size_t) {
    const DominatedIntensity d{M, [&](double t, std::span<const double>) { return M * t / T; }};
    return static_cast<double>(sample_inhomogeneous_strip(T, d, r).accepted.size());
  });
  const auto m = mean_estimate(c);
  CHECK(std::abs(m.value - M * T / 2) <= 3.0 * m.se);
}

TEST_CASE("strip: bound violation is reported") {
  RngStream r(4, 0);
  const DominatedIntensity d{1.0, [](double, std::span<const double>) { return 2.0; }};
  CHECK_THROWS_AS(sample_inhomogeneous_strip(10.0, d, r), SamplingError);
}

TEST_CASE("finite density: zero density is empty") {
  RngStream r(5, 0);
  CHECK(sample_poisson_finite_density({[](double) { return 0.0; }, 10.0}, r).empty());
}

TEST_CASE("finite density: exponential density count and positions") {
  const FiniteDensity d{[](double t) { return std::exp(-t); }, 40.0, [](double t) { return -std::expm1(-t); }};
  const FiniteDensitySampler s(d);
  CHECK(s.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<double> c;
  std::vector<double> pos;
  for (std::size_t i = 0; i < 100000; ++i) {
    RngStream r(43, i);
    const auto p = s.sample(r);
    c.push_back(static_cast<double>(p.size()));
    RngStream q(44, i);
    pos.push_back(s.draw_position(q));
  }
  CHECK(std::abs(mean_estimate(c).value - 1.0) <= 0.01);
  std::sort(pos.begin(), pos.end());
  double ks = 0.0;
  const double n = static_cast<double>(pos.size());
  for (std::size_t i = 0; i < pos.size(); ++i) {
    const double f = -std::expm1(-pos[i]);
    ks = std::max({ks, std::abs(f - i / n), std::abs(f - (i + 1) / n)});
  }
  CHECK(ks < 1.63 / std::sqrt(n));
}

TEST_CASE("finite density: exact inversion when the inverse is supplied") {
  FiniteDensity d{[](double t) { return std::exp(-t); }, 40.0, [](double t) { return -std::expm1(-t); },
                  [](double y) { return -std::log1p(-y); }};
  const FiniteDensitySampler s(d);
  RngStream r(6, 0);
  const double x = s.draw_position(r);
  CHECK(x >= 0.0);
  CHECK(x <= 40.0);
}

TEST_CASE("finite density: negative density rejected") {
  RngStream r(7, 0);
  CHECK_THROWS_AS(sample_poisson_finite_density({[](double) { return -1.0; }, 1.0}, r), Error);
}
