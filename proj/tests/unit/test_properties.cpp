#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "perfectsim/boolean.hpp"
#include "perfectsim/branching.hpp"
#include "perfectsim/cluster.hpp"
#include "perfectsim/germ.hpp"
#include "perfectsim/hawkes.hpp"
#include "perfectsim/oracle.hpp"
#include "perfectsim/poisson.hpp"
#include "perfectsim/validation.hpp"

using namespace perfectsim;

TEST_CASE("property: counts are additive over disjoint boxes") {
  const CoxClusterKernel k(2, 3.0, GaussianDisplacement{0.2});
  const Window w({0, 0}, {2, 1});
  for (std::uint64_t i = 0; i < 200; ++i) {
    RngStream r(200, i);
    const auto p = brix_kendall_sample(IntensityMeasure::lebesgue(1.0, 2), k, w, r);
    const auto left = p.count_in(Window({0, 0}, {0.7, 1}));
    const auto right = p.count_in(Window({0.7, 0}, {2, 1}));
    std::size_t on_cut = 0;
    for (std::size_t q = 0; q < p.size(); ++q) on_cut += p.coord(q, 0) == 0.7;
    CHECK(left + right - on_cut == p.size());
  }
}

TEST_CASE("property: samplers are deterministic in the stream key") {
  const CoxClusterKernel ck(1, 2.0, UniformBoxDisplacement{{0}, {1}});
  const CoxClusterKernel progeny(1, 0.6, UniformBoxDisplacement{{-0.5}, {0.5}});
  const MRSampler mr(FertilityKernel::exponential(0.5, 1.0), ImmigrantIntensity::constant(1.0), 10.0);
  for (std::uint64_t i = 0; i < 20; ++i) {
    auto twice = [&](auto f) {
      RngStream a(300, i), b(300, i);
      return f(a) == f(b);
    };
    CHECK(twice([&](RngStream& r) { return brix_kendall_sample(IntensityMeasure::lebesgue(1, 1), ck, Window::interval(0, 10), r); }));
    CHECK(twice([&](RngStream& r) { return mr.sample(r); }));
    CHECK(twice([&](RngStream& r) { return approx_branching_sample(1.0, progeny, Window::interval(0, 3), 4, r); }));
    CHECK(twice([&](RngStream& r) {
      return boolean_exact_sample(IntensityMeasure::lebesgue(1, 2), DiskGrains{RadiusLaw::exponential(2)},
                                  Target{Window({0, 0}, {3, 3})}, r)
          .germs;
    }));
    CHECK(twice([&](RngStream& r) {
      return matern_thin_first(3.0, 0.2, [](std::span<const double>) { return 0.5; }, Window::unit(2), r);
    }));
  }
}

TEST_CASE("property: mr classification is reproducible") {
  const MRSampler s(FertilityKernel({{1.0, PolynomialShape{0.7, 2.0, 1}}}), ImmigrantIntensity::constant(2.0), 4.0);
  for (std::uint64_t i = 0; i < 20; ++i) {
    RngStream a(310, i), b(310, i);
    const auto x = s.run(a), y = s.run(b);
    CHECK(x.ancestors == y.ancestors);
    CHECK(x.retained == y.retained);
    CHECK(x.levels == y.levels);
  }
}

TEST_CASE("property: phi is a contraction for several kernels") {
  const std::vector<FertilityKernel> ks{
      FertilityKernel::exponential(0.9, 2.0), FertilityKernel::uniform(0.3, 2.0),
      FertilityKernel({{1.0, TableShape{{0, 0.3, 1.0}, {1.0, 0.2}}}, {3.0, ExponentialShape{0.2, 0.5}}})};
  RngStream r(320, 0);
  for (const auto& k : ks) {
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<double> f(200), g(200);
      for (std::size_t i = 0; i < 200; ++i) {
        f[i] = r.uniform();
        g[i] = std::clamp(f[i] + r.uniform(-0.3, 0.3), 0.0, 1.0);
      }
      const auto pf = phi_apply(k, f, 0.03, Rounding::nearest);
      const auto pg = phi_apply(k, g, 0.03, Rounding::nearest);
      double lhs = 0, rhs = 0;
      for (std::size_t i = 0; i < 200; ++i) {
        lhs = std::max(lhs, std::abs(pf[i] - pg[i]));
        rhs = std::max(rhs, std::abs(f[i] - g[i]));
      }
      CHECK(lhs <= k.rho() * rhs + 1e-12);
    }
  }
}

TEST_CASE("property: phi is monotone") {
  const auto k = FertilityKernel::uniform(0.6, 1.5);
  RngStream r(321, 0);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> f(150), g(150);
    for (std::size_t i = 0; i < 150; ++i) {
      f[i] = r.uniform();
      g[i] = std::min(1.0, f[i] + r.uniform(0, 0.2));
    }
    const auto nf = phi_apply(k, f, 0.05, Rounding::nearest);
    const auto ng = phi_apply(k, g, 0.05, Rounding::nearest);
    for (std::size_t i = 0; i < 150; ++i) CHECK(nf[i] <= ng[i] + 1e-15);
  }
}

TEST_CASE("property: sandwich bounds hold at finer ladder levels") {
  const MRSampler s(FertilityKernel::exponential(0.5, 1.0), ImmigrantIntensity::constant(1.0), 5.0);
  const auto b0 = s.bounds(0, 64);
  const auto b2 = s.bounds(2, 64);
  for (std::size_t i = 0; i < b0->nodes(); ++i) {
    const double t = b0->time(i);
    CHECK(b2->ell_at(t) >= b0->ell_at(t) - 1e-15);
    CHECK(b2->u_at(t) <= b0->u_at(t) + 1e-15);
    CHECK(b2->ell_at(t) <= b2->u_at(t));
  }
}

TEST_CASE("property: retention probabilities are monotone") {
  const Window w = Window::unit(2);
  double prev_disk = 2, prev_line = 2;
  for (double d = 0.0; d < 5.0; d += 0.05) {
    const double x[2] = {1.0 + d, 0.5};
    const double pd = hit_prob_disk_grain(x, RadiusLaw::exponential(1.5), w);
    const double y[2] = {1.0 + d, 0.0};
    const double pl = hit_prob_poisson_line(y, 1.0);
    CHECK(pd <= prev_disk);
    CHECK(pl <= prev_line);
    prev_disk = pd;
    prev_line = pl;
  }
  double prev = -1;
  for (double kk = 0; kk < 10; kk += 0.1) {
    CHECK(retention_prob_cox(kk) >= prev);
    prev = retention_prob_cox(kk);
  }
}

TEST_CASE("property: fattened segments converge to the thin segment") {
  const Window w({0, 0}, {1, 1});
  const double x[2] = {1.4, 0.5};
  SegmentGrains thin{1.0, 0.0, std::numbers::pi, 0.0};
  const double p0 = hit_prob_segment(x, thin, w);
  double prev = 2.0;
  for (double eps : {0.3, 0.1, 0.03, 0.01, 1e-3, 1e-5}) {
    SegmentGrains fat = thin;
    fat.fattening = eps;
    const double p = hit_prob_segment(x, fat, w);
    CHECK(p >= p0);
    CHECK(p <= prev);
    prev = p;
  }
  CHECK(prev - p0 < 1e-4);
}

TEST_CASE("property: superposition of independent poisson processes") {
  const auto a = run_replicates<double>(5000, 330, [](RngStream& r, std::size_t) {
    auto p = sample_homogeneous(Window::unit(2), 2.0, r);
    p.append(sample_homogeneous(Window::unit(2), 3.0, r));
    return static_cast<double>(p.size());
  });
  const auto b = run_replicates<double>(5000, 331, [](RngStream& r, std::size_t) {
    return static_cast<double>(sample_homogeneous(Window::unit(2), 5.0, r).size());
  });
  CHECK_FALSE(two_sample_ks(a, b).reject);
}

TEST_CASE("property: thinning consistency of the grid sampler") {
  // The largest site kept by thin_grid has the law of grid_last_point.
  const GridThinningSpec spec{GridSequence::geometric(0.6, 0.5), std::nullopt};
  std::vector<double> a, b;
  for (std::size_t i = 0; i < 20000; ++i) {
    RngStream r(340, i), q(341, i);
    const auto kept = thin_grid(spec, r);
    a.push_back(kept.empty() ? -1.0 : static_cast<double>(kept.back()));
    const auto t = grid_last_point(spec, q);
    b.push_back(t ? static_cast<double>(*t) : -1.0);
  }
  CHECK_FALSE(two_sample_ks(a, b).reject);
}

TEST_CASE("property: thinned-germ sampler matches direct cluster thinning") {
  // Brix-Kendall versus the buffered oracle on a 2-D Thomas process.
  const Window w({0, 0}, {2, 2});
  const CoxClusterKernel k(2, 4.0, GaussianDisplacement{0.15});
  const auto ex = run_replicates<double>(4000, 350, [&](RngStream& r, std::size_t) {
    return static_cast<double>(brix_kendall_sample(IntensityMeasure::lebesgue(0.8, 2), k, w, r).size());
  });
  const auto orc = run_replicates<double>(4000, 351, [&](RngStream& r, std::size_t) {
    return static_cast<double>(oracle::buffered_thomas(0.8, 4.0, 0.15, w, 9 * 0.15, r).size());
  });
  CHECK_FALSE(two_sample_ks(ex, orc).reject);
}

TEST_CASE("property: regeneration gives the stationary nonlinear hawkes law") {
  const NonlinearHawkesSpec spec{[](double u) { return std::min(0.5 + u, 2.0); }, 2.0,
                                 [](double t) { return t < 1 ? 0.5 : 0.0; }, 1.0};
  const auto ex = run_replicates<double>(4000, 360, [&](RngStream& r, std::size_t) {
    return static_cast<double>(nonlinear_hawkes_germ(spec, 0.0, 5.0, r).size());
  });
  const auto orc = run_replicates<double>(4000, 361, [&](RngStream& r, std::size_t) {
    return static_cast<double>(oracle::nonlinear_hawkes_burn_in(spec, 0.0, 5.0, 200.0, r).size());
  });
  CHECK_FALSE(two_sample_ks(ex, orc).reject);
}

TEST_CASE("property: retained ancestor density follows mu P(L > t)") {
  // Retained reversed times t have density mu P(L > t); compare the mass on
  // [0, 1] with the sandwich bounds integrated over the same range.
  const MRSampler s(FertilityKernel::exponential(0.5, 1.0), ImmigrantIntensity::constant(3.0), 1.0);
  constexpr std::size_t n = 20000;
  std::vector<double> per(n);
  for (std::size_t i = 0; i < n; ++i) {
    RngStream r(370, i);
    const auto run = s.run(r);
    double c = 0;
    for (double t : run.retained) c += t <= 1.0;
    per[i] = c;
  }
  const auto m = mean_estimate(per);
  const auto b = s.bounds(6, 64);
  double lo = 0, hi = 0;
  const double dt = 1.0 / 1000;
  for (int q = 0; q < 1000; ++q) {
    lo += 3.0 * b->ell_at((q + 1) * dt) * dt;
    hi += 3.0 * b->u_at(q * dt) * dt;
  }
  CHECK(m.value >= lo - 3.0 * m.se);
  CHECK(m.value <= hi + 3.0 * m.se);
}
