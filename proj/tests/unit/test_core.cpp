#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "perfectsim/core.hpp"
#include "perfectsim/io.hpp"
#include "perfectsim/rng.hpp"

using namespace perfectsim;

TEST_CASE("window volume") {
  CHECK(window_volume(Window::unit(2)) == 1.0);
  CHECK(window_volume(Window({0, 0}, {2, 3})) == 6.0);
  CHECK(window_volume(Window::interval(0, 2)) == 2.0);
  CHECK_THROWS_AS(Window({0, 1}, {1, 1}), ConfigError);
  CHECK_THROWS_AS(Window({0}, {1, 1}), ConfigError);
}

TEST_CASE("window geometry") {
  const Window w({0, 0}, {1, 2});
  const double in[2] = {1, 2}, out[2] = {4, 6};
  CHECK(w.contains(in));
  CHECK_FALSE(w.contains(out));
  CHECK(w.distance(in) == 0.0);
  CHECK(w.distance(out) == doctest::Approx(5.0));
  const auto b = w.buffered(0.5);
  CHECK(b.lower(0) == -0.5);
  CHECK(b.upper(1) == 2.5);
}

TEST_CASE("cluster intensity") {
  CHECK(cluster_intensity(1.0, 2.0) == 2.0);
  CHECK(cluster_intensity(0.0, 7.0) == 0.0);
  CHECK(cluster_intensity(0.5, 3.0) == 1.5);
  CHECK_THROWS_AS(cluster_intensity(-1.0, 1.0), ConfigError);
}

TEST_CASE("branching total intensity") {
  CHECK(branching_total_intensity(1.0, 0.5) == 2.0);
  CHECK(branching_total_intensity(1.0, 0.0) == 1.0);
  CHECK(branching_total_intensity(2.0, 0.9) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK_THROWS_WITH_AS(branching_total_intensity(1.0, 1.0),
                       "progeny mass >= 1: branching process is not subcritical", ConfigError);
  CHECK_THROWS_AS(branching_total_intensity(1.0, 1.5), ConfigError);
}

TEST_CASE("point pattern basics") {
  PointPattern p(2, 1);
  const double a[2] = {0.5, 0.5}, m[1] = {3.0};
  p.push_back(a, m);
  const double b[2] = {0.1, 0.9}, mb[1] = {4.0};
  p.push_back(b, mb);
  CHECK(p.size() == 2);
  CHECK(p.count_in(Window::unit(2)) == 2);
  CHECK(p.count_in(Window({0, 0}, {0.3, 1})) == 1);
  p.sort();
  CHECK(p.coord(0, 0) == 0.1);
  CHECK(p.marks(0)[0] == 4.0);
  CHECK(p.is_simple());
  p.push_back(a, m);
  CHECK_FALSE(p.is_simple());
  const double bad[2] = {NAN, 0};
  CHECK_THROWS_AS(p.push_back(bad, m), Error);
  PointPattern q(3);
  const double z[3] = {0, 0, 0};
  q.push_back(z);
  CHECK_THROWS_AS(p.append(q), Error);
}

TEST_CASE("intensity measures") {
  const auto leb = IntensityMeasure::lebesgue(2.0, 2);
  CHECK(leb.total_on(Window({0, 0}, {2, 3})) == 12.0);
  CHECK(leb.bound() == 2.0);
  const IntensityMeasure dens(DensityIntensity{[](std::span<const double> x) { return x[0]; }, 1.0, Window::unit(1)}, 1);
  CHECK(dens.total_on(Window::interval(0, 1)) == doctest::Approx(0.5));
  const IntensityMeasure bad(DensityIntensity{[](std::span<const double>) { return 3.0; }, 1.0, std::nullopt}, 1);
  const double x[1] = {0.2};
  CHECK_THROWS_AS(bad.density(x), Error);
  PointPattern atoms(1);
  atoms.push_back(0.5);
  atoms.push_back(3.0);
  const IntensityMeasure at(AtomicIntensity{atoms, {2.0, 5.0}}, 1);
  CHECK(at.total_on(Window::interval(0, 1)) == 2.0);
  CHECK_THROWS_AS((void)at.bound(), Error);
}

TEST_CASE("rng streams are keyed and independent of call order") {
  RngStream a(7, 3), b(7, 3), c(7, 4);
  std::vector<std::uint64_t> xa, xb, xc;
  for (int i = 0; i < 5; ++i) {
    xa.push_back(a.next_u64());
    xb.push_back(b.next_u64());
    xc.push_back(c.next_u64());
  }
  CHECK(xa == xb);
  CHECK(xa != xc);
  const RngStream root(1, 0);
  RngStream s1 = root.split(5), s2 = root.split(5), s3 = root.split(6);
  CHECK(s1.next_u64() == s2.next_u64());
  CHECK(s1.next_u64() != s3.next_u64());
  RngStream f(1, 0);
  auto k1 = f.fork(), k2 = f.fork();
  CHECK(k1.next_u64() != k2.next_u64());
}

TEST_CASE("rng distributions") {
  RngStream r(11, 0);
  double s = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    CHECK_UNARY(u >= 0.0);
    CHECK_UNARY(u < 1.0);
    s += u;
  }
  CHECK(s / 100000 == doctest::Approx(0.5).epsilon(0.01));
  CHECK(r.poisson(0.0) == 0u);
  CHECK_THROWS_AS(r.exponential(0.0), Error);
}

TEST_CASE("pattern json round trip") {
  RngStream r(3, 1);
  PointPattern p(2, 1);
  for (int i = 0; i < 20; ++i) {
    const double x[2] = {r.uniform(), r.normal(0, 1e-7)}, m[1] = {r.exponential(1)};
    p.push_back(x, m);
  }
  PatternMeta meta{3, 1, "poisson", "abc", {{"k", 1}}};
  const auto j = to_json(p, meta);
  const auto back = pattern_from_json(nlohmann::json::parse(j.dump()));
  CHECK(back == p);
  CHECK(meta_from_json(j) == meta);
}

TEST_CASE("csv output") {
  PointPattern empty(2);
  CHECK(to_csv(empty) == "x1,x2\n");
  PointPattern p(1, 1);
  const double x[1] = {0.1}, m[1] = {2};
  p.push_back(x, m);
  CHECK(to_csv(p) == "x1,m1\n0.1,2\n");
  CHECK(std::stod(format_double(0.1 + 0.2)) == 0.1 + 0.2);
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
}
