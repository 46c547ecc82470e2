// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "perfectsim/app.hpp"
#include "perfectsim/boolean.hpp"
#include "perfectsim/branching.hpp"
#include "perfectsim/cluster.hpp"
#include "perfectsim/germ.hpp"
#include "perfectsim/hawkes.hpp"
#include "perfectsim/oracle.hpp"
#include "perfectsim/parallel.hpp"
#include "perfectsim/quadrature.hpp"
#include "perfectsim/validation.hpp"

using namespace perfectsim;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(const char* id, bool pass, const std::string& detail) {
  std::printf("%s %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  failures += !pass;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double two_sided_p(double z) {
  const boost::math::normal_distribution<> nd;
  return 2.0 * boost::math::cdf(boost::math::complement(nd, std::abs(z)));
}

std::vector<double> sizes(const std::vector<PointPattern>& ps) {
  std::vector<double> c;
  for (const auto& p : ps) c.push_back(static_cast<double>(p.size()));
  return c;
}

// Distance from the point nearest the window centre to its nearest neighbour.
double centre_nn(const PointPattern& p, const Window& w) {
  if (p.size() < 2) return INFINITY;
  const double cx = 0.5 * (w.lower(0) + w.upper(0)), cy = 0.5 * (w.lower(1) + w.upper(1));
  auto d2 = [](double ax, double ay, double bx, double by) { return (ax - bx) * (ax - bx) + (ay - by) * (ay - by); };
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (d2(p.coord(i, 0), p.coord(i, 1), cx, cy) < d2(p.coord(best, 0), p.coord(best, 1), cx, cy)) best = i;
  }
  double nn = INFINITY;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i != best) nn = std::min(nn, d2(p.coord(i, 0), p.coord(i, 1), p.coord(best, 0), p.coord(best, 1)));
  }
  return std::sqrt(nn);
}

void ac1_to_ac3() {
  const Window w = Window::interval(0, 10);
  const CoxClusterKernel k(1, 2.0, UniformBoxDisplacement{{0}, {1}});
  const auto germ = IntensityMeasure::lebesgue(1.0, 1);
  constexpr std::size_t n = 10000;

  const int saved = worker_count();
  set_worker_count(1);
  const auto t0 = std::chrono::steady_clock::now();
  const auto exact = run_replicates<PointPattern>(
      n, 1001, [&](RngStream& r, std::size_t) { return brix_kendall_sample(germ, k, w, r); }, false);
  const double secs = seconds_since(t0);
  set_worker_count(saved);

  const auto ce = sizes(exact);
  const auto m = mean_estimate(ce);
  report("AC-1", std::abs(m.value - 20.0) <= 3.0 * m.se && secs < 60.0,
         fmt("mean count %.4f (target 20, 3se %.4f), %zu replicates in %.2f s single-threaded", m.value, 3 * m.se, n,
             secs));

  // The buffered oracle is exact here (displacements lie in [0, 1], buffer 1),
  // so its certificate bound is 0 <= 1e-3.
  const double lo[1] = {0}, hi[1] = {1};
  const auto orc = run_replicates<PointPattern>(
      n, 2001, [&](RngStream& r, std::size_t) { return oracle::buffered_cox_box(1.0, 2.0, lo, hi, w, 1.0, r); });
  const auto co = sizes(orc);

  const std::vector<double> cs{0.1, 1.0, 10.0};
  const auto le = empirical_laplace(exact, w, cs);
  const auto lo_ = empirical_laplace(orc, w, cs);
  const auto ks = two_sample_ks(ce, co, 0.05, "counts KS");
  std::vector<TestReport> fam{ks};
  for (std::size_t i = 0; i < cs.size(); ++i) {
    const double se = std::hypot(le[i].se, lo_[i].se);
    const double z = se > 0 ? (le[i].value - lo_[i].value) / se : 0.0;
    fam.push_back(TestReport::make("Laplace", std::abs(z), 1.96, two_sided_p(z), n));
  }
  holm_correct(fam, 0.05);
  report("AC-2", !fam[0].reject,
         fmt("KS D=%.5f, p=%.3f, Holm over %zu tests: %s", ks.value, ks.p_value, fam.size(),
             fam[0].reject ? "reject" : "accept"));

  bool ok = true;
  std::string detail;
  for (std::size_t i = 0; i < cs.size(); ++i) {
    const double diff = std::abs(le[i].value - lo_[i].value);
    const double bound = 3.0 * le[i].se + 3.0 * lo_[i].se;
    ok = ok && diff <= bound;
    detail += fmt("c=%g |dL|=%.2e<=%.2e ", cs[i], diff, bound);
  }
  report("AC-3", ok, detail);
}

void ac4() {
  const Window w({0, 0}, {4, 4});
  const auto germ = IntensityMeasure::lebesgue(1.0, 2);
  constexpr std::size_t n = 10000;
  constexpr int probes = 1000;
  struct Cov {
    double all, centre, edge;
  };
  const auto cov = run_replicates<Cov>(n, 1004, [&](RngStream& r, std::size_t) {
    const auto s = boolean_exact_sample(germ, DiskGrains{RadiusLaw::fixed(0.5)}, Target{w}, r);
    RngStream pr = r.split(7);
    int a = 0, c = 0, e = 0;
    for (int k = 0; k < probes; ++k) {
      const double y[2] = {pr.uniform(0, 4), pr.uniform(0, 4)};
      a += s.covered(y);
      // Strips of width 0.5: x in [1.75, 2.25] and x in [0, 0.5].
      const double yc[2] = {pr.uniform(1.75, 2.25), pr.uniform(0, 4)};
      const double ye[2] = {pr.uniform(0.0, 0.5), pr.uniform(0, 4)};
      c += s.covered(yc);
      e += s.covered(ye);
    }
    return Cov{a / double(probes), c / double(probes), e / double(probes)};
  });
  std::vector<double> all, diff;
  for (const auto& c : cov) {
    all.push_back(c.all);
    diff.push_back(c.centre - c.edge);
  }
  const double expect = -std::expm1(-std::numbers::pi / 4.0);
  const auto a = mean_estimate(all);
  const auto d = mean_estimate(diff);
  const double ci = 1.96 * d.se;
  report("AC-4", std::abs(a.value - expect) <= 0.01 && std::abs(d.value) < 2.0 * ci,
         fmt("coverage %.5f vs %.5f (tol 0.01); centre-edge %.2e, 2*CI %.2e", a.value, expect, d.value, 2 * ci));
}

void ac5() {
  const Disk disk{{0, 0}, 1.0};
  const double rr = 10.0;
  const auto c = run_replicates<double>(10000, 1005, [&](RngStream& r, std::size_t) {
    return static_cast<double>(
        boolean_exact_sample(IntensityMeasure::lebesgue(1.0, 2), LineGrains{false, rr}, Target{disk}, r).germs.size());
  });
  const double mass = integrate(
      [](double t) {
        const double x[2] = {t, 0};
        return hit_prob_poisson_line(x, 1.0) * 2.0 * std::numbers::pi * t;
      },
      0.0, rr, 1e-12);
  const auto m = mean_estimate(c);
  report("AC-5", std::abs(m.value - mass) <= 3.0 * m.se,
         fmt("retained germs %.4f vs quadrature %.4f (3se %.4f)", m.value, mass, 3 * m.se));
}

void ac6() {
  const auto s = GridSequence::table({0.5, 0.5});
  constexpr std::size_t n = 100000;
  std::vector<double> obs(3, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    RngStream r(1006, i);
    const auto t = grid_last_point(s, r);
    obs[t ? *t + 1 : 0] += 1.0;
  }
  const std::vector<double> exp{n * grid_empty_prob(s), n * grid_last_point_pmf(s, 0), n * grid_last_point_pmf(s, 1)};
  const auto chi = chi_square(obs, exp, 0.05, 0, "last site");
  double total = grid_empty_prob(s);
  for (std::uint64_t k = 0; k < 10; ++k) total += grid_last_point_pmf(s, k);
  report("AC-6", !chi.reject && std::abs(total - 1.0) <= 1e-12,
         fmt("chi2 %.3f <= %.3f; |sum - 1| = %.1e", chi.value, chi.threshold, std::abs(total - 1.0)));
}

void ac7() {
  const RenewalSpec spec{[](double t) { return t / (1.0 + t); }, 1.0, nullptr};
  const RenewalRetention keep{[](double t) { return std::exp(-t); }, [](double t) { return -std::expm1(-t); },
                              [](double y) { return -std::log1p(-y); }};
  const double horizon = 60.0;
  constexpr std::size_t n = 100000;
  std::vector<double> cf(n), ca(n), ff(n), fa(n);
  parallel_for(n, [&](std::size_t i) {
    RngStream r(1007, i), q(2007, i);
    const auto a = renewal_thin_first(spec, keep, horizon, r);
    const auto b = oracle::renewal_thin_after([](RngStream& g) { return g.gamma(2.0, 1.0); },
                                              [](double t) { return std::exp(-t); }, horizon, q);
    cf[i] = static_cast<double>(a.size());
    ca[i] = static_cast<double>(b.size());
    ff[i] = a.empty() ? INFINITY : a.coord(0, 0);
    fa[i] = b.empty() ? INFINITY : b.coord(0, 0);
  });
  std::vector<TestReport> fam{two_sample_ks(cf, ca, 0.05, "count"), two_sample_ks(ff, fa, 0.05, "first point")};
  holm_correct(fam, 0.05);
  report("AC-7", !fam[0].reject && !fam[1].reject,
         fmt("count KS p=%.3f, first-point KS p=%.3f (Holm)", fam[0].p_value, fam[1].p_value));
}

void ac8() {
  const Window w({0, 0}, {5, 5});
  auto one = [](std::span<const double>) { return 1.0; };
  constexpr std::size_t n = 10000;
  const auto a = run_replicates<PointPattern>(n, 1008, [&](RngStream& r, std::size_t) {
    return matern_thin_first(2.0, 0.3, one, w, r);
  });
  const auto b = run_replicates<PointPattern>(n, 2008, [&](RngStream& r, std::size_t) {
    return oracle::matern_direct(2.0, 0.3, one, w, r);
  });
  std::vector<double> na, nb;
  for (std::size_t i = 0; i < n; ++i) {
    na.push_back(centre_nn(a[i], w));
    nb.push_back(centre_nn(b[i], w));
  }
  std::vector<TestReport> fam{two_sample_ks(sizes(a), sizes(b), 0.05, "count"), two_sample_ks(na, nb, 0.05, "nn")};
  holm_correct(fam, 0.05);
  report("AC-8", !fam[0].reject && !fam[1].reject,
         fmt("count KS p=%.3f, nearest-neighbour KS p=%.3f (Holm)", fam[0].p_value, fam[1].p_value));
}

void ac9() {
  const std::vector<FertilityKernel> ks{FertilityKernel::exponential(0.5, 1.0), FertilityKernel::uniform(0.5, 1.0),
                                        FertilityKernel({{1.0, PolynomialShape{0.6, 2.0, 2}},
                                                         {1.0, TableShape{{0, 0.5, 1.5}, {0.8, 0.3}}}})};
  RngStream r(1009, 0);
  int pass = 0;
  double worst = -INFINITY;
  constexpr double step = 0.02;
  constexpr std::size_t nodes = 500;
  for (int pair = 0; pair < 100; ++pair) {
    const auto& k = ks[static_cast<std::size_t>(pair) % ks.size()];
    std::vector<double> f(nodes), g(nodes);
    const double scale = r.uniform(0.01, 1.0);
    for (std::size_t i = 0; i < nodes; ++i) {
      f[i] = r.uniform();
      g[i] = std::clamp(f[i] + scale * r.uniform(-1, 1), 0.0, 1.0);
    }
    PhiOperator op(k, step, nodes);
    const auto pf = op.apply(f, Rounding::nearest);
    const auto pg = op.apply(g, Rounding::nearest);
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < nodes; ++i) {
      lhs = std::max(lhs, std::abs(pf[i] - pg[i]));
      rhs = std::max(rhs, std::abs(f[i] - g[i]));
    }
    // Grid tolerance: floating-point rounding of the two evaluations.
    const double tol = 2.0 * (4.0 * nodes + 32.0) * 0x1.0p-52;
    pass += lhs <= k.rho() * rhs + tol;
    worst = std::max(worst, lhs - k.rho() * rhs);
  }
  report("AC-9", pass == 100, fmt("%d/100 pairs contract; max(lhs - rho*rhs) = %.2e", pass, worst));
}

void ac10() {
  const auto k = FertilityKernel::exponential(0.5, 1.0);
  const double rho = k.rho();
  const auto env = choose_envelope(k, 1.0, 1024);
  const std::size_t nodes = 1025;
  const double step = env.t_max / 1024;
  SandwichOptions o;
  o.keep_history = true;
  const auto res = build_sandwich(k, [&](double t) { return env.envelope.tail(t); }, step, nodes, o);
  const auto& fin = res.bounds;
  const double gap_inf = res.gaps.back();
  const double nudge = res.max_nudge / (1 - rho);
  bool cert = true;
  for (std::size_t n = 0; n < res.history.size(); ++n) {
    const double geo = std::pow(rho, static_cast<double>(n)) / (1 - rho);
    const auto& b = res.history[n];
    double du = 0, dl = 0;
    for (std::size_t i = 0; i < nodes; ++i) {
      du = std::max(du, b.u[i] - fin.u[i]);
      dl = std::max(dl, fin.ell[i] - b.ell[i]);
    }
    cert = cert && res.gaps[n] <= geo * (res.residual_lower + res.residual_upper) + gap_inf;
    cert = cert && du <= geo * res.residual_lower + nudge && dl <= geo * res.residual_upper + nudge;
  }

  constexpr std::size_t m = 1000000;
  RngStream r(1010, 0);
  auto l = oracle::gw_extinction_times(k, m, r);
  std::sort(l.begin(), l.end());
  const double eps = std::sqrt(std::log(2.0 / 0.05) / (2.0 * m));
  bool inside = true;
  double worst = -INFINITY;
  for (std::size_t i = 0; i < nodes; ++i) {
    const double t = fin.time(i);
    const auto above = static_cast<double>(l.end() - std::upper_bound(l.begin(), l.end(), t));
    const double tail = above / m;
    worst = std::max({worst, fin.ell[i] - tail - eps, tail - fin.u[i] - eps});
    inside = inside && fin.ell[i] - eps <= tail && tail <= fin.u[i] + eps;
  }
  report("AC-10", cert && inside,
         fmt("%zu iterations, final gap %.2e, geometric certificate %s; 1e6-cluster tail inside [l,u] +/- DKW %.1e at "
             "all %zu nodes: %s (worst excess %.2e)",
             res.gaps.size() - 1, gap_inf, cert ? "holds" : "fails", eps, nodes, inside ? "yes" : "no", worst));
}

void ac11() {
  const auto k = FertilityKernel::exponential(0.5, 1.0);
  const MRSampler s(k, ImmigrantIntensity::constant(1.0), 10.0);
  constexpr std::size_t n = 10000;
  const auto c = run_replicates<double>(n, 1011, [&](RngStream& r, std::size_t) {
    return static_cast<double>(s.sample(r).size());
  });
  double burn = 10.0;
  while (oracle::hawkes_burn_in_bias(1.0, k, 10.0, burn) > 1e-4) burn *= 1.5;
  const auto o = run_replicates<double>(n, 2011, [&](RngStream& r, std::size_t) {
    return static_cast<double>(oracle::hawkes_burn_in(1.0, k, 10.0, burn, r).size());
  });
  const auto m = mean_estimate(c);
  const auto ks = two_sample_ks(c, o);
  report("AC-11", std::abs(m.value - 20.0) <= 3.0 * m.se && !ks.reject,
         fmt("mean %.4f (target 20, 3se %.4f); KS vs burn-in (B=%.0f) D=%.4f, p=%.3f", m.value, 3 * m.se, burn,
             ks.value, ks.p_value));
}

void ac12() {
  const auto n = certificate_generations_for(0.25, 1.0, 0.5, 1.0);
  const auto cert = truncation_certificate(1.0, 0.5, 1.0, n);
  // Same process two ways: Poisson(1) germ with Poisson(0.5) children
  // displaced uniformly forward by [0, 1] is the linear Hawkes process with
  // h = 0.5 on [0, 1].
  const CoxClusterKernel progeny(1, 0.5, UniformBoxDisplacement{{0}, {1}});
  constexpr std::size_t reps = 20000;
  const auto a = run_replicates<double>(reps, 1012, [&](RngStream& r, std::size_t) {
    return static_cast<double>(approx_branching_sample(1.0, progeny, Window::interval(0, 1), n, r).size());
  });
  const MRSampler exact(FertilityKernel::uniform(0.5, 1.0), ImmigrantIntensity::constant(1.0), 1.0);
  const auto b = run_replicates<double>(reps, 2012, [&](RngStream& r, std::size_t) {
    return static_cast<double>(exact.sample(r).size());
  });
  const auto d = histogram_discrepancy(a, b);
  report("AC-12", n == 3 && d.value <= cert.bound + 2.0 * d.half_width,
         fmt("n=%llu, bound %.3f; max histogram discrepancy %.4f at k=%lld (2*CI %.4f)",
             static_cast<unsigned long long>(n), cert.bound, d.value, static_cast<long long>(d.at), 2 * d.half_width));
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void ac13() {
  const fs::path root = fs::temp_directory_path() / "perfectsim_acceptance_ac13";
  fs::remove_all(root);
  const int saved = worker_count();
  int configs = 0, files = 0, mismatches = 0;
  for (const auto& e : fs::directory_iterator(PERFECTSIM_CONFIG_DIR)) {
    if (e.path().extension() != ".json") continue;
    const auto cfg = app::load_config(e.path());
    const auto stem = e.path().stem().string();
    const int threads[3] = {1, 1, 4};
    for (int run = 0; run < 3; ++run) {
      set_worker_count(threads[run]);
      app::write_samples(cfg, root / stem / std::to_string(run));
    }
    for (const auto& f : fs::directory_iterator(root / stem / "0")) {
      const auto ref = slurp(f.path());
      for (int run = 1; run < 3; ++run) {
        mismatches += slurp(root / stem / std::to_string(run) / f.path().filename()) != ref;
      }
      ++files;
    }
    ++configs;
  }
  set_worker_count(saved);
  fs::remove_all(root);
  report("AC-13", configs > 0 && mismatches == 0,
         fmt("%d demo configs, %d files, 3 runs each (1, 1, 4 workers): %d mismatches", configs, files, mismatches));
}

}  // namespace

int main() {
  struct Step {
    const char* id;
    void (*run)();
  };
  const Step steps[] = {{"AC-1..3", ac1_to_ac3}, {"AC-4", ac4},   {"AC-5", ac5},   {"AC-6", ac6},
                        {"AC-7", ac7},          {"AC-8", ac8},   {"AC-9", ac9},   {"AC-10", ac10},
                        {"AC-11", ac11},        {"AC-12", ac12}, {"AC-13", ac13}};
  for (const auto& s : steps) {
    try {
      s.run();
    } catch (const std::exception& e) {
      report(s.id, false, std::string("error: ") + e.what());
    }
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
