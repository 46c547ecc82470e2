#include "perfectsim/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace perfectsim::oracle {

namespace {

std::vector<double> uniform_point(const Window& w, RngStream& rng) {
  std::vector<double> x(w.dim());
  for (std::size_t k = 0; k < w.dim(); ++k) x[k] = w.lower(k) + w.side(k) * rng.uniform();
  return x;
}

// Offset with density h(., z_j) / nu_inf(j), by bisection on nu.
double invert_nu(const FertilityKernel& k, std::size_t j, double target) {
  double hi = 1.0;
  while (k.nu(hi, j) < target) hi *= 2.0;
  double lo = 0.0;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (k.nu(mid, j) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::size_t draw_mark(const FertilityKernel& k, RngStream& rng) {
  double u = rng.uniform();
  for (std::size_t j = 0; j + 1 < k.components(); ++j) {
    if (u < k.weight(j)) return j;
    u -= k.weight(j);
  }
  return k.components() - 1;
}

}  // namespace

PointPattern buffered_cox_box(double lambda0, double mean, std::span<const double> lower,
                              std::span<const double> upper, const Window& w, double buffer, RngStream& rng) {
  const Window region = w.buffered(buffer);
  PointPattern out(w.dim());
  const auto n = rng.poisson(lambda0 * region.volume());
  std::vector<double> y(w.dim());
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto x = uniform_point(region, rng);
    const auto c = rng.poisson(mean);
    for (std::uint64_t k = 0; k < c; ++k) {
      for (std::size_t d = 0; d < w.dim(); ++d) y[d] = x[d] + lower[d] + (upper[d] - lower[d]) * rng.uniform();
      if (w.contains(y)) out.push_back(y);
    }
  }
  out.sort();
  return out;
}

PointPattern buffered_thomas(double lambda0, double mean, double sigma, const Window& w, double buffer,
                             RngStream& rng) {
  const Window region = w.buffered(buffer);
  PointPattern out(w.dim());
  const auto n = rng.poisson(lambda0 * region.volume());
  std::vector<double> y(w.dim());
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto x = uniform_point(region, rng);
    const auto c = rng.poisson(mean);
    for (std::uint64_t k = 0; k < c; ++k) {
      for (std::size_t d = 0; d < w.dim(); ++d) y[d] = x[d] + rng.normal(0.0, sigma);
      if (w.contains(y)) out.push_back(y);
    }
  }
  out.sort();
  return out;
}

PointPattern hawkes_burn_in(double mu, const FertilityKernel& kernel, double a, double burn_in, RngStream& rng) {
  // Events with their marks; intensity mu + sum_i h(t - t_i, z_i).
  std::vector<double> times;
  std::vector<std::size_t> marks;
  std::vector<double> sup(kernel.components());
  for (std::size_t j = 0; j < kernel.components(); ++j) {
    // Every supported family has its maximum at 0+ or on a table piece.
    double s = kernel.h(0.0, j);
    if (const auto* tb = std::get_if<TableShape>(&kernel.shape(j))) {
      for (double v : tb->values) s = std::max(s, v);
    }
    sup[j] = s;
  }
  const double horizon = -burn_in;
  PointPattern out(1);
  auto intensity = [&](double t, bool upper) {
    double lam = mu;
    for (std::size_t i = times.size(); i-- > 0;) {
      const double d = t - times[i];
      const auto s = kernel.support(marks[i]);
      if (s && d >= *s) continue;
      lam += upper ? sup[marks[i]] : kernel.h(d, marks[i]);
    }
    return lam;
  };
  // The current intensity bounds the future until the next event when every
  // h is nonincreasing; tables fall back to their maxima.
  bool monotone = true;
  for (std::size_t j = 0; j < kernel.components(); ++j) {
    if (std::holds_alternative<TableShape>(kernel.shape(j))) monotone = false;
  }
  double t = horizon;
  while (true) {
    const double bound = monotone ? intensity(t, false) + 1e-12 : intensity(t, true);
    t += rng.exponential(bound);
    if (t > a) break;
    const double lam = intensity(t, false);
    if (lam > bound * (1.0 + 1e-12)) throw SamplingError("oracle: Ogata bound violated");
    if (rng.uniform() * bound < lam) {
      times.push_back(t);
      marks.push_back(draw_mark(kernel, rng));
      if (t >= 0.0) out.push_back(t);
    }
    // Prune events whose excitation has died out.
    if (times.size() > 4096) {
      std::vector<double> nt;
      std::vector<std::size_t> nm;
      for (std::size_t i = 0; i < times.size(); ++i) {
        const double d = t - times[i];
        const auto s = kernel.support(marks[i]);
        if (s ? d < *s : kernel.h(d, marks[i]) > 0.0) {
          nt.push_back(times[i]);
          nm.push_back(marks[i]);
        }
      }
      times.swap(nt);
      marks.swap(nm);
    }
  }
  return out;
}

double hawkes_burn_in_bias(double mu, const FertilityKernel& kernel, double a, double burn_in) {
  (void)a;
  if (kernel.is_zero()) return 0.0;
  const double delta = 0.5 * kernel.growth_rate();
  const double m = kernel.exponential_moment(delta);
  // int_B^inf int_s^{s+a} r(u) du ds <= e^{-delta B} M / ((1 - M) delta) with
  // r the renewal density and M = E int e^{delta s} h.
  return mu * std::exp(-delta * burn_in) * m / ((1.0 - m) * delta);
}

std::vector<double> gw_extinction_times(const FertilityKernel& kernel, std::size_t n, RngStream& rng) {
  std::vector<double> out(n);
  std::deque<std::pair<double, std::size_t>> queue;
  for (std::size_t c = 0; c < n; ++c) {
    double last = 0.0;
    queue.clear();
    queue.emplace_back(0.0, draw_mark(kernel, rng));
    while (!queue.empty()) {
      const auto [t, z] = queue.front();
      queue.pop_front();
      last = std::max(last, t);
      const auto k = rng.poisson(kernel.nu_inf(z));
      for (std::uint64_t i = 0; i < k; ++i) {
        const double off = invert_nu(kernel, z, rng.uniform() * kernel.nu_inf(z));
        queue.emplace_back(t + off, draw_mark(kernel, rng));
      }
    }
    out[c] = last;
  }
  return out;
}

PointPattern renewal_thin_after(const std::function<double(RngStream&)>& gap,
                                const std::function<double(double)>& p, double horizon, RngStream& rng) {
  PointPattern out(1);
  for (double t = gap(rng); t <= horizon; t += gap(rng)) {
    if (rng.uniform() < p(t)) out.push_back(t);
  }
  return out;
}

PointPattern matern_direct(double rate, double r, const std::function<double(std::span<const double>)>& p,
                           const Window& w, RngStream& rng) {
  const Window region = w.buffered(r);
  const auto n = rng.poisson(rate * region.volume());
  std::vector<std::vector<double>> pts(n);
  std::vector<double> marks(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    pts[i] = uniform_point(region, rng);
    marks[i] = rng.uniform();
  }
  PointPattern out(w.dim());
  for (std::uint64_t i = 0; i < n; ++i) {
    if (!w.contains(pts[i])) continue;
    bool alive = true;
    for (std::uint64_t j = 0; j < n && alive; ++j) {
      if (j == i) continue;
      double d2 = 0.0;
      for (std::size_t k = 0; k < w.dim(); ++k) d2 += (pts[i][k] - pts[j][k]) * (pts[i][k] - pts[j][k]);
      if (d2 <= r * r && marks[j] <= marks[i]) alive = false;
    }
    if (alive && rng.uniform() < p(pts[i])) out.push_back(pts[i]);
  }
  out.sort();
  return out;
}

PointPattern nonlinear_hawkes_burn_in(const NonlinearHawkesSpec& spec, double lo, double hi, double burn_in,
                                      RngStream& rng) {
  std::vector<double> events;
  PointPattern out(1);
  const double m = spec.bound;
  for (double t = lo - burn_in + rng.exponential(m); t <= hi; t += rng.exponential(m)) {
    double s = 0.0;
    for (std::size_t i = events.size(); i-- > 0;) {
      const double d = t - events[i];
      if (d > spec.support) break;
      s += spec.h(d);
    }
    const double lam = spec.phi(s);
    if (rng.uniform() * m < lam) {
      events.push_back(t);
      if (t >= lo) out.push_back(t);
    }
  }
  return out;
}

}  // namespace perfectsim::oracle
