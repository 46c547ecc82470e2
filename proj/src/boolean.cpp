#include "perfectsim/boolean.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include "perfectsim/cluster.hpp"
#include "perfectsim/poisson.hpp"

namespace perfectsim {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTailLevel = 1e-12;

using Vec = std::array<double, 2>;

Vec vec(std::span<const double> x) { return {x[0], x[1]}; }
double dot(Vec a, Vec b) { return a[0] * b[0] + a[1] * b[1]; }
Vec sub(Vec a, Vec b) { return {a[0] - b[0], a[1] - b[1]}; }
double norm(Vec a) { return std::hypot(a[0], a[1]); }
Vec unit(double angle) { return {std::cos(angle), std::sin(angle)}; }

void require_planar(const Window& w) {
  if (w.dim() != 2) throw ConfigError("boolean model: window must be 2-dimensional");
}

void require_point(std::span<const double> x) {
  if (x.size() != 2) throw ConfigError("boolean model: points must be 2-dimensional");
}

// Wrap to (-pi, pi].
double wrap(double a) {
  a = std::remainder(a, 2.0 * kPi);
  return a <= -kPi ? a + 2.0 * kPi : a;
}

double point_segment_distance(Vec p, Vec a, Vec b) {
  const Vec ab = sub(b, a);
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(sub(p, a), ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return norm(sub(p, {a[0] + t * ab[0], a[1] + t * ab[1]}));
}

// Liang-Barsky: clips o + t u, t in [t0, t1], to the box. Returns the
// surviving parameter range.
std::optional<std::array<double, 2>> clip_param(Vec o, Vec u, double t0, double t1, const Window& w) {
  for (int i = 0; i < 2; ++i) {
    if (u[i] == 0.0) {
      if (o[i] < w.lower(i) || o[i] > w.upper(i)) return std::nullopt;
      continue;
    }
    double ta = (w.lower(i) - o[i]) / u[i];
    double tb = (w.upper(i) - o[i]) / u[i];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  return std::array<double, 2>{t0, t1};
}

// Parameter range of o + t u inside the closed disk.
std::optional<std::array<double, 2>> disk_param(Vec o, Vec u, double t0, double t1, const Disk& d) {
  const Vec oc = sub(o, d.center);
  const double b = dot(oc, u);
  const double c = dot(oc, oc) - d.radius * d.radius;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double s = std::sqrt(disc);
  const double lo = std::max(t0, -b - s);
  const double hi = std::min(t1, -b + s);
  if (lo > hi) return std::nullopt;
  return std::array<double, 2>{lo, hi};
}

Vec nearest_in_box(Vec x, const Window& w) {
  return {std::clamp(x[0], w.lower(0), w.upper(0)), std::clamp(x[1], w.lower(1), w.upper(1))};
}

// Directions phi for which the ray of length len from x reaches the box
// grown by eps, as [centre - left, centre + right]. Requires x outside the
// grown box and within reach.
struct Shadow {
  double centre;
  double left;
  double right;
};

Shadow ray_shadow(Vec x, double len, double eps, const Window& w) {
  const Vec p = nearest_in_box(x, w);
  const double ref = std::atan2(p[1] - x[1], p[0] - x[0]);
  if (eps == 0.0) {
    // Extreme directions of box-within-ball sit at box corners inside the
    // ball or at crossings of the circle with the box edges.
    double lo = 0.0, hi = 0.0;
    auto take = [&](Vec q) {
      const double dl = wrap(std::atan2(q[1] - x[1], q[0] - x[0]) - ref);
      lo = std::min(lo, dl);
      hi = std::max(hi, dl);
    };
    const Vec corners[4] = {{w.lower(0), w.lower(1)}, {w.upper(0), w.lower(1)},
                            {w.upper(0), w.upper(1)}, {w.lower(0), w.upper(1)}};
    const Disk ball{x, len};
    for (int k = 0; k < 4; ++k) {
      const Vec a = corners[k];
      const Vec b = corners[(k + 1) % 4];
      if (norm(sub(a, x)) <= len) take(a);
      const Vec e = sub(b, a);
      const double elen = norm(e);
      const Vec u{e[0] / elen, e[1] / elen};
      if (auto r = disk_param(a, u, 0.0, elen, ball)) {
        take({a[0] + (*r)[0] * u[0], a[1] + (*r)[0] * u[1]});
        take({a[0] + (*r)[1] * u[0], a[1] + (*r)[1] * u[1]});
      }
    }
    return {ref, -lo, hi};
  }
  auto hits = [&](double phi) {
    const Vec u = unit(phi);
    return segment_box_distance({x, {x[0] + len * u[0], x[1] + len * u[1]}}, w) <= eps;
  };
  auto edge = [&](double sign) {
    double lo = 0.0, hi = kPi;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (hits(ref + sign * mid) ? lo : hi) = mid;
    }
    return lo;
  };
  return {ref, edge(-1.0), edge(1.0)};
}

double invert_monotone(const std::function<double(double)>& f, double target, double lo, double hi) {
  for (int it = 0; it < 300; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (f(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double uniform_on(const std::vector<std::array<double, 2>>& set, RngStream& rng) {
  double total = 0.0;
  for (auto& iv : set) total += iv[1] - iv[0];
  double u = rng.uniform() * total;
  for (auto& iv : set) {
    const double len = iv[1] - iv[0];
    if (u < len) return iv[0] + u;
    u -= len;
  }
  return set.back()[1];
}

// Germ density outside the box at distance d: lambda * tail(d) * (P + 2 pi d).
double steiner_cumulative(const RadiusLaw& law, double lambda, double per, double t) {
  switch (law.kind) {
    case RadiusLaw::Kind::fixed:
      t = std::min(t, law.a);
      return lambda * (per * t + kPi * t * t);
    case RadiusLaw::Kind::exponential: {
      const double k = law.a;
      const double e = std::exp(-k * t);
      return lambda * (per * (-std::expm1(-k * t)) / k + 2.0 * kPi * (1.0 - e * (1.0 + k * t)) / (k * k));
    }
    case RadiusLaw::Kind::uniform: {
      const double a = law.a, b = law.b;
      const double s = std::min(t, a);
      double m = per * s + kPi * s * s;
      if (t > a) {
        const double hi = std::min(t, b);
        auto anti = [&](double x) {
          return b * per * x + b * kPi * x * x - per * x * x / 2.0 - 2.0 * kPi * x * x * x / 3.0;
        };
        m += (anti(hi) - anti(a)) / (b - a);
      }
      return lambda * m;
    }
  }
  return 0.0;
}

double steiner_truncation(const RadiusLaw& law, double lambda, double per) {
  if (auto m = law.max()) return *m;
  const double k = law.a;
  auto rest = [&](double t) {
    return lambda * std::exp(-k * t) * (per / k + 2.0 * kPi * (t / k + 1.0 / (k * k)));
  };
  double t = 1.0 / k;
  while (rest(t) > kTailLevel) t *= 2.0;
  return t;
}

Vec steiner_boundary_point(const Window& w, double d, RngStream& rng) {
  const double sx = w.side(0), sy = w.side(1);
  const double arc = 0.5 * kPi * d;
  double u = rng.uniform() * (2.0 * sx + 2.0 * sy + 4.0 * arc);
  const double x0 = w.lower(0), x1 = w.upper(0), y0 = w.lower(1), y1 = w.upper(1);
  if (u < sx) return {x0 + u, y0 - d};
  u -= sx;
  if (u < arc) {
    const double phi = 1.5 * kPi + u / d;
    return {x1 + d * std::cos(phi), y0 + d * std::sin(phi)};
  }
  u -= arc;
  if (u < sy) return {x1 + d, y0 + u};
  u -= sy;
  if (u < arc) {
    const double phi = u / d;
    return {x1 + d * std::cos(phi), y1 + d * std::sin(phi)};
  }
  u -= arc;
  if (u < sx) return {x1 - u, y1 + d};
  u -= sx;
  if (u < arc) {
    const double phi = 0.5 * kPi + u / d;
    return {x0 + d * std::cos(phi), y1 + d * std::sin(phi)};
  }
  u -= arc;
  if (u < sy) return {x0 - d, y1 - u};
  u -= sy;
  const double phi = kPi + std::min(u, arc) / d;
  return {x0 + d * std::cos(phi), y0 + d * std::sin(phi)};
}

double line_cumulative(double lambda, double big_r, bool full, double r) {
  if (r <= big_r) return lambda * kPi * r * r;
  const double f = full ? 2.0 : 1.0;
  const double extra =
      r * r * std::asin(big_r / r) + big_r * std::sqrt(r * r - big_r * big_r) - 0.5 * kPi * big_r * big_r;
  return lambda * kPi * big_r * big_r + f * lambda * extra;
}

double line_hit(double r, double big_r, bool full) {
  if (r < big_r) return 1.0;
  return (full ? 2.0 : 1.0) * std::asin(big_r / r) / kPi;
}

}  // namespace

bool Disk::contains(std::span<const double> y) const {
  return std::hypot(y[0] - center[0], y[1] - center[1]) <= radius;
}

void RadiusLaw::validate() const {
  switch (kind) {
    case Kind::fixed:
      if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("radius: fixed radius must be >= 0");
      break;
    case Kind::exponential:
      if (!(a > 0.0) || !std::isfinite(a)) throw ConfigError("radius: exponential rate must be > 0");
      break;
    case Kind::uniform:
      if (!(a >= 0.0) || !(a < b) || !std::isfinite(b)) throw ConfigError("radius: need 0 <= lo < hi");
      break;
  }
}

double RadiusLaw::tail(double r) const {
  if (r <= 0.0) return 1.0;
  switch (kind) {
    case Kind::fixed:
      return r <= a ? 1.0 : 0.0;
    case Kind::exponential:
      return std::exp(-a * r);
    case Kind::uniform:
      if (r <= a) return 1.0;
      return r >= b ? 0.0 : (b - r) / (b - a);
  }
  return 0.0;
}

double RadiusLaw::mean() const {
  switch (kind) {
    case Kind::fixed:
      return a;
    case Kind::exponential:
      return 1.0 / a;
    case Kind::uniform:
      return 0.5 * (a + b);
  }
  return 0.0;
}

std::optional<double> RadiusLaw::max() const {
  switch (kind) {
    case Kind::fixed:
      return a;
    case Kind::exponential:
      return std::nullopt;
    case Kind::uniform:
      return b;
  }
  return std::nullopt;
}

double RadiusLaw::sample(RngStream& rng) const { return sample_at_least(0.0, rng); }

double RadiusLaw::sample_at_least(double d, RngStream& rng) const {
  if (!(tail(d) > 0.0)) throw SamplingError("conditioning event too rare for rejection");
  d = std::max(d, 0.0);
  switch (kind) {
    case Kind::fixed:
      return a;
    case Kind::exponential:
      return d + rng.exponential(a);
    case Kind::uniform:
      return rng.uniform(std::max(a, d), b);
  }
  return 0.0;
}

double segment_box_distance(const SegmentGrain& s, const Window& w) {
  const Vec d = sub(s.b, s.a);
  if (clip_param(s.a, d, 0.0, 1.0, w)) return 0.0;
  double best = std::min(w.distance(s.a), w.distance(s.b));
  const Vec corners[4] = {{w.lower(0), w.lower(1)}, {w.upper(0), w.lower(1)},
                          {w.upper(0), w.upper(1)}, {w.lower(0), w.upper(1)}};
  for (const auto& c : corners) best = std::min(best, point_segment_distance(c, s.a, s.b));
  return best;
}

bool intersects(const Grain& g, const Window& w) {
  require_planar(w);
  if (auto* d = std::get_if<DiskGrain>(&g)) return w.distance(d->center) <= d->radius;
  if (auto* s = std::get_if<SegmentGrain>(&g)) return segment_box_distance(*s, w) <= s->fattening;
  const auto& l = std::get<LineGrain>(g);
  const double inf = std::numeric_limits<double>::infinity();
  return clip_param(l.origin, unit(l.angle), l.full ? -inf : 0.0, inf, w).has_value();
}

bool intersects(const Grain& g, const Disk& t) {
  if (auto* d = std::get_if<DiskGrain>(&g)) return norm(sub(d->center, t.center)) <= d->radius + t.radius;
  if (auto* s = std::get_if<SegmentGrain>(&g)) {
    return point_segment_distance(t.center, s->a, s->b) <= t.radius + s->fattening;
  }
  const auto& l = std::get<LineGrain>(g);
  const Vec u = unit(l.angle);
  double proj = dot(sub(t.center, l.origin), u);
  if (!l.full) proj = std::max(proj, 0.0);
  const Vec q{l.origin[0] + proj * u[0], l.origin[1] + proj * u[1]};
  return norm(sub(q, t.center)) <= t.radius;
}

bool intersects(const Grain& g, const Target& t) {
  return std::visit([&](const auto& tt) { return intersects(g, tt); }, t);
}

bool covers(const Grain& g, std::span<const double> y) {
  require_point(y);
  const Vec p = vec(y);
  if (auto* d = std::get_if<DiskGrain>(&g)) return norm(sub(p, d->center)) <= d->radius;
  if (auto* s = std::get_if<SegmentGrain>(&g)) return point_segment_distance(p, s->a, s->b) <= s->fattening;
  const auto& l = std::get<LineGrain>(g);
  const Vec u = unit(l.angle);
  const Vec v = sub(p, l.origin);
  if (!l.full && dot(v, u) < 0.0) return false;
  return u[0] * v[1] - u[1] * v[0] == 0.0;
}

std::optional<Grain> clip(const Grain& g, const Target& t) {
  if (!intersects(g, t)) return std::nullopt;
  if (std::holds_alternative<DiskGrain>(g)) return g;
  Vec o;
  Vec u;
  double t0, t1;
  double fat = 0.0;
  if (auto* s = std::get_if<SegmentGrain>(&g)) {
    o = s->a;
    u = sub(s->b, s->a);
    t0 = 0.0;
    t1 = 1.0;
    fat = s->fattening;
  } else {
    const auto& l = std::get<LineGrain>(g);
    o = l.origin;
    u = unit(l.angle);
    const double inf = std::numeric_limits<double>::infinity();
    t0 = l.full ? -inf : 0.0;
    t1 = inf;
  }
  std::optional<std::array<double, 2>> r;
  if (auto* w = std::get_if<Window>(&t)) {
    r = clip_param(o, u, t0, t1, fat > 0.0 ? w->buffered(fat) : *w);
  } else {
    auto d = std::get<Disk>(t);
    d.radius += fat;
    r = disk_param(o, u, t0, t1, d);
  }
  if (!r) return g;  // fattened segment touching only through its margin
  return SegmentGrain{{o[0] + (*r)[0] * u[0], o[1] + (*r)[0] * u[1]},
                      {o[0] + (*r)[1] * u[0], o[1] + (*r)[1] * u[1]},
                      fat};
}

double hit_prob_disk_grain(std::span<const double> x, const RadiusLaw& law, const Window& w) {
  require_point(x);
  require_planar(w);
  return law.tail(w.distance(x));
}

double hit_prob_poisson_line(std::span<const double> x, double disk_radius) {
  require_point(x);
  return line_hit(std::hypot(x[0], x[1]), disk_radius, false);
}

double hit_prob_full_line(std::span<const double> x, double disk_radius) {
  require_point(x);
  return line_hit(std::hypot(x[0], x[1]), disk_radius, true);
}

std::vector<std::array<double, 2>> segment_hit_angles(std::span<const double> x,
                                                      const SegmentGrains& law, const Window& w) {
  require_point(x);
  require_planar(w);
  const double lo = law.angle_lo, hi = law.angle_hi;
  const double half = 0.5 * law.length;
  const double d = w.distance(x);
  std::vector<std::array<double, 2>> out;
  if (d <= law.fattening) {
    out.push_back({lo, hi});
    return out;
  }
  if (d > half + law.fattening) return out;
  const Shadow sh = ray_shadow(vec(x), half, law.fattening, w);
  // Orientation theta hits when theta or theta + pi lies in the shadow.
  double start = std::fmod(sh.centre - sh.left, kPi);
  if (start < 0.0) start += kPi;
  const double width = sh.left + sh.right;
  std::vector<std::array<double, 2>> pieces;
  if (start + width <= kPi) {
    pieces.push_back({start, start + width});
  } else {
    pieces.push_back({start, kPi});
    pieces.push_back({0.0, start + width - kPi});
  }
  std::sort(pieces.begin(), pieces.end());
  for (auto& p : pieces) {
    const double a = std::max(p[0], lo), b = std::min(p[1], hi);
    if (a < b || (lo == hi && p[0] <= lo && lo <= p[1])) out.push_back({a, std::max(a, b)});
  }
  return out;
}

double hit_prob_segment(std::span<const double> x, const SegmentGrains& law, const Window& w) {
  const auto set = segment_hit_angles(x, law, w);
  if (law.angle_hi == law.angle_lo) return set.empty() ? 0.0 : 1.0;
  double m = 0.0;
  for (auto& iv : set) m += iv[1] - iv[0];
  return std::clamp(m / (law.angle_hi - law.angle_lo), 0.0, 1.0);
}

double hit_prob(const GrainDistribution& grains, std::span<const double> x, const Target& t) {
  if (auto* d = std::get_if<DiskGrains>(&grains)) {
    if (auto* w = std::get_if<Window>(&t)) return hit_prob_disk_grain(x, d->radius, *w);
    const auto& disk = std::get<Disk>(t);
    return d->radius.tail(std::max(0.0, norm(sub(vec(x), disk.center)) - disk.radius));
  }
  if (auto* s = std::get_if<SegmentGrains>(&grains)) {
    if (auto* w = std::get_if<Window>(&t)) return hit_prob_segment(x, *s, *w);
    throw ConfigError("segment grains need a box window");
  }
  const auto& l = std::get<LineGrains>(grains);
  const auto* disk = std::get_if<Disk>(&t);
  if (!disk) throw ConfigError("line grains need a disk window");
  require_point(x);
  return line_hit(norm(sub(vec(x), disk->center)), disk->radius, l.full);
}

bool BooleanSample::covered(std::span<const double> y) const {
  return std::any_of(grains.begin(), grains.end(), [&](const Grain& g) { return covers(g, y); });
}

std::vector<Grain> BooleanSample::clipped() const {
  std::vector<Grain> out;
  out.reserve(grains.size());
  for (const auto& g : grains) {
    if (auto c = clip(g, target)) out.push_back(*c);
  }
  return out;
}

namespace {

void validate(const GrainDistribution& grains) {
  if (auto* d = std::get_if<DiskGrains>(&grains)) {
    d->radius.validate();
  } else if (auto* s = std::get_if<SegmentGrains>(&grains)) {
    if (!(s->length > 0.0) || !std::isfinite(s->length)) throw ConfigError("segment length must be > 0");
    if (!(s->angle_lo >= 0.0) || !(s->angle_lo <= s->angle_hi) || !(s->angle_hi <= kPi)) {
      throw ConfigError("segment angles must satisfy 0 <= lo <= hi <= pi");
    }
    if (!(s->fattening >= 0.0) || !std::isfinite(s->fattening)) throw ConfigError("fattening must be >= 0");
  } else {
    const auto& l = std::get<LineGrains>(grains);
    if (!std::isfinite(l.germ_radius)) throw SamplingError("retention mass diverges: exact sampling impossible");
    if (!(l.germ_radius > 0.0)) throw ConfigError("line germ radius must be > 0");
  }
}

Grain draw_disk(Vec x, double d, const RadiusLaw& law, RngStream& rng) {
  return DiskGrain{x, law.sample_at_least(d, rng)};
}

Grain draw_segment(Vec x, const SegmentGrains& law, const Window& w, RngStream& rng) {
  const auto set = segment_hit_angles(x, law, w);
  if (set.empty()) throw SamplingError("conditioning event too rare for rejection");
  const double theta = law.angle_lo == law.angle_hi ? law.angle_lo : uniform_on(set, rng);
  const Vec u = unit(theta);
  const double h = 0.5 * law.length;
  return SegmentGrain{{x[0] - h * u[0], x[1] - h * u[1]}, {x[0] + h * u[0], x[1] + h * u[1]}, law.fattening};
}

Grain draw_line(Vec x, const LineGrains& law, const Disk& disk, RngStream& rng) {
  const Vec v = sub(x, disk.center);
  const double r = norm(v);
  if (r <= disk.radius) {
    return LineGrain{x, rng.uniform(0.0, law.full ? kPi : 2.0 * kPi), law.full};
  }
  const double psi = std::atan2(v[1], v[0]);
  const double a = std::asin(disk.radius / r);
  const double mid = law.full ? psi : psi + kPi;
  return LineGrain{x, rng.uniform(mid - a, mid + a), law.full};
}

}  // namespace

BooleanSample boolean_exact_sample(const IntensityMeasure& germ, const GrainDistribution& grains,
                                   const Target& target, RngStream& rng) {
  validate(grains);
  if (germ.dim() != 2) throw ConfigError("boolean model: germ must be 2-dimensional");
  BooleanSample out{target, PointPattern(2), {}, 0.0};
  if (germ.is_zero()) return out;
  const auto* lebesgue = std::get_if<LebesgueIntensity>(&germ.form());
  auto base = rng.fork();

  if (auto* dg = std::get_if<DiskGrains>(&grains)) {
    const auto* w = std::get_if<Window>(&target);
    if (!w) throw ConfigError("disk grains need a box window");
    require_planar(*w);
    const auto& law = dg->radius;
    if (lebesgue) {
      const double lambda = lebesgue->rate;
      out.germs = sample_homogeneous(*w, lambda, rng);
      const double per = 2.0 * (w->side(0) + w->side(1));
      const double trunc = steiner_truncation(law, lambda, per);
      if (trunc > 0.0) {
        auto cum = [&](double t) { return steiner_cumulative(law, lambda, per, t); };
        FiniteDensity fd;
        fd.density = [&](double t) { return lambda * law.tail(t) * (per + 2.0 * kPi * t); };
        fd.truncation = trunc;
        fd.cumulative = cum;
        fd.inverse_cumulative = [&](double m) { return invert_monotone(cum, m, 0.0, trunc); };
        if (!law.max()) fd.neglected_tail = kTailLevel;
        const FiniteDensitySampler sampler(fd);
        out.neglected_mass = fd.neglected_tail;
        const auto dists = sampler.sample(rng);
        for (std::size_t i = 0; i < dists.size(); ++i) {
          const Vec p = steiner_boundary_point(*w, dists.coord(i, 0), rng);
          out.germs.push_back(p);
        }
      }
    } else {
      double trunc = law.max().value_or(0.0);
      if (!law.max()) {
        const double scale = std::holds_alternative<AtomicIntensity>(germ.form()) ? 1.0 : germ.bound();
        trunc = std::log(std::max(1.0, scale) / kTailLevel) / law.a;
        out.neglected_mass = kTailLevel;
      }
      out.germs = sample_thinned_germ(
          germ, [&](std::span<const double> x) { return hit_prob_disk_grain(x, law, *w); },
          w->buffered(trunc), rng);
    }
    out.grains.reserve(out.germs.size());
    for (std::size_t i = 0; i < out.germs.size(); ++i) {
      auto s = base.split(i);
      const Vec x = vec(out.germs.point(i));
      out.grains.push_back(draw_disk(x, w->distance(x), law, s));
    }
    return out;
  }

  if (auto* sg = std::get_if<SegmentGrains>(&grains)) {
    const auto* w = std::get_if<Window>(&target);
    if (!w) throw ConfigError("segment grains need a box window");
    require_planar(*w);
    out.germs = sample_thinned_germ(
        germ, [&](std::span<const double> x) { return hit_prob_segment(x, *sg, *w); },
        w->buffered(0.5 * sg->length + sg->fattening), rng);
    for (std::size_t i = 0; i < out.germs.size(); ++i) {
      auto s = base.split(i);
      out.grains.push_back(draw_segment(vec(out.germs.point(i)), *sg, *w, s));
    }
    return out;
  }

  const auto& lg = std::get<LineGrains>(grains);
  const auto* disk = std::get_if<Disk>(&target);
  if (!disk) throw ConfigError("line grains need a disk window");
  if (lebesgue) {
    const double lambda = lebesgue->rate;
    const double gr = lg.germ_radius;
    auto cum = [&](double r) { return line_cumulative(lambda, disk->radius, lg.full, r); };
    FiniteDensity fd;
    fd.density = [&](double r) { return lambda * 2.0 * kPi * r * line_hit(r, disk->radius, lg.full); };
    fd.truncation = gr;
    fd.cumulative = cum;
    fd.inverse_cumulative = [&](double m) { return invert_monotone(cum, m, 0.0, gr); };
    const FiniteDensitySampler sampler(fd);
    const auto radii = sampler.sample(rng);
    for (std::size_t i = 0; i < radii.size(); ++i) {
      const double psi = rng.uniform(0.0, 2.0 * kPi);
      const double r = radii.coord(i, 0);
      out.germs.push_back(Vec{disk->center[0] + r * std::cos(psi), disk->center[1] + r * std::sin(psi)});
    }
  } else {
    const Window box({disk->center[0] - lg.germ_radius, disk->center[1] - lg.germ_radius},
                     {disk->center[0] + lg.germ_radius, disk->center[1] + lg.germ_radius});
    out.germs = sample_thinned_germ(
        germ,
        [&](std::span<const double> x) {
          const double r = norm(sub(vec(x), disk->center));
          return r <= lg.germ_radius ? line_hit(r, disk->radius, lg.full) : 0.0;
        },
        box, rng);
  }
  for (std::size_t i = 0; i < out.germs.size(); ++i) {
    auto s = base.split(i);
    out.grains.push_back(draw_line(vec(out.germs.point(i)), lg, *disk, s));
  }
  return out;
}

}  // namespace perfectsim
