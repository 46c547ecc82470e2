#include "perfectsim/core.hpp"
#include "perfectsim/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>


namespace perfectsim {

Window::Window(std::vector<double> lower, std::vector<double> upper)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.empty() || lower_.size() != upper_.size()) {
    throw ConfigError("window: lower and upper must be non-empty and of equal length");
  }
  for (std::size_t i = 0; i < lower_.size(); ++i) {
    if (!std::isfinite(lower_[i]) || !std::isfinite(upper_[i]) || !(lower_[i] < upper_[i])) {
      throw ConfigError("window: need finite lower[" + std::to_string(i) + "] < upper[" +
                        std::to_string(i) + "]");
    }
  }
}

Window Window::unit(std::size_t dim) {
  return Window(std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0));
}

Window Window::interval(double lo, double hi) { return Window({lo}, {hi}); }

double Window::volume() const {
  double v = 1.0;
  for (std::size_t i = 0; i < dim(); ++i) v *= side(i);
  return v;
}

bool Window::contains(std::span<const double> x) const {
  for (std::size_t i = 0; i < dim(); ++i) {
    if (x[i] < lower_[i] || x[i] > upper_[i]) return false;
  }
  return true;
}

double Window::distance(std::span<const double> x) const {
  double s = 0.0;
  for (std::size_t i = 0; i < dim(); ++i) {
    const double d = std::max({lower_[i] - x[i], 0.0, x[i] - upper_[i]});
    s += d * d;
  }
  return std::sqrt(s);
}

Window Window::buffered(double r) const {
  if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("window buffer must be finite and >= 0");
  auto lo = lower_;
  auto hi = upper_;
  for (std::size_t i = 0; i < dim(); ++i) {
    lo[i] -= r;
    hi[i] += r;
  }
  return Window(std::move(lo), std::move(hi));
}

double window_volume(const Window& w) { return w.volume(); }

PointPattern::PointPattern(std::size_t dim, std::size_t mark_dim) : dim_(dim), mark_dim_(mark_dim) {
  if (dim == 0) throw ConfigError("point pattern dimension must be positive");
}

void PointPattern::reserve(std::size_t n) {
  coords_.reserve(n * dim_);
  marks_.reserve(n * mark_dim_);
}

void PointPattern::push_back(std::span<const double> x, std::span<const double> marks) {
  if (x.size() != dim_) throw ConfigError("point dimension mismatch");
  if (marks.size() != mark_dim_) throw ConfigError("mark dimension mismatch");
  for (double v : x) {
    if (!std::isfinite(v)) throw SamplingError("non-finite coordinate in point pattern");
  }
  coords_.insert(coords_.end(), x.begin(), x.end());
  marks_.insert(marks_.end(), marks.begin(), marks.end());
}

void PointPattern::append(const PointPattern& other) {
  if (other.empty()) return;
  if (other.dim_ != dim_ || other.mark_dim_ != mark_dim_) {
    throw ConfigError("cannot merge point patterns of different shapes");
  }
  coords_.insert(coords_.end(), other.coords_.begin(), other.coords_.end());
  marks_.insert(marks_.end(), other.marks_.begin(), other.marks_.end());
}

std::size_t PointPattern::count_in(const Window& c) const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < size(); ++i) n += c.contains(point(i)) ? 1 : 0;
  return n;
}

PointPattern PointPattern::restricted(const Window& c) const {
  PointPattern out(dim_, mark_dim_);
  for (std::size_t i = 0; i < size(); ++i) {
    if (c.contains(point(i))) out.push_back(point(i), marks(i));
  }
  return out;
}

bool PointPattern::is_simple() const {
  std::vector<std::size_t> idx(size());
  std::iota(idx.begin(), idx.end(), 0);
  auto less = [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(point(a).begin(), point(a).end(), point(b).begin(),
                                        point(b).end());
  };
  std::sort(idx.begin(), idx.end(), less);
  for (std::size_t k = 1; k < idx.size(); ++k) {
    if (std::equal(point(idx[k]).begin(), point(idx[k]).end(), point(idx[k - 1]).begin())) {
      return false;
    }
  }
  return true;
}

void PointPattern::sort() {
  std::vector<std::size_t> idx(size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(point(a).begin(), point(a).end(), point(b).begin(),
                                        point(b).end());
  });
  PointPattern out(dim_, mark_dim_);
  out.reserve(size());
  for (auto i : idx) out.push_back(point(i), marks(i));
  *this = std::move(out);
}

double cluster_intensity(double germ_rate, double cluster_mean_mass) {
  if (!(germ_rate >= 0.0) || !(cluster_mean_mass >= 0.0) || !std::isfinite(cluster_mean_mass) ||
      !std::isfinite(germ_rate)) {
    throw ConfigError("cluster_intensity: arguments must be finite and non-negative");
  }
  return germ_rate * cluster_mean_mass;
}

double branching_total_intensity(double germ_rate, double progeny_mass) {
  if (!(germ_rate >= 0.0) || !std::isfinite(germ_rate)) {
    throw ConfigError("branching_total_intensity: germ rate must be finite and non-negative");
  }
  if (!(progeny_mass >= 0.0)) throw ConfigError("progeny mass must be non-negative");
  if (!(progeny_mass < 1.0)) {
    throw ConfigError("progeny mass >= 1: branching process is not subcritical");
  }
  return germ_rate / (1.0 - progeny_mass);
}

IntensityMeasure::IntensityMeasure(Form form, std::size_t dim) : form_(std::move(form)), dim_(dim) {
  if (dim == 0) throw ConfigError("intensity measure dimension must be positive");
  if (auto* l = std::get_if<LebesgueIntensity>(&form_)) {
    if (!(l->rate >= 0.0) || !std::isfinite(l->rate)) throw ConfigError("germ rate must be >= 0");
  } else if (auto* d = std::get_if<DensityIntensity>(&form_)) {
    if (!d->density) throw ConfigError("density intensity needs a density function");
    if (!(d->bound >= 0.0) || !std::isfinite(d->bound)) {
      throw ConfigError("density intensity needs a finite declared bound");
    }
    if (d->support && d->support->dim() != dim) throw ConfigError("support dimension mismatch");
  } else {
    const auto& a = std::get<AtomicIntensity>(form_);
    if (a.atoms.size() != a.weights.size()) throw ConfigError("one weight per atom required");
    if (!a.atoms.empty() && a.atoms.dim() != dim) throw ConfigError("atom dimension mismatch");
    for (double w : a.weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("atom weights must be >= 0");
    }
  }
}

IntensityMeasure IntensityMeasure::lebesgue(double rate, std::size_t dim) {
  return IntensityMeasure(LebesgueIntensity{rate}, dim);
}

double IntensityMeasure::bound() const {
  if (auto* l = std::get_if<LebesgueIntensity>(&form_)) return l->rate;
  if (auto* d = std::get_if<DensityIntensity>(&form_)) return d->bound;
  throw ConfigError("atomic intensity has no density bound");
}

double IntensityMeasure::density(std::span<const double> x) const {
  if (auto* l = std::get_if<LebesgueIntensity>(&form_)) return l->rate;
  if (auto* d = std::get_if<DensityIntensity>(&form_)) {
    if (d->support && !d->support->contains(x)) return 0.0;
    const double v = d->density(x);
    if (!(v >= 0.0) || v > d->bound) {
      throw SamplingError("germ density outside [0, declared bound]");
    }
    return v;
  }
  throw ConfigError("atomic intensity has no density");
}

double IntensityMeasure::total_on(const Window& c) const {
  if (c.dim() != dim_) throw ConfigError("window dimension mismatch");
  if (auto* l = std::get_if<LebesgueIntensity>(&form_)) return l->rate * c.volume();
  if (auto* d = std::get_if<DensityIntensity>(&form_)) {
    std::vector<double> lo = c.lower();
    std::vector<double> hi = c.upper();
    if (d->support) {
      for (std::size_t i = 0; i < dim_; ++i) {
        lo[i] = std::max(lo[i], d->support->lower(i));
        hi[i] = std::min(hi[i], d->support->upper(i));
        if (!(lo[i] < hi[i])) return 0.0;
      }
    }
    return integrate_box([this](std::span<const double> y) { return density(y); },
                         Window(lo, hi));
  }
  const auto& a = std::get<AtomicIntensity>(form_);
  double s = 0.0;
  for (std::size_t i = 0; i < a.atoms.size(); ++i) {
    if (c.contains(a.atoms.point(i))) s += a.weights[i];
  }
  return s;
}

bool IntensityMeasure::is_zero() const {
  if (auto* l = std::get_if<LebesgueIntensity>(&form_)) return l->rate == 0.0;
  if (auto* d = std::get_if<DensityIntensity>(&form_)) return d->bound == 0.0;
  const auto& a = std::get<AtomicIntensity>(form_);
  return std::all_of(a.weights.begin(), a.weights.end(), [](double w) { return w == 0.0; });
}

}  // namespace perfectsim
