#include "perfectsim/branching.hpp"

#include <cmath>
#include <string>

#include "perfectsim/parallel.hpp"

namespace perfectsim {

namespace {

void check_mass(double m) {
  if (!(m >= 0.0) || !(m < 1.0)) {
    throw ConfigError("progeny mass |nu_alpha| = " + std::to_string(m) + " must be in [0, 1)");
  }
}

}  // namespace

TruncationCertificate truncation_certificate(double lambda0, double progeny_mass, double volume,
                                             std::uint64_t n) {
  check_mass(progeny_mass);
  if (!(lambda0 >= 0.0) || !(volume >= 0.0)) throw ConfigError("certificate: lambda0 and volume must be >= 0");
  TruncationCertificate c;
  c.n = n;
  c.gamma = lambda0 * volume / (1.0 - progeny_mass);
  c.bound = n == 0 ? c.gamma : c.gamma * std::pow(progeny_mass, static_cast<double>(n));
  return c;
}

BranchingSample approx_branching_run(double lambda0, const ClusterKernel& progeny, const Window& w,
                                     std::uint64_t n, RngStream& rng) {
  if (progeny.dim() != w.dim()) throw ConfigError("progeny and window dimensions differ");
  if (!(lambda0 >= 0.0) || !std::isfinite(lambda0)) throw ConfigError("lambda0 must be finite and >= 0");
  if (progeny.includes_germ()) throw ConfigError("progeny kernel must not include its parent");
  const auto mass = progeny.mean_mass();
  if (!mass) throw ConfigError("progeny kernel has no declared mean mass");
  const auto radius = progeny.support_radius();
  if (!radius) throw ConfigError("buffer radius undefined; use exact sampler");

  BranchingSample out;
  out.certificate = truncation_certificate(lambda0, *mass, w.volume(), n);
  const Window region = w.buffered(static_cast<double>(n) * *radius);
  const std::size_t dim = w.dim();

  auto base = rng.fork();
  const auto count = rng.poisson(lambda0 * region.volume());
  PointPattern germ(dim);
  germ.reserve(count);
  std::vector<double> x(dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    for (std::size_t k = 0; k < dim; ++k) x[k] = rng.uniform(region.lower(k), region.upper(k));
    germ.push_back(x);
  }

  std::vector<PointPattern> parts(germ.size());
  std::vector<std::vector<std::size_t>> gens(germ.size(), std::vector<std::size_t>(n + 1, 0));
  parallel_for(germ.size(), [&](std::size_t i) {
    auto s = base.split(i);
    PointPattern kept(dim);
    PointPattern current(dim);
    current.push_back(germ.point(i));
    for (std::uint64_t g = 0;; ++g) {
      gens[i][g] += current.size();
      for (std::size_t k = 0; k < current.size(); ++k) {
        if (w.contains(current.point(k))) kept.push_back(current.point(k));
      }
      if (g == n || current.empty()) break;
      PointPattern next(dim);
      for (std::size_t k = 0; k < current.size(); ++k) next.append(progeny.sample(current.point(k), s));
      current = std::move(next);
    }
    parts[i] = std::move(kept);
  });
  out.pattern = PointPattern(dim);
  out.generation_counts.assign(n + 1, 0);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    out.pattern.append(parts[i]);
    for (std::uint64_t g = 0; g <= n; ++g) out.generation_counts[g] += gens[i][g];
  }
  out.pattern.sort();
  return out;
}

PointPattern approx_branching_sample(double lambda0, const ClusterKernel& progeny, const Window& w,
                                     std::uint64_t n, RngStream& rng, TruncationCertificate* certificate) {
  auto r = approx_branching_run(lambda0, progeny, w, n, rng);
  if (certificate) *certificate = r.certificate;
  return std::move(r.pattern);
}

std::uint64_t certificate_generations_for_gamma(double eps, double gamma, double progeny_mass) {
  check_mass(progeny_mass);
  if (!(eps > 0.0)) throw ConfigError("target variation distance must be > 0");
  if (progeny_mass == 0.0 || eps >= gamma) return 0;
  const double guess = std::ceil((std::log(eps) - std::log(gamma)) / std::log(progeny_mass));
  auto n = static_cast<std::uint64_t>(std::max(guess, 0.0));
  auto bound = [&](std::uint64_t k) { return gamma * std::pow(progeny_mass, static_cast<double>(k)); };
  // The log ratio can land a hair off an integer; settle on the exact minimum.
  while (n > 0 && bound(n - 1) <= eps) --n;
  while (bound(n) > eps) ++n;
  return n;
}

std::uint64_t certificate_generations_for(double eps, double lambda0, double progeny_mass, double volume) {
  return certificate_generations_for_gamma(eps, truncation_certificate(lambda0, progeny_mass, volume, 0).gamma,
                                           progeny_mass);
}

}  // namespace perfectsim
