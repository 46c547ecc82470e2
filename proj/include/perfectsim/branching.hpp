#pragma once

#include <cstdint>

#include "perfectsim/cluster.hpp"
#include "perfectsim/core.hpp"
#include "perfectsim/rng.hpp"

namespace perfectsim {

/// Variation-distance bound gamma * |nu_alpha|^n for n kept generations,
/// gamma = lambda0 * vol(W) / (1 - |nu_alpha|).
struct TruncationCertificate {
  std::uint64_t n = 0;
  double gamma = 0.0;
  double bound = 0.0;
};

TruncationCertificate truncation_certificate(double lambda0, double progeny_mass, double volume,
                                             std::uint64_t n);

struct BranchingSample {
  PointPattern pattern;              // generations 0..n restricted to W
  TruncationCertificate certificate;
  std::vector<std::size_t> generation_counts;  // all points, before restriction
};

/// Germ Poisson(lambda0) on W buffered by nR (generation 0), each point
/// spawning an independent progeny pattern for n generations.
BranchingSample approx_branching_run(double lambda0, const ClusterKernel& progeny, const Window& w,
                                     std::uint64_t n, RngStream& rng);
PointPattern approx_branching_sample(double lambda0, const ClusterKernel& progeny, const Window& w,
                                     std::uint64_t n, RngStream& rng,
                                     TruncationCertificate* certificate = nullptr);

/// Smallest n with gamma * |nu_alpha|^n <= eps.
std::uint64_t certificate_generations_for_gamma(double eps, double gamma, double progeny_mass);
std::uint64_t certificate_generations_for(double eps, double lambda0, double progeny_mass,
                                          double volume);

}  // namespace perfectsim
