#pragma once

#include <functional>
#include <span>
#include <vector>

#include "perfectsim/core.hpp"
#include "perfectsim/germ.hpp"
#include "perfectsim/hawkes.hpp"
#include "perfectsim/rng.hpp"

namespace perfectsim::oracle {

// Reference samplers built the slow, direct way. They share nothing with
// the exact samplers beyond RngStream and the basic containers.

/// Homogeneous Poisson germ on w grown by `buffer`, Poisson(mean) children
/// uniform on [x + lower, x + upper], restricted to w. Exact when the
/// displacement box fits in the buffer.
PointPattern buffered_cox_box(double lambda0, double mean, std::span<const double> lower,
                              std::span<const double> upper, const Window& w, double buffer, RngStream& rng);

/// Same with isotropic Gaussian displacement (truncated by the buffer).
PointPattern buffered_thomas(double lambda0, double mean, double sigma, const Window& w, double buffer,
                             RngStream& rng);

/// Linear Hawkes process with constant immigrant rate started empty at
/// -burn_in and simulated forward by Ogata thinning; points in [0, a].
PointPattern hawkes_burn_in(double mu, const FertilityKernel& kernel, double a, double burn_in, RngStream& rng);

/// Bound on the expected number of points in [0, a] lost by starting empty
/// at -burn_in (descendants of earlier immigrants).
double hawkes_burn_in_bias(double mu, const FertilityKernel& kernel, double a, double burn_in);

/// Extinction times L of n single-ancestor clusters.
std::vector<double> gw_extinction_times(const FertilityKernel& kernel, std::size_t n, RngStream& rng);

/// Renewal process from 0 with i.i.d. gaps, each point kept with prob p(t).
PointPattern renewal_thin_after(const std::function<double(RngStream&)>& gap,
                                const std::function<double(double)>& p, double horizon, RngStream& rng);

/// Matern II process built on w grown by r, restricted to w, then thinned by p.
PointPattern matern_direct(double rate, double r, const std::function<double(std::span<const double>)>& p,
                           const Window& w, RngStream& rng);

/// Nonlinear Hawkes by Ogata thinning started empty at lo - burn_in.
PointPattern nonlinear_hawkes_burn_in(const NonlinearHawkesSpec& spec, double lo, double hi, double burn_in,
                                      RngStream& rng);

}  // namespace perfectsim::oracle
