#pragma once

#include <functional>
#include <span>

#include "perfectsim/core.hpp"

namespace perfectsim {

/// Adaptive Gauss-Kronrod on [a, b].
double integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol = 1e-12);

/// Composite Gauss-Legendre over a box (intended for dim <= 3).
double integrate_box(const std::function<double(std::span<const double>)>& f, const Window& c);

}  // namespace perfectsim
