#include "perfectsim/quadrature.hpp"

#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace perfectsim {

double integrate(const std::function<double(double)>& f, double a, double b, double rel_tol) {
  if (!(b > a)) return 0.0;
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 21>::integrate(f, a, b, 15, rel_tol, &err);
}

namespace {

double integrate_axis(const std::function<double(std::span<const double>)>& f, const Window& c,
                      std::vector<double>& x, std::size_t axis) {
  using boost::math::quadrature::gauss;
  const std::size_t pieces = c.dim() <= 1 ? 64 : (c.dim() == 2 ? 16 : 4);
  const double h = c.side(axis) / static_cast<double>(pieces);
  double total = 0.0;
  for (std::size_t p = 0; p < pieces; ++p) {
    const double a = c.lower(axis) + h * static_cast<double>(p);
    total += gauss<double, 15>::integrate(
        [&](double t) {
          x[axis] = t;
          return axis + 1 == c.dim() ? f(x) : integrate_axis(f, c, x, axis + 1);
        },
        a, a + h);
  }
  return total;
}

}  // namespace

double integrate_box(const std::function<double(std::span<const double>)>& f, const Window& c) {
  std::vector<double> x(c.dim());
  return integrate_axis(f, c, x, 0);
}

}  // namespace perfectsim
