#include "perfectsim/hawkes.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "perfectsim/parallel.hpp"
#include "perfectsim/quadrature.hpp"

namespace perfectsim {

namespace {

constexpr double kUnit = 0x1.0p-52;
constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void validate_shape(const FertilityShape& s) {
  std::visit(Overloaded{
                 [](const ExponentialShape& e) {
                   if (!(e.beta >= 0.0) || !std::isfinite(e.beta)) throw ConfigError("exponential kernel: beta must be >= 0");
                   if (!(e.gamma > 0.0) || !std::isfinite(e.gamma)) throw ConfigError("exponential kernel: gamma must be > 0");
                 },
                 [](const PolynomialShape& p) {
                   if (!(p.beta >= 0.0) || !std::isfinite(p.beta)) throw ConfigError("polynomial kernel: beta must be >= 0");
                   if (!(p.support > 0.0) || !std::isfinite(p.support)) throw ConfigError("polynomial kernel: support must be > 0");
                   if (p.degree > 64) throw ConfigError("polynomial kernel: degree too large");
                 },
                 [](const TableShape& t) {
                   if (t.knots.size() < 2 || t.values.size() + 1 != t.knots.size()) {
                     throw ConfigError("table kernel: need n+1 knots for n values");
                   }
                   if (t.knots[0] != 0.0) throw ConfigError("table kernel: first knot must be 0");
                   for (std::size_t i = 0; i + 1 < t.knots.size(); ++i) {
                     if (!(t.knots[i] < t.knots[i + 1]) || !std::isfinite(t.knots[i + 1])) {
                       throw ConfigError("table kernel: knots must be finite and increasing");
                     }
                     if (!(t.values[i] >= 0.0) || !std::isfinite(t.values[i])) {
                       throw ConfigError("table kernel: values must be finite and >= 0");
                     }
                   }
                 },
             },
             s);
}

double shape_h(const FertilityShape& s, double t) {
  if (t < 0.0) return 0.0;
  return std::visit(Overloaded{
                        [&](const ExponentialShape& e) { return e.beta * std::exp(-e.gamma * t); },
                        [&](const PolynomialShape& p) {
                          if (t >= p.support) return 0.0;
                          return p.beta * std::pow(1.0 - t / p.support, static_cast<double>(p.degree));
                        },
                        [&](const TableShape& tb) {
                          auto it = std::upper_bound(tb.knots.begin(), tb.knots.end(), t);
                          if (it == tb.knots.end()) return 0.0;
                          return tb.values[static_cast<std::size_t>(it - tb.knots.begin()) - 1];
                        },
                    },
                    s);
}

double shape_nu(const FertilityShape& s, double t) {
  if (t <= 0.0) return 0.0;
  return std::visit(Overloaded{
                        [&](const ExponentialShape& e) { return e.beta / e.gamma * -std::expm1(-e.gamma * t); },
                        [&](const PolynomialShape& p) {
                          const double k1 = static_cast<double>(p.degree) + 1.0;
                          const double x = std::min(t, p.support) / p.support;
                          const double frac = x >= 1.0 ? 1.0 : -std::expm1(k1 * std::log1p(-x));
                          return p.beta * p.support / k1 * frac;
                        },
                        [&](const TableShape& tb) {
                          double m = 0.0;
                          for (std::size_t i = 0; i < tb.values.size(); ++i) {
                            const double lo = tb.knots[i];
                            if (t <= lo) break;
                            m += tb.values[i] * (std::min(t, tb.knots[i + 1]) - lo);
                          }
                          return m;
                        },
                    },
                    s);
}

double shape_nu_inf(const FertilityShape& s) {
  return std::visit(Overloaded{
                        [](const ExponentialShape& e) { return e.beta / e.gamma; },
                        [](const PolynomialShape& p) {
                          return p.beta * p.support / (static_cast<double>(p.degree) + 1.0);
                        },
                        [](const TableShape& tb) { return shape_nu(tb, tb.knots.back()); },
                    },
                    s);
}

}  // namespace

FertilityKernel::FertilityKernel(std::vector<MarkComponent> components) : comps_(std::move(components)) {
  if (comps_.empty()) throw ConfigError("fertility kernel: need at least one mark component");
  double wsum = 0.0;
  for (const auto& c : comps_) {
    if (!(c.weight > 0.0) || !std::isfinite(c.weight)) throw ConfigError("fertility kernel: weights must be > 0");
    validate_shape(c.shape);
    wsum += c.weight;
  }
  for (auto& c : comps_) {
    c.weight /= wsum;
    nu_inf_.push_back(shape_nu_inf(c.shape));
    rho_ += c.weight * nu_inf_.back();
  }
  if (!(rho_ < 1.0)) {
    throw ConfigError("fertility kernel: branching ratio rho = " + std::to_string(rho_) +
                      " must be < 1 (subcriticality)");
  }
}

FertilityKernel FertilityKernel::exponential(double beta, double gamma) {
  return FertilityKernel({MarkComponent{1.0, ExponentialShape{beta, gamma}}});
}

FertilityKernel FertilityKernel::uniform(double height, double support) {
  return FertilityKernel({MarkComponent{1.0, PolynomialShape{height, support, 0}}});
}

FertilityKernel FertilityKernel::none() { return uniform(0.0, 1.0); }

double FertilityKernel::h(double t, std::size_t j) const { return shape_h(comps_.at(j).shape, t); }

double FertilityKernel::nu(double t, std::size_t j) const { return shape_nu(comps_.at(j).shape, t); }

double FertilityKernel::nu_inf(std::size_t j) const { return nu_inf_.at(j); }

double FertilityKernel::nu_tail(double t, std::size_t j) const {
  if (t <= 0.0) return nu_inf_.at(j);
  return std::visit(Overloaded{
                        [&](const ExponentialShape& e) { return e.beta / e.gamma * std::exp(-e.gamma * t); },
                        [&](const PolynomialShape& p) {
                          if (t >= p.support) return 0.0;
                          const double k1 = static_cast<double>(p.degree) + 1.0;
                          return p.beta * p.support / k1 * std::pow(1.0 - t / p.support, k1);
                        },
                        [&](const TableShape& tb) {
                          double m = 0.0;
                          for (std::size_t i = tb.values.size(); i-- > 0;) {
                            const double hi = tb.knots[i + 1];
                            if (t >= hi) break;
                            m += tb.values[i] * (hi - std::max(t, tb.knots[i]));
                          }
                          return m;
                        },
                    },
                    comps_.at(j).shape);
}

double FertilityKernel::cell_mass(double a, double b, std::size_t j) const {
  a = std::max(a, 0.0);
  if (!(b > a)) return 0.0;
  return std::visit(Overloaded{
                        [&](const ExponentialShape& e) {
                          return e.beta / e.gamma * std::exp(-e.gamma * a) * -std::expm1(-e.gamma * (b - a));
                        },
                        [&](const PolynomialShape& p) {
                          if (a >= p.support) return 0.0;
                          const double bb = std::min(b, p.support);
                          // x^{k+1} - y^{k+1} = (x - y) sum_i x^i y^{k-i}, all terms positive
                          const double x = 1.0 - a / p.support, y = 1.0 - bb / p.support;
                          double sum = 0.0;
                          for (unsigned i = 0; i <= p.degree; ++i) {
                            sum += std::pow(x, static_cast<double>(i)) * std::pow(y, static_cast<double>(p.degree - i));
                          }
                          return p.beta * p.support / (static_cast<double>(p.degree) + 1.0) * ((bb - a) / p.support) * sum;
                        },
                        [&](const TableShape& tb) {
                          double m = 0.0;
                          for (std::size_t i = 0; i < tb.values.size(); ++i) {
                            const double lo = std::max(a, tb.knots[i]), hi = std::min(b, tb.knots[i + 1]);
                            if (hi > lo) m += tb.values[i] * (hi - lo);
                          }
                          return m;
                        },
                    },
                    comps_.at(j).shape);
}

double FertilityKernel::mean_h(double t) const {
  double s = 0.0;
  for (std::size_t j = 0; j < comps_.size(); ++j) s += comps_[j].weight * h(t, j);
  return s;
}

double FertilityKernel::first_moment() const {
  double m = 0.0;
  for (std::size_t j = 0; j < comps_.size(); ++j) {
    const double w = comps_[j].weight;
    m += w * std::visit(Overloaded{
                            [](const ExponentialShape& e) { return e.beta / (e.gamma * e.gamma); },
                            [](const PolynomialShape& p) {
                              const double k = static_cast<double>(p.degree);
                              return p.beta * p.support * p.support / ((k + 1.0) * (k + 2.0));
                            },
                            [](const TableShape& tb) {
                              double s = 0.0;
                              for (std::size_t i = 0; i < tb.values.size(); ++i) {
                                const double a = tb.knots[i], b = tb.knots[i + 1];
                                s += tb.values[i] * 0.5 * (b * b - a * a);
                              }
                              return s;
                            },
                        },
                        comps_[j].shape);
  }
  return m;
}

std::optional<double> FertilityKernel::support(std::size_t j) const {
  return std::visit(Overloaded{
                        [](const ExponentialShape& e) -> std::optional<double> {
                          if (e.beta == 0.0) return 0.0;
                          return std::nullopt;
                        },
                        [](const PolynomialShape& p) -> std::optional<double> { return p.support; },
                        [](const TableShape& tb) -> std::optional<double> { return tb.knots.back(); },
                    },
                    comps_.at(j).shape);
}

std::optional<double> FertilityKernel::support() const {
  double s = 0.0;
  for (std::size_t j = 0; j < comps_.size(); ++j) {
    const auto sj = support(j);
    if (!sj) return std::nullopt;
    s = std::max(s, *sj);
  }
  return s;
}

double FertilityKernel::exponential_moment(double k) const {
  double m = 0.0;
  for (std::size_t j = 0; j < comps_.size(); ++j) {
    const double w = comps_[j].weight;
    m += w * std::visit(Overloaded{
                            [&](const ExponentialShape& e) {
                              if (e.beta == 0.0) return 0.0;
                              return k < e.gamma ? e.beta / (e.gamma - k) : kInf;
                            },
                            [&](const PolynomialShape& p) {
                              if (p.beta == 0.0) return 0.0;
                              return integrate([&](double t) { return shape_h(p, t) * std::exp(k * t); }, 0.0,
                                               p.support, 1e-12);
                            },
                            [&](const TableShape& tb) {
                              double s = 0.0;
                              for (std::size_t i = 0; i < tb.values.size(); ++i) {
                                const double a = tb.knots[i], b = tb.knots[i + 1];
                                s += tb.values[i] * (k == 0.0 ? b - a : (std::exp(k * b) - std::exp(k * a)) / k);
                              }
                              return s;
                            },
                        },
                        comps_[j].shape);
  }
  return m;
}

double FertilityKernel::growth_rate() const {
  if (rho_ == 0.0) return kInf;
  double hi = kInf;
  for (const auto& c : comps_) {
    if (auto* e = std::get_if<ExponentialShape>(&c.shape); e && e->beta > 0.0) hi = std::min(hi, e->gamma);
  }
  if (!std::isfinite(hi)) {
    hi = 1.0;
    while (exponential_moment(hi) < 1.0) hi *= 2.0;
  }
  double lo = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (exponential_moment(mid) < 1.0 ? lo : hi) = mid;
  }
  return lo;
}

std::size_t FertilityKernel::sample_mark(RngStream& rng) const {
  if (comps_.size() == 1) return 0;
  double u = rng.uniform();
  for (std::size_t j = 0; j + 1 < comps_.size(); ++j) {
    if (u < comps_[j].weight) return j;
    u -= comps_[j].weight;
  }
  return comps_.size() - 1;
}

double FertilityKernel::sample_offset(std::size_t j, RngStream& rng) const {
  return std::visit(Overloaded{
                        [&](const ExponentialShape& e) { return rng.exponential(e.gamma); },
                        [&](const PolynomialShape& p) {
                          const double v = rng.uniform_pos();
                          return p.support * -std::expm1(std::log(v) / (static_cast<double>(p.degree) + 1.0));
                        },
                        [&](const TableShape& tb) {
                          double u = rng.uniform() * nu_inf_[j];
                          for (std::size_t i = 0; i < tb.values.size(); ++i) {
                            const double m = tb.values[i] * (tb.knots[i + 1] - tb.knots[i]);
                            if (u < m || i + 1 == tb.values.size()) {
                              return rng.uniform(tb.knots[i], tb.knots[i + 1]);
                            }
                            u -= m;
                          }
                          return 0.0;
                        },
                    },
                    comps_[j].shape);
}

struct PhiOperator::Component {
  double weight = 0.0;
  std::vector<double> rest;   // nu_tail at each node
  bool recursion = false;
  double h0 = 0.0;            // first cell mass (recursion)
  double decay = 0.0;         // e^{-gamma step} (recursion)
  std::vector<double> cells;  // H_k = int over [k step, (k+1) step)
  bool use_fft = false;
  bool parallel = false;
  std::unique_ptr<FftConvolver> fft;
};

PhiOperator::PhiOperator(const FertilityKernel& kernel, double step, std::size_t nodes, ConvMethod method)
    : kernel_(kernel), step_(step), nodes_(nodes), method_(method) {
  if (!(step > 0.0) || !std::isfinite(step)) throw ConfigError("phi: grid step must be positive");
  if (nodes < 1) throw ConfigError("phi: need at least one node");
  const std::size_t ncells = nodes - 1;
  for (std::size_t j = 0; j < kernel.components(); ++j) {
    auto c = std::make_unique<Component>();
    c->weight = kernel.weight(j);
    c->rest.resize(nodes);
    for (std::size_t i = 0; i < nodes; ++i) c->rest[i] = kernel.nu_tail(step * static_cast<double>(i), j);
    const auto* e = std::get_if<ExponentialShape>(&kernel.shape(j));
    if (e && method != ConvMethod::serial) {
      c->recursion = true;
      c->h0 = kernel.cell_mass(0.0, step, j);
      c->decay = std::exp(-e->gamma * step);
    } else if (ncells > 0) {
      std::size_t len = ncells;
      if (auto s = kernel.support(j)) {
        len = std::min(ncells, static_cast<std::size_t>(std::ceil(*s / step)) + 1);
      }
      c->cells.resize(len);
      for (std::size_t k = 0; k < len; ++k) {
        const double a = step * static_cast<double>(k);
        c->cells[k] = kernel.cell_mass(a, a + step, j);
      }
      const bool big = len > 64 && static_cast<double>(len) * static_cast<double>(ncells) > 4e6;
      c->use_fft = method == ConvMethod::fft || (method == ConvMethod::automatic && big);
      c->parallel = method == ConvMethod::parallel || method == ConvMethod::automatic;
      if (c->use_fft) c->fft = std::make_unique<FftConvolver>(c->cells, ncells);
    }
    comps_.push_back(std::move(c));
  }
}

PhiOperator::~PhiOperator() = default;

std::vector<double> PhiOperator::apply_tail(std::span<const double> q, Rounding r, double tol) {
  if (q.size() != nodes_) throw ConfigError("phi: grid function has the wrong length");
  for (double v : q) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("phi: grid function must take values in [0, 1]");
  }
  const std::size_t ncells = nodes_ - 1;
  std::vector<double> m(ncells);
  double tv = 0.0;
  for (std::size_t c = 0; c < ncells; ++c) {
    const double x = q[c], y = q[c + 1];
    tv += std::abs(y - x);
    switch (r) {
      case Rounding::down:
        m[c] = std::max(x, y);
        break;
      case Rounding::up:
        m[c] = std::min(x, y);
        break;
      case Rounding::nearest:
        m[c] = 0.5 * (x + y);
        break;
    }
  }
  if (r == Rounding::nearest && std::isfinite(tol)) {
    double hmax = 0.0;
    for (const auto& c : comps_) {
      if (c->recursion) hmax = std::max(hmax, c->h0);
      for (double v : c->cells) hmax = std::max(hmax, v);
    }
    if (0.5 * hmax * tv > tol) throw SamplingError("grid too coarse");
  }

  // D_j(i) = nu_tail(tau_i) + sum_k H_k m_{i-1-k}: sums of nonnegative terms,
  // so the computed value carries a small relative error.
  std::vector<double> out(nodes_, 0.0);
  std::vector<double> extra(nodes_, 0.0);
  std::vector<double> conv(nodes_);
  for (const auto& c : comps_) {
    if (c->recursion) {
      conv[0] = 0.0;
      for (std::size_t i = 0; i < ncells; ++i) conv[i + 1] = c->h0 * m[i] + c->decay * conv[i];
    } else if (c->cells.empty()) {
      std::fill(conv.begin(), conv.end(), 0.0);
    } else if (c->use_fft) {
      c->fft->apply(m, conv);
      const double b = c->fft->last_error_bound();
      for (auto& e : extra) e += c->weight * b;
    } else {
      causal_convolution_direct(c->cells, m, conv, c->parallel);
    }
    for (std::size_t i = 0; i < nodes_; ++i) {
      const double d = std::max(0.0, c->rest[i] + conv[i]);
      out[i] += c->weight * -std::expm1(-d);
    }
  }
  for (std::size_t i = 0; i < nodes_; ++i) {
    const double rel = (4.0 * static_cast<double>(i) + 32.0) * kUnit;
    double v = out[i];
    if (r == Rounding::down) v = v * (1.0 + rel) + extra[i];
    if (r == Rounding::up) v = v * (1.0 - rel) - extra[i];
    out[i] = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

std::vector<double> PhiOperator::apply(std::span<const double> f, Rounding r, double tol) {
  std::vector<double> q(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!(f[i] >= 0.0 && f[i] <= 1.0)) throw ConfigError("phi: grid function must take values in [0, 1]");
    q[i] = 1.0 - f[i];
  }
  auto out = apply_tail(q, r, tol);
  // 1 - f and 1 - tail each cost at most one rounding.
  const double pad = r == Rounding::down ? -4.0 * kUnit : r == Rounding::up ? 4.0 * kUnit : 0.0;
  for (auto& v : out) v = std::clamp(1.0 - v + pad, 0.0, 1.0);
  return out;
}

std::vector<double> phi_apply(const FertilityKernel& kernel, std::span<const double> f, double step,
                              Rounding r, ConvMethod method) {
  PhiOperator op(kernel, step, f.size(), method);
  return op.apply(f, r);
}

double BoundPair::ell_at(double t) const {
  if (t <= 0.0) return ell.front();
  const auto j = static_cast<std::size_t>(std::ceil(t / step));
  if (j >= nodes()) return 0.0;
  return ell[j];
}

double BoundPair::u_at(double t) const {
  if (t <= 0.0) return u.front();
  const auto j = std::min(static_cast<std::size_t>(std::floor(t / step)), nodes() - 1);
  return u[j];
}

double BoundPair::gap() const {
  double g = 0.0;
  for (std::size_t i = 0; i < nodes(); ++i) g = std::max(g, u[i] - ell[i]);
  return g;
}

double Envelope::tail(double t) const {
  if (t < 0.0) return 1.0;
  return std::min(1.0, c * std::exp(-delta * t));
}

namespace {

std::vector<double> envelope_nodes(const std::function<double(double)>& g_tail, double step, std::size_t nodes) {
  std::vector<double> u(nodes);
  double run = 1.0;
  for (std::size_t i = 0; i < nodes; ++i) {
    const double v = g_tail(step * static_cast<double>(i));
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("envelope G must be a CDF with values in [0, 1]");
    run = std::min(run, v);
    u[i] = run;
  }
  return u;
}

// One sandwich step with the monotone clean-up; returns the largest move.
double step_bounds(PhiOperator& op, BoundPair& bp, double* res_lower, double* res_upper) {
  const auto nu = op.apply_tail(bp.u, Rounding::down);
  const auto nl = op.apply_tail(bp.ell, Rounding::up);
  const std::size_t n = bp.nodes();
  if (res_lower) {
    *res_lower = 0.0;
    *res_upper = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      *res_lower = std::max(*res_lower, std::abs(nu[i] - bp.u[i]));
      *res_upper = std::max(*res_upper, std::abs(nl[i] - bp.ell[i]));
    }
  }
  double change = 0.0;
  double run = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    run = std::min({run, nu[i], bp.u[i]});
    change = std::max(change, bp.u[i] - run);
    bp.u[i] = run;
  }
  run = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    run = std::max({run, nl[i], bp.ell[i]});
    change = std::max(change, run - bp.ell[i]);
    bp.ell[i] = run;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (bp.ell[i] > bp.u[i]) throw Error("sandwich bounds crossed at node " + std::to_string(i));
  }
  ++bp.iteration;
  return change;
}

SandwichResult iterate_sandwich(PhiOperator& op, BoundPair bp, const SandwichOptions& opts) {
  SandwichResult res;
  res.gaps.push_back(bp.gap());
  if (opts.keep_history) res.history.push_back(bp);
  res.max_nudge = (4.0 * static_cast<double>(bp.nodes()) + 32.0) * kUnit;
  bool reached = opts.tol > 0.0 && res.gaps.back() <= opts.tol;
  for (int n = 0; n < opts.n_max && !reached; ++n) {
    double rl = 0.0, ru = 0.0;
    const bool first = n == 0;
    const double change = step_bounds(op, bp, first ? &rl : nullptr, first ? &ru : nullptr);
    if (first) {
      res.residual_lower = rl;
      res.residual_upper = ru;
    }
    res.gaps.push_back(bp.gap());
    if (opts.keep_history) res.history.push_back(bp);
    if (opts.tol > 0.0) {
      reached = res.gaps.back() <= opts.tol;
    } else if (change <= opts.conv_tol) {
      break;
    }
  }
  if (opts.tol > 0.0 && !reached) {
    throw SamplingError("sandwich did not reach tolerance: gap " + std::to_string(res.gaps.back()) +
                        " after " + std::to_string(bp.iteration) + " iterations");
  }
  res.bounds = std::move(bp);
  return res;
}

}  // namespace

bool envelope_brackets(const FertilityKernel& kernel, const std::function<double(double)>& g_tail,
                       double step, std::size_t nodes, ConvMethod method) {
  const auto u0 = envelope_nodes(g_tail, step, nodes);
  PhiOperator op(kernel, step, nodes, method);
  const auto pu = op.apply_tail(u0, Rounding::down);
  for (std::size_t i = 0; i < nodes; ++i) {
    if (pu[i] > u0[i]) return false;
  }
  return true;
}

SandwichResult build_sandwich(const FertilityKernel& kernel, const std::function<double(double)>& g_tail,
                              double step, std::size_t nodes, const SandwichOptions& opts) {
  BoundPair bp;
  bp.step = step;
  bp.u = envelope_nodes(g_tail, step, nodes);
  bp.ell.assign(nodes, 0.0);
  PhiOperator op(kernel, step, nodes, opts.method);
  const auto pu = op.apply_tail(bp.u, Rounding::down);
  for (std::size_t i = 0; i < nodes; ++i) {
    if (pu[i] > bp.u[i]) {
      throw ConfigError("supplied G does not bracket the fixed point (node " + std::to_string(i) + ")");
    }
  }
  return iterate_sandwich(op, std::move(bp), opts);
}

SandwichResult refine_sandwich(const FertilityKernel& kernel, BoundPair start, const SandwichOptions& opts) {
  PhiOperator op(kernel, start.step, start.nodes(), opts.method);
  return iterate_sandwich(op, std::move(start), opts);
}

EnvelopeChoice choose_envelope(const FertilityKernel& kernel, double intensity_bound, std::size_t cells,
                               double truncation, ConvMethod method) {
  if (cells == 0) throw ConfigError("envelope: need at least one cell");
  if (kernel.is_zero()) return {Envelope{0.0, 1.0}, 1.0, cells};
  const double kappa = kernel.growth_rate();
  const double mu = std::max(intensity_bound, 1.0);
  for (double frac : {0.9, 0.75, 0.5, 0.25, 0.1}) {
    const double delta = frac * kappa;
    for (double c = 1.0; c <= 0x1.0p30; c *= 2.0) {
      const double t_max = std::max(std::log(mu * c / (delta * truncation)) / delta, 1e-6);
      const Envelope env{c, delta};
      if (envelope_brackets(kernel, [&](double t) { return env.tail(t); }, t_max / static_cast<double>(cells),
                            cells + 1, method)) {
        return {env, t_max, cells};
      }
    }
  }
  throw ConfigError("no default envelope brackets the fixed point; supply one");
}

double GWCluster::extinction() const {
  return *std::max_element(times.begin(), times.end()) - ancestor;
}

GWCluster sample_gw_cluster(const FertilityKernel& kernel, double ancestor, RngStream& rng,
                            std::size_t point_cap) {
  GWCluster c;
  c.ancestor = ancestor;
  c.times.push_back(ancestor);
  c.generation.push_back(0);
  c.parent.push_back(-1);
  c.marks.push_back(kernel.sample_mark(rng));
  for (std::size_t i = 0; i < c.times.size(); ++i) {
    const std::size_t j = c.marks[i];
    const auto n = rng.poisson(kernel.nu_inf(j));
    if (c.times.size() + n > point_cap) {
      throw SamplingError("cluster point cap exceeded (" + std::to_string(point_cap) +
                          "); the process may be near-critical");
    }
    for (std::uint64_t k = 0; k < n; ++k) {
      c.times.push_back(c.times[i] + kernel.sample_offset(j, rng));
      c.generation.push_back(c.generation[i] + 1);
      c.parent.push_back(static_cast<std::int64_t>(i));
      c.marks.push_back(kernel.sample_mark(rng));
    }
  }
  return c;
}

ImmigrantIntensity ImmigrantIntensity::constant(double mu) {
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw ConfigError("immigrant rate must be finite and >= 0");
  return {[mu](double) { return mu; }, mu};
}

MRSampler::MRSampler(FertilityKernel kernel, ImmigrantIntensity mu, double a, MROptions opts)
    : kernel_(std::move(kernel)), mu_(std::move(mu)), a_(a), opts_(std::move(opts)) {
  if (!(a_ > 0.0) || !std::isfinite(a_)) throw ConfigError("window length a must be positive");
  if (!mu_.rate || !(mu_.bound >= 0.0) || !std::isfinite(mu_.bound)) {
    throw ConfigError("immigrant intensity needs a rate and a finite bound");
  }
  const std::size_t cells = opts_.base_cells;
  if (cells == 0 || (cells & (cells - 1)) != 0) throw ConfigError("base_cells must be a power of two");
  if (opts_.envelope) {
    envelope_ = *opts_.envelope;
    if (!(envelope_.c >= 0.0) || !(envelope_.delta > 0.0)) throw ConfigError("envelope needs c >= 0, delta > 0");
    const double mu_bar = std::max(mu_.bound, 1.0);
    t_max_ = envelope_.c > 0.0
                 ? std::max(std::log(mu_bar * envelope_.c / (envelope_.delta * opts_.truncation)) / envelope_.delta, 1e-6)
                 : 1.0;
    const Envelope env = envelope_;
    if (!envelope_brackets(kernel_, [env](double t) { return env.tail(t); }, t_max_ / static_cast<double>(cells),
                           cells + 1, opts_.method)) {
      throw ConfigError("supplied G does not bracket the fixed point");
    }
  } else {
    const auto choice = choose_envelope(kernel_, mu_.bound, cells, opts_.truncation, opts_.method);
    envelope_ = choice.envelope;
    t_max_ = choice.t_max;
  }
  cells0_ = cells;
  step0_ = t_max_ / static_cast<double>(cells);
  dominating_.resize(cells);
  double run = 1.0;
  for (std::size_t j = 0; j < cells; ++j) {
    run = std::min(run, envelope_.tail(step0_ * static_cast<double>(j)));
    dominating_[j] = run;
  }
}

std::shared_ptr<const BoundPair> MRSampler::bounds(int level, std::size_t extent_cells) const {
  if (level < 0 || extent_cells == 0 || extent_cells > cells0_ || (extent_cells & (extent_cells - 1)) != 0) {
    throw ConfigError("bounds: invalid ladder coordinates");
  }
  std::lock_guard<std::mutex> lock(mutex_);
  std::function<std::shared_ptr<const BoundPair>(int, std::size_t)> get =
      [&](int lv, std::size_t ext) -> std::shared_ptr<const BoundPair> {
    const auto key = std::make_pair(lv, ext);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    std::shared_ptr<const BoundPair> out;
    if (lv == 0 && ext == cells0_) {
      SandwichOptions so;
      so.method = opts_.method;
      so.n_max = 2000;
      const Envelope env = envelope_;
      auto res = build_sandwich(kernel_, [env](double t) { return env.tail(t); }, step0_, cells0_ + 1, so);
      out = std::make_shared<const BoundPair>(std::move(res.bounds));
    } else if (lv == 0) {
      const auto full = get(0, cells0_);
      BoundPair bp;
      bp.step = full->step;
      bp.iteration = full->iteration;
      bp.ell.assign(full->ell.begin(), full->ell.begin() + static_cast<std::ptrdiff_t>(ext + 1));
      bp.u.assign(full->u.begin(), full->u.begin() + static_cast<std::ptrdiff_t>(ext + 1));
      out = std::make_shared<const BoundPair>(std::move(bp));
    } else {
      const std::size_t cells = ext << lv;
      if (cells + 1 > opts_.max_nodes || lv > opts_.max_level) {
        throw SamplingError("sandwich refinement exceeds the work cap");
      }
      const auto coarse = get(lv - 1, ext);
      BoundPair bp;
      bp.step = coarse->step / 2.0;
      const std::size_t n = coarse->nodes();
      bp.ell.resize(2 * n - 1);
      bp.u.resize(2 * n - 1);
      for (std::size_t i = 0; i < n; ++i) {
        bp.ell[2 * i] = coarse->ell[i];
        bp.u[2 * i] = coarse->u[i];
        if (i + 1 < n) {
          bp.ell[2 * i + 1] = coarse->ell[i + 1];
          bp.u[2 * i + 1] = coarse->u[i];
        }
      }
      SandwichOptions so;
      so.method = opts_.method;
      so.n_max = 2000;
      so.conv_tol = std::max(1e-14, 1e-4 * bp.gap());
      auto res = refine_sandwich(kernel_, std::move(bp), so);
      out = std::make_shared<const BoundPair>(std::move(res.bounds));
    }
    cache_.emplace(key, out);
    return out;
  };
  return get(level, extent_cells);
}

MRRun MRSampler::run(RngStream& rng) const {
  MRRun res;
  res.pattern = PointPattern(1);
  auto base_anc = rng.fork();
  auto base_imm = rng.fork();
  const double mu_bar = mu_.bound;
  auto mu_at = [&](double s) {
    const double v = mu_.rate(s);
    if (!(v >= 0.0) || v > mu_bar) throw SamplingError("dominating bound violated");
    return v;
  };

  std::vector<double> immigrants;
  if (mu_bar > 0.0) {
    for (double s = rng.exponential(mu_bar); s <= a_; s += rng.exponential(mu_bar)) {
      if (rng.uniform() * mu_bar < mu_at(s)) immigrants.push_back(s);
    }
  }
  res.immigrants = immigrants.size();

  // Pre-window ancestors at reversed time t, dominated by (1 - g_j) mu_bar.
  std::vector<double> vs;
  if (mu_bar > 0.0 && !kernel_.is_zero()) {
    for (std::size_t j = 0; j < cells0_; ++j) {
      const double d = dominating_[j];
      if (d <= 0.0) continue;
      const auto n = rng.poisson(mu_bar * d * step0_);
      std::vector<double> ts(n);
      for (auto& t : ts) t = step0_ * (static_cast<double>(j) + rng.uniform());
      std::sort(ts.begin(), ts.end());
      for (double t : ts) {
        const double y = rng.uniform() * mu_bar * d;
        const double m = mu_at(-t);
        if (y < d * m) {
          res.ancestors.push_back(t);
          vs.push_back(y / m);
        }
      }
    }
  }

  // Classification on the ladder.
  std::vector<int> state(res.ancestors.size(), 0);  // 0 open, 1 retained, -1 rejected
  res.levels.assign(res.ancestors.size(), 0);
  std::vector<std::size_t> open(res.ancestors.size());
  for (std::size_t i = 0; i < open.size(); ++i) open[i] = i;
  for (int level = 0; !open.empty(); ++level) {
    std::vector<std::size_t> next;
    for (std::size_t i : open) {
      const double t = res.ancestors[i];
      std::size_t ext = 1;
      while (static_cast<double>(ext) * step0_ < t && ext < cells0_) ext *= 2;
      std::shared_ptr<const BoundPair> bp;
      try {
        bp = bounds(level, ext);
      } catch (const SamplingError& e) {
        std::string pts;
        for (std::size_t k : open) {
          pts += " (t=" + std::to_string(res.ancestors[k]) + ", v=" + std::to_string(vs[k]) + ")";
        }
        throw SamplingError(std::string(e.what()) + " at level " + std::to_string(level) +
                            "; unclassified points:" + pts);
      }
      if (vs[i] < bp->ell_at(t)) {
        state[i] = 1;
      } else if (vs[i] >= bp->u_at(t)) {
        state[i] = -1;
      } else {
        next.push_back(i);
        continue;
      }
      res.levels[i] = level;
    }
    open = std::move(next);
  }
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (state[i] == 1) res.retained.push_back(res.ancestors[i]);
  }

  // Clusters: retained ancestors conditioned on reaching [0, inf), immigrants unconditioned.
  const std::size_t nr = res.retained.size();
  const std::size_t ni = immigrants.size();
  std::vector<std::vector<double>> parts(nr + ni);
  std::vector<std::uint64_t> attempts(nr, 0);
  parallel_for(nr + ni, [&](std::size_t k) {
    std::vector<double>& dst = parts[k];
    if (k < nr) {
      auto s = base_anc.split(k);
      const double t = res.retained[k];
      while (true) {
        if (++attempts[k] > opts_.max_attempts) {
          throw SamplingError("conditioned cluster: no hit after " + std::to_string(opts_.max_attempts) + " attempts");
        }
        const auto c = sample_gw_cluster(kernel_, -t, s, opts_.point_cap);
        if (c.extinction() >= t) {
          for (double x : c.times) {
            if (x >= 0.0 && x <= a_) dst.push_back(x);
          }
          break;
        }
      }
    } else {
      auto s = base_imm.split(k - nr);
      const auto c = sample_gw_cluster(kernel_, immigrants[k - nr], s, opts_.point_cap);
      for (double x : c.times) {
        if (x <= a_) dst.push_back(x);
      }
    }
  });
  for (auto v : attempts) res.rejection_attempts += v;
  std::vector<double> all;
  for (auto& p : parts) all.insert(all.end(), p.begin(), p.end());
  std::sort(all.begin(), all.end());
  res.pattern.reserve(all.size());
  for (double x : all) res.pattern.push_back(x);
  return res;
}

PointPattern mr_perfect_sample(const ImmigrantIntensity& mu, const FertilityKernel& kernel, double a,
                               RngStream& rng, const MROptions& opts) {
  return MRSampler(kernel, mu, a, opts).sample(rng);
}

}  // namespace perfectsim
