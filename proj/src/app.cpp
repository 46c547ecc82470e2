#include "perfectsim/app.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/poisson.hpp>

#include "perfectsim/boolean.hpp"
#include "perfectsim/branching.hpp"
#include "perfectsim/cluster.hpp"
#include "perfectsim/germ.hpp"
#include "perfectsim/hawkes.hpp"
#include "perfectsim/io.hpp"
#include "perfectsim/oracle.hpp"
#include "perfectsim/poisson.hpp"
#include "perfectsim/quadrature.hpp"

namespace perfectsim::app {

namespace {

using nlohmann::json;

const Window& need_window(const RunConfig& cfg) {
  if (!cfg.window) throw ConfigError("window: required for sampler '" + cfg.sampler + "'");
  return *cfg.window;
}

double positive(double v, const std::string& what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(what + ": must be positive and finite");
  return v;
}

double nonnegative(double v, const std::string& what) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(what + ": must be finite and >= 0");
  return v;
}

double probability(double v, const std::string& what) {
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(what + ": must be in [0, 1]");
  return v;
}

// Two-sided z test of an estimate against a target value.
TestReport z_test(std::string name, const Estimate& e, double target, double alpha, std::uint64_t n) {
  const boost::math::normal nd;
  const double z = e.se > 0.0 ? std::abs(e.value - target) / e.se : (e.value == target ? 0.0 : INFINITY);
  const double crit = boost::math::quantile(boost::math::complement(nd, alpha / 2.0));
  const double p = std::isfinite(z) ? 2.0 * boost::math::cdf(boost::math::complement(nd, z)) : 0.0;
  return TestReport::make(std::move(name), z, crit, p, n);
}

// |a - b| against the summed 3-sigma half widths.
TestReport ci_overlap(std::string name, const Estimate& a, const Estimate& b, std::uint64_t n) {
  const boost::math::normal nd;
  const double diff = std::abs(a.value - b.value);
  const double s = std::hypot(a.se, b.se);
  const double p = s > 0.0 ? 2.0 * boost::math::cdf(boost::math::complement(nd, diff / s)) : (diff == 0.0 ? 1.0 : 0.0);
  return TestReport::make(std::move(name), diff, 3.0 * (a.se + b.se), p, n);
}

std::vector<double> counts(const std::vector<Replicate>& reps) {
  std::vector<double> c(reps.size());
  for (std::size_t i = 0; i < reps.size(); ++i) c[i] = static_cast<double>(reps[i].pattern.size());
  return c;
}

std::vector<PointPattern> patterns(const std::vector<Replicate>& reps) {
  std::vector<PointPattern> p;
  p.reserve(reps.size());
  for (const auto& r : reps) p.push_back(r.pattern);
  return p;
}

std::uint64_t oracle_seed(const RunConfig& cfg) {
  return cfg.validation.oracle_seed ? cfg.validation.oracle_seed : cfg.seed + 1;
}

// ---- parameter blocks ------------------------------------------------------

FertilityShape parse_shape(ConfigReader& r) {
  const auto type = r.string("type");
  if (type == "exponential") return ExponentialShape{r.number("beta"), r.number("gamma")};
  if (type == "uniform") return PolynomialShape{r.number("height"), r.number("support"), 0};
  if (type == "polynomial") {
    const auto deg = r.integer_or("degree", 1);
    if (deg > 64) throw ConfigError(r.path() + ".degree: at most 64");
    return PolynomialShape{r.number("beta"), r.number("support"), static_cast<unsigned>(deg)};
  }
  if (type == "table") return TableShape{r.numbers("knots"), r.numbers("values")};
  throw ConfigError(r.path() + ".type: unknown kernel family '" + type + "'");
}

FertilityKernel parse_kernel(ConfigReader r) {
  std::vector<MarkComponent> comps;
  if (r.has("components")) {
    for (auto& c : r.objects("components")) {
      MarkComponent m;
      m.weight = c.number_or("weight", 1.0);
      m.shape = parse_shape(c);
      c.finish();
      comps.push_back(std::move(m));
    }
  } else {
    comps.push_back({1.0, parse_shape(r)});
  }
  r.finish();
  try {
    return FertilityKernel(std::move(comps));
  } catch (const ConfigError& e) {
    throw ConfigError(r.path() + ": " + e.what());
  }
}

std::shared_ptr<CoxClusterKernel> parse_cox(ConfigReader r, std::size_t dim) {
  const double mean = nonnegative(r.number("mean"), r.path() + ".mean");
  auto d = r.object("displacement");
  const auto type = d.string("type");
  Displacement disp;
  if (type == "uniform_box") {
    auto lo = d.numbers("lower"), hi = d.numbers("upper");
    if (lo.size() != dim || hi.size() != dim) throw ConfigError(d.path() + ": lower/upper must match the window dimension");
    for (std::size_t k = 0; k < dim; ++k) {
      if (!(lo[k] < hi[k])) throw ConfigError(d.path() + ": lower must be < upper");
    }
    disp = UniformBoxDisplacement{lo, hi};
  } else if (type == "gaussian") {
    disp = GaussianDisplacement{positive(d.number("sigma"), d.path() + ".sigma")};
  } else {
    throw ConfigError(d.path() + ".type: unknown displacement '" + type + "'");
  }
  d.finish();
  const bool germ = r.boolean_or("includes_germ", false);
  r.finish();
  return std::make_shared<CoxClusterKernel>(dim, mean, disp, germ);
}

GridSequence parse_sequence(ConfigReader r) {
  const auto type = r.string("type");
  GridSequence s = [&] {
    if (type == "geometric") return GridSequence::geometric(r.number("p0"), r.number("ratio"));
    if (type == "table") return GridSequence::table(r.numbers("values"));
    if (type == "inverse_square") return GridSequence::inverse_square(r.number("c"));
    if (type == "z2_inverse_square") return GridSequence::z2_inverse_square(r.number("c"));
    throw ConfigError(r.path() + ".type: unknown sequence '" + type + "'");
  }();
  r.finish();
  return s;
}

// ---- samplers ----------------------------------------------------------------

class PoissonSampler final : public Sampler {
 public:
  PoissonSampler(const RunConfig& cfg) : w_(need_window(cfg)) {
    ConfigReader p(cfg.params, "params");
    rate_ = nonnegative(p.number("rate"), "params.rate");
    p.finish();
  }
  Replicate run(RngStream& rng) const override { return {sample_homogeneous(w_, rate_, rng)}; }
  double rate() const { return rate_; }
  const Window& window() const { return w_; }

 private:
  Window w_;
  double rate_ = 0.0;
};

class BrixKendallSampler final : public Sampler {
 public:
  BrixKendallSampler(const RunConfig& cfg) : w_(need_window(cfg)), germ_(IntensityMeasure::lebesgue(0.0, 1)) {
    ConfigReader p(cfg.params, "params");
    auto g = p.object("germ");
    rate_ = nonnegative(g.number("rate"), "params.germ.rate");
    g.finish();
    germ_ = IntensityMeasure::lebesgue(rate_, w_.dim());
    kernel_ = parse_cox(p.object("cluster"), w_.dim());
    if (p.has("truncation_radius")) opts_.truncation_radius = nonnegative(p.number("truncation_radius"), "params.truncation_radius");
    p.finish();
  }
  Replicate run(RngStream& rng) const override {
    auto r = brix_kendall_run(germ_, *kernel_, w_, rng, opts_);
    return {std::move(r.pattern), {{"thinned_germ", r.thinned_germ.size()}, {"attempts", r.attempts}}};
  }
  json describe() const override {
    return {{"truncation_radius", brix_kendall_truncation(germ_, *kernel_, opts_)},
            {"thinned_germ_mass", thinned_germ_mass(germ_, *kernel_, w_, opts_)}};
  }
  const Window& window() const { return w_; }
  double rate() const { return rate_; }
  const CoxClusterKernel& kernel() const { return *kernel_; }
  double oracle_buffer() const {
    if (auto r = kernel_->support_radius()) return *r;
    const auto& g = std::get<GaussianDisplacement>(kernel_->displacement());
    return 9.0 * g.sigma;
  }

 private:
  Window w_;
  IntensityMeasure germ_;
  double rate_ = 0.0;
  std::shared_ptr<CoxClusterKernel> kernel_;
  BrixKendallOptions opts_;
};

class BooleanSampler final : public Sampler {
 public:
  BooleanSampler(const RunConfig& cfg) : target_(Window::unit(2)), germ_(IntensityMeasure::lebesgue(0.0, 2)) {
    ConfigReader p(cfg.params, "params");
    rate_ = nonnegative(p.number("germ_rate"), "params.germ_rate");
    germ_ = IntensityMeasure::lebesgue(rate_, 2);
    auto g = p.object("grains");
    const auto type = g.string("type");
    if (type == "disk") {
      auto r = g.object("radius");
      const auto law = r.string("law");
      RadiusLaw rl;
      if (law == "fixed") {
        rl = RadiusLaw::fixed(r.number("value"));
      } else if (law == "exponential") {
        rl = RadiusLaw::exponential(r.number("rate"));
      } else if (law == "uniform") {
        rl = RadiusLaw::uniform(r.number("lower"), r.number("upper"));
      } else {
        throw ConfigError(r.path() + ".law: unknown radius law '" + law + "'");
      }
      r.finish();
      try {
        rl.validate();
      } catch (const ConfigError& e) {
        throw ConfigError(r.path() + ": " + e.what());
      }
      grains_ = DiskGrains{rl};
    } else if (type == "segment") {
      SegmentGrains s;
      s.length = positive(g.number("length"), g.path() + ".length");
      s.angle_lo = g.number_or("angle_lo", 0.0);
      s.angle_hi = g.number_or("angle_hi", std::numbers::pi);
      s.fattening = nonnegative(g.number_or("fattening", 0.0), g.path() + ".fattening");
      if (!(s.angle_lo < s.angle_hi)) throw ConfigError(g.path() + ": angle_lo must be < angle_hi");
      grains_ = s;
    } else if (type == "line") {
      LineGrains l;
      l.full = g.boolean_or("full", false);
      l.germ_radius = positive(g.number("germ_radius"), g.path() + ".germ_radius");
      grains_ = l;
    } else {
      throw ConfigError(g.path() + ".type: unknown grain family '" + type + "'");
    }
    g.finish();
    auto t = p.object("target");
    const auto tt = t.string("type");
    if (tt == "window") {
      const auto& w = need_window(cfg);
      if (w.dim() != 2) throw ConfigError("window: the Boolean model is planar");
      target_ = w;
    } else if (tt == "disk") {
      auto c = t.numbers("center");
      if (c.size() != 2) throw ConfigError(t.path() + ".center: expected two coordinates");
      target_ = Disk{{c[0], c[1]}, positive(t.number("radius"), t.path() + ".radius")};
    } else {
      throw ConfigError(t.path() + ".type: expected window or disk");
    }
    t.finish();
    if (std::holds_alternative<DiskGrains>(grains_) && !std::holds_alternative<Window>(target_)) {
      throw ConfigError("params.target: disk grains need a window target");
    }
    if (std::holds_alternative<LineGrains>(grains_) && !std::holds_alternative<Disk>(target_)) {
      throw ConfigError("params.target: line grains need a disk target");
    }
    p.finish();
  }
  Replicate run(RngStream& rng) const override {
    auto s = boolean_exact_sample(germ_, grains_, target_, rng);
    PointPattern out(2, mark_dim());
    for (std::size_t i = 0; i < s.germs.size(); ++i) {
      std::vector<double> m;
      std::visit(
          [&](const auto& g) {
            using G = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<G, DiskGrain>) {
              m = {g.radius};
            } else if constexpr (std::is_same_v<G, SegmentGrain>) {
              m = {g.a[0], g.a[1], g.b[0], g.b[1]};
            } else {
              m = {g.angle};
            }
          },
          s.grains[i]);
      out.push_back(s.germs.point(i), m);
    }
    return {std::move(out), {{"neglected_mass", s.neglected_mass}}};
  }
  std::size_t mark_dim() const {
    if (std::holds_alternative<DiskGrains>(grains_)) return 1;
    if (std::holds_alternative<SegmentGrains>(grains_)) return 4;
    return 1;
  }
  // Rebuilds the grains of a replicate from its pattern.
  BooleanSample rebuild(const PointPattern& p) const {
    BooleanSample s{target_, PointPattern(2), {}, 0.0};
    for (std::size_t i = 0; i < p.size(); ++i) {
      const auto x = p.point(i);
      const auto m = p.marks(i);
      s.germs.push_back(x);
      if (std::holds_alternative<DiskGrains>(grains_)) {
        s.grains.push_back(DiskGrain{{x[0], x[1]}, m[0]});
      } else if (std::holds_alternative<SegmentGrains>(grains_)) {
        s.grains.push_back(SegmentGrain{{m[0], m[1]}, {m[2], m[3]}, std::get<SegmentGrains>(grains_).fattening});
      } else {
        s.grains.push_back(LineGrain{{x[0], x[1]}, m[0], std::get<LineGrains>(grains_).full});
      }
    }
    return s;
  }
  const Target& target() const { return target_; }
  const GrainDistribution& grains() const { return grains_; }
  double rate() const { return rate_; }

 private:
  Target target_;
  IntensityMeasure germ_;
  GrainDistribution grains_;
  double rate_ = 0.0;
};

class GridSampler final : public Sampler {
 public:
  GridSampler(const RunConfig& cfg) : spec_{GridSequence::table({}), std::nullopt} {
    ConfigReader p(cfg.params, "params");
    auto s = p.object("sequence");
    z2_ = s.has("type") && cfg.params.at("sequence").at("type") == "z2_inverse_square";
    spec_.p = parse_sequence(s);
    if (p.has("dominating")) spec_.q = parse_sequence(p.object("dominating"));
    p.finish();
  }
  Replicate run(RngStream& rng) const override {
    const auto sites = thin_grid(spec_, rng);
    PointPattern out(z2_ ? 2 : 1);
    for (auto n : sites) {
      if (z2_) {
        const auto s = z2_site(n);
        out.push_back(std::vector<double>{static_cast<double>(s[0]), static_cast<double>(s[1])});
      } else {
        out.push_back(static_cast<double>(n));
      }
    }
    json last = sites.empty() ? json(nullptr) : json(sites.back());
    return {std::move(out), {{"last", last}}};
  }
  const GridThinningSpec& spec() const { return spec_; }

 private:
  GridThinningSpec spec_;
  bool z2_ = false;
};

class RenewalSampler final : public Sampler {
 public:
  RenewalSampler(const RunConfig& cfg) {
    ConfigReader p(cfg.params, "params");
    auto ia = p.object("interarrival");
    const auto type = ia.string("type");
    if (type == "gamma") {
      const double shape = positive(ia.number("shape"), ia.path() + ".shape");
      const double scale = positive(ia.number("scale"), ia.path() + ".scale");
      if (shape < 1.0) throw ConfigError(ia.path() + ".shape: failure rate unbounded for shape < 1");
      const boost::math::gamma_distribution<> d(shape, scale);
      spec_.hazard = [d](double t) { return t <= 0.0 ? 0.0 : std::min(boost::math::hazard(d, t), 1.0 / d.scale()); };
      spec_.bound = 1.0 / scale;
      gap_ = [shape, scale](RngStream& r) { return r.gamma(shape, scale); };
    } else if (type == "exponential") {
      const double rate = positive(ia.number("rate"), ia.path() + ".rate");
      spec_.hazard = [rate](double) { return rate; };
      spec_.bound = rate;
      gap_ = [rate](RngStream& r) { return r.exponential(rate); };
    } else {
      throw ConfigError(ia.path() + ".type: unknown interarrival law '" + type + "'");
    }
    ia.finish();
    auto rt = p.object("retention");
    const auto rtype = rt.string("type");
    if (rtype == "exponential") {
      const double a = positive(rt.number("rate"), rt.path() + ".rate");
      retain_.p = [a](double t) { return std::exp(-a * t); };
      retain_.cumulative = [a](double t) { return -std::expm1(-a * t) / a; };
      retain_.inverse_cumulative = [a](double m) { return -std::log1p(-a * m) / a; };
    } else if (rtype == "constant") {
      const double c = probability(rt.number("p"), rt.path() + ".p");
      retain_.p = [c](double) { return c; };
    } else {
      throw ConfigError(rt.path() + ".type: unknown retention '" + rtype + "'");
    }
    rt.finish();
    horizon_ = positive(p.number("horizon"), "params.horizon");
    p.finish();
  }
  Replicate run(RngStream& rng) const override { return {renewal_thin_first(spec_, retain_, horizon_, rng)}; }
  PointPattern oracle(RngStream& rng) const { return oracle::renewal_thin_after(gap_, retain_.p, horizon_, rng); }

 private:
  RenewalSpec spec_;
  RenewalRetention retain_;
  std::function<double(RngStream&)> gap_;
  double horizon_ = 0.0;
};

class MaternSampler final : public Sampler {
 public:
  MaternSampler(const RunConfig& cfg) : w_(need_window(cfg)) {
    ConfigReader p(cfg.params, "params");
    rate_ = nonnegative(p.number("rate"), "params.rate");
    radius_ = nonnegative(p.number("radius"), "params.radius");
    double c = 1.0;
    if (p.has("retention")) {
      auto rt = p.object("retention");
      if (rt.string("type") != "constant") throw ConfigError(rt.path() + ".type: only constant retention is configurable");
      c = probability(rt.number("p"), rt.path() + ".p");
      rt.finish();
    }
    p_ = [c](std::span<const double>) { return c; };
    p.finish();
  }
  Replicate run(RngStream& rng) const override {
    auto out = matern_thin_first(rate_, radius_, p_, w_, rng);
    out.sort();
    return {std::move(out)};
  }
  PointPattern oracle(RngStream& rng) const { return oracle::matern_direct(rate_, radius_, p_, w_, rng); }
  const Window& window() const { return w_; }

 private:
  Window w_;
  double rate_ = 0.0, radius_ = 0.0;
  std::function<double(std::span<const double>)> p_;
};

class NonlinearSampler final : public Sampler {
 public:
  NonlinearSampler(const RunConfig& cfg) {
    const auto& w = need_window(cfg);
    if (w.dim() != 1) throw ConfigError("window: the nonlinear Hawkes process lives on the line");
    lo_ = w.lower(0);
    hi_ = w.upper(0);
    ConfigReader p(cfg.params, "params");
    auto ph = p.object("phi");
    const auto type = ph.string("type");
    if (type == "sigmoid") {
      const double bound = positive(ph.number("bound"), ph.path() + ".bound");
      const double shift = ph.number_or("shift", 0.0), scale = positive(ph.number_or("scale", 1.0), ph.path() + ".scale");
      spec_.phi = [=](double x) { return bound / (1.0 + std::exp(-(x - shift) / scale)); };
      spec_.bound = bound;
    } else if (type == "capped_linear") {
      const double base = nonnegative(ph.number("base"), ph.path() + ".base");
      const double slope = nonnegative(ph.number_or("slope", 1.0), ph.path() + ".slope");
      const double bound = positive(ph.number("bound"), ph.path() + ".bound");
      if (base > bound) throw ConfigError(ph.path() + ": base must not exceed bound");
      spec_.phi = [=](double x) { return std::min(bound, base + slope * x); };
      spec_.bound = bound;
    } else {
      throw ConfigError(ph.path() + ".type: unknown phi '" + type + "'");
    }
    ph.finish();
    auto hk = p.object("h");
    const auto shape = parse_shape(hk);
    hk.finish();
    if (std::holds_alternative<ExponentialShape>(shape)) throw ConfigError(hk.path() + ": h must have bounded support");
    auto kernel = std::make_shared<FertilityKernel>(std::vector<MarkComponent>{{1.0, shape}});
    spec_.h = [kernel](double t) { return kernel->h(t, 0); };
    spec_.support = *kernel->support();
    spec_.search_horizon = positive(p.number_or("search_horizon", 1e6), "params.search_horizon");
    burn_in_ = positive(p.number_or("oracle_burn_in", 200.0), "params.oracle_burn_in");
    p.finish();
  }
  Replicate run(RngStream& rng) const override {
    auto r = nonlinear_hawkes_run(spec_, lo_, hi_, rng);
    return {std::move(r.pattern), {{"regeneration", r.regeneration}}};
  }
  PointPattern oracle(RngStream& rng) const { return oracle::nonlinear_hawkes_burn_in(spec_, lo_, hi_, burn_in_, rng); }

 private:
  NonlinearHawkesSpec spec_;
  double lo_ = 0.0, hi_ = 1.0, burn_in_ = 200.0;
};

class HawkesMrSampler final : public Sampler {
 public:
  HawkesMrSampler(const RunConfig& cfg) {
    ConfigReader p(cfg.params, "params");
    mu_ = nonnegative(p.number("mu"), "params.mu");
    a_ = positive(p.number("a"), "params.a");
    auto kernel = parse_kernel(p.object("kernel"));
    MROptions opts;
    if (p.has("envelope")) {
      auto e = p.object("envelope");
      opts.envelope = Envelope{nonnegative(e.number("c"), e.path() + ".c"), positive(e.number("delta"), e.path() + ".delta")};
      e.finish();
    }
    opts.base_cells = p.integer_or("base_cells", 1024);
    const auto method = p.string_or("method", "automatic");
    if (method == "automatic") {
      opts.method = ConvMethod::automatic;
    } else if (method == "serial") {
      opts.method = ConvMethod::serial;
    } else if (method == "parallel") {
      opts.method = ConvMethod::parallel;
    } else if (method == "fft") {
      opts.method = ConvMethod::fft;
    } else {
      throw ConfigError("params.method: expected automatic, serial, parallel or fft");
    }
    p.finish();
    sampler_ = std::make_unique<MRSampler>(std::move(kernel), ImmigrantIntensity::constant(mu_), a_, opts);
  }
  Replicate run(RngStream& rng) const override {
    auto r = sampler_->run(rng);
    return {std::move(r.pattern), {{"ancestors", r.ancestors.size()}, {"retained", r.retained.size()}}};
  }
  json describe() const override {
    return {{"envelope", {{"c", sampler_->envelope().c}, {"delta", sampler_->envelope().delta}}},
            {"t_max", sampler_->t_max()},
            {"base_step", sampler_->base_step()},
            {"rho", sampler_->kernel().rho()}};
  }
  const MRSampler& mr() const { return *sampler_; }
  double mu() const { return mu_; }
  double a() const { return a_; }

 private:
  double mu_ = 0.0, a_ = 0.0;
  std::unique_ptr<MRSampler> sampler_;
};

class BranchingSampler final : public Sampler {
 public:
  BranchingSampler(const RunConfig& cfg) : w_(need_window(cfg)) {
    ConfigReader p(cfg.params, "params");
    lambda0_ = nonnegative(p.number("lambda0"), "params.lambda0");
    progeny_ = parse_cox(p.object("progeny"), w_.dim());
    if (progeny_->includes_germ()) throw ConfigError("params.progeny.includes_germ: progeny cannot include its parent");
    const double mass = *progeny_->mean_mass();
    if (!(mass < 1.0)) throw ConfigError("params.progeny.mean: |nu_alpha| must be < 1");
    if (p.has("generations") == p.has("epsilon")) throw ConfigError("params: give exactly one of generations, epsilon");
    if (p.has("generations")) {
      n_ = p.integer("generations");
    } else {
      n_ = certificate_generations_for(positive(p.number("epsilon"), "params.epsilon"), lambda0_, mass, w_.volume());
    }
    p.finish();
  }
  Replicate run(RngStream& rng) const override {
    auto r = approx_branching_run(lambda0_, *progeny_, w_, n_, rng);
    return {std::move(r.pattern)};
  }
  json describe() const override {
    const auto c = truncation_certificate(lambda0_, *progeny_->mean_mass(), w_.volume(), n_);
    return {{"certificate", {{"n", c.n}, {"gamma", c.gamma}, {"bound", c.bound}}}};
  }
  const Window& window() const { return w_; }
  double expected_count() const {
    const double m = *progeny_->mean_mass();
    return lambda0_ * (1.0 - std::pow(m, static_cast<double>(n_ + 1))) / (1.0 - m) * w_.volume();
  }

 private:
  Window w_;
  double lambda0_ = 0.0;
  std::shared_ptr<CoxClusterKernel> progeny_;
  std::uint64_t n_ = 0;
};

// ---- validation suites -----------------------------------------------------

template <class S, class F>
std::vector<double> oracle_counts(const S& s, std::uint64_t seed, std::size_t n, F&& stat) {
  return run_replicates<double>(n, seed, [&](RngStream& rng, std::size_t) { return stat(s.oracle(rng)); });
}

double count_of(const PointPattern& p) { return static_cast<double>(p.size()); }

// Distance from the point nearest the window centre to its nearest other
// point (infinite with fewer than two points).
double centre_nn(const PointPattern& p, const Window& w) {
  if (p.size() < 2) return INFINITY;
  std::vector<double> c(w.dim());
  for (std::size_t k = 0; k < w.dim(); ++k) c[k] = 0.5 * (w.lower(k) + w.upper(k));
  auto d2 = [&](std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return s;
  };
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (d2(p.point(i), c) < d2(p.point(best), c)) best = i;
  }
  double nn = INFINITY;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i != best) nn = std::min(nn, d2(p.point(i), p.point(best)));
  }
  return std::sqrt(nn);
}

std::vector<TestReport> validate_reps(const RunConfig& cfg, const Sampler& s, const std::vector<Replicate>& reps) {
  std::vector<TestReport> out;
  const double alpha = cfg.validation.alpha;
  const std::size_t n = reps.size();
  const auto c = counts(reps);
  const auto oseed = oracle_seed(cfg);
  if (const auto* ps = dynamic_cast<const PoissonSampler*>(&s)) {
    const double lam = ps->rate() * ps->window().volume();
    out.push_back(z_test("mean count", mean_estimate(c), lam, alpha, n));
    std::vector<double> obs, exp;
    const boost::math::poisson_distribution<> pd(std::max(lam, 1e-300));
    const auto kmax = static_cast<std::size_t>(*std::max_element(c.begin(), c.end()));
    obs.assign(kmax + 2, 0.0);
    for (double v : c) obs[static_cast<std::size_t>(v)] += 1.0;
    for (std::size_t k = 0; k <= kmax; ++k) exp.push_back(static_cast<double>(n) * boost::math::pdf(pd, static_cast<double>(k)));
    exp.push_back(static_cast<double>(n) * boost::math::cdf(boost::math::complement(pd, static_cast<double>(kmax))));
    out.push_back(chi_square(obs, exp, alpha, 0, "count distribution"));
  } else if (const auto* bk = dynamic_cast<const BrixKendallSampler*>(&s)) {
    const auto& w = bk->window();
    const double target = bk->rate() * bk->kernel().mean() * w.volume();
    if (!bk->kernel().includes_germ()) out.push_back(z_test("mean count", mean_estimate(c), target, alpha, n));
    const auto& disp = bk->kernel().displacement();
    const double buf = bk->oracle_buffer();
    const auto oracle = run_replicates<PointPattern>(n, oseed, [&](RngStream& rng, std::size_t) {
      if (const auto* b = std::get_if<UniformBoxDisplacement>(&disp)) {
        return oracle::buffered_cox_box(bk->rate(), bk->kernel().mean(), b->lower, b->upper, w, buf, rng);
      }
      return oracle::buffered_thomas(bk->rate(), bk->kernel().mean(), std::get<GaussianDisplacement>(disp).sigma, w,
                                     buf, rng);
    });
    if (bk->kernel().includes_germ()) {
      out.push_back(TestReport::make("oracle skipped: germ-inclusive clusters", 0.0, 0.0, 1.0, n));
    } else {
      out.push_back(two_sample_ks(c, counts_in(oracle, w), alpha, "counts vs buffered oracle"));
      const auto pe = patterns(reps);
      const std::vector<double> cs{0.1, 1.0, 10.0};
      const auto le = empirical_laplace(pe, w, cs);
      const auto lo = empirical_laplace(oracle, w, cs);
      for (std::size_t i = 0; i < cs.size(); ++i) {
        out.push_back(ci_overlap("Laplace c=" + format_double(cs[i]), le[i], lo[i], n));
      }
    }
  } else if (const auto* bs = dynamic_cast<const BooleanSampler*>(&s)) {
    const auto& g = bs->grains();
    if (const auto* dg = std::get_if<DiskGrains>(&g)) {
      const auto& w = std::get<Window>(bs->target());
      double er2 = 0.0;
      const auto& r = dg->radius;
      switch (r.kind) {
        case RadiusLaw::Kind::fixed: er2 = r.a * r.a; break;
        case RadiusLaw::Kind::exponential: er2 = 2.0 / (r.a * r.a); break;
        case RadiusLaw::Kind::uniform: er2 = (r.a * r.a + r.a * r.b + r.b * r.b) / 3.0; break;
      }
      const double expect = -std::expm1(-bs->rate() * std::numbers::pi * er2);
      std::vector<double> frac(n);
      constexpr int kGrid = 20;
      for (std::size_t i = 0; i < n; ++i) {
        const auto sm = bs->rebuild(reps[i].pattern);
        int hit = 0;
        for (int a = 0; a < kGrid; ++a) {
          for (int b = 0; b < kGrid; ++b) {
            const double y[2] = {w.lower(0) + w.side(0) * (a + 0.5) / kGrid, w.lower(1) + w.side(1) * (b + 0.5) / kGrid};
            hit += sm.covered(y);
          }
        }
        frac[i] = hit / double(kGrid * kGrid);
      }
      out.push_back(z_test("coverage fraction", mean_estimate(frac), expect, alpha, n));
    } else if (const auto* lg = std::get_if<LineGrains>(&g)) {
      const auto& d = std::get<Disk>(bs->target());
      const double rr = lg->germ_radius;
      // Retained mass: lambda int_0^rr p(r) 2 pi r dr around the disk centre.
      const double mass = bs->rate() * integrate(
                                           [&](double r) {
                                             const double x[2] = {d.center[0] + r, d.center[1]};
                                             const double pr = lg->full ? hit_prob_full_line(x, d.radius)
                                                                        : hit_prob_poisson_line(x, d.radius);
                                             return pr * 2.0 * std::numbers::pi * r;
                                           },
                                           0.0, rr, 1e-10);
      out.push_back(z_test("retained germ count", mean_estimate(c), mass, alpha, n));
    } else {
      out.push_back(TestReport::make("no analytic target for segment grains", 0.0, 0.0, 1.0, n));
    }
  } else if (const auto* gs = dynamic_cast<const GridSampler*>(&s)) {
    // T has the law computed from p whichever sequence drives the sampler.
    const auto& seq = gs->spec().p;
    if (!seq.has_tails()) {
      out.push_back(TestReport::make("T law not computable for this sequence", 0.0, 0.0, 1.0, n));
    } else {
      std::map<std::int64_t, double> hist;
      for (const auto& r : reps) hist[r.extra["last"].is_null() ? -1 : r.extra["last"].get<std::int64_t>()] += 1.0;
      std::vector<double> obs{hist[-1]}, exp{static_cast<double>(n) * grid_empty_prob(seq)};
      double acc = exp.back();
      std::int64_t k = 0;
      while (acc < static_cast<double>(n) * (1.0 - 1e-9) && k < 100000) {
        const double e = static_cast<double>(n) * grid_last_point_pmf(seq, static_cast<std::uint64_t>(k));
        obs.push_back(hist.count(k) ? hist[k] : 0.0);
        exp.push_back(e);
        acc += e;
        ++k;
      }
      double rest = 0.0;
      for (const auto& [key, v] : hist) {
        if (key >= k) rest += v;
      }
      obs.push_back(rest);
      exp.push_back(std::max(0.0, static_cast<double>(n) - acc));
      out.push_back(chi_square(obs, exp, alpha, 0, "last retained site"));
    }
  } else if (const auto* rs = dynamic_cast<const RenewalSampler*>(&s)) {
    const auto oc = oracle_counts(*rs, oseed, n, count_of);
    out.push_back(two_sample_ks(c, oc, alpha, "retained count vs thin-after"));
    auto first = [](const PointPattern& p) { return p.empty() ? INFINITY : p.coord(0, 0); };
    std::vector<double> fe(n);
    for (std::size_t i = 0; i < n; ++i) fe[i] = first(reps[i].pattern);
    out.push_back(two_sample_ks(fe, oracle_counts(*rs, oseed, n, first), alpha, "first retained point vs thin-after"));
  } else if (const auto* ms = dynamic_cast<const MaternSampler*>(&s)) {
    out.push_back(two_sample_ks(c, oracle_counts(*ms, oseed, n, count_of), alpha, "count vs direct"));
    std::vector<double> ne(n);
    for (std::size_t i = 0; i < n; ++i) ne[i] = centre_nn(reps[i].pattern, ms->window());
    const auto& w = ms->window();
    out.push_back(two_sample_ks(ne, oracle_counts(*ms, oseed, n, [&](const PointPattern& p) { return centre_nn(p, w); }),
                                alpha, "nearest-neighbour distance vs direct"));
  } else if (const auto* ns = dynamic_cast<const NonlinearSampler*>(&s)) {
    out.push_back(two_sample_ks(c, oracle_counts(*ns, oseed, n, count_of), alpha, "count vs burn-in"));
  } else if (const auto* hs = dynamic_cast<const HawkesMrSampler*>(&s)) {
    const auto& k = hs->mr().kernel();
    out.push_back(z_test("mean count", mean_estimate(c), hs->mu() * hs->a() / (1.0 - k.rho()), alpha, n));
    double burn = 10.0;
    while (oracle::hawkes_burn_in_bias(hs->mu(), k, hs->a(), burn) > 1e-4) burn *= 1.5;
    const auto oc = run_replicates<double>(n, oseed, [&](RngStream& rng, std::size_t) {
      return count_of(oracle::hawkes_burn_in(hs->mu(), k, hs->a(), burn, rng));
    });
    out.push_back(two_sample_ks(c, oc, alpha, "count vs burn-in"));
  } else if (const auto* as = dynamic_cast<const BranchingSampler*>(&s)) {
    out.push_back(z_test("mean count", mean_estimate(c), as->expected_count(), alpha, n));
  }
  holm_correct(out, alpha);
  return out;
}

}  // namespace

std::unique_ptr<Sampler> make_sampler(const RunConfig& cfg) {
  const auto& s = cfg.sampler;
  if (s == "poisson") return std::make_unique<PoissonSampler>(cfg);
  if (s == "brix_kendall") return std::make_unique<BrixKendallSampler>(cfg);
  if (s == "boolean") return std::make_unique<BooleanSampler>(cfg);
  if (s == "grid_thinning") return std::make_unique<GridSampler>(cfg);
  if (s == "renewal") return std::make_unique<RenewalSampler>(cfg);
  if (s == "matern") return std::make_unique<MaternSampler>(cfg);
  if (s == "nonlinear_hawkes") return std::make_unique<NonlinearSampler>(cfg);
  if (s == "hawkes_mr") return std::make_unique<HawkesMrSampler>(cfg);
  if (s == "approx_branching") return std::make_unique<BranchingSampler>(cfg);
  throw ConfigError("sampler: unknown sampler '" + s + "'");
}

std::vector<Replicate> sample_replicates(const Sampler& s, std::uint64_t seed, std::size_t n, bool parallel) {
  return run_replicates<Replicate>(n, seed, [&](RngStream& rng, std::size_t) { return s.run(rng); }, parallel);
}

void write_samples(const RunConfig& cfg, const std::filesystem::path& dir) {
  const auto sampler = make_sampler(cfg);
  const auto reps = sample_replicates(*sampler, cfg.seed, cfg.replicates);
  std::filesystem::create_directories(dir);
  const int width = std::max<int>(5, static_cast<int>(std::to_string(cfg.replicates - 1).size()));
  json summary;
  summary["sampler"] = cfg.sampler;
  summary["seed"] = cfg.seed;
  summary["replicates"] = cfg.replicates;
  summary["config_hash"] = cfg.hash;
  summary["describe"] = sampler->describe();
  summary["counts"] = json::array();
  for (std::size_t i = 0; i < reps.size(); ++i) {
    std::ostringstream name;
    name << cfg.output.prefix << '_' << std::setw(width) << std::setfill('0') << i;
    if (cfg.output.csv) {
      std::ofstream f(dir / (name.str() + ".csv"), std::ios::binary);
      write_csv(f, reps[i].pattern);
      if (!f) throw Error("cannot write " + (dir / (name.str() + ".csv")).string());
    }
    if (cfg.output.json) {
      PatternMeta meta{cfg.seed, i, cfg.sampler, cfg.hash, reps[i].extra};
      std::ofstream f(dir / (name.str() + ".json"), std::ios::binary);
      f << to_json(reps[i].pattern, meta).dump(1) << '\n';
      if (!f) throw Error("cannot write " + (dir / (name.str() + ".json")).string());
    }
    summary["counts"].push_back(reps[i].pattern.size());
  }
  std::ofstream f(dir / "summary.json", std::ios::binary);
  f << summary.dump(1) << '\n';
  if (!f) throw Error("cannot write " + (dir / "summary.json").string());
}

std::vector<TestReport> validate(const RunConfig& cfg) {
  const auto sampler = make_sampler(cfg);
  const auto reps = sample_replicates(*sampler, cfg.seed, cfg.validation.replicates);
  auto out = validate_reps(cfg, *sampler, reps);
  for (auto& r : out) r.seeds = {cfg.seed, oracle_seed(cfg)};
  return out;
}

void plot_data(const RunConfig& cfg, std::string_view kind, std::ostream& out) {
  const auto sampler = make_sampler(cfg);
  auto incompatible = [&] {
    return ConfigError("plot kind '" + std::string(kind) + "' is not available for sampler '" + cfg.sampler + "'");
  };
  if (kind == "points-2d") {
    RngStream rng(cfg.seed, 0);
    const auto r = sampler->run(rng);
    if (r.pattern.dim() != 2) throw incompatible();
    PointPattern p(2);
    for (std::size_t i = 0; i < r.pattern.size(); ++i) p.push_back(r.pattern.point(i));
    write_csv(out, p);
  } else if (kind == "counts-histogram") {
    const auto reps = sample_replicates(*sampler, cfg.seed, cfg.replicates);
    std::map<std::size_t, std::size_t> h;
    for (const auto& r : reps) ++h[r.pattern.size()];
    out << "count,frequency\n";
    for (const auto& [k, v] : h) out << k << ',' << v << '\n';
  } else if (kind == "sandwich-curves") {
    const auto* hs = dynamic_cast<const HawkesMrSampler*>(sampler.get());
    if (!hs) throw incompatible();
    const auto& mr = hs->mr();
    SandwichOptions so;
    const Envelope env = mr.envelope();
    const std::size_t cells = static_cast<std::size_t>(std::llround(mr.t_max() / mr.base_step()));
    const auto bp = build_sandwich(mr.kernel(), [env](double t) { return env.tail(t); }, mr.base_step(), cells + 1, so).bounds;
    RngStream rng(oracle_seed(cfg), 0);
    auto ls = oracle::gw_extinction_times(mr.kernel(), cfg.validation.replicates, rng);
    std::sort(ls.begin(), ls.end());
    out << "t,ell,u,oracle_tail\n";
    for (std::size_t i = 0; i < bp.nodes(); ++i) {
      const double t = bp.time(i);
      const auto above = static_cast<double>(ls.end() - std::upper_bound(ls.begin(), ls.end(), t));
      out << format_double(t) << ',' << format_double(bp.ell[i]) << ',' << format_double(bp.u[i]) << ','
          << format_double(above / static_cast<double>(ls.size())) << '\n';
    }
  } else if (kind == "coverage-raster") {
    const auto* bs = dynamic_cast<const BooleanSampler*>(sampler.get());
    if (!bs) throw incompatible();
    RngStream rng(cfg.seed, 0);
    const auto sm = bs->rebuild(bs->run(rng).pattern);
    double x0, x1, y0, y1;
    if (const auto* w = std::get_if<Window>(&bs->target())) {
      x0 = w->lower(0), x1 = w->upper(0), y0 = w->lower(1), y1 = w->upper(1);
    } else {
      const auto& d = std::get<Disk>(bs->target());
      x0 = d.center[0] - d.radius, x1 = d.center[0] + d.radius, y0 = d.center[1] - d.radius, y1 = d.center[1] + d.radius;
    }
    constexpr int kRes = 100;
    out << "x,y,covered\n";
    for (int j = 0; j <= kRes; ++j) {
      for (int i = 0; i <= kRes; ++i) {
        const double y[2] = {x0 + (x1 - x0) * i / kRes, y0 + (y1 - y0) * j / kRes};
        out << format_double(y[0]) << ',' << format_double(y[1]) << ',' << (sm.covered(y) ? 1 : 0) << '\n';
      }
    }
  } else {
    throw ConfigError("unknown plot kind '" + std::string(kind) +
                      "' (expected points-2d, counts-histogram, sandwich-curves, coverage-raster)");
  }
}

}  // namespace perfectsim::app
