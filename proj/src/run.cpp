#include <akcurv/curvature.hpp>
#include <akcurv/deformation.hpp>
#include <akcurv/localization.hpp>
#include <akcurv/riemannian.hpp>
#include <akcurv/run.hpp>
#include <akcurv/toric.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

namespace akcurv::run {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

const std::vector<std::string> kTaskNames = {"curvature", "riemann", "toric", "deform", "localize", "check-all"};

// ------------------------------------------------------------ tolerances

Tolerances Tolerances::defaults() {
  Tolerances t;
  t.values = {
      {"compatibility", 1e-8},    // GH − P² = Id, HP = PᵀH, symmetry
      {"identity", 1e-10},        // identities on the analytic path; algebraic identities on both
      {"fd_constant", 50.0},      // C in C·h² for finite-difference residuals
      {"chain", 1e-12},           // deformation ODE chain at random points
      {"invariance", 1e-10},      // ρ^∇, s^∇ under deformation (analytic)
      {"nijenhuis_zero", 1e-9},   // |N| of an integrable structure
      {"localization", 1e-10},    // relative LHS/RHS mismatch
      {"projection", 1e-8},       // z_ω^T coefficients across metrics
      {"s_constant", 1e-8},       // max |s − s̄|
      {"killing", 1e-10},         // |L_X g| for the momentum identity
  };
  return t;
}

double Tolerances::get(const std::string& name) const {
  auto it = values.find(name);
  if (it == values.end()) throw std::out_of_range("unknown tolerance '" + name + "'");
  return it->second;
}

DarbouxChart ChartSpec::build(int refine) const {
  return DarbouxChart::uniform(n, z_lo, z_hi, z_points, t_lo, t_hi, t_points, t_periodic).refined(refine);
}

bool RunConfig::expects(const std::string& property) const {
  return std::find(expect.begin(), expect.end(), property) != expect.end();
}

// ------------------------------------------------------------ config parsing

namespace {

const std::vector<std::string> kExpectations = {"einstein", "extremal", "kahler", "lebrun"};

// Exact value of a variable-free expression built from + − · / and integer powers.
std::optional<Rational> exact_value(const expr::Node& node) {
  using expr::Op;
  switch (node.op) {
    case Op::Constant:
      return node.value;
    case Op::Neg: {
      auto a = exact_value(*node.lhs);
      if (!a) return std::nullopt;
      return -*a;
    }
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div: {
      auto a = exact_value(*node.lhs);
      auto b = exact_value(*node.rhs);
      if (!a || !b) return std::nullopt;
      if (node.op == Op::Add) return *a + *b;
      if (node.op == Op::Sub) return *a - *b;
      if (node.op == Op::Mul) return *a * *b;
      if (*b == 0) return std::nullopt;
      return *a / *b;
    }
    case Op::Pow: {
      auto a = exact_value(*node.lhs);
      if (!a || (*a == 0 && node.exponent < 0)) return std::nullopt;
      const Rational p = rational_pow(*a, static_cast<unsigned>(std::abs(node.exponent)));
      return node.exponent < 0 ? Rational(1) / p : p;
    }
    default:
      return std::nullopt;
  }
}

Rational rational_item(const config::Section& s, const std::string& key, std::size_t i = 0) {
  const std::string& text = s.at(key).items.at(i);
  try {
    if (auto v = exact_value(*expr::parse(text, 1).root())) return *v;
  } catch (const expr::ParseError& err) {
    s.fail_item(key, i, err.what());
  }
  s.fail_item(key, i, "expected a rational number, got '" + text + "'");
}

Rational rational_value(const config::Section& s, const std::string& key) {
  s.string(key);  // rejects lists
  return rational_item(s, key, 0);
}

std::vector<Rational> rationals(const config::Section& s, const std::string& key) {
  std::vector<Rational> out;
  const std::size_t count = s.list(key).size();
  for (std::size_t i = 0; i < count; ++i) out.push_back(rational_item(s, key, i));
  return out;
}

expr::Expression parse_entry(const config::Document& doc, const config::Section& s, const std::string& key,
                             std::size_t i, int n) {
  const config::Value& v = s.at(key);
  try {
    return expr::parse(v.items[i], n);
  } catch (const expr::ParseError& err) {
    throw config::ConfigError(doc.source(), v.item_locations[i],
                              "[" + s.name() + "] " + key + ": cannot parse '" + v.items[i] + "': " + err.what());
  }
}

toric::Polytope parse_polytope(const config::Section& s, int default_n) {
  const std::string kind = s.string("polytope", "box");
  try {
    if (kind == "interval") {
      const auto lo = s.has("lo") ? rationals(s, "lo") : std::vector<Rational>{0};
      const auto hi = s.has("hi") ? rationals(s, "hi") : std::vector<Rational>{1};
      if (lo.size() != 1 || hi.size() != 1) s.fail("lo", "an interval needs one lo and one hi");
      return toric::Polytope::interval(lo[0], hi[0]);
    }
    if (kind == "box") {
      const auto lo = s.has("lo") ? rationals(s, "lo") : std::vector<Rational>(default_n, Rational(0));
      const auto hi = s.has("hi") ? rationals(s, "hi") : std::vector<Rational>(default_n, Rational(1));
      if (lo.size() != hi.size()) s.fail("hi", "lo and hi have different lengths");
      return toric::Polytope::box(lo, hi);
    }
    if (kind == "simplex") {
      const int n = static_cast<int>(s.integer("dim", default_n));
      const Rational scale = s.has("scale") ? rational_value(s, "scale") : Rational(1);
      return toric::Polytope::simplex(n, scale);
    }
  } catch (const std::invalid_argument& e) {
    s.fail("polytope", e.what());
  }
  s.fail("polytope", "expected interval, box or simplex");
}

ChartSpec parse_chart(const config::Section& s) {
  s.require_keys({"n", "z", "z_points", "t", "t_points", "t_periodic"});
  ChartSpec c;
  c.n = static_cast<int>(s.integer("n"));
  if (c.n < 1 || c.n > 4) s.fail("n", "n must be between 1 and 4");
  if (s.has("z")) {
    const auto z = s.numbers("z");
    if (z.size() != 2 || !(z[1] > z[0])) s.fail("z", "expected lo, hi with lo < hi");
    c.z_lo = z[0];
    c.z_hi = z[1];
  }
  if (s.has("t")) {
    const auto t = s.numbers("t");
    if (t.size() != 2 || !(t[1] > t[0])) s.fail("t", "expected lo, hi with lo < hi");
    c.t_lo = t[0];
    c.t_hi = t[1];
  }
  c.z_points = static_cast<int>(s.integer("z_points", 16));
  c.t_points = static_cast<int>(s.integer("t_points", 16));
  c.t_periodic = s.boolean("t_periodic", true);
  if (c.z_points < 8) s.fail("z_points", "need at least 8 points");
  if (c.t_points < 8) s.fail("t_points", "need at least 8 points");
  return c;
}

const std::vector<std::string> kMetricKeys = {"preset",    "G",    "H",     "P",    "random", "seed", "amplitude",
                                              "terms",     "potential", "path", "label", "deformation_epsilon"};
const std::vector<std::string> kDeformKeys = {"alpha",         "beta",         "f11",         "f11_support",
                                              "h22",           "h22_support",  "epsilon",     "bump_amplitude",
                                              "bump_support",  "bump_power"};

MetricModelPtr base_metric(const config::Document& doc, const config::Section& m, const DarbouxChart& chart) {
  const int n = chart.n();
  const bool has_entries = m.has("G") || m.has("H") || m.has("P");
  int kinds = (m.has("preset") ? 1 : 0) + (has_entries ? 1 : 0) + (m.boolean("random", false) ? 1 : 0) +
              (m.has("potential") ? 1 : 0);
  if (kinds != 1) {
    throw config::ConfigError(doc.source(), m.where(),
                              "[metric] needs exactly one of preset, G/H/P entries, random = true, potential");
  }
  if (m.has("preset")) {
    try {
      return preset_metric(m.string("preset"), n);
    } catch (const std::invalid_argument& e) {
      m.fail("preset", e.what());
    }
  }
  if (m.boolean("random", false)) {
    RandomMetricSpec spec;
    spec.seed = static_cast<std::uint64_t>(m.integer("seed", 1));
    spec.amplitude = m.number("amplitude", 0.2);
    spec.terms = static_cast<int>(m.integer("terms", 2));
    try {
      return random_compatible_metric(spec, chart);
    } catch (const std::exception& e) {
      m.fail("random", e.what());
    }
  }
  if (m.has("potential")) {
    const expr::Expression u = parse_entry(doc, m, "potential", 0, n);
    if (m.list("potential").size() != 1) m.fail("potential", "expected a single expression");
    try {
      return std::make_shared<toric::PotentialMetric>(u, m.string("label", "potential"));
    } catch (const std::exception& e) {
      m.fail("potential", e.what());
    }
  }
  std::vector<std::string> G, H, P;
  auto block = [&](const std::string& key, std::vector<std::string>& out, bool required) {
    if (!m.has(key)) {
      if (required) m.fail(key, "missing");
      if (key == "P") out.assign(static_cast<std::size_t>(n) * n, "0");
      return;
    }
    const auto& items = m.list(key);
    if (static_cast<int>(items.size()) != n * n) {
      m.fail(key, "expected " + std::to_string(n * n) + " entries (row-major " + std::to_string(n) + "x" +
                      std::to_string(n) + ")");
    }
    for (std::size_t i = 0; i < items.size(); ++i) parse_entry(doc, m, key, i, n);
    out = items;
  };
  block("H", H, true);
  block("P", P, false);
  block("G", G, false);
  try {
    return ExpressionMetric::from_strings(n, G, H, P, m.string("label", "expression"));
  } catch (const std::exception& e) {
    m.fail("H", e.what());
  }
}

struct DeformSettings {
  deformation::DeformationSpec spec;
  std::vector<std::string> epsilons;  // numbers or "half-max"
};

deformation::Profile parse_profile(const config::Document& doc, const config::Section& s, const std::string& key,
                                   int variable) {
  deformation::Profile p;
  p.e = parse_entry(doc, s, key, 0, 2);
  p.variable = variable;
  if (s.has(key + "_support")) {
    const auto sup = s.numbers(key + "_support");
    if (sup.size() != 2 || !(sup[1] > sup[0])) s.fail(key + "_support", "expected lo, hi with lo < hi");
    p.support = std::make_pair(sup[0], sup[1]);
  }
  return p;
}

DeformSettings parse_deform(const config::Document& doc, const config::Section* s, MetricModelPtr base) {
  DeformSettings out;
  out.spec = deformation::DeformationSpec::defaults();
  out.spec.base = std::move(base);
  out.epsilons = {"0.01", "0.05", "half-max"};
  if (!s) return out;
  s->require_keys(kDeformKeys);
  if (s->has("alpha")) out.spec.alpha = rational_value(*s, "alpha");
  if (s->has("beta")) out.spec.beta = rational_value(*s, "beta");
  if (s->has("bump_amplitude") || s->has("bump_support") || s->has("bump_power")) {
    const Rational amp = s->has("bump_amplitude") ? rational_value(*s, "bump_amplitude")
                                                  : Rational(3, 20);
    std::vector<Rational> sup{Rational(13, 10), Rational(21, 10)};
    if (s->has("bump_support")) {
      sup = rationals(*s, "bump_support");
      if (sup.size() != 2 || !(sup[1] > sup[0])) s->fail("bump_support", "expected lo, hi with lo < hi");
    }
    const int power = static_cast<int>(s->integer("bump_power", 8));
    try {
      out.spec.f11 = deformation::bump_profile(2, 0, sup[0], sup[1], amp, power);
      out.spec.h22 = deformation::bump_profile(2, 1, sup[0], sup[1], amp, power);
    } catch (const std::invalid_argument& e) {
      s->fail("bump_power", e.what());
    }
  }
  if (s->has("f11")) out.spec.f11 = parse_profile(doc, *s, "f11", 0);
  if (s->has("h22")) out.spec.h22 = parse_profile(doc, *s, "h22", 1);
  if (s->has("epsilon")) {
    out.epsilons = s->list("epsilon");
    for (std::size_t i = 0; i < out.epsilons.size(); ++i) {
      if (out.epsilons[i] != "half-max") rational_item(*s, "epsilon", i);
    }
  }
  try {
    deformation::derive_chain(out.spec);
  } catch (const std::invalid_argument& e) {
    throw config::ConfigError(doc.source(), s->where(), "[deform] " + std::string(e.what()));
  }
  return out;
}

MetricModelPtr metric_from(const RunConfig& cfg, const DarbouxChart& chart, bool allow_deformation) {
  const config::Section* m = cfg.document.find("metric");
  if (!m) throw config::ConfigError(cfg.source, {0, 0}, "missing [metric] section");
  MetricModelPtr base = base_metric(cfg.document, *m, chart);
  if (!allow_deformation || !m->has("deformation_epsilon")) return base;
  DeformSettings d = parse_deform(cfg.document, cfg.document.find("deform"), base);
  d.spec.epsilon = m->number("deformation_epsilon");
  try {
    return deformation::build_deformation(d.spec, chart);
  } catch (const std::exception& e) {
    m->fail("deformation_epsilon", e.what());
  }
}

}  // namespace

MetricModelPtr build_metric(const RunConfig& cfg, const DarbouxChart& chart) { return metric_from(cfg, chart, true); }

RunConfig parse_run_config(const config::Document& doc) {
  RunConfig cfg;
  cfg.source = doc.source();
  cfg.document = doc;
  doc.require_sections({"chart", "metric", "run", "tolerances", "curvature", "riemann", "toric", "deform", "localize"});
  const config::Section* chart = doc.find("chart");
  if (!chart) throw config::ConfigError(doc.source(), {0, 0}, "missing [chart] section");
  cfg.chart = parse_chart(*chart);

  if (const config::Section* r = doc.find("run")) {
    r->require_keys({"tasks", "out", "expect", "h_refine"});
    if (r->has("tasks")) cfg.tasks = r->list("tasks");
    for (std::size_t i = 0; i < cfg.tasks.size(); ++i) {
      const std::string& t = cfg.tasks[i];
      if (std::find(kTaskNames.begin(), kTaskNames.end(), t) == kTaskNames.end()) {
        r->fail_item("tasks", i, "unknown task '" + t + "'");
      }
    }
    if (r->has("expect")) cfg.expect = r->list("expect");
    for (std::size_t i = 0; i < cfg.expect.size(); ++i) {
      const std::string& e = cfg.expect[i];
      if (std::find(kExpectations.begin(), kExpectations.end(), e) == kExpectations.end()) {
        r->fail_item("expect", i, "unknown property '" + e + "' (einstein, extremal, kahler, lebrun)");
      }
    }
    cfg.out = r->string("out", cfg.out);
    cfg.h_refine = static_cast<int>(r->integer("h_refine", 0));
    if (cfg.h_refine < 0 || cfg.h_refine > 4) r->fail("h_refine", "expected 0..4");
  }

  cfg.tolerances = Tolerances::defaults();
  if (const config::Section* t = doc.find("tolerances")) {
    for (const std::string& key : t->keys()) {
      if (!cfg.tolerances.values.count(key)) t->fail_key(key, "unknown tolerance");
      const double v = t->number(key);
      if (!(v >= 0.0)) t->fail(key, "tolerances must be non-negative");
      cfg.tolerances.values[key] = v;
    }
  }

  const config::Section* m = doc.find("metric");
  if (!m) throw config::ConfigError(doc.source(), {0, 0}, "missing [metric] section");
  m->require_keys(kMetricKeys);
  if (m->has("preset") && (m->has("G") || m->has("H") || m->has("P"))) {
    m->fail("preset", "a preset cannot be combined with G/H/P entries");
  }
  const std::string path = m->string("path", "analytic");
  if (path == "analytic") {
    cfg.path = Path::Analytic;
  } else if (path == "fd") {
    cfg.path = Path::FiniteDifference;
  } else {
    m->fail("path", "expected analytic or fd");
  }

  // Build everything once so that errors surface before any task runs.
  const DarbouxChart base = cfg.chart.build();
  MetricModelPtr model = metric_from(cfg, base, true);
  if (const config::Section* s = doc.find("curvature")) s->require_keys({"dump"});
  if (const config::Section* s = doc.find("riemann")) {
    s->require_keys({"momentum", "dump"});
    if (s->has("momentum")) parse_entry(doc, *s, "momentum", 0, cfg.chart.n);
  }
  if (const config::Section* s = doc.find("toric")) {
    s->require_keys({"polytope", "lo", "hi", "scale", "dim", "s", "from_metric"});
    parse_polytope(*s, cfg.chart.n);
    if (s->has("s")) {
      const auto poly_n = parse_polytope(*s, cfg.chart.n).n();
      try {
        toric::Polynomial::from_expression(parse_entry(doc, *s, "s", 0, poly_n));
      } catch (const std::invalid_argument& e) {
        s->fail("s", e.what());
      }
    }
  }
  if (const config::Section* s = doc.find("deform")) {
    parse_deform(doc, s, metric_from(cfg, base, false));
  }
  if (const config::Section* s = doc.find("localize")) {
    s->require_keys({"polytope", "lo", "hi", "scale", "dim", "X", "c", "h", "h_imag"});
    const toric::Polytope p = parse_polytope(*s, 1);
    const auto X = s->integers("X");
    if (static_cast<int>(X.size()) != p.n()) s->fail("X", "direction has the wrong dimension");
    if (s->has("c")) rational_value(*s, "c");
    if (s->has("h_imag") && s->numbers("h_imag").size() != s->numbers("h").size()) {
      s->fail("h_imag", "h and h_imag need the same length");
    }
  }
  return cfg;
}

// ------------------------------------------------------------ task plumbing

namespace {

struct Check {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  std::string relation;  // "<", ">", "==" (booleans)
  bool pass = false;
};

struct TaskResult {
  std::string task;
  std::string status = "ok";
  std::string error;
  std::vector<Check> checks;
  json info = json::object();

  void below(const std::string& name, double value, double tol) {
    checks.push_back({name, value, tol, "<", std::isfinite(value) && value < tol});
  }
  void below_or_equal(const std::string& name, double value, double tol) {
    checks.push_back({name, value, tol, "<=", std::isfinite(value) && value <= tol});
  }
  void above(const std::string& name, double value, double bound) {
    checks.push_back({name, value, bound, ">", std::isfinite(value) && value > bound});
  }
  void holds(const std::string& name, bool ok) { checks.push_back({name, ok ? 1.0 : 0.0, 1.0, "==", ok}); }
  bool pass() const {
    if (status != "ok") return false;
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
  }
};

struct Context {
  const RunConfig& cfg;
  ChartPtr chart;
  MetricModelPtr model;
  std::unique_ptr<JetProvider> provider;
  fs::path out;
  int level = 0;

  bool fd() const { return cfg.path == Path::FiniteDifference; }
  // Grid step entering FD error bounds: t axes only count for t-dependent metrics.
  double h() const {
    double m = 0.0;
    const int axes = provider->toric() ? chart->n() : chart->dim();
    for (int a = 0; a < axes; ++a) m = std::max(m, chart->axis(a).step());
    return m;
  }
  double identity_tol() const { return fd() ? cfg.tolerances.fd(h()) : cfg.tolerances.get("identity"); }
  double algebraic_tol() const { return cfg.tolerances.get("identity"); }
};

std::unique_ptr<JetProvider> make_provider(const RunConfig& cfg, MetricModelPtr model, ChartPtr chart) {
  if (cfg.path == Path::FiniteDifference) {
    return std::make_unique<FiniteDifferenceJets>(SampledMetric::sample(*model, chart));
  }
  return std::make_unique<AnalyticJets>(std::move(model), std::move(chart));
}

void dump_csv(const fs::path& path, const GridField& f, const std::vector<std::string>& names = {}) {
  std::ofstream out(path);
  out.precision(17);
  write_csv(out, f, names);
}

std::vector<std::string> two_form_names(int n) {
  std::vector<std::string> names;
  const int d = 2 * n;
  auto axis = [n](int a) { return (a < n ? "z" : "t") + std::to_string(a % n + 1); };
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < d; ++b) names.push_back("rho_" + axis(a) + axis(b));
  }
  return names;
}

double field_max_difference(const GridField& a, const GridField& b) {
  const Region region = a.valid().intersect(b.valid());
  double m = 0.0;
  const int n = a.chart().n();
  region.for_each(
      [&](std::span<const int> idx) {
        const double* x = a.at(idx);
        const double* y = b.at(idx);
        for (int c = 0; c < a.components(); ++c) m = std::max(m, std::abs(x[c] - y[c]));
      },
      a.toric() && b.toric(), n);
  return m;
}

json rational_json(const Rational& r) { return to_string(r); }

json range_json(const GridField& s) {
  double lo = INFINITY, hi = -INFINITY;
  const int n = s.chart().n();
  s.valid().for_each(
      [&](std::span<const int> idx) {
        lo = std::min(lo, s.at(idx)[0]);
        hi = std::max(hi, s.at(idx)[0]);
      },
      s.toric(), n);
  return json{{"min", lo}, {"max", hi}, {"mean", trapezoid_mean(s)}};
}

// ------------------------------------------------------------ tasks

void task_curvature(Context& ctx, TaskResult& r) {
  const JetProvider& p = *ctx.provider;
  const CompatibilityReport compat = validate_compatibility(p, ctx.cfg.tolerances.get("compatibility"));
  r.below_or_equal("compatibility.gh", compat.gh_residual, compat.tolerance);
  r.below_or_equal("compatibility.hp", compat.hp_residual, compat.tolerance);
  r.below_or_equal("compatibility.symmetry", compat.symmetry_residual, compat.tolerance);
  r.above("compatibility.min_pivot_G", compat.min_pivot_G, 0.0);
  r.above("compatibility.min_pivot_H", compat.min_pivot_H, 0.0);

  const HermitianCurvature hc = hermitian_curvature(p, Formula::General);
  const ConsistencyReport cons = scalar_consistency(p, hc);
  r.below_or_equal("scalar_consistency", cons.max_residual, ctx.identity_tol());
  if (p.toric()) {
    const HermitianCurvature ht = hermitian_curvature(p, Formula::Toric);
    r.below_or_equal("toric_formula.rho", field_max_difference(hc.rho, ht.rho), ctx.identity_tol());
    r.below_or_equal("toric_formula.s", field_max_difference(hc.s, ht.s), ctx.identity_tol());
  }
  const EinsteinReport he = hermitian_einstein_residual(p, hc);
  r.info["s"] = range_json(hc.s);
  r.info["s_stddev"] = trapezoid_stddev(hc.s);
  r.info["einstein"] = {{"mean_s", he.mean_s},
                        {"residual", he.residual},
                        {"anti_invariant", he.anti_invariant_norm},
                        {"s_variation", he.s_variation}};
  if (ctx.cfg.expects("einstein")) {
    r.below_or_equal("einstein.residual", he.residual, ctx.identity_tol());
    r.below_or_equal("einstein.s_variation", he.s_variation, ctx.identity_tol());
  }
  const config::Section* s = ctx.cfg.document.find("curvature");
  if (!s || s->boolean("dump", true)) {
    dump_csv(ctx.out / "s.csv", hc.s, {"s"});
    dump_csv(ctx.out / "rho.csv", hc.rho, two_form_names(ctx.chart->n()));
  }
}

void task_riemann(Context& ctx, TaskResult& r) {
  const JetProvider& p = *ctx.provider;
  const int n = ctx.chart->n();
  const CurvatureBundle bundle = riemann_pipeline(p);
  const HermitianCurvature hc = hermitian_curvature(p, Formula::General);
  r.below_or_equal("bianchi", bundle.bianchi, ctx.algebraic_tol());
  r.below_or_equal("metric_compatibility", bundle.nabla_g, ctx.algebraic_tol());
  const RicciRelationReport rel = ricci_relation_residual(bundle, hc);
  r.below_or_equal("ricci_relation", rel.max_residual, ctx.identity_tol());
  r.info["ricci_relation"] = {{"residual", rel.max_residual},
                              {"correction", rel.max_correction},
                              {"star_minus_nabla", rel.max_star_minus_nabla}};
  r.info["riemannian_scalar"] = range_json(bundle.scalar);
  if (n == 2) {
    r.below_or_equal("wplus_trace", bundle.max_wplus_trace, ctx.algebraic_tol());
    r.info["wplus"] = {{"lowest", range_json(bundle.lowest)},
                       {"omega_residual", bundle.omega_residual.max_abs()},
                       {"degenerate_nodes", bundle.degenerate_nodes},
                       {"omega_not_lowest", bundle.omega_not_lowest}};
  }
  const double nij = nijenhuis(p).norm.max_abs();
  r.info["nijenhuis"] = nij;
  if (ctx.cfg.expects("kahler")) {
    r.below_or_equal("kahler.nijenhuis", nij, ctx.cfg.tolerances.get("nijenhuis_zero"));
    r.below_or_equal("kahler.scalar_agreement", field_max_difference(bundle.scalar, hc.s), ctx.identity_tol());
  }
  if (ctx.cfg.expects("lebrun")) {
    if (n != 2) throw std::invalid_argument("the lebrun expectation needs a 4-dimensional chart");
    const LeBrunReport lb = lebrun_saturation_report(bundle, hc, ctx.cfg.tolerances.get("s_constant"),
                                                     ctx.fd() ? ctx.cfg.tolerances.fd(ctx.h())
                                                              : ctx.cfg.tolerances.get("identity"));
    r.below_or_equal("lebrun.s_variation", lb.s_variation, ctx.cfg.tolerances.get("s_constant"));
    r.holds("lebrun.s_negative", lb.s_negative);
    r.below_or_equal("lebrun.eigenform", lb.eigenform_residual,
                     ctx.fd() ? ctx.cfg.tolerances.fd(ctx.h()) : ctx.cfg.tolerances.get("identity"));
    r.holds("lebrun.omega_lowest", lb.omega_not_lowest == 0);
    r.info["lebrun"] = {{"s_mean", lb.s_mean},         {"s_stddev", lb.s_stddev},
                        {"degenerate_nodes", lb.degenerate_nodes}, {"degenerate_case", lb.degenerate_case}};
  }
  // Momentum identity −½ dΔf = ρ^∇(grad_ω f, ·) for a Killing potential.
  const config::Section* s = ctx.cfg.document.find("riemann");
  std::optional<expr::Expression> f;
  if (s && s->has("momentum")) {
    f = expr::parse(s->string("momentum"), n);
  } else if (p.toric()) {
    f = expr::Expression::variable(0, n);
  }
  if (f) {
    const ExpressionScalar fs(*f, ctx.chart);
    const MomentumReport mr = momentum_ricci_residual(p, hc, fs, ctx.cfg.tolerances.get("killing"));
    r.info["momentum"] = {{"function", f->str()}, {"killing", mr.killing}, {"residual", mr.max_residual}};
    if (mr.killing_ok) {
      r.below_or_equal("momentum_identity", mr.max_residual, ctx.cfg.tolerances.fd(ctx.h()));
    } else {
      r.info["momentum"]["note"] = "grad_w f is not Killing; the identity is not judged";
    }
  }
  if (!s || s->boolean("dump", true)) {
    dump_csv(ctx.out / "riemannian_scalar.csv", bundle.scalar, {"s_g"});
    if (n == 2) dump_csv(ctx.out / "wplus_lowest.csv", bundle.lowest, {"e"});
  }
}

json gram_json(const toric::FutakiGram& g, int n) {
  json rows = json::array();
  for (int i = 0; i < n; ++i) {
    json row = json::array();
    for (int j = 0; j < n; ++j) row.push_back(rational_json(g.entries[i * n + j].rational));
    rows.push_back(row);
  }
  json pivots = json::array();
  for (const auto& p : g.pivots) pivots.push_back(rational_json(p));
  return json{{"rational", rows},
              {"two_pi_power", g.entries.empty() ? -2 : g.entries[0].two_pi_power},
              {"symmetric", g.symmetric},
              {"positive_definite", g.positive_definite},
              {"pivots", pivots}};
}

void task_toric(Context& ctx, TaskResult& r) {
  const config::Section* s = ctx.cfg.document.find("toric");
  const int n = ctx.chart->n();
  const toric::Polytope polytope = s ? parse_polytope(*s, n) : toric::Polytope::box(std::vector<Rational>(n, 0),
                                                                                     std::vector<Rational>(n, 1));
  r.info["polytope"] = polytope.describe();
  const toric::FutakiGram gram = toric::futaki_gram(polytope);
  r.info["futaki_gram"] = gram_json(gram, polytope.n());
  r.holds("futaki.symmetric", gram.symmetric);
  r.holds("futaki.positive_definite", gram.positive_definite);

  if (s && s->has("s")) {
    const toric::Polynomial poly = toric::Polynomial::from_expression(expr::parse(s->string("s"), polytope.n()));
    const toric::ExactProjection proj = toric::project_affine(poly, polytope);
    json coeffs = json::array();
    for (const auto& c : proj.z.c) coeffs.push_back(rational_json(c));
    r.info["exact"] = {{"s", poly.str()},
                       {"mean", rational_json(proj.mean)},
                       {"z_constant", rational_json(proj.z.c0)},
                       {"z_coefficients", coeffs},
                       {"residual_squared", rational_json(proj.residual_squared)},
                       {"residual", proj.residual()}};
    const toric::Polynomial back = toric::Polynomial::constant(polytope.n(), proj.mean) + proj.z.polynomial();
    const toric::ExactProjection again = toric::project_affine(back, polytope);
    r.holds("projection.idempotent", again.residual_squared == 0 && again.z.c == proj.z.c && again.mean == proj.mean);
    if (ctx.cfg.expects("extremal")) r.holds("extremal.exact", proj.residual_squared == 0);
  }
  const bool from_metric = s ? s->boolean("from_metric", ctx.provider->toric()) : ctx.provider->toric();
  if (from_metric) {
    if (!ctx.provider->toric()) throw std::invalid_argument("toric projection needs a t-independent metric");
    const HermitianCurvature hc = hermitian_curvature(*ctx.provider, Formula::Toric);
    const toric::SampledProjection sp = toric::project_affine(hc.s);
    r.info["sampled"] = {{"mean", sp.mean}, {"z_constant", sp.c0}, {"z_coefficients", sp.c}, {"residual", sp.residual}};
    if (ctx.cfg.expects("extremal")) r.below_or_equal("extremal.residual", sp.residual, ctx.identity_tol());
  }
}

double parse_epsilon(const std::string& text, const deformation::AdmissibleRange& range) {
  if (text == "half-max") return 0.5 * range.epsilon_max;
  return config::evaluate_constant(text);
}

void task_deform(Context& ctx, TaskResult& r) {
  const DarbouxChart base_chart = ctx.cfg.chart.build();
  MetricModelPtr base = metric_from(ctx.cfg, base_chart, false);
  DeformSettings d = parse_deform(ctx.cfg.document, ctx.cfg.document.find("deform"), base);
  const deformation::Chain chain = deformation::derive_chain(d.spec);
  const deformation::AdmissibleRange range = deformation::admissible_epsilon(d.spec, *ctx.chart);
  r.info["admissible"] = {{"epsilon_min", range.epsilon_min},
                          {"epsilon_max", range.epsilon_max},
                          {"min_eigenvalue_U", range.min_eigenvalue_U},
                          {"U_nonnegative", range.u_nonnegative}};
  r.info["profiles"] = {{"f11", chain.f11.str()}, {"f12", chain.f12.str()}, {"f22", chain.f22.str()},
                        {"h11", chain.h11.str()}, {"h12", chain.h12.str()}, {"h22", chain.h22.str()}};
  const deformation::ChainReport cr = deformation::chain_residual(chain);
  r.info["chain"] = {{"residual", cr.max_residual}, {"max_term", cr.max_term}, {"points", cr.points}, {"exact", cr.exact}};
  r.below("chain_residual", cr.max_residual, ctx.cfg.tolerances.get("chain"));

  const std::unique_ptr<JetProvider> bp = make_provider(ctx.cfg, base, ctx.chart);
  const HermitianCurvature base_curv = hermitian_curvature(*bp, Formula::Toric);
  const toric::SampledProjection base_proj = toric::project_affine(base_curv.s);
  const double inv_tol = ctx.fd() ? ctx.cfg.tolerances.fd(ctx.h()) : ctx.cfg.tolerances.get("invariance");
  json runs = json::array();
  for (const std::string& e : d.epsilons) {
    d.spec.epsilon = parse_epsilon(e, range);
    const auto model = deformation::build_deformation(d.spec, *ctx.chart);
    const std::unique_ptr<JetProvider> dp = make_provider(ctx.cfg, model, ctx.chart);
    const deformation::InvarianceReport inv = deformation::verify_ricci_invariance(*bp, *dp);
    const HermitianCurvature dc = hermitian_curvature(*dp, Formula::Toric);
    const toric::SampledProjection proj = toric::project_affine(dc.s);
    double coeff = std::abs(proj.c0 - base_proj.c0);
    for (std::size_t i = 0; i < proj.c.size(); ++i) coeff = std::max(coeff, std::abs(proj.c[i] - base_proj.c[i]));
    std::ostringstream label;
    label.precision(17);
    label << "epsilon=" << d.spec.epsilon;
    r.below_or_equal(label.str() + ".rho", inv.rho_residual, inv_tol);
    r.below_or_equal(label.str() + ".s", inv.s_residual, inv_tol);
    r.below_or_equal(label.str() + ".projection", coeff, ctx.cfg.tolerances.get("projection"));
    if (d.spec.epsilon == 0.0) {
      r.below_or_equal(label.str() + ".nijenhuis", inv.nijenhuis, ctx.cfg.tolerances.get("nijenhuis_zero"));
    } else {
      r.above(label.str() + ".nijenhuis", inv.nijenhuis, 0.0);
    }
    runs.push_back({{"epsilon", d.spec.epsilon},
                    {"H", model->entry_strings(Block::H)},
                    {"rho_residual", inv.rho_residual},
                    {"s_residual", inv.s_residual},
                    {"s_mean", inv.s_mean},
                    {"nijenhuis", inv.nijenhuis},
                    {"nijenhuis_base", inv.nijenhuis_base},
                    {"projection_difference", coeff}});
  }
  r.info["runs"] = runs;
}

void task_localize(Context& ctx, TaskResult& r) {
  const config::Section* s = ctx.cfg.document.find("localize");
  toric::Polytope polytope = toric::Polytope::interval(0, 1);
  std::vector<long> X{1};
  Rational c = 0;
  std::vector<double> hs{0.5, 1.0, 2.0, 5.0}, him;
  if (s) {
    polytope = parse_polytope(*s, 1);
    if (s->has("X")) X = s->integers("X");
    if (s->has("c")) c = rational_value(*s, "c");
    if (s->has("h")) hs = s->numbers("h");
    if (s->has("h_imag")) him = s->numbers("h_imag");
  }
  if (static_cast<int>(X.size()) != polytope.n()) throw std::invalid_argument("direction X has the wrong dimension");
  std::vector<localization::Complex> h;
  for (std::size_t i = 0; i < hs.size(); ++i) h.emplace_back(hs[i], him.empty() ? 0.0 : him[i]);
  const localization::FixedPointData data = localization::fixed_points(polytope, X, c);
  const localization::DhReport rep =
      localization::dh_check(polytope, X, c, data, h, ctx.cfg.tolerances.get("localization"));
  json rows = json::array();
  for (const auto& row : rep.rows) {
    rows.push_back({{"h", {row.h.real(), row.h.imag()}},
                    {"lhs", {row.lhs.real(), row.lhs.imag()}},
                    {"rhs", {row.rhs.real(), row.rhs.imag()}},
                    {"relative", row.relative}});
  }
  json points = json::array();
  for (const auto& p : data.points) {
    json w = json::array();
    for (const auto& k : p.weights) w.push_back(k.str());
    points.push_back({{"momentum", rational_json(p.momentum)}, {"weights", w}});
  }
  r.info["polytope"] = polytope.describe();
  r.info["calibration_per_circle"] = rep.calibration;
  r.info["fixed_points"] = points;
  r.info["rows"] = rows;
  r.below("localization", rep.max_relative, rep.tolerance);
}

std::vector<std::string> expand_tasks(const RunConfig& cfg, const std::vector<std::string>& requested) {
  std::vector<std::string> out;
  for (const std::string& t : requested) {
    if (t != "check-all") {
      out.push_back(t);
      continue;
    }
    out.push_back("curvature");
    out.push_back("riemann");
    if (cfg.document.find("toric")) out.push_back("toric");
    if (cfg.document.find("deform")) out.push_back("deform");
    if (cfg.document.find("localize")) out.push_back("localize");
  }
  std::vector<std::string> unique;
  for (const auto& t : out) {
    if (std::find(unique.begin(), unique.end(), t) == unique.end()) unique.push_back(t);
  }
  return unique;
}

json check_json(const Check& c) {
  return json{{"name", c.name}, {"value", c.value}, {"tolerance", c.tolerance}, {"relation", c.relation},
              {"pass", c.pass}};
}

std::vector<TaskResult> run_level(const RunConfig& cfg, const std::vector<std::string>& tasks, int level,
                                  const fs::path& out, std::ostream& log) {
  fs::create_directories(out);
  const DarbouxChart base = cfg.chart.build();
  const ChartPtr chart = std::make_shared<const DarbouxChart>(cfg.chart.build(level));
  MetricModelPtr model = build_metric(cfg, base);
  Context ctx{cfg, chart, model, make_provider(cfg, model, chart), out, level};
  std::vector<TaskResult> results;
  for (const std::string& t : tasks) {
    TaskResult r;
    r.task = t;
    try {
      if (t == "curvature") task_curvature(ctx, r);
      if (t == "riemann") task_riemann(ctx, r);
      if (t == "toric") task_toric(ctx, r);
      if (t == "deform") task_deform(ctx, r);
      if (t == "localize") task_localize(ctx, r);
    } catch (const std::exception& e) {
      r.status = "error";
      r.error = e.what();
    }
    log << "[level " << level << "] " << t << ": " << (r.pass() ? "pass" : "FAIL");
    if (!r.error.empty()) log << " (" << r.error << ")";
    log << "\n";
    for (const Check& c : r.checks) {
      if (!c.pass) log << "  failed " << c.name << " = " << c.value << " (" << c.relation << " " << c.tolerance << ")\n";
    }
    std::ofstream report(out / (t + ".json"));
    report << json{{"task", t}, {"status", r.status}, {"error", r.error}, {"info", r.info}}.dump(2) << "\n";
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace

int run(const RunOptions& options, std::ostream& log) {
  RunConfig cfg;
  try {
    cfg = parse_run_config(config::Document::load(options.config_path));
  } catch (const config::ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return 2;
  }
  if (options.out) cfg.out = *options.out;
  if (options.h_refine) cfg.h_refine = *options.h_refine;
  std::vector<std::string> requested = cfg.tasks;
  if (options.task) requested = {*options.task};
  if (requested.empty()) {
    log << "config error: no task given ([run] tasks or a subcommand)\n";
    return 2;
  }
  const std::vector<std::string> tasks = expand_tasks(cfg, requested);
  const fs::path out(cfg.out);

  json summary;
  summary["config"] = fs::path(cfg.source).filename().string();
  summary["tasks"] = tasks;
  summary["path"] = cfg.path == Path::Analytic ? "analytic" : "fd";
  summary["chart"] = {{"n", cfg.chart.n},
                      {"z", {cfg.chart.z_lo, cfg.chart.z_hi}},
                      {"z_points", cfg.chart.z_points},
                      {"t", {cfg.chart.t_lo, cfg.chart.t_hi}},
                      {"t_points", cfg.chart.t_points},
                      {"t_periodic", cfg.chart.t_periodic}};
  json tol;
  for (const auto& [k, v] : cfg.tolerances.values) tol[k] = v;
  summary["tolerances"] = tol;
  summary["expect"] = cfg.expect;

  bool pass = true;
  json levels = json::array();
  std::map<std::string, std::vector<double>> series;
  std::vector<double> steps;
  for (int level = 0; level <= cfg.h_refine; ++level) {
    const fs::path dir = level == 0 ? out : out / ("refine-" + std::to_string(level));
    std::vector<TaskResult> results;
    try {
      results = run_level(cfg, tasks, level, dir, log);
    } catch (const std::exception& e) {
      TaskResult r;
      r.task = "setup";
      r.status = "error";
      r.error = e.what();
      log << "[level " << level << "] setup failed: " << e.what() << "\n";
      results.push_back(r);
    }
    const DarbouxChart chart = cfg.chart.build(level);
    steps.push_back(chart.axis(0).step());
    json tj = json::array();
    for (const TaskResult& r : results) {
      json checks = json::array();
      for (const Check& c : r.checks) {
        checks.push_back(check_json(c));
        if (c.relation != "==") series[r.task + "." + c.name].push_back(c.value);
      }
      tj.push_back({{"task", r.task}, {"status", r.status}, {"error", r.error}, {"pass", r.pass()}, {"checks", checks}});
      pass = pass && r.pass();
    }
    levels.push_back({{"level", level}, {"h", steps.back()}, {"tasks", tj}});
  }
  summary["levels"] = levels;
  if (cfg.h_refine > 0) {
    json conv = json::object();
    for (const auto& [name, values] : series) {
      if (static_cast<int>(values.size()) != cfg.h_refine + 1) continue;
      json orders = json::array();
      for (std::size_t i = 0; i + 1 < values.size(); ++i) {
        const double ratio = values[i] / values[i + 1];
        orders.push_back(values[i] > 0 && values[i + 1] > 0 ? std::log2(ratio) : NAN);
      }
      conv[name] = {{"values", values}, {"orders", orders}};
    }
    summary["convergence"] = conv;
  }
  summary["pass"] = pass;
  fs::create_directories(out);
  std::ofstream(out / "summary.json") << summary.dump(2) << "\n";
  log << (pass ? "all checks passed" : "some checks FAILED") << "; summary at " << (out / "summary.json").string()
      << "\n";
  return pass ? 0 : 1;
}

}  // namespace akcurv::run
