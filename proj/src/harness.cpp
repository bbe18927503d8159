#include "nltomo/harness.hpp"

#include <cmath>
#include <future>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "nltomo/error.hpp"
#include "nltomo/specfun.hpp"

namespace nltomo::harness {

using geometry::StarCurve;
using shape::Schedule;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json nanSafe(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

template <class T>
void readKey(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

void rejectUnknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

Point pointFromJson(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("point must be [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

std::string stageName(Schedule s) {
  switch (s) {
    case Schedule::SecondOnly:
      return "stage_c_newton_m2";
    case Schedule::Sequential:
      return "stage_d_newton_sequential";
    case Schedule::Simultaneous:
      return "stage_e_newton_simultaneous";
  }
  return "stage_newton";
}

double harmonicCode(const std::string& stage) {
  if (stage == "m2") return 2;
  if (stage == "m3") return 3;
  return 23;
}

std::string formatValue(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// Published conditioning table: arc fraction, cond(J), c_N.
struct ReferenceRow {
  double arc, cond, cn;
};
constexpr ReferenceRow kReferenceConditioning[] = {
    {0.75, 29.6, 2.8e2}, {0.5, 64.9, 2.3e5}, {0.4, 73.7, 1.8e7}, {0.3, 1733.8, 2.6e8}};

unsigned noiseSeed(unsigned seed, int harmonic) {
  return seed * 1000003u + static_cast<unsigned>(harmonic);
}

}  // namespace

// ---------------------------------------------------------------- scenario

Scenario::Scenario() {
  physics.eta0 = 5e-3;
  newton.mode = shape::JacobianMode::Analytic;
}

std::vector<StarCurve> Scenario::phantomCurves() const {
  std::vector<StarCurve> out;
  for (const auto& p : phantom) out.push_back(p.curve);
  return out;
}

void Scenario::validate() const {
  physics.validate();
  pdap.validate();
  if (data_factor < 2)
    throw ConfigError("data_factor must be >= 2 so data and inversion resolutions differ");
  if (phantom.empty()) throw ConfigError("scenario '" + name + "' has no phantom objects");
  for (const auto& p : phantom) {
    try {
      p.curve.validate();
    } catch (const InvalidCurveError& e) {
      throw ConfigError("phantom '" + p.label + "': " + e.what());
    }
    if (p.curve.center.norm() + p.curve.maxRadius() >= physics.domain_radius)
      throw ConfigError("phantom '" + p.label + "' leaves the domain");
  }
  geometry::InclusionSet set{phantomCurves()};
  if (!geometry::overlappingObjects(set).empty())
    throw ConfigError("phantom objects overlap in scenario '" + name + "'");
  if (harmonics != 2 && harmonics != 3) throw ConfigError("harmonics must be 2 or 3");
  if (!(arc_fraction > 0.0 && arc_fraction <= 1.0))
    throw ConfigError("arc_fraction must lie in (0, 1]");
  if (!(noise >= 0.0)) throw ConfigError("noise must be >= 0");
  if (order < 0) throw ConfigError("order must be >= 0");
  if (schedules.empty()) throw ConfigError("at least one Newton schedule is needed");
  for (auto sc : schedules)
    if (sc != Schedule::SecondOnly && harmonics < 3)
      throw ConfigError("schedule '" + shape::scheduleName(sc) + "' needs harmonics = 3");
  if (sweep) {
    if (sweep->values.empty()) throw ConfigError("sweep has no values");
    for (double v : sweep->values) withParameter(sweep->parameter, v).validate();
  }
  if (conditioning) {
    if (phantom.size() != 1) throw ConfigError("conditioning needs a single inclusion");
    if (conditioning->basis != 1 + 2 * order)
      throw ConfigError("conditioning basis must equal 1 + 2 order");
    for (double a : conditioning->arc_fractions)
      if (!(a > 0.0 && a <= 1.0)) throw ConfigError("conditioning arc fractions must lie in (0, 1]");
  }
}

Scenario Scenario::withParameter(const std::string& parameter, double value) const {
  Scenario s = *this;
  if (parameter == "arc_fraction") {
    s.arc_fraction = value;
  } else if (parameter == "noise") {
    s.noise = value;
  } else if (parameter == "seed") {
    s.seed = static_cast<unsigned>(value);
  } else if (parameter.rfind("object", 0) == 0 && parameter.find('.') != std::string::npos) {
    const auto dot = parameter.find('.');
    std::size_t k = 0;
    try {
      k = std::stoul(parameter.substr(6, dot - 6));
    } catch (const std::exception&) {
      throw ConfigError("bad object index in '" + parameter + "'");
    }
    if (k >= s.phantom.size()) throw ConfigError("no object " + std::to_string(k));
    Point& c = s.phantom[k].curve.center;
    const std::string field = parameter.substr(dot + 1);
    if (field == "center_x") {
      c.x() = value;
    } else if (field == "center_y") {
      c.y() = value;
    } else if (field == "polar_radius") {
      const double th = std::atan2(c.y(), c.x());
      c = value * Point(std::cos(th), std::sin(th));
    } else if (field == "polar_turns") {
      const double r = c.norm();
      const double th = 2 * specfun::kPi * value;
      c = r * Point(std::cos(th), std::sin(th));
    } else {
      throw ConfigError("unknown object field '" + field + "'");
    }
  } else {
    throw ConfigError("unknown sweep parameter '" + parameter + "'");
  }
  s.name = name + "_" + parameter + "_" + formatValue(value);
  s.sweep.reset();
  return s;
}

Scenario scenarioFromJson(const json& j) {
  rejectUnknown(j,
                {"name", "description", "physics", "data_factor", "excitation", "phantom",
                 "harmonics", "arc_fraction", "arc_center", "noise", "seed", "schedules",
                 "order", "newton", "pdap", "clamp_to_branch", "sweep", "conditioning"},
                "scenario");
  Scenario s;
  try {
    readKey(j, "name", s.name);
    readKey(j, "description", s.description);
    if (j.contains("physics")) {
      const auto& p = j.at("physics");
      rejectUnknown(p, {"omega", "sound_speed", "eta0", "gamma", "domain_radius", "boundary_nodes"},
                    "physics");
      readKey(p, "omega", s.physics.omega);
      readKey(p, "sound_speed", s.physics.sound_speed);
      readKey(p, "eta0", s.physics.eta0);
      readKey(p, "gamma", s.physics.gamma);
      readKey(p, "domain_radius", s.physics.domain_radius);
      readKey(p, "boundary_nodes", s.physics.boundary_nodes);
    }
    readKey(j, "data_factor", s.data_factor);
    if (j.contains("excitation")) {
      const auto& e = j.at("excitation");
      rejectUnknown(e, {"kind", "direction", "amplitude", "sources"}, "excitation");
      const auto kind = e.value("kind", std::string("plane_wave"));
      if (kind == "plane_wave") {
        s.excitation.kind = forward::Excitation::Kind::PlaneWave;
        if (e.contains("direction")) s.excitation.direction = pointFromJson(e.at("direction"));
        if (e.contains("amplitude")) s.excitation.amplitude = io::complexFromJson(e.at("amplitude"));
      } else if (kind == "sources") {
        s.excitation.kind = forward::Excitation::Kind::Sources;
        s.excitation.sources = io::measureFromJson(e.at("sources"));
      } else {
        throw ConfigError("unknown excitation kind '" + kind + "'");
      }
    }
    if (j.contains("phantom")) {
      for (const auto& o : j.at("phantom")) {
        rejectUnknown(o, {"label", "center", "a0", "a", "b"}, "phantom object");
        PhantomObject p;
        p.label = o.value("label", "object" + std::to_string(s.phantom.size()));
        p.curve = io::curveFromJson(o);
        s.phantom.push_back(std::move(p));
      }
    }
    readKey(j, "harmonics", s.harmonics);
    readKey(j, "arc_fraction", s.arc_fraction);
    readKey(j, "arc_center", s.arc_center);
    readKey(j, "noise", s.noise);
    readKey(j, "seed", s.seed);
    if (j.contains("schedules")) {
      s.schedules.clear();
      for (const auto& n : j.at("schedules")) s.schedules.push_back(shape::parseSchedule(n));
    }
    readKey(j, "order", s.order);
    if (j.contains("newton")) {
      const auto& n = j.at("newton");
      rejectUnknown(n, {"max_iterations", "step_tolerance", "initial_damping", "jacobian"}, "newton");
      readKey(n, "max_iterations", s.newton.max_iterations);
      readKey(n, "step_tolerance", s.newton.step_tolerance);
      readKey(n, "initial_damping", s.newton.initial_damping);
      const auto jac = n.value("jacobian", std::string("analytic"));
      if (jac == "analytic") s.newton.mode = shape::JacobianMode::Analytic;
      else if (jac == "fd") s.newton.mode = shape::JacobianMode::FiniteDifference;
      else throw ConfigError("newton.jacobian must be 'analytic' or 'fd'");
    }
    if (j.contains("pdap")) {
      const auto& p = j.at("pdap");
      rejectUnknown(p,
                    {"grid_radii", "grid_angles", "grid_max_radius", "max_iterations", "tolerance",
                     "prune_threshold", "refine_steps", "slide", "max_support"},
                    "pdap");
      readKey(p, "grid_radii", s.pdap.grid_radii);
      readKey(p, "grid_angles", s.pdap.grid_angles);
      readKey(p, "grid_max_radius", s.pdap.grid_max_radius);
      readKey(p, "max_iterations", s.pdap.max_iterations);
      readKey(p, "tolerance", s.pdap.tolerance);
      readKey(p, "prune_threshold", s.pdap.prune_threshold);
      readKey(p, "refine_steps", s.pdap.refine_steps);
      readKey(p, "slide", s.pdap.slide);
      readKey(p, "max_support", s.pdap.max_support);
    }
    readKey(j, "clamp_to_branch", s.clamp_to_branch);
    if (j.contains("sweep")) {
      const auto& w = j.at("sweep");
      rejectUnknown(w, {"parameter", "values"}, "sweep");
      s.sweep = Sweep{w.at("parameter").get<std::string>(), w.at("values").get<std::vector<double>>()};
    }
    if (j.contains("conditioning")) {
      const auto& c = j.at("conditioning");
      rejectUnknown(c, {"arc_fractions", "basis"}, "conditioning");
      Conditioning cond;
      readKey(c, "arc_fractions", cond.arc_fractions);
      readKey(c, "basis", cond.basis);
      s.conditioning = cond;
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  s.validate();
  return s;
}

json toJson(const Scenario& s) {
  json phantom = json::array();
  for (const auto& p : s.phantom) {
    json o = io::toJson(p.curve);
    o["label"] = p.label;
    phantom.push_back(o);
  }
  json exc;
  if (s.excitation.kind == forward::Excitation::Kind::PlaneWave)
    exc = {{"kind", "plane_wave"},
           {"direction", {s.excitation.direction.x(), s.excitation.direction.y()}},
           {"amplitude", io::toJson(s.excitation.amplitude)}};
  else
    exc = {{"kind", "sources"}, {"sources", io::toJson(s.excitation.sources)}};
  json schedules = json::array();
  for (auto sc : s.schedules) schedules.push_back(shape::scheduleName(sc));
  json j = {
      {"name", s.name},
      {"description", s.description},
      {"physics",
       {{"omega", s.physics.omega},
        {"sound_speed", s.physics.sound_speed},
        {"eta0", s.physics.eta0},
        {"gamma", s.physics.gamma},
        {"domain_radius", s.physics.domain_radius},
        {"boundary_nodes", s.physics.boundary_nodes}}},
      {"data_factor", s.data_factor},
      {"excitation", exc},
      {"phantom", phantom},
      {"harmonics", s.harmonics},
      {"arc_fraction", s.arc_fraction},
      {"arc_center", s.arc_center},
      {"noise", s.noise},
      {"seed", s.seed},
      {"schedules", schedules},
      {"order", s.order},
      {"newton",
       {{"max_iterations", s.newton.max_iterations},
        {"step_tolerance", s.newton.step_tolerance},
        {"initial_damping", s.newton.initial_damping},
        {"jacobian", s.newton.mode == shape::JacobianMode::Analytic ? "analytic" : "fd"}}},
      {"pdap",
       {{"grid_radii", s.pdap.grid_radii},
        {"grid_angles", s.pdap.grid_angles},
        {"grid_max_radius", s.pdap.grid_max_radius},
        {"max_iterations", s.pdap.max_iterations},
        {"tolerance", s.pdap.tolerance},
        {"prune_threshold", s.pdap.prune_threshold},
        {"refine_steps", s.pdap.refine_steps},
        {"slide", s.pdap.slide},
        {"max_support", s.pdap.max_support}}},
      {"clamp_to_branch", s.clamp_to_branch}};
  if (s.sweep) j["sweep"] = {{"parameter", s.sweep->parameter}, {"values", s.sweep->values}};
  if (s.conditioning)
    j["conditioning"] = {{"arc_fractions", s.conditioning->arc_fractions},
                         {"basis", s.conditioning->basis}};
  return j;
}

Scenario loadScenario(const fs::path& p) { return scenarioFromJson(io::readJson(p)); }

// ---------------------------------------------------------------- data

forward::BoundaryTrace addNoise(const forward::BoundaryTrace& t, double delta, unsigned seed) {
  if (delta < 0.0) throw DomainError("noise level must be >= 0");
  if (delta == 0.0 || t.samples.size() == 0) return t;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::VectorXcd n(t.samples.size());
  for (auto& z : n) z = {g(rng), g(rng)};
  forward::BoundaryTrace out = t;
  // the node weight is common to both norms
  out.samples += (delta * t.samples.norm() / n.norm()) * n;
  return out;
}

double slepianAlpha(double arc_fraction, SlepianReading r) {
  const double f = r == SlepianReading::Observed ? arc_fraction : 1.0 - arc_fraction;
  return 2 * specfun::kPi * f;
}

double slepianGamma(double alpha) {
  if (!(alpha > 0.0 && alpha < 2 * specfun::kPi))
    throw DomainError("Slepian angle must lie in (0, 2 pi)");
  const double s = std::sqrt(std::max(0.0, 1.0 + std::cos(alpha)));
  const double den = std::sqrt(2.0) - s;
  if (!(den > 1e-300)) throw DomainError("Slepian exponent diverges as the angle tends to 0");
  return std::log((std::sqrt(2.0) + s) / den);
}

double slepianConditionNumber(int n, double alpha) {
  if (n < 1) throw DomainError("basis size must be positive");
  return std::exp(slepianGamma(alpha) * n);
}

const forward::BoundaryTrace& DataBundle::noisyTrace(int m) const {
  for (const auto& t : noisy)
    if (t.harmonic == m) return t;
  throw ConfigError("no data for harmonic " + std::to_string(m));
}

DataBundle generateData(const Scenario& s) {
  const int df = s.data_factor;
  const auto fine = s.physics.refined(df);
  geometry::InclusionSet set{s.phantomCurves()};
  set.radial_order *= df;
  set.angular_order *= df;
  const auto fields = forward::harmonicCascade(fine, set, s.excitation, s.harmonics);
  DataBundle d;
  std::vector<double> dirichlet_norm;
  const double R = s.physics.domain_radius;
  for (int m = 2; m <= s.harmonics; ++m) {
    const auto& f = fields[m - 1];
    auto neu = forward::subsampleTrace(
        forward::extractTrace(f, s.arc_fraction, forward::TraceKind::Neumann, s.arc_center, R), df);
    auto dir = forward::subsampleTrace(
        forward::extractTrace(f, s.arc_fraction, forward::TraceKind::Dirichlet, s.arc_center, R), df);
    dirichlet_norm.push_back(dir.l2Norm());
    d.noisy.push_back(addNoise(neu, s.noise, noiseSeed(s.seed, m)));
    d.clean.push_back(std::move(neu));
  }
  d.third_to_second = dirichlet_norm.size() > 1 ? dirichlet_norm[1] / dirichlet_norm[0] : kNaN;
  return d;
}

// ---------------------------------------------------------------- pipeline

const shape::NewtonReport* RunReport::find(Schedule s) const {
  for (const auto& r : newton)
    if (r.schedule == shape::scheduleName(s)) return &r;
  return nullptr;
}

json RunReport::toJson() const {
  json failures_j = json::array();
  for (const auto& f : failures)
    failures_j.push_back({{"stage", f.stage}, {"kind", f.kind}, {"what", f.what}});
  json weights = json::array();
  for (cplx w : phantom_weights) weights.push_back({{"re", w.real()}, {"im", w.imag()}, {"abs", std::abs(w)}});
  json newton_j = json::array();
  for (const auto& r : newton) newton_j.push_back(io::toJson(r));
  json j = {{"scenario", scenario},
            {"third_to_second", nanSafe(third_to_second)},
            {"phantom_weights", weights},
            {"newton", newton_j},
            {"failures", failures_j},
            {"missed", missed},
            {"ok", ok()}};
  if (pdap) j["pdap"] = io::toJson(*pdap);
  if (start) j["start"] = io::toJson(*start);
  if (start_errors) j["start_errors"] = io::toJson(*start_errors);
  return j;
}

RunReport runScenario(const Scenario& s, const fs::path& out, LastStage last) {
  s.validate();
  const bool write = !out.empty();
  if (write) fs::create_directories(out);
  const auto phantom = s.phantomCurves();
  const double R = s.physics.domain_radius;
  const int nobj = static_cast<int>(phantom.size());

  RunReport rep;
  rep.scenario = s.name;
  auto fail = [&](const std::string& stage, const Error& e) {
    rep.failures.push_back({stage, e.kind(), e.what()});
  };
  auto finish = [&]() {
    if (!write) return;
    io::writeJson(out / "report.json", rep.toJson());
    io::writeManifest(out, {{"scenario", s.name}, {"seed", s.seed}});
  };

  const forward::Cascade cascade(s.physics, s.excitation);
  const auto f2 = [&](const Point& y) { return cascade.secondHarmonicSource(y); };
  const double kappa2 = s.physics.kappa(2);
  for (const auto& c : phantom) rep.phantom_weights.push_back(eqdiscs::objectWeight(c, f2, kappa2));

  if (write) {
    io::writeJson(out / "scenario.json", toJson(s));
    io::writeCurvesCsv(out / "phantom.csv", phantom);
  }
  const io::PlotLayer phantom_layer{"phantom.csv", "phantom", "with lines lc rgb 'black' dt 2", nobj};

  DataBundle data;
  try {
    data = generateData(s);
  } catch (const Error& e) {
    fail("data", e);
    finish();
    return rep;
  }
  rep.third_to_second = data.third_to_second;
  if (write)
    for (const auto& t : data.noisy) io::writeTrace(out / ("data_m" + std::to_string(t.harmonic) + ".csv"), t);
  if (last == LastStage::Data) {
    finish();
    return rep;
  }

  bool points_ok = false;
  try {
    pdap::PdapConfig cfg = s.pdap;
    cfg.noise_level = s.noise;
    rep.pdap = pdap::pdapRun(data.noisyTrace(2), cfg, s.physics);
    if (rep.pdap->measure.empty()) throw SolverError("point-source stage returned no sources");
    points_ok = true;
  } catch (const Error& e) {
    fail("points", e);
  }
  if (write && rep.pdap) {
    io::writeMeasureCsv(out / "stage_a_points.csv", rep.pdap->measure);
    io::writeJson(out / "stage_a_points.json", io::toJson(*rep.pdap));
    io::writeGnuplotScript(out / "stage_a_points.gp", s.name + ": point sources",
                           {phantom_layer, {"stage_a_points.csv", "sources", "with points pt 7", 1, true}}, R);
  }
  if (!points_ok || last == LastStage::Points) {
    finish();
    return rep;
  }

  try {
    eqdiscs::StartingGuessOptions opt;
    opt.order = s.order;
    opt.clamp_to_branch = s.clamp_to_branch;
    rep.start = eqdiscs::buildStartingGuesses(rep.pdap->measure, f2, kappa2, opt);
    rep.start_errors = shape::compareShapes(phantom, rep.start->curves);
    for (int k = 0; k < nobj; ++k)
      if (rep.start_errors->match[k] < 0) rep.missed.push_back(s.phantom[k].label);
  } catch (const Error& e) {
    fail("discs", e);
  }
  if (write && rep.start) {
    io::writeDiscsCsv(out / "stage_b_discs.csv", rep.start->discs);
    io::writeCurvesCsv(out / "stage_b_start.csv", rep.start->curves);
    json j = io::toJson(*rep.start);
    if (rep.start_errors) j["errors"] = io::toJson(*rep.start_errors);
    j["missed"] = rep.missed;
    io::writeJson(out / "stage_b_discs.json", j);
    io::writeGnuplotScript(
        out / "stage_b_discs.gp", s.name + ": equivalent discs",
        {phantom_layer,
         {"stage_b_discs.csv", "discs", "with lines lc rgb 'blue'", static_cast<int>(rep.start->discs.size())},
         {"stage_b_start.csv", "start", "with lines lc rgb 'red'", static_cast<int>(rep.start->curves.size())}},
        R);
  }
  if (!rep.start || last == LastStage::Discs) {
    finish();
    return rep;
  }

  std::optional<shape::ShapeProblem> prob;
  try {
    prob.emplace(s.physics, s.excitation, data.noisy);
  } catch (const Error& e) {
    fail("newton", e);
  }
  const auto u0 = shape::ShapeUnknowns::fromCurves(rep.start->curves, s.order);
  for (auto sc : s.schedules) {
    if (!prob) break;
    const std::string stage = stageName(sc);
    try {
      rep.newton.push_back(shape::runNewton(*prob, u0, sc, s.newton, phantom));
    } catch (const Error& e) {
      fail(stage, e);
      continue;
    }
    if (!write) continue;
    const auto& r = rep.newton.back();
    const int n = static_cast<int>(r.final_curves.size());
    io::writeJson(out / (stage + ".json"), io::toJson(r));
    io::writeCurvesCsv(out / (stage + "_curves.csv"), r.final_curves);
    io::Table it{{"harmonics", "iteration", "residual", "step", "damping", "condition", "halvings", "accepted"}, {}};
    for (const auto& h : r.history) {
      it.rows.push_back({harmonicCode(h.stage), double(h.iteration), h.residual_norm, h.step_norm,
                         h.damping, h.jacobian_condition, double(h.halvings), h.accepted ? 1.0 : 0.0});
      if (!h.curves.empty()) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%s_%02d.csv", h.stage.c_str(), h.iteration);
        io::writeCurvesCsv(out / (stage + "_iterations") / buf, h.curves);
      }
    }
    io::writeCsv(out / (stage + "_history.csv"), it);
    io::writeGnuplotScript(out / (stage + ".gp"), s.name + ": Newton " + r.schedule,
                           {phantom_layer,
                            {"stage_b_start.csv", "start", "with lines lc rgb 'red' dt 3", n},
                            {stage + "_curves.csv", "Newton", "with lines lc rgb 'blue' lw 2", n}},
                           R);
  }
  finish();
  return rep;
}

// ---------------------------------------------------------------- diagnostics

std::vector<ConditioningRow> conditioningReport(const Scenario& s, const fs::path& out) {
  s.validate();
  if (!s.conditioning) throw ConfigError("scenario '" + s.name + "' has no conditioning block");
  const auto& phantom = s.phantom.front().curve;
  const auto ac = geometry::areaCentroid(phantom);
  const auto start = shape::ShapeUnknowns::fromCurves(
      {StarCurve::circle(ac.centroid, std::sqrt(ac.area / specfun::kPi))}, s.order);
  const int n = s.conditioning->basis;

  std::vector<ConditioningRow> rows;
  for (double a : s.conditioning->arc_fractions) {
    Scenario sa = s;
    sa.arc_fraction = a;
    sa.harmonics = 2;
    sa.schedules = {Schedule::SecondOnly};
    const auto data = generateData(sa);
    const shape::ShapeProblem prob(sa.physics, sa.excitation, {data.noisyTrace(2)});
    const auto r = shape::runNewton(prob, start, Schedule::SecondOnly, sa.newton, {phantom});

    ConditioningRow row;
    row.arc_fraction = a;
    row.cond = r.final_condition;
    row.iterations = r.iterations;
    row.stop_reason = r.stop_reason;
    row.radial_l2 = r.final_errors ? r.final_errors->radial_l2.front() : kNaN;
    auto cn = [&](SlepianReading rd) {
      try {
        return slepianConditionNumber(n, slepianAlpha(a, rd));
      } catch (const DomainError&) {
        return kNaN;  // full aperture: nothing to complete
      }
    };
    row.slepian_observed = cn(SlepianReading::Observed);
    row.slepian_missing = cn(SlepianReading::Missing);
    row.reference_cond = row.reference_cn = kNaN;
    for (const auto& ref : kReferenceConditioning)
      if (std::fabs(ref.arc - a) < 1e-9) {
        row.reference_cond = ref.cond;
        row.reference_cn = ref.cn;
      }
    rows.push_back(row);
  }

  if (!out.empty()) {
    io::Table t{{"arc_fraction", "cond_J", "slepian_observed", "slepian_missing", "reference_cond_J",
                 "reference_c_N", "radial_l2", "iterations"},
                {}};
    json j = json::array();
    for (const auto& r : rows) {
      t.rows.push_back({r.arc_fraction, r.cond, r.slepian_observed, r.slepian_missing,
                        r.reference_cond, r.reference_cn, r.radial_l2, double(r.iterations)});
      j.push_back({{"arc_fraction", r.arc_fraction},
                   {"cond_J", r.cond},
                   {"slepian_observed", nanSafe(r.slepian_observed)},
                   {"slepian_missing", nanSafe(r.slepian_missing)},
                   {"reference_cond_J", nanSafe(r.reference_cond)},
                   {"reference_c_N", nanSafe(r.reference_cn)},
                   {"radial_l2", nanSafe(r.radial_l2)},
                   {"iterations", r.iterations},
                   {"stop_reason", r.stop_reason}});
    }
    io::writeCsv(out / "conditioning.csv", t);
    io::writeJson(out / "conditioning.json", {{"scenario", s.name}, {"basis", n}, {"rows", j}});
    io::writeManifest(out, {{"scenario", s.name}, {"seed", s.seed}});
  }
  return rows;
}

std::vector<SweepPoint> runSweep(const Scenario& s, const fs::path& out, int jobs) {
  s.validate();
  if (!s.sweep) throw ConfigError("scenario '" + s.name + "' has no sweep block");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  std::vector<SweepPoint> points;
  for (double v : s.sweep->values)
    points.push_back({v, out.empty() ? fs::path{} : out / (s.sweep->parameter + "_" + formatValue(v)), {}});

  for (std::size_t i = 0; i < points.size(); i += jobs) {
    std::vector<std::future<RunReport>> batch;
    for (std::size_t k = i; k < std::min(points.size(), i + jobs); ++k) {
      const Scenario sk = s.withParameter(s.sweep->parameter, points[k].value);
      const fs::path dir = points[k].dir;
      batch.push_back(std::async(jobs == 1 ? std::launch::deferred : std::launch::async,
                                 [sk, dir] { return runScenario(sk, dir); }));
    }
    for (std::size_t k = 0; k < batch.size(); ++k) points[i + k].report = batch[k].get();
  }

  if (!out.empty()) {
    const int nobj = static_cast<int>(s.phantom.size());
    io::Table t{{"value"}, {}};
    for (int k = 0; k < nobj; ++k) {
      t.header.push_back("start_sym_diff_rel_" + std::to_string(k));
      t.header.push_back("radial_l2_" + std::to_string(k));
      t.header.push_back("sym_diff_rel_" + std::to_string(k));
    }
    for (const char* h : {"missed", "failures", "final_residual", "final_condition"}) t.header.push_back(h);
    for (const auto& p : points) {
      std::vector<double> row{p.value};
      const auto* last = p.report.newton.empty() ? nullptr : &p.report.newton.front();
      for (int k = 0; k < nobj; ++k) {
        row.push_back(p.report.start_errors ? p.report.start_errors->sym_diff_relative[k] : kNaN);
        row.push_back(last && last->final_errors ? last->final_errors->radial_l2[k] : kNaN);
        row.push_back(last && last->final_errors ? last->final_errors->sym_diff_relative[k] : kNaN);
      }
      row.push_back(double(p.report.missed.size()));
      row.push_back(double(p.report.failures.size()));
      row.push_back(last && !last->residual_history.empty() ? last->residual_history.back() : kNaN);
      row.push_back(last ? last->final_condition : kNaN);
      t.rows.push_back(std::move(row));
    }
    io::writeCsv(out / "sweep.csv", t);
    io::writeJson(out / "sweep.json", {{"scenario", s.name}, {"parameter", s.sweep->parameter},
                                        {"values", s.sweep->values}});
  }
  return points;
}

json abstractReport(const AbstractStudy& study, const fs::path& out) {
  using namespace abstract;
  const auto rp = referenceProblem(study.reference);
  const auto clean = frozenNewtonRun(rp.system, rp.variant, rp.start, rp.data, {}, rp.truth);

  json noise = json::array();
  io::Table nt{{"delta", "absolute_level", "stop_index", "error"}, {}};
  for (double delta : study.noise_levels) {
    double level = 0.0;
    const auto d = addObservationNoise(rp.data, delta, study.seed, &level);
    FrozenNewtonConfig cfg;
    cfg.noise_level = level;
    const auto r = frozenNewtonRun(rp.system, rp.variant, rp.start, d, cfg, rp.truth);
    const double err = r.errors.at(r.stop_index);
    noise.push_back({{"delta", delta}, {"absolute_level", level}, {"stop_index", r.stop_index},
                     {"error", err}, {"stop_reason", r.stop_reason}});
    nt.rows.push_back({delta, level, double(r.stop_index), err});
  }

  json hankel = json::array();
  io::Table ht{{"size", "sigma_min", "sigma_min_double", "sigma_max"}, {}};
  const auto& sys = rp.system;
  for (int n = 4; n <= study.hankel_max; n += 4) {
    const auto s = SpectralSystem::cosine(n, sys.omega, sys.c, sys.b);
    const auto h = hankelSigmaMin(s, n, n);
    json hj = io::toJson(h);
    hj["size"] = n;
    hankel.push_back(hj);
    ht.rows.push_back({double(n), h.sigma_min, h.sigma_min_double, h.sigma_max});
  }

  auto phi = [](double x) { return 1.0 + 0.3 * std::cos(specfun::kPi * x); };
  const int need = sys.modes + (rp.variant == Variant::B ? 1 : 0);
  std::vector<cplx> psi;
  for (int m = 1; m <= need; ++m) psi.push_back(cplx(1.0 / m, 0.3 / m));
  const auto inj = linearizedInjectivitySigmaMin(sys, rp.variant, phi, psi);
  const auto inj1 = linearizedInjectivitySigmaMin(sys, rp.variant, phi, {psi.front()}, false);

  json j = {{"variant", rp.variant == Variant::A ? "a" : "b"},
            {"modes", sys.modes},
            {"harmonics", rp.truth.harmonics()},
            {"noise_free", io::toJson(clean)},
            {"noise_free_final_error", clean.errors.back()},
            {"noise_study", noise},
            {"hankel", hankel},
            {"injectivity",
             {{"harmonics", need}, {"sigma_min", inj.sigma_min}, {"sigma_max", inj.sigma_max}}},
            {"injectivity_fundamental_only", {{"sigma_min", inj1.sigma_min}}}};
  if (!out.empty()) {
    io::writeJson(out / "abstract.json", j);
    io::writeCsv(out / "abstract_noise.csv", nt);
    io::writeCsv(out / "abstract_hankel.csv", ht);
    io::Table ct{{"iteration", "alpha", "residual", "error"}, {}};
    for (std::size_t i = 0; i < clean.errors.size(); ++i)
      ct.rows.push_back({double(i), i < clean.alphas.size() ? clean.alphas[i] : kNaN,
                         i < clean.residuals.size() ? clean.residuals[i] : kNaN, clean.errors[i]});
    io::writeCsv(out / "abstract_convergence.csv", ct);
    io::writeManifest(out, {{"study", "abstract"}, {"seed", study.seed}});
  }
  return j;
}

}  // namespace nltomo::harness
