#include "nltomo/io.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "nltomo/error.hpp"
#include "nltomo/specfun.hpp"

namespace nltomo::io {

namespace {

std::ofstream openOut(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p);
  if (!f) throw ConfigError("cannot write " + p.string());
  f << std::setprecision(17);
  return f;
}

std::ifstream openIn(const fs::path& p) {
  std::ifstream f(p);
  if (!f) throw ConfigError("cannot read " + p.string());
  return f;
}

std::vector<std::string> splitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

// Reads "# key=value" comment lines and the numeric table below them.
Table readCsvWithMeta(const fs::path& p, std::map<std::string, std::string>* meta) {
  auto f = openIn(p);
  Table t;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (meta && eq != std::string::npos) {
        std::string key = line.substr(1, eq - 1);
        key.erase(0, key.find_first_not_of(' '));
        (*meta)[key] = line.substr(eq + 1);
      }
      continue;
    }
    if (t.header.empty()) {
      t.header = splitCsv(line);
      continue;
    }
    std::vector<double> row;
    for (const auto& c : splitCsv(line)) row.push_back(std::stod(c));
    if (row.size() != t.header.size()) throw ConfigError("ragged row in " + p.string());
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace

json toJson(cplx z) { return json::array({z.real(), z.imag()}); }

cplx complexFromJson(const json& j) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (!j.is_array() || j.size() != 2) throw ConfigError("complex value must be [re, im]");
  return {j[0].get<double>(), j[1].get<double>()};
}

json toJson(const geometry::StarCurve& c) {
  return {{"center", {c.center.x(), c.center.y()}}, {"a0", c.a0}, {"a", c.a}, {"b", c.b}};
}

geometry::StarCurve curveFromJson(const json& j) {
  geometry::StarCurve c;
  const auto& ctr = j.at("center");
  c.center = Point(ctr.at(0).get<double>(), ctr.at(1).get<double>());
  c.a0 = j.at("a0").get<double>();
  c.a = j.value("a", std::vector<double>{});
  c.b = j.value("b", std::vector<double>{});
  if (c.a.size() != c.b.size()) throw ConfigError("curve needs as many a as b coefficients");
  return c;
}

json toJson(const std::vector<geometry::StarCurve>& cs) {
  json a = json::array();
  for (const auto& c : cs) a.push_back(toJson(c));
  return a;
}

std::vector<geometry::StarCurve> curvesFromJson(const json& j) {
  std::vector<geometry::StarCurve> out;
  for (const auto& c : j) out.push_back(curveFromJson(c));
  return out;
}

json toJson(const geometry::Disc& d) {
  return {{"center", {d.center.x(), d.center.y()}}, {"radius", d.radius}};
}

json toJson(const forward::DiscreteMeasure& m) {
  json pts = json::array();
  for (std::size_t k = 0; k < m.size(); ++k)
    pts.push_back({{"x", m.points[k].x()}, {"y", m.points[k].y()}, {"weight", toJson(m.weights[k])}});
  return pts;
}

forward::DiscreteMeasure measureFromJson(const json& j) {
  forward::DiscreteMeasure m;
  for (const auto& p : j)
    m.add(Point(p.at("x").get<double>(), p.at("y").get<double>()), complexFromJson(p.at("weight")));
  return m;
}

json toJson(const forward::BoundaryTrace& t) {
  json re = json::array(), im = json::array();
  for (Eigen::Index i = 0; i < t.samples.size(); ++i) {
    re.push_back(t.samples(i).real());
    im.push_back(t.samples(i).imag());
  }
  return {{"harmonic", t.harmonic},
          {"kind", forward::traceKindName(t.kind)},
          {"arc_fraction", t.arc_fraction},
          {"arc_center", t.arc_center},
          {"domain_radius", t.domain_radius},
          {"node_weight", t.node_weight},
          {"indices", t.indices},
          {"angles", t.angles},
          {"re", re},
          {"im", im}};
}

forward::BoundaryTrace traceFromJson(const json& j) {
  forward::BoundaryTrace t;
  t.harmonic = j.at("harmonic").get<int>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "neumann") t.kind = forward::TraceKind::Neumann;
  else if (kind == "dirichlet") t.kind = forward::TraceKind::Dirichlet;
  else throw ConfigError("unknown trace kind '" + kind + "'");
  t.arc_fraction = j.at("arc_fraction").get<double>();
  t.arc_center = j.at("arc_center").get<double>();
  t.domain_radius = j.at("domain_radius").get<double>();
  t.node_weight = j.at("node_weight").get<double>();
  t.indices = j.at("indices").get<std::vector<int>>();
  t.angles = j.at("angles").get<std::vector<double>>();
  const auto re = j.at("re").get<std::vector<double>>();
  const auto im = j.at("im").get<std::vector<double>>();
  if (re.size() != im.size() || re.size() != t.indices.size())
    throw ConfigError("trace arrays disagree in length");
  t.samples.resize(static_cast<Eigen::Index>(re.size()));
  for (std::size_t i = 0; i < re.size(); ++i) t.samples(static_cast<Eigen::Index>(i)) = {re[i], im[i]};
  return t;
}

json toJson(const pdap::PdapState& s) {
  return {{"measure", toJson(s.measure)},
          {"residual_history", s.residual_history},
          {"iterations", s.iterations},
          {"converged", s.converged},
          {"stagnated", s.stagnated},
          {"stop_reason", s.stop_reason}};
}

json toJson(const eqdiscs::StartingGuess& g) {
  json discs = json::array(), groups = json::array(), weights = json::array();
  for (const auto& d : g.discs) discs.push_back(toJson(d));
  for (const auto& gr : g.groups) groups.push_back({{"object", gr.object}, {"members", gr.members}});
  for (cplx w : g.object_weights) weights.push_back(toJson(w));
  std::vector<int> clamped(g.clamped.begin(), g.clamped.end());
  return {{"discs", discs},
          {"groups", groups},
          {"object_weights", weights},
          {"curves", toJson(g.curves)},
          {"clamped", clamped}};
}

json toJson(const shape::ShapeErrors& e) {
  auto nanSafe = [](const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(std::isfinite(x) ? json(x) : json(nullptr));
    return a;
  };
  return {{"match", e.match},
          {"radial_l2", nanSafe(e.radial_l2)},
          {"sym_diff", nanSafe(e.sym_diff)},
          {"sym_diff_relative", nanSafe(e.sym_diff_relative)}};
}

json toJson(const shape::NewtonReport& r) {
  json hist = json::array();
  for (const auto& h : r.history)
    hist.push_back({{"stage", h.stage},
                    {"iteration", h.iteration},
                    {"residual", h.residual_norm},
                    {"step", h.step_norm},
                    {"damping", h.damping},
                    {"condition", h.jacobian_condition},
                    {"halvings", h.halvings},
                    {"accepted", h.accepted}});
  json out = {{"schedule", r.schedule},
              {"start_curves", toJson(r.start_curves)},
              {"final_curves", toJson(r.final_curves)},
              {"history", hist},
              {"residual_history", r.residual_history},
              {"final_condition", r.final_condition},
              {"iterations", r.iterations},
              {"converged", r.converged},
              {"diverged", r.diverged},
              {"stop_reason", r.stop_reason}};
  if (r.start_errors) out["start_errors"] = toJson(*r.start_errors);
  if (r.final_errors) out["final_errors"] = toJson(*r.final_errors);
  return out;
}

json toJson(const abstract::FrozenNewtonResult& r) {
  return {{"alphas", r.alphas},
          {"residuals", r.residuals},
          {"errors", r.errors},
          {"stop_index", r.stop_index},
          {"stop_reason", r.stop_reason}};
}

json toJson(const abstract::HankelReport& r) {
  return {{"sigma_min", r.sigma_min},
          {"sigma_max", r.sigma_max},
          {"sigma_min_double", r.sigma_min_double},
          {"nonsingular", r.nonsingular},
          {"max_root_residual", r.max_root_residual},
          {"min_root_separation", r.min_root_separation},
          {"roots_distinct", r.roots_distinct},
          {"literal_max_residual", r.literal_max_residual},
          {"literal_min_separation", r.literal_min_separation},
          {"literal_distinct", r.literal_distinct}};
}

void writeJson(const fs::path& p, const json& j) { openOut(p) << j.dump(2) << '\n'; }

json readJson(const fs::path& p) {
  auto f = openIn(p);
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

void writeCsv(const fs::path& p, const Table& t) {
  auto f = openOut(p);
  for (std::size_t i = 0; i < t.header.size(); ++i) f << (i ? "," : "") << t.header[i];
  f << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) f << (i ? "," : "") << row[i];
    f << '\n';
  }
}

Table readCsv(const fs::path& p) { return readCsvWithMeta(p, nullptr); }

void writeTrace(const fs::path& csv, const forward::BoundaryTrace& t) {
  auto f = openOut(csv);
  f << "# harmonic=" << t.harmonic << '\n'
    << "# kind=" << forward::traceKindName(t.kind) << '\n'
    << "# arc_fraction=" << t.arc_fraction << '\n'
    << "# arc_center=" << t.arc_center << '\n'
    << "# domain_radius=" << t.domain_radius << '\n'
    << "# node_weight=" << t.node_weight << '\n'
    << "index,angle,re,im\n";
  for (std::size_t i = 0; i < t.indices.size(); ++i) {
    const auto s = t.samples(static_cast<Eigen::Index>(i));
    f << t.indices[i] << ',' << t.angles[i] << ',' << s.real() << ',' << s.imag() << '\n';
  }
}

forward::BoundaryTrace readTrace(const fs::path& csv) {
  std::map<std::string, std::string> meta;
  const Table t = readCsvWithMeta(csv, &meta);
  if (t.header != std::vector<std::string>{"index", "angle", "re", "im"})
    throw ConfigError(csv.string() + " is not a trace file");
  auto need = [&](const std::string& k) {
    const auto it = meta.find(k);
    if (it == meta.end()) throw ConfigError(csv.string() + " lacks '" + k + "'");
    return it->second;
  };
  forward::BoundaryTrace tr;
  tr.harmonic = std::stoi(need("harmonic"));
  tr.kind = need("kind") == "dirichlet" ? forward::TraceKind::Dirichlet : forward::TraceKind::Neumann;
  tr.arc_fraction = std::stod(need("arc_fraction"));
  tr.arc_center = std::stod(need("arc_center"));
  tr.domain_radius = std::stod(need("domain_radius"));
  tr.node_weight = std::stod(need("node_weight"));
  tr.samples.resize(static_cast<Eigen::Index>(t.rows.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    tr.indices.push_back(static_cast<int>(t.rows[i][0]));
    tr.angles.push_back(t.rows[i][1]);
    tr.samples(static_cast<Eigen::Index>(i)) = {t.rows[i][2], t.rows[i][3]};
  }
  return tr;
}

void writeMeasureCsv(const fs::path& p, const forward::DiscreteMeasure& m) {
  Table t{{"x", "y", "re", "im", "abs"}, {}};
  for (std::size_t k = 0; k < m.size(); ++k)
    t.rows.push_back({m.points[k].x(), m.points[k].y(), m.weights[k].real(), m.weights[k].imag(),
                      std::abs(m.weights[k])});
  writeCsv(p, t);
}

forward::DiscreteMeasure readMeasureCsv(const fs::path& p) {
  const Table t = readCsv(p);
  forward::DiscreteMeasure m;
  for (const auto& r : t.rows) m.add(Point(r.at(0), r.at(1)), {r.at(2), r.at(3)});
  return m;
}

void writeCurvesCsv(const fs::path& p, const std::vector<geometry::StarCurve>& cs, int samples) {
  Table t{{"object", "t", "x", "y", "rho", "phi"}, {}};
  for (std::size_t k = 0; k < cs.size(); ++k)
    for (int i = 0; i <= samples; ++i) {
      const double s = 2 * specfun::kPi * i / samples;
      const Point q = cs[k].point(s);
      t.rows.push_back({double(k), s, q.x(), q.y(), q.norm(), std::atan2(q.y(), q.x())});
    }
  writeCsv(p, t);
}

void writeDiscsCsv(const fs::path& p, const std::vector<geometry::Disc>& discs, int samples) {
  std::vector<geometry::StarCurve> circles;
  for (const auto& d : discs) circles.push_back(geometry::StarCurve::circle(d.center, d.radius));
  writeCurvesCsv(p, circles, samples);
}

void writeGnuplotScript(const fs::path& p, const std::string& title,
                        const std::vector<PlotLayer>& layers, double domain_radius) {
  auto f = openOut(p);
  f << "set datafile separator ','\n"
    << "set size ratio -1\n"
    << "set title '" << title << "'\n"
    << "set xrange [" << -1.05 * domain_radius << ":" << 1.05 * domain_radius << "]\n"
    << "set yrange [" << -1.05 * domain_radius << ":" << 1.05 * domain_radius << "]\n"
    << "set parametric\n"
    << "set trange [0:2*pi]\n"
    << "plot " << domain_radius << "*cos(t), " << domain_radius
    << "*sin(t) with lines lc rgb 'gray' title 'boundary'";
  for (const auto& l : layers) {
    if (l.points) {
      f << ", \\\n  '" << l.file << "' every ::1 using 1:2 " << l.style << " title '" << l.title << "'";
      continue;
    }
    for (int k = 0; k < l.objects; ++k)
      f << ", \\\n  '" << l.file << "' every ::1 using ($1==" << k << "?$3:1/0):4 " << l.style
        << " title '" << (k == 0 ? l.title : "") << "'";
  }
  f << "\npause -1\n";
}

std::string fileHash(const fs::path& p) {
  auto f = openIn(p);
  std::stringstream ss;
  ss << f.rdbuf();
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << std::hash<std::string>{}(ss.str());
  return hex.str();
}

void writeManifest(const fs::path& dir, const json& extra) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  json list = json::array();
  for (const auto& f : files)
    list.push_back({{"path", fs::relative(f, dir).generic_string()},
                    {"bytes", fs::file_size(f)},
                    {"hash", fileHash(f)}});
  json m = extra;
  m["files"] = list;
  writeJson(dir / "manifest.json", m);
}

}  // namespace nltomo::io
