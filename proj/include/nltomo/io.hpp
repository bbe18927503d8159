#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "nltomo/abstract_newton.hpp"
#include "nltomo/eqdiscs.hpp"
#include "nltomo/forward.hpp"
#include "nltomo/geometry.hpp"
#include "nltomo/pdap.hpp"
#include "nltomo/shape_newton.hpp"

namespace nltomo::io {

using nlohmann::json;
namespace fs = std::filesystem;

json toJson(cplx z);
cplx complexFromJson(const json& j);

json toJson(const geometry::StarCurve& c);
geometry::StarCurve curveFromJson(const json& j);
json toJson(const std::vector<geometry::StarCurve>& cs);
std::vector<geometry::StarCurve> curvesFromJson(const json& j);

json toJson(const geometry::Disc& d);
json toJson(const forward::DiscreteMeasure& m);
forward::DiscreteMeasure measureFromJson(const json& j);

json toJson(const forward::BoundaryTrace& t);
forward::BoundaryTrace traceFromJson(const json& j);

json toJson(const pdap::PdapState& s);
json toJson(const eqdiscs::StartingGuess& g);
json toJson(const shape::ShapeErrors& e);
json toJson(const shape::NewtonReport& r);
json toJson(const abstract::FrozenNewtonResult& r);
json toJson(const abstract::HankelReport& r);

void writeJson(const fs::path& p, const json& j);
json readJson(const fs::path& p);

/// Plain numeric table with a header row; values written with 17 digits.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};
void writeCsv(const fs::path& p, const Table& t);
Table readCsv(const fs::path& p);

/// index, angle, re, im below "# key=value" metadata lines.
void writeTrace(const fs::path& csv, const forward::BoundaryTrace& t);
forward::BoundaryTrace readTrace(const fs::path& csv);

/// x, y, re, im, abs
void writeMeasureCsv(const fs::path& p, const forward::DiscreteMeasure& m);
forward::DiscreteMeasure readMeasureCsv(const fs::path& p);

/// object, t, x, y, rho, phi (polar) sampled along each curve (closed: last sample repeats the first).
void writeCurvesCsv(const fs::path& p, const std::vector<geometry::StarCurve>& cs,
                    int samples = 256);
void writeDiscsCsv(const fs::path& p, const std::vector<geometry::Disc>& discs, int samples = 128);

struct PlotLayer {
  std::string file;   // relative to the script
  std::string title;
  std::string style;  // gnuplot "with" clause
  int objects = 1;    // curves files hold this many objects
  bool points = false;  // measure file: x, y columns plotted as points
};
/// Gnuplot script drawing the domain boundary and the given layers.
void writeGnuplotScript(const fs::path& p, const std::string& title,
                        const std::vector<PlotLayer>& layers, double domain_radius);

/// Hex digest of the file contents (std::hash, stable for a given build).
std::string fileHash(const fs::path& p);
/// Lists every regular file below `dir` with size and hash in manifest.json.
void writeManifest(const fs::path& dir, const json& extra);

}  // namespace nltomo::io
