#include "pme/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "pme/errors.hpp"

namespace pme {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] void parse_fail(const std::string& path, long line, const std::string& what) {
  throw ParseError(path + ":" + std::to_string(line) + ": " + what);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.precision(17);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

void finish_out(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& field, const std::string& path, long line) {
  std::string t = trim(field);
  if (t.empty()) parse_fail(path, line, "empty numeric field");
  const char* begin = t.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end != begin + t.size()) parse_fail(path, line, "bad number '" + t + "'");
  return v;
}

long parse_int(const std::string& field, const std::string& path, long line) {
  std::string t = trim(field);
  if (t.empty()) parse_fail(path, line, "empty integer field");
  const char* begin = t.c_str();
  char* end = nullptr;
  long v = std::strtol(begin, &end, 10);
  if (end != begin + t.size()) parse_fail(path, line, "bad integer '" + t + "'");
  return v;
}

// "# name key=value key=value" comment headers.
std::map<std::string, std::string> header_fields(const std::string& line) {
  std::map<std::string, std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) {
    std::size_t eq = tok.find('=');
    if (eq != std::string::npos) out[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return out;
}

struct LineReader {
  std::ifstream in;
  std::string path;
  long line_no = 0;

  LineReader(const std::string& p) : in(open_in(p)), path(p) {}

  // Next non-empty line, comments included (caller inspects '#').
  bool next(std::string& line) {
    while (std::getline(in, line)) {
      ++line_no;
      line = trim(line);
      if (!line.empty()) return true;
    }
    return false;
  }
};

Matrix parse_matrix_rows(LineReader& r, long rows, long cols, const char* what) {
  Matrix out(rows, cols);
  std::string line;
  for (long i = 0; i < rows; ++i) {
    if (!r.next(line) || line[0] == '#')
      parse_fail(r.path, r.line_no, std::string("expected ") + what + " row");
    auto fields = split(line);
    if (static_cast<long>(fields.size()) != cols)
      parse_fail(r.path, r.line_no,
                 std::string(what) + ": expected " + std::to_string(cols) +
                     " fields, got " + std::to_string(fields.size()));
    for (long j = 0; j < cols; ++j)
      out(i, j) = parse_double(fields[static_cast<std::size_t>(j)], r.path, r.line_no);
  }
  return out;
}

}  // namespace

PointCloud load_point_cloud(const std::string& path, bool slice_column) {
  LineReader r(path);
  std::string line;
  std::vector<std::vector<double>> rows;
  std::vector<int> slices;
  long cols = -1;
  bool header_seen = false;
  while (r.next(line)) {
    if (line[0] == '#') {
      auto h = header_fields(line);
      if (!header_seen && line.rfind("# pointcloud", 0) == 0) {
        header_seen = true;
        if (h.count("slices")) slice_column = h["slices"] != "0";
      }
      continue;
    }
    auto fields = split(line);
    if (cols < 0) {
      cols = static_cast<long>(fields.size());
      long d = cols - (slice_column ? 1 : 0);
      if (d < 1) parse_fail(path, r.line_no, "no coordinate columns");
    } else if (static_cast<long>(fields.size()) != cols) {
      parse_fail(path, r.line_no,
                 "inconsistent column count (expected " + std::to_string(cols) + ")");
    }
    std::vector<double> row;
    long d = cols - (slice_column ? 1 : 0);
    for (long j = 0; j < d; ++j)
      row.push_back(parse_double(fields[static_cast<std::size_t>(j)], path, r.line_no));
    if (slice_column)
      slices.push_back(static_cast<int>(
          parse_int(fields[static_cast<std::size_t>(cols - 1)], path, r.line_no)));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(path + ": no data rows");
  PointCloud cloud;
  cloud.points.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      cloud.points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rows[i][j];
  cloud.slice = std::move(slices);
  if (!cloud.points.allFinite()) throw ParseError(path + ": non-finite coordinate");
  return cloud;
}

void save_point_cloud(const std::string& path, const PointCloud& cloud) {
  std::ofstream out = open_out(path);
  out << "# pointcloud D=" << cloud.dim() << " slices=" << (cloud.has_slices() ? 1 : 0)
      << "\n";
  for (int i = 0; i < cloud.count(); ++i) {
    for (int j = 0; j < cloud.dim(); ++j) {
      if (j) out << ',';
      out << fmt(cloud.points(i, j));
    }
    if (cloud.has_slices()) out << ',' << cloud.slice[static_cast<std::size_t>(i)];
    out << '\n';
  }
  finish_out(out, path);
}

void save_waj(const std::string& path, const Waj& waj) {
  std::ofstream out = open_out(path);
  out << "# waj N=" << waj.size() << " D=" << waj.dim() << " sigma=" << fmt(waj.sigma)
      << " alpha=" << fmt(waj.alpha) << " n0=" << waj.n0 << "\n";
  for (int j = 0; j < waj.size(); ++j) {
    for (int l = 0; l < waj.dim(); ++l) out << fmt(waj.nodes(j, l)) << ',';
    out << fmt(waj.weights[j]) << '\n';
  }
  finish_out(out, path);
}

Waj load_waj(const std::string& path) {
  LineReader r(path);
  std::string line;
  if (!r.next(line) || line.rfind("# waj", 0) != 0)
    parse_fail(path, r.line_no, "missing node-summary header");
  auto h = header_fields(line);
  if (!h.count("N") || !h.count("D"))
    parse_fail(path, r.line_no, "header lacks N= or D=");
  long N = parse_int(h["N"], path, r.line_no);
  long D = parse_int(h["D"], path, r.line_no);
  if (N < 1 || D < 1) parse_fail(path, r.line_no, "bad N/D");
  Waj waj;
  waj.sigma = h.count("sigma") ? parse_double(h["sigma"], path, r.line_no) : 0.0;
  waj.alpha = h.count("alpha") ? parse_double(h["alpha"], path, r.line_no) : 0.0;
  waj.n0 = h.count("n0") ? static_cast<int>(parse_int(h["n0"], path, r.line_no)) : 0;
  Matrix rows = parse_matrix_rows(r, N, D + 1, "node");
  waj.nodes = rows.leftCols(D);
  waj.weights = rows.col(D);
  return waj;
}

void save_z_reports(const std::string& path, const std::vector<ZReport>& reports) {
  std::ofstream out = open_out(path);
  out << "# zreports rows=" << reports.size() << "\n";
  out << "# model_size,z,delta_mean,delta_sd\n";
  for (const auto& rep : reports)
    out << rep.model_size << ',' << fmt(rep.z) << ',' << fmt(rep.delta_mean) << ','
        << fmt(rep.delta_sd) << '\n';
  finish_out(out, path);
}

void save_spline_map(const std::string& path, const SplineMap& map,
                     const SplineMetrics* metrics) {
  std::ofstream out = open_out(path);
  out << "# splinemap d=" << map.d << " D=" << map.D << " N=" << map.knot_count()
      << "\n";
  if (metrics)
    out << "# metrics lambda=" << fmt(metrics->lambda) << " msd=" << fmt(metrics->msd)
        << " n_iter=" << metrics->n_iter << " converged=" << (metrics->converged ? 1 : 0)
        << "\n";
  out << "# section knots\n";
  for (int i = 0; i < map.knot_count(); ++i) {
    for (int j = 0; j < map.d; ++j) out << (j ? "," : "") << fmt(map.centers(i, j));
    out << '\n';
  }
  out << "# section kernel\n";
  for (int i = 0; i < map.knot_count(); ++i) {
    for (int j = 0; j < map.D; ++j) out << (j ? "," : "") << fmt(map.kernel(i, j));
    out << '\n';
  }
  out << "# section affine\n";
  for (int i = 0; i < map.d + 1; ++i) {
    for (int j = 0; j < map.D; ++j) out << (j ? "," : "") << fmt(map.affine(i, j));
    out << '\n';
  }
  finish_out(out, path);
}

SplineMap load_spline_map(const std::string& path, SplineMetrics* metrics) {
  LineReader r(path);
  std::string line;
  if (!r.next(line) || line.rfind("# splinemap", 0) != 0)
    parse_fail(path, r.line_no, "missing map header");
  auto h = header_fields(line);
  if (!h.count("d") || !h.count("D") || !h.count("N"))
    parse_fail(path, r.line_no, "header lacks d=, D= or N=");
  SplineMap map;
  map.d = static_cast<int>(parse_int(h["d"], path, r.line_no));
  map.D = static_cast<int>(parse_int(h["D"], path, r.line_no));
  long N = parse_int(h["N"], path, r.line_no);
  if (map.d < 1 || map.d > 3 || map.D < map.d || N < 1)
    parse_fail(path, r.line_no, "implausible dimensions");

  if (metrics) *metrics = SplineMetrics{};
  auto expect_section = [&](const char* name) {
    while (r.next(line)) {
      if (line.rfind("# metrics", 0) == 0) {
        if (metrics) {
          auto m = header_fields(line);
          if (m.count("lambda")) metrics->lambda = parse_double(m["lambda"], path, r.line_no);
          if (m.count("msd")) metrics->msd = parse_double(m["msd"], path, r.line_no);
          if (m.count("n_iter"))
            metrics->n_iter = static_cast<int>(parse_int(m["n_iter"], path, r.line_no));
          if (m.count("converged"))
            metrics->converged = parse_int(m["converged"], path, r.line_no) != 0;
        }
        continue;
      }
      if (line == std::string("# section ") + name) return;
      parse_fail(r.path, r.line_no, std::string("expected '# section ") + name + "'");
    }
    parse_fail(r.path, r.line_no, std::string("missing section ") + name);
  };
  expect_section("knots");
  map.centers = parse_matrix_rows(r, N, map.d, "knot");
  expect_section("kernel");
  map.kernel = parse_matrix_rows(r, N, map.D, "kernel");
  expect_section("affine");
  map.affine = parse_matrix_rows(r, map.d + 1, map.D, "affine");
  return map;
}

namespace {

std::string piece_name(int k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "piece_%02d.csv", k);
  return buf;
}

std::string junction_name(int k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "junction_%02d.csv", k);
  return buf;
}

void save_junction(const std::string& path, const GlueJunction& J) {
  std::ofstream out = open_out(path);
  const int D = J.dim();
  out << "# junction D=" << D << " g=" << J.g << "\n";
  out << "# section rotation\n";
  for (int i = 0; i < D; ++i) {
    for (int j = 0; j < D; ++j) out << (j ? "," : "") << fmt(J.R(i, j));
    out << '\n';
  }
  auto dump_box = [&](const char* name, const Matrix& box) {
    out << "# section " << name << "\n";
    for (int i = 0; i < D; ++i)
      out << fmt(box(i, 0)) << ',' << fmt(box(i, 1)) << '\n';
  };
  dump_box("box", J.box);
  dump_box("databox", J.data_box);
  out << "# section rotmean\n";
  for (int j = 0; j < D; ++j) out << (j ? "," : "") << fmt(J.rot_mean[j]);
  out << '\n';
  out << "# section anchors\n";
  for (int j = 0; j < D; ++j) out << (j ? "," : "") << fmt(J.xi1[j]);
  out << '\n';
  for (int j = 0; j < D; ++j) out << (j ? "," : "") << fmt(J.xi2[j]);
  out << '\n';
  finish_out(out, path);
}

GlueJunction load_junction(const std::string& path) {
  LineReader r(path);
  std::string line;
  if (!r.next(line) || line.rfind("# junction", 0) != 0)
    parse_fail(path, r.line_no, "missing junction header");
  auto h = header_fields(line);
  if (!h.count("D") || !h.count("g")) parse_fail(path, r.line_no, "header lacks D= or g=");
  long D = parse_int(h["D"], path, r.line_no);
  GlueJunction J;
  J.g = static_cast<int>(parse_int(h["g"], path, r.line_no));
  auto expect_section = [&](const char* name) {
    if (!r.next(line) || line != std::string("# section ") + name)
      parse_fail(r.path, r.line_no, std::string("expected '# section ") + name + "'");
  };
  expect_section("rotation");
  J.R = parse_matrix_rows(r, D, D, "rotation");
  expect_section("box");
  J.box = parse_matrix_rows(r, D, 2, "box");
  expect_section("databox");
  J.data_box = parse_matrix_rows(r, D, 2, "databox");
  expect_section("rotmean");
  J.rot_mean = parse_matrix_rows(r, 1, D, "rotmean").row(0).transpose();
  expect_section("anchors");
  Matrix anchors = parse_matrix_rows(r, 2, D, "anchors");
  J.xi1 = anchors.row(0).transpose();
  J.xi2 = anchors.row(1).transpose();
  if (J.g < 0 || J.g >= D) parse_fail(path, r.line_no, "blend axis out of range");
  J.B_L = J.box(J.g, 0);
  J.B_U = J.box(J.g, 1);
  return J;
}

}  // namespace

void save_closed_fit(const std::string& dir, const ClosedFit& cf) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
  const int P = cf.piece_count();
  if (P == 0) throw ValidationError("save_closed_fit: empty fit");
  {
    std::ofstream out = open_out(dir + "/manifest.txt");
    out << "# closedfit manifest\n";
    out << "d=" << cf.d << "\nD=" << cf.D << "\npieces=" << P << "\n";
    for (int k = 0; k < P; ++k) {
      out << "piece_" << k << "=" << piece_name(k) << "\n";
      out << "junction_" << k << "=" << junction_name(k) << "\n";
    }
    finish_out(out, dir + "/manifest.txt");
  }
  for (int k = 0; k < P; ++k) {
    SplineMetrics m;
    if (k < static_cast<int>(cf.info.size())) {
      const PieceInfo& info = cf.info[static_cast<std::size_t>(k)];
      m = SplineMetrics{info.lambda, info.msd, info.n_iter, info.converged};
    }
    save_spline_map(dir + "/" + piece_name(k), cf.pieces[static_cast<std::size_t>(k)], &m);
    save_junction(dir + "/" + junction_name(k), cf.junctions[static_cast<std::size_t>(k)]);
  }
  {
    std::ofstream out = open_out(dir + "/sectors.csv");
    out << "# sectors rows=" << cf.sector.size() << "\n";
    for (int s : cf.sector) out << s << '\n';
    finish_out(out, dir + "/sectors.csv");
  }
}

ClosedFit load_closed_fit(const std::string& dir) {
  const std::string manifest = dir + "/manifest.txt";
  LineReader r(manifest);
  std::string line;
  std::map<std::string, std::string> kv;
  while (r.next(line)) {
    if (line[0] == '#') continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) parse_fail(manifest, r.line_no, "expected key=value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  for (const char* key : {"d", "D", "pieces"})
    if (!kv.count(key))
      throw ParseError(manifest + ": missing key '" + key + "'");
  ClosedFit cf;
  cf.d = static_cast<int>(parse_int(kv["d"], manifest, 0));
  cf.D = static_cast<int>(parse_int(kv["D"], manifest, 0));
  long P = parse_int(kv["pieces"], manifest, 0);
  if (P < 1) throw ParseError(manifest + ": pieces must be positive");
  for (int k = 0; k < P; ++k) {
    std::string pk = "piece_" + std::to_string(k);
    std::string jk = "junction_" + std::to_string(k);
    if (!kv.count(pk) || !kv.count(jk))
      throw ParseError(manifest + ": missing entry for ring element " + std::to_string(k));
    SplineMetrics m;
    cf.pieces.push_back(load_spline_map(dir + "/" + kv[pk], &m));
    cf.info.push_back({m.lambda, m.msd, m.n_iter, m.converged});
    cf.junctions.push_back(load_junction(dir + "/" + kv[jk]));
  }
  const std::string sectors = dir + "/sectors.csv";
  if (std::filesystem::exists(sectors)) {
    LineReader sr(sectors);
    while (sr.next(line)) {
      if (line[0] == '#') continue;
      cf.sector.push_back(static_cast<int>(parse_int(line, sectors, sr.line_no)));
    }
  }
  for (const auto& piece : cf.pieces)
    if (piece.d != cf.d || piece.D != cf.D)
      throw ParseError(dir + ": piece dimensions disagree with manifest");
  for (const auto& J : cf.junctions)
    if (J.dim() != cf.D) throw ParseError(dir + ": junction dimensions disagree");
  return cf;
}

void save_grid_labels(const std::string& path, const GridLabels& labels) {
  std::ofstream out = open_out(path);
  out << "# gridlabels D=" << labels.points.cols() << " rows=" << labels.count()
      << " unresolved=" << labels.n_unresolved
      << " degenerate_lines=" << labels.n_degenerate_lines << "\n";
  for (Eigen::Index i = 0; i < labels.points.rows(); ++i) {
    const std::size_t si = static_cast<std::size_t>(i);
    for (Eigen::Index j = 0; j < labels.points.cols(); ++j)
      out << fmt(labels.points(i, j)) << ',';
    if (labels.labeled[si])
      out << to_string(labels.label[si]) << ',' << to_string(labels.provenance[si]);
    else
      out << "unlabeled,none";
    out << '\n';
  }
  finish_out(out, path);
}

GridLabels load_grid_labels(const std::string& path) {
  LineReader r(path);
  std::string line;
  if (!r.next(line) || line.rfind("# gridlabels", 0) != 0)
    parse_fail(path, r.line_no, "missing grid-labels header");
  auto h = header_fields(line);
  if (!h.count("D") || !h.count("rows"))
    parse_fail(path, r.line_no, "header lacks D= or rows=");
  long D = parse_int(h["D"], path, r.line_no);
  long M = parse_int(h["rows"], path, r.line_no);
  GridLabels out;
  out.n_unresolved =
      h.count("unresolved") ? static_cast<int>(parse_int(h["unresolved"], path, 1)) : 0;
  out.n_degenerate_lines = h.count("degenerate_lines")
                               ? static_cast<int>(parse_int(h["degenerate_lines"], path, 1))
                               : 0;
  out.points.resize(M, D);
  out.label.assign(static_cast<std::size_t>(M), Label::Exterior);
  out.provenance.assign(static_cast<std::size_t>(M), Provenance::None);
  out.labeled.assign(static_cast<std::size_t>(M), 0);
  for (long i = 0; i < M; ++i) {
    if (!r.next(line) || line[0] == '#') parse_fail(path, r.line_no, "expected label row");
    auto fields = split(line);
    if (static_cast<long>(fields.size()) != D + 2)
      parse_fail(path, r.line_no, "expected coords,label,provenance");
    for (long j = 0; j < D; ++j)
      out.points(i, j) = parse_double(fields[static_cast<std::size_t>(j)], path, r.line_no);
    const std::size_t si = static_cast<std::size_t>(i);
    std::string lab = trim(fields[static_cast<std::size_t>(D)]);
    std::string prov = trim(fields[static_cast<std::size_t>(D + 1)]);
    if (lab == "unlabeled") {
      out.labeled[si] = 0;
    } else if (lab == "interior" || lab == "exterior") {
      out.labeled[si] = 1;
      out.label[si] = lab == "interior" ? Label::Interior : Label::Exterior;
    } else {
      parse_fail(path, r.line_no, "unknown label '" + lab + "'");
    }
    if (prov == "box-reject") out.provenance[si] = Provenance::BoxReject;
    else if (prov == "scenario-i") out.provenance[si] = Provenance::ScenarioI;
    else if (prov == "scenario-ii") out.provenance[si] = Provenance::ScenarioII;
    else if (prov == "knn-fallback") out.provenance[si] = Provenance::KnnFallback;
    else if (prov == "none") out.provenance[si] = Provenance::None;
    else parse_fail(path, r.line_no, "unknown provenance '" + prov + "'");
  }
  return out;
}

namespace {

Matrix knot_box(const SplineMap& f) {
  Matrix box(f.d, 2);
  box.col(0) = f.centers.colwise().minCoeff().transpose();
  box.col(1) = f.centers.colwise().maxCoeff().transpose();
  return box;
}

void write_mesh(const std::string& path, const Matrix& vertices, int nu, int nv) {
  std::ofstream out = open_out(path);
  out << "# mesh vertices=" << vertices.rows() << "\n";
  for (Eigen::Index i = 0; i < vertices.rows(); ++i)
    out << "v " << fmt(vertices(i, 0)) << ' ' << fmt(vertices(i, 1)) << ' '
        << fmt(vertices(i, 2)) << '\n';
  for (int i = 0; i + 1 < nu; ++i) {
    for (int j = 0; j + 1 < nv; ++j) {
      int a = i * nv + j + 1;  // 1-based
      int b = a + 1;
      int c = a + nv;
      int e = c + 1;
      out << "f " << a << ' ' << b << ' ' << e << '\n';
      out << "f " << a << ' ' << e << ' ' << c << '\n';
    }
  }
  finish_out(out, path);
}

Matrix parameter_lattice(const SplineMap& f, int per_axis) {
  Matrix box = knot_box(f);
  GridSpec spec;
  spec.lo = box.col(0);
  spec.hi = box.col(1);
  spec.n.assign(static_cast<std::size_t>(f.d), per_axis);
  return make_grid(spec);
}

}  // namespace

void save_mesh(const std::string& path, const SplineMap& f, int per_axis) {
  if (f.d != 2 || f.D != 3)
    throw ValidationError("save_mesh: only d=2, D=3 maps can be meshed");
  if (per_axis < 2) throw ValidationError("save_mesh: per_axis must be >= 2");
  Matrix params = parameter_lattice(f, per_axis);
  Matrix vertices = f.eval_rows(params);
  write_mesh(path, vertices, per_axis, per_axis);
}

void save_closed_mesh(const std::string& dir, const ClosedFit& cf, int per_axis) {
  if (cf.d != 2 || cf.D != 3)
    throw ValidationError("save_closed_mesh: only d=2, D=3 fits can be meshed");
  if (per_axis < 2) throw ValidationError("save_closed_mesh: per_axis must be >= 2");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
  const int P = cf.piece_count();
  for (int k = 0; k < P; ++k) {
    const SplineMap& f = cf.pieces[static_cast<std::size_t>(k)];
    Matrix params = parameter_lattice(f, per_axis);
    Matrix vertices = f.eval_rows(params);
    // Junction k blends pieces (k, k+1); junction k-1 blends (k-1, k).
    const int adjacent[2] = {k, (k + P - 1) % P};
    for (int which = 0; which < 2; ++which) {
      int jk = adjacent[which];
      const GlueJunction& J = cf.junctions[static_cast<std::size_t>(jk)];
      const SplineMap& f1 = cf.pieces[static_cast<std::size_t>(jk)];
      const SplineMap& f2 = cf.pieces[static_cast<std::size_t>((jk + 1) % P)];
      for (Eigen::Index v = 0; v < vertices.rows(); ++v) {
        Vector zeta = (J.R * vertices.row(v).transpose()).head(cf.d);
        bool inside = true;
        for (int l = 0; l < cf.d; ++l)
          if (zeta[l] < J.box(l, 0) || zeta[l] > J.box(l, 1)) inside = false;
        if (!inside) continue;
        try {
          vertices.row(v) = glue_eval(f1, f2, J, zeta).transpose();
        } catch (const NumericalError&) {
          // Fringe inversion failure: keep the raw piece value (visual export).
        }
      }
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "piece_%02d.obj", k);
    write_mesh(dir + "/" + std::string(buf), vertices, per_axis, per_axis);
  }
}

}  // namespace pme
