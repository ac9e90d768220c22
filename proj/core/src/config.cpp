#include "pme/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "pme/errors.hpp"

namespace pme {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& value) {
  const char* begin = value.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (value.empty() || end != begin + value.size())
    throw ValidationError("config key '" + key + "': bad number '" + value + "'");
  return v;
}

long long to_int(const std::string& key, const std::string& value) {
  const char* begin = value.c_str();
  char* end = nullptr;
  long long v = std::strtoll(begin, &end, 10);
  if (value.empty() || end != begin + value.size())
    throw ValidationError("config key '" + key + "': bad integer '" + value + "'");
  return v;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void set_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "n0") cfg.n0 = static_cast<int>(to_int(key, value));
  else if (key == "alpha") cfg.alpha = to_double(key, value);
  else if (key == "n_max") cfg.n_max = static_cast<int>(to_int(key, value));
  else if (key == "em_eps") cfg.em_eps = to_double(key, value);
  else if (key == "em_max_iter") cfg.em_max_iter = static_cast<int>(to_int(key, value));
  else if (key == "eps_star") cfg.eps_star = to_double(key, value);
  else if (key == "max_outer") cfg.max_outer = static_cast<int>(to_int(key, value));
  else if (key == "knn") cfg.knn = static_cast<int>(to_int(key, value));
  else if (key == "lambda") cfg.lambda = to_double(key, value);
  else if (key == "lambda_grid") {
    cfg.lambda_grid.clear();
    if (!trim(value).empty()) {
      std::istringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ','))
        cfg.lambda_grid.push_back(to_double(key, trim(item)));
    }
  } else if (key == "coarse_per_axis")
    cfg.coarse_per_axis = static_cast<int>(to_int(key, value));
  else if (key == "refine_tol_factor") cfg.refine_tol_factor = to_double(key, value);
  else if (key == "tie_tol_factor") cfg.tie_tol_factor = to_double(key, value);
  else if (key == "projection_max_iter")
    cfg.projection_max_iter = static_cast<int>(to_int(key, value));
  else if (key == "n_pieces") cfg.n_pieces = static_cast<int>(to_int(key, value));
  else if (key == "glue_axis") cfg.glue_axis = static_cast<int>(to_int(key, value));
  else if (key == "score_subsample")
    cfg.score_subsample = static_cast<int>(to_int(key, value));
  else if (key == "threads") cfg.threads = static_cast<int>(to_int(key, value));
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(to_int(key, value));
  else throw ValidationError("unknown config key '" + key + "'");
}

RunConfig load_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected key=value");
    set_key(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  validate_config(base);
  return base;
}

void save_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "# resolved configuration\n";
  out << "n0=" << cfg.n0 << "\n";
  out << "alpha=" << fmt(cfg.alpha) << "\n";
  out << "n_max=" << cfg.n_max << "\n";
  out << "em_eps=" << fmt(cfg.em_eps) << "\n";
  out << "em_max_iter=" << cfg.em_max_iter << "\n";
  out << "eps_star=" << fmt(cfg.eps_star) << "\n";
  out << "max_outer=" << cfg.max_outer << "\n";
  out << "knn=" << cfg.knn << "\n";
  out << "lambda=" << fmt(cfg.lambda) << "\n";
  out << "lambda_grid=";
  for (std::size_t i = 0; i < cfg.lambda_grid.size(); ++i)
    out << (i ? "," : "") << fmt(cfg.lambda_grid[i]);
  out << "\n";
  out << "coarse_per_axis=" << cfg.coarse_per_axis << "\n";
  out << "refine_tol_factor=" << fmt(cfg.refine_tol_factor) << "\n";
  out << "tie_tol_factor=" << fmt(cfg.tie_tol_factor) << "\n";
  out << "projection_max_iter=" << cfg.projection_max_iter << "\n";
  out << "n_pieces=" << cfg.n_pieces << "\n";
  out << "glue_axis=" << cfg.glue_axis << "\n";
  out << "score_subsample=" << cfg.score_subsample << "\n";
  out << "threads=" << cfg.threads << "\n";
  out << "seed=" << cfg.seed << "\n";
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

void validate_config(const RunConfig& cfg) {
  auto fail = [](const std::string& key, const std::string& why) {
    throw ValidationError("config key '" + key + "': " + why);
  };
  if (cfg.n0 < 0) fail("n0", "must be >= 0");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) fail("alpha", "must lie in (0,1)");
  if (cfg.n_max < 0) fail("n_max", "must be >= 0");
  if (!(cfg.em_eps > 0.0)) fail("em_eps", "must be positive");
  if (cfg.em_max_iter < 1) fail("em_max_iter", "must be >= 1");
  if (!(cfg.eps_star > 0.0)) fail("eps_star", "must be positive");
  if (cfg.max_outer < 1) fail("max_outer", "must be >= 1");
  if (cfg.knn < 0) fail("knn", "must be >= 0");
  if (cfg.lambda < 0.0 || !std::isfinite(cfg.lambda)) fail("lambda", "must be >= 0 and finite");
  for (std::size_t i = 0; i < cfg.lambda_grid.size(); ++i) {
    if (!(cfg.lambda_grid[i] > 0.0)) fail("lambda_grid", "entries must be positive");
    if (i > 0 && !(cfg.lambda_grid[i] > cfg.lambda_grid[i - 1]))
      fail("lambda_grid", "must be strictly increasing");
  }
  if (cfg.coarse_per_axis < 0 || cfg.coarse_per_axis == 1)
    fail("coarse_per_axis", "must be 0 (default) or >= 2");
  if (!(cfg.refine_tol_factor > 0.0)) fail("refine_tol_factor", "must be positive");
  if (cfg.tie_tol_factor < 0.0) fail("tie_tol_factor", "must be >= 0");
  if (cfg.projection_max_iter < 1) fail("projection_max_iter", "must be >= 1");
  if (cfg.n_pieces < 3) fail("n_pieces", "must be >= 3");
  if (cfg.glue_axis < -1) fail("glue_axis", "must be -1 (auto) or a 0-based axis");
  if (cfg.score_subsample < 0) fail("score_subsample", "must be >= 0");
  if (cfg.threads < 0) fail("threads", "must be >= 0");
}

ProjectOptions projection_options(const RunConfig& cfg) {
  ProjectOptions p;
  p.coarse_per_axis = cfg.coarse_per_axis;
  p.refine_tol_factor = cfg.refine_tol_factor;
  p.tie_tol_factor = cfg.tie_tol_factor;
  p.max_iter = cfg.projection_max_iter;
  return p;
}

HdmdeOptions reduction_options(const RunConfig& cfg) {
  HdmdeOptions h;
  h.n0 = cfg.n0;
  h.alpha = cfg.alpha;
  h.n_max = cfg.n_max;
  h.seed = cfg.seed;
  h.em.eps = cfg.em_eps;
  h.em.max_iter = cfg.em_max_iter;
  return h;
}

FitOptions fit_options(const RunConfig& cfg) {
  FitOptions f;
  f.eps_star = cfg.eps_star;
  f.max_outer = cfg.max_outer;
  f.knn = cfg.knn;
  f.projection = projection_options(cfg);
  f.reduction = reduction_options(cfg);
  return f;
}

FitClosedOptions closed_options(const RunConfig& cfg) {
  FitClosedOptions c;
  c.d = 2;
  c.lambda = cfg.lambda;
  if (!cfg.lambda_grid.empty()) {
    c.lambda_grid.resize(static_cast<Eigen::Index>(cfg.lambda_grid.size()));
    for (std::size_t i = 0; i < cfg.lambda_grid.size(); ++i)
      c.lambda_grid[static_cast<Eigen::Index>(i)] = cfg.lambda_grid[i];
  }
  c.score_subsample = cfg.score_subsample;
  c.glue_axis = cfg.glue_axis;
  c.knn = cfg.knn;
  c.fit = fit_options(cfg);
  return c;
}

Vector lambda_grid_or_default(const RunConfig& cfg) {
  if (cfg.lambda_grid.empty()) return default_lambda_grid();
  Vector grid(static_cast<Eigen::Index>(cfg.lambda_grid.size()));
  for (std::size_t i = 0; i < cfg.lambda_grid.size(); ++i)
    grid[static_cast<Eigen::Index>(i)] = cfg.lambda_grid[i];
  return grid;
}

}  // namespace pme
