// Command-line front end: generate / reduce / fit / fit-closed / interior /
// benchmark. Every command resolves its options as compiled defaults, then
// the --config file, then explicit flags, and dumps the resolved
// configuration next to its outputs so any run can be reproduced from its
// artifacts. Stdout carries a one-line JSON summary per command; exit codes
// are 0 (success), 2 (validation or usage), 3 (numerical failure),
// 4 (file I/O).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "pme/config.hpp"
#include "pme/dataset.hpp"
#include "pme/errors.hpp"
#include "pme/fit.hpp"
#include "pme/gluing.hpp"
#include "pme/hdmde.hpp"
#include "pme/interior.hpp"
#include "pme/io.hpp"
#include "pme/parallel.hpp"
#include "pme/projection.hpp"
#include "pme/types.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// small parsing helpers

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_real(const std::string& tok, const std::string& what) {
  try {
    std::size_t pos = 0;
    double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw pme::ValidationError(what + ": cannot parse '" + tok + "' as a real");
  }
}

int parse_int(const std::string& tok, const std::string& what) {
  try {
    std::size_t pos = 0;
    int v = std::stoi(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw pme::ValidationError(what + ": cannot parse '" + tok + "' as an integer");
  }
}

// "x0:x1:nx,y0:y1:ny[,z0:z1:nz]" -> axis-aligned lattice
pme::GridSpec parse_grid_spec(const std::string& text) {
  std::vector<std::string> axes = split(text, ',');
  pme::GridSpec gs;
  gs.lo.resize(static_cast<Eigen::Index>(axes.size()));
  gs.hi.resize(static_cast<Eigen::Index>(axes.size()));
  for (std::size_t a = 0; a < axes.size(); ++a) {
    std::vector<std::string> parts = split(axes[a], ':');
    if (parts.size() != 3)
      throw pme::ValidationError(
          "--grid: each axis must be lo:hi:count, got '" + axes[a] + "'");
    gs.lo[static_cast<Eigen::Index>(a)] = parse_real(parts[0], "--grid");
    gs.hi[static_cast<Eigen::Index>(a)] = parse_real(parts[1], "--grid");
    int n = parse_int(parts[2], "--grid");
    if (n < 2) throw pme::ValidationError("--grid: per-axis count must be >= 2");
    if (!(gs.hi[static_cast<Eigen::Index>(a)] > gs.lo[static_cast<Eigen::Index>(a)]))
      throw pme::ValidationError("--grid: hi must exceed lo on every axis");
    gs.n.push_back(n);
  }
  return gs;
}

pme::Vector parse_point(const std::string& text, const std::string& what) {
  std::vector<std::string> parts = split(text, ',');
  pme::Vector v(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = parse_real(parts[i], what);
  return v;
}

std::string grid_to_string(const pme::GridSpec& gs) {
  std::ostringstream os;
  for (int a = 0; a < gs.dim(); ++a) {
    if (a) os << ',';
    os << gs.lo[a] << ':' << gs.hi[a] << ':' << gs.n[static_cast<std::size_t>(a)];
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// resolved-configuration dump ("alongside outputs" reproducibility contract)

std::string g_command_line;

// For directory outputs: DIR/config.txt. For file outputs: FILE.config.txt.
std::string config_dump_path(const std::string& out, bool out_is_dir) {
  if (out_is_dir) return (fs::path(out) / "config.txt").string();
  return out + ".config.txt";
}

void dump_resolved_config(const std::string& out, bool out_is_dir,
                          const pme::RunConfig& cfg) {
  std::string path = config_dump_path(out, out_is_dir);
  pme::save_config(path, cfg);
  std::ofstream f(path, std::ios::app);
  if (!f) throw pme::IoError("cannot append command line to " + path);
  f << "# command: " << g_command_line << "\n";
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw pme::IoError("cannot create directory " + dir + ": " + ec.message());
}

// Shared flag bundle: every subcommand honors config < flags precedence.
struct ConfigCli {
  std::string config_path;
  int threads = 0;
  std::uint64_t seed = 0;
  CLI::Option* threads_opt = nullptr;
  CLI::Option* seed_opt = nullptr;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path,
                    "key=value options file (defaults < config < flags)");
    threads_opt = cmd->add_option("--threads", threads,
                                  "cap worker threads (0 = all hardware threads)");
    seed_opt = cmd->add_option("--seed", seed, "random seed");
  }

  pme::RunConfig resolve() const {
    pme::RunConfig cfg;
    if (!config_path.empty()) cfg = pme::load_config(config_path, cfg);
    if (threads_opt && threads_opt->count() > 0) cfg.threads = threads;
    if (seed_opt && seed_opt->count() > 0) cfg.seed = seed;
    return cfg;
  }
};

void finalize(pme::RunConfig& cfg) {
  pme::validate_config(cfg);
  pme::set_max_threads(cfg.threads);
}

void emit(const json& j) { std::cout << j.dump() << std::endl; }

// ---------------------------------------------------------------------------
// generate

struct GenerateArgs {
  ConfigCli common;
  std::string setting = "fig3c";
  int n = 1000;
  int slices = 0;
  std::string out;
};

void run_generate(GenerateArgs& a) {
  pme::RunConfig cfg = a.common.resolve();
  finalize(cfg);
  pme::GeneratorSpec spec{pme::setting_from_name(a.setting), a.n, cfg.seed};
  pme::PointCloud cloud = pme::generate(spec);
  if (a.slices > 0) {
    if (cloud.dim() != 3)
      throw pme::ValidationError("--slices: slice tagging needs 3-D data");
    pme::GridSpec gs;
    gs.lo = cloud.points.colwise().minCoeff().transpose();
    gs.hi = cloud.points.colwise().maxCoeff().transpose();
    gs.n = {2, 2, a.slices};
    pme::tag_slices(cloud, gs);
  }
  pme::save_point_cloud(a.out, cloud);
  dump_resolved_config(a.out, false, cfg);
  emit(json{{"command", "generate"},
            {"setting", a.setting},
            {"n", cloud.count()},
            {"dim", cloud.dim()},
            {"seed", cfg.seed},
            {"sliced", a.slices > 0},
            {"out", a.out}});
}

// ---------------------------------------------------------------------------
// reduce

struct ReduceArgs {
  ConfigCli common;
  std::string in, out;
  double alpha = 0.05;
  int n0 = 0;
  int n_max = 0;
  CLI::Option* alpha_opt = nullptr;
  CLI::Option* n0_opt = nullptr;
  CLI::Option* n_max_opt = nullptr;
};

void run_reduce(ReduceArgs& a) {
  pme::RunConfig cfg = a.common.resolve();
  if (a.alpha_opt->count() > 0) cfg.alpha = a.alpha;
  if (a.n0_opt->count() > 0) cfg.n0 = a.n0;
  if (a.n_max_opt->count() > 0) cfg.n_max = a.n_max;
  finalize(cfg);
  pme::PointCloud cloud = pme::load_point_cloud(a.in);
  pme::HdmdeResult res = pme::hdmde(cloud.points, pme::reduction_options(cfg));
  pme::save_waj(a.out, res.waj);
  std::string trace_path = a.out + ".trace.csv";
  pme::save_z_reports(trace_path, res.trace);
  dump_resolved_config(a.out, false, cfg);
  emit(json{{"command", "reduce"},
            {"in", a.in},
            {"n_points", cloud.count()},
            {"n_nodes", static_cast<int>(res.waj.nodes.rows())},
            {"sigma", res.waj.sigma},
            {"sizes_tested", static_cast<int>(res.trace.size())},
            {"out", a.out},
            {"trace", trace_path}});
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  ConfigCli common;
  std::string in, out;
  int d = 1;
  double lambda = 0.0;
  bool select = false;
  bool mesh = false;
  int n0 = 0;
  CLI::Option* lambda_opt = nullptr;
  CLI::Option* n0_opt = nullptr;
};

json fit_artifacts(const std::string& dir, const pme::FitResult& fr, bool mesh) {
  ensure_dir(dir);
  pme::SplineMetrics metrics{fr.lambda, fr.msd, fr.n_iter, fr.converged};
  std::string map_path = (fs::path(dir) / "map.csv").string();
  pme::save_spline_map(map_path, fr.map, &metrics);
  std::string waj_path = (fs::path(dir) / "nodes.csv").string();
  pme::save_waj(waj_path, fr.waj);
  json j{{"lambda", fr.lambda},
         {"msd", fr.msd},
         {"n_iter", fr.n_iter},
         {"converged", fr.converged},
         {"returned_best_iterate", fr.returned_best},
         {"map", map_path},
         {"nodes", waj_path}};
  if (mesh) {
    if (fr.map.d != 2 || fr.map.D != 3)
      throw pme::ValidationError("--mesh: meshes are defined for d=2, D=3 fits");
    std::string mesh_path = (fs::path(dir) / "surface.obj").string();
    pme::save_mesh(mesh_path, fr.map);
    j["mesh"] = mesh_path;
  }
  return j;
}

void run_fit(FitArgs& a) {
  pme::RunConfig cfg = a.common.resolve();
  if (a.lambda_opt->count() > 0) cfg.lambda = a.lambda;
  if (a.n0_opt->count() > 0) cfg.n0 = a.n0;
  finalize(cfg);
  pme::PointCloud cloud = pme::load_point_cloud(a.in);
  pme::FitOptions fopt = pme::fit_options(cfg);

  json j{{"command", "fit"}, {"in", a.in}, {"d", a.d}, {"out", a.out}};
  if (a.select || cfg.lambda <= 0.0) {
    pme::SelectionResult sel =
        pme::select_lambda(cloud.points, a.d, pme::lambda_grid_or_default(cfg), fopt);
    j.update(fit_artifacts(a.out, sel.best, a.mesh));
    j["selected"] = true;
    j["k"] = sel.best_index;
    std::string sel_path = (fs::path(a.out) / "selection.csv").string();
    std::ofstream f(sel_path);
    if (!f) throw pme::IoError("cannot write " + sel_path);
    f << "# lambda selection trace: one row per grid value\n";
    f << "k,lambda,test_msd,selected\n";
    for (Eigen::Index g = 0; g < sel.grid.size(); ++g) {
      f.precision(17);
      f << g << ',' << sel.grid[g] << ',' << sel.msds[g] << ','
        << (g == sel.best_index ? 1 : 0) << "\n";
    }
    j["selection"] = sel_path;
  } else {
    pme::FitResult fr = pme::pme_fit(cloud.points, a.d, cfg.lambda, fopt);
    j.update(fit_artifacts(a.out, fr, a.mesh));
    j["selected"] = false;
  }
  dump_resolved_config(a.out, true, cfg);
  emit(j);
}

// ---------------------------------------------------------------------------
// fit-closed

struct FitClosedArgs {
  ConfigCli common;
  std::string in, out;
  int pieces = 0;
  int d = 2;
  bool mesh = false;
  CLI::Option* pieces_opt = nullptr;
};

void run_fit_closed(FitClosedArgs& a) {
  pme::RunConfig cfg = a.common.resolve();
  if (a.pieces_opt->count() > 0) cfg.n_pieces = a.pieces;
  finalize(cfg);
  pme::PointCloud cloud = pme::load_point_cloud(a.in);
  pme::FitClosedOptions copt = pme::closed_options(cfg);
  copt.d = a.d;
  pme::ClosedFit cf = pme::fit_closed(cloud.points, cfg.n_pieces, copt);
  ensure_dir(a.out);
  pme::save_closed_fit(a.out, cf);
  if (a.mesh) pme::save_closed_mesh(a.out, cf);
  dump_resolved_config(a.out, true, cfg);
  double msd_sum = 0.0;
  int iters = 0;
  bool all_converged = true;
  for (const pme::PieceInfo& info : cf.info) {
    msd_sum += info.msd;
    iters += info.n_iter;
    all_converged = all_converged && info.converged;
  }
  emit(json{{"command", "fit-closed"},
            {"in", a.in},
            {"pieces", cf.piece_count()},
            {"d", cf.d},
            {"dim", cf.D},
            {"mean_piece_msd", cf.piece_count() ? msd_sum / cf.piece_count() : 0.0},
            {"total_iterations", iters},
            {"all_converged", all_converged},
            {"meshed", a.mesh},
            {"out", a.out}});
}

// ---------------------------------------------------------------------------
// interior

struct InteriorArgs {
  ConfigCli common;
  std::string model, in, out, grid, ref;
  bool naive = false;
  bool sphere_truth = false;
};

void run_interior(InteriorArgs& a) {
  pme::RunConfig cfg = a.common.resolve();
  finalize(cfg);
  pme::GridSpec gs = parse_grid_spec(a.grid);
  json j{{"command", "interior"}, {"grid", grid_to_string(gs)}, {"out", a.out}};

  pme::GridLabels labels;
  if (a.naive) {
    if (a.in.empty())
      throw pme::ValidationError("--naive needs --in with slice-tagged points");
    pme::PointCloud cloud = pme::load_point_cloud(a.in, true);
    labels = pme::naive_slice_interior(cloud, gs);
    j["method"] = "slice-scan";
    j["degenerate_lines"] = labels.n_degenerate_lines;
  } else {
    if (a.model.empty())
      throw pme::ValidationError("interior needs --model DIR (or --naive --in FILE)");
    if (a.ref.empty())
      throw pme::ValidationError("interior needs --ref x,y,... marking the inside");
    pme::ClosedFit cf = pme::load_closed_fit(a.model);
    pme::Vector c_star = parse_point(a.ref, "--ref");
    if (c_star.size() != cf.D)
      throw pme::ValidationError("--ref: expected " + std::to_string(cf.D) +
                                 " coordinates");
    if (gs.dim() != cf.D)
      throw pme::ValidationError("--grid: expected " + std::to_string(cf.D) +
                                 " axes");
    labels = pme::classify_grid(cf, c_star, pme::make_grid(gs),
                                pme::projection_options(cfg));
    j["method"] = "orientation";
    j["model"] = a.model;
    j["unresolved"] = labels.n_unresolved;
  }

  pme::save_grid_labels(a.out, labels);
  dump_resolved_config(a.out, false, cfg);

  int n_interior = 0, n_exterior = 0, n_unlabeled = 0;
  for (int i = 0; i < labels.count(); ++i) {
    if (!labels.labeled[static_cast<std::size_t>(i)]) {
      ++n_unlabeled;
    } else if (labels.label[static_cast<std::size_t>(i)] == pme::Label::Interior) {
      ++n_interior;
    } else {
      ++n_exterior;
    }
  }
  j["points"] = labels.count();
  j["interior"] = n_interior;
  j["exterior"] = n_exterior;
  j["unlabeled"] = n_unlabeled;
  if (a.sphere_truth) {
    pme::ErrorRateReport rep =
        pme::error_rate(labels, pme::sphere_truth(labels.points));
    j["error_rate"] = rep.rate;
    j["compared"] = rep.n_compared;
    j["errors"] = rep.n_errors;
  }
  emit(j);
}

// ---------------------------------------------------------------------------
// benchmark

struct BenchmarkArgs {
  ConfigCli common;
  std::string suite, out;
  int runs = 3;
  int n = 0;  // 0: suite default
  bool full = false;
};

struct RunRow {
  std::string setting;
  std::string method;
  double value = 0.0;
  int n_iter = 0;
  bool failed = false;
  std::string error;
};

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) /
                               static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

// Weight claimed by the off-manifold cluster relative to the mean weight of
// the other nodes: the outlier node is the one nearest the cluster centroid.
double outlier_weight_ratio(const pme::Waj& waj, const pme::Vector& outlier_centroid) {
  Eigen::Index best = 0;
  (waj.nodes.rowwise() - outlier_centroid.transpose())
      .rowwise()
      .squaredNorm()
      .minCoeff(&best);
  double theta_out = waj.weights[best];
  double rest = waj.weights.sum() - theta_out;
  int others = static_cast<int>(waj.weights.size()) - 1;
  if (others <= 0 || rest <= 0.0) return std::numeric_limits<double>::infinity();
  return theta_out / (rest / others);
}

// Table-replication reduction sizes. The size rule has little power at
// desk-scale I, so the starting size effectively sets the node count; these
// match the source experiments' regimes (see the benchmark docs).
int table_n0(pme::Setting s) {
  switch (s) {
    case pme::Setting::Fig3b:
      return 20;  // long low-frequency wave needs more nodes
    default:
      return 10;
  }
}

class BenchmarkWriter {
 public:
  BenchmarkWriter(const std::string& dir, const std::string& suite) {
    ensure_dir(dir);
    runs_path_ = (fs::path(dir) / "runs.csv").string();
    summary_path_ = (fs::path(dir) / "summary.csv").string();
    runs_.open(runs_path_);
    if (!runs_) throw pme::IoError("cannot write " + runs_path_);
    runs_ << "# per-run rows for suite " << suite << "\n";
    runs_ << "run,setting,method,seed,value,n_iter,status\n";
  }

  // value column: MSD for the table suites, weight ratio for outliers,
  // error rate for sphere.
  void row(int run, const RunRow& r, std::uint64_t seed) {
    runs_.precision(17);
    runs_ << run << ',' << r.setting << ',' << r.method << ',' << seed << ',';
    if (r.failed) {
      runs_ << "nan,0,failed: " << r.error << "\n";
    } else {
      runs_ << r.value << ',' << r.n_iter << ",ok\n";
    }
    runs_.flush();
    rows_.push_back(r);
  }

  void write_summary() {
    std::ofstream f(summary_path_);
    if (!f) throw pme::IoError("cannot write " + summary_path_);
    f << "setting,method,mean,sd,itr\n";
    f.precision(17);
    std::vector<std::pair<std::string, std::string>> keys;
    for (const RunRow& r : rows_) {
      std::pair<std::string, std::string> k{r.setting, r.method};
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
    }
    for (const auto& [setting, method] : keys) {
      std::vector<double> vals;
      std::vector<double> iters;
      for (const RunRow& r : rows_)
        if (r.setting == setting && r.method == method && !r.failed) {
          vals.push_back(r.value);
          iters.push_back(static_cast<double>(r.n_iter));
        }
      f << setting << ',' << method << ',' << mean_of(vals) << ',' << sd_of(vals)
        << ',' << mean_of(iters) << "\n";
    }
  }

  const std::string& runs_path() const { return runs_path_; }
  const std::string& summary_path() const { return summary_path_; }
  int failures() const {
    return static_cast<int>(std::count_if(rows_.begin(), rows_.end(),
                                          [](const RunRow& r) { return r.failed; }));
  }

 private:
  std::string runs_path_, summary_path_;
  std::ofstream runs_;
  std::vector<RunRow> rows_;
};

// One PME-vs-baseline comparison pair on a generated cloud.
std::vector<RunRow> table_pair(pme::Setting setting, int d, int I,
                               std::uint64_t seed, const pme::RunConfig& cfg) {
  pme::PointCloud cloud = pme::generate({setting, I, seed});
  pme::FitOptions fopt = pme::fit_options(cfg);
  fopt.reduction.n0 = table_n0(setting);
  pme::SelectionResult sel =
      pme::select_lambda(cloud.points, d, pme::lambda_grid_or_default(cfg), fopt);
  RunRow pme_row{pme::to_string(setting), "PME", sel.best.msd, sel.best.n_iter};
  pme::FitResult base = pme::baseline_isomap_fit(cloud.points, d, sel.best.lambda);
  RunRow base_row{pme::to_string(setting), "ISOMAP-baseline", base.msd, base.n_iter};
  return {pme_row, base_row};
}

void run_benchmark(BenchmarkArgs& a) {
  pme::RunConfig cfg = a.common.resolve();
  finalize(cfg);
  BenchmarkWriter writer(a.out, a.suite);
  int failures_code = 0;

  auto guarded = [&](int run, std::uint64_t seed, const std::string& setting,
                     const std::string& method,
                     const std::function<std::vector<RunRow>()>& body) {
    try {
      for (const RunRow& r : body()) writer.row(run, r, seed);
    } catch (const pme::Error& e) {
      RunRow r{setting, method};
      r.failed = true;
      r.error = e.what();
      writer.row(run, r, seed);
      int code = 3;
      if (dynamic_cast<const pme::ValidationError*>(&e)) code = 2;
      if (dynamic_cast<const pme::ParseError*>(&e)) code = 2;
      if (dynamic_cast<const pme::IoError*>(&e)) code = 4;
      if (!failures_code) failures_code = code;
    }
  };

  if (a.suite == "table1") {
    const int I = a.n > 0 ? a.n : (a.full ? 1000 : 200);
    const pme::Setting settings[] = {pme::Setting::Fig3aLike, pme::Setting::Fig3b,
                                     pme::Setting::Fig3c, pme::Setting::Fig3d};
    for (pme::Setting s : settings)
      for (int r = 0; r < a.runs; ++r) {
        std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(r);
        guarded(r, seed, pme::to_string(s), "PME",
                [&] { return table_pair(s, 1, I, seed, cfg); });
      }
  } else if (a.suite == "table2") {
    const int I = a.n > 0 ? a.n : (a.full ? 1000 : 200);
    const std::pair<pme::Setting, int> cases[] = {
        {pme::Setting::Fig4a, 1}, {pme::Setting::Fig4b, 1},
        {pme::Setting::Fig4Surface, 2}};
    for (const auto& [s, d] : cases)
      for (int r = 0; r < a.runs; ++r) {
        std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(r);
        guarded(r, seed, pme::to_string(s), "PME",
                [&] { return table_pair(s, d, I, seed, cfg); });
      }
  } else if (a.suite == "outliers") {
    std::vector<int> sizes = a.full ? std::vector<int>{1000, 5000, 10000}
                                    : std::vector<int>{200, 500, 1000};
    if (a.n > 0) sizes = {a.n};
    for (int I : sizes)
      for (int r = 0; r < a.runs; ++r) {
        std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(r);
        std::string setting = "circle-with-outliers/I=" + std::to_string(I);
        guarded(r, seed, setting, "PME", [&]() -> std::vector<RunRow> {
          pme::PointCloud cloud =
              pme::generate({pme::Setting::CircleWithOutliers, I, seed});
          pme::HdmdeOptions hopt = pme::reduction_options(cfg);
          hopt.n0 = 10;
          pme::HdmdeResult res = pme::hdmde(cloud.points, hopt);
          pme::Vector centroid =
              cloud.points.bottomRows(10).colwise().mean().transpose();
          double ratio = outlier_weight_ratio(res.waj, centroid);
          return {RunRow{setting, "PME", ratio,
                         static_cast<int>(res.trace.size())}};
        });
      }
  } else if (a.suite == "sphere") {
    const int I = a.n > 0 ? a.n : (a.full ? 10000 : 2000);
    const int per_axis = a.full ? 40 : 20;
    for (int r = 0; r < a.runs; ++r) {
      std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(r);
      std::string setting = "punched-sphere-noiseless/I=" + std::to_string(I) +
                            "/grid=" + std::to_string(per_axis);
      guarded(r, seed, setting, "PME", [&]() -> std::vector<RunRow> {
        pme::PointCloud cloud =
            pme::generate({pme::Setting::PunchedSphereNoiseless, I, seed});
        pme::FitClosedOptions copt = pme::closed_options(cfg);
        copt.d = 2;
        pme::ClosedFit cf = pme::fit_closed(cloud.points, cfg.n_pieces, copt);
        pme::GridSpec gs;
        gs.lo = pme::Vector::Constant(3, -1.2);
        gs.hi = pme::Vector::Constant(3, 1.2);
        gs.n = {per_axis, per_axis, per_axis};
        pme::GridLabels labels =
            pme::classify_grid(cf, pme::Vector::Zero(3), pme::make_grid(gs),
                               pme::projection_options(cfg));
        pme::ErrorRateReport rep =
            pme::error_rate(labels, pme::sphere_truth(labels.points));
        int iters = 0;
        for (const pme::PieceInfo& info : cf.info) iters += info.n_iter;
        return {RunRow{setting, "PME", rep.rate, iters}};
      });
    }
  } else {
    throw pme::ValidationError(
        "--suite must be one of table1, table2, outliers, sphere");
  }

  writer.write_summary();
  dump_resolved_config(a.out, true, cfg);
  emit(json{{"command", "benchmark"},
            {"suite", a.suite},
            {"runs", a.runs},
            {"full", a.full},
            {"failures", writer.failures()},
            {"runs_csv", writer.runs_path()},
            {"summary_csv", writer.summary_path()},
            {"out", a.out}});
  if (failures_code) throw CLI::RuntimeError(failures_code);
}

}  // namespace

int main(int argc, char** argv) {
  std::ostringstream cmdline;
  for (int i = 0; i < argc; ++i) cmdline << (i ? " " : "") << argv[i];
  g_command_line = cmdline.str();

  CLI::App app{"principal-manifold estimation pipeline"};
  app.require_subcommand(1);
  std::function<void()> runner;

  GenerateArgs gen;
  CLI::App* cmd = app.add_subcommand("generate", "draw a synthetic point cloud");
  gen.common.attach(cmd);
  cmd->add_option("--setting", gen.setting, "dataset name")
      ->check(CLI::IsMember(pme::setting_names()));
  cmd->add_option("--n", gen.n, "number of points")->check(CLI::PositiveNumber);
  cmd->add_option("--slices", gen.slices,
                  "tag points with this many z-planes (3-D data only)");
  cmd->add_option("--out", gen.out, "output CSV")->required();
  cmd->callback([&] { runner = [&] { run_generate(gen); }; });

  ReduceArgs red;
  cmd = app.add_subcommand("reduce", "summarize a cloud into weighted nodes");
  red.common.attach(cmd);
  cmd->add_option("--in", red.in, "input point CSV")->required();
  red.alpha_opt = cmd->add_option("--alpha", red.alpha, "size-test level");
  red.n0_opt = cmd->add_option("--n0", red.n0, "starting node count (0 = auto)");
  red.n_max_opt = cmd->add_option("--n-max", red.n_max, "node-count cap (0 = auto)");
  cmd->add_option("--out", red.out, "output node CSV")->required();
  cmd->callback([&] { runner = [&] { run_reduce(red); }; });

  FitArgs fit;
  cmd = app.add_subcommand("fit", "fit a manifold to a point cloud");
  fit.common.attach(cmd);
  cmd->add_option("--in", fit.in, "input point CSV")->required();
  cmd->add_option("--d", fit.d, "intrinsic dimension (1, 2 or 3)")
      ->check(CLI::Range(1, 3));
  fit.lambda_opt = cmd->add_option("--lambda", fit.lambda, "fixed smoothing weight");
  cmd->add_flag("--select", fit.select,
                "select the smoothing weight over the grid (default when no "
                "--lambda is given)");
  fit.n0_opt = cmd->add_option("--n0", fit.n0, "starting node count (0 = auto)");
  cmd->add_flag("--mesh", fit.mesh, "also write surface.obj (d=2, D=3 fits)");
  cmd->add_option("--out", fit.out, "output directory")->required();
  cmd->callback([&] { runner = [&] { run_fit(fit); }; });

  FitClosedArgs fc;
  cmd = app.add_subcommand("fit-closed", "fit a closed manifold as glued pieces");
  fc.common.attach(cmd);
  cmd->add_option("--in", fc.in, "input point CSV")->required();
  fc.pieces_opt = cmd->add_option("--pieces", fc.pieces, "number of pieces");
  cmd->add_option("--d", fc.d, "intrinsic dimension (1 or 2)")->check(CLI::Range(1, 2));
  cmd->add_flag("--mesh", fc.mesh, "also write piece_XX.obj meshes");
  cmd->add_option("--out", fc.out, "output directory")->required();
  cmd->callback([&] { runner = [&] { run_fit_closed(fc); }; });

  InteriorArgs itr;
  cmd = app.add_subcommand("interior", "label grid points inside/outside a fit");
  itr.common.attach(cmd);
  cmd->add_option("--model", itr.model, "closed-fit directory");
  cmd->add_option("--in", itr.in, "slice-tagged point CSV (for --naive)");
  cmd->add_option("--ref", itr.ref, "reference interior point x,y,...");
  cmd->add_option("--grid", itr.grid, "evaluation lattice lo:hi:n per axis, comma-separated")
      ->required();
  cmd->add_flag("--naive", itr.naive, "slice-scan method on tagged input");
  cmd->add_flag("--sphere-truth", itr.sphere_truth,
                "report the error rate against unit-sphere truth");
  cmd->add_option("--out", itr.out, "output label CSV")->required();
  cmd->callback([&] { runner = [&] { run_interior(itr); }; });

  BenchmarkArgs bench;
  cmd = app.add_subcommand("benchmark", "replication suites");
  bench.common.attach(cmd);
  cmd->add_option("--suite", bench.suite, "table1, table2, outliers or sphere")
      ->required();
  cmd->add_option("--runs", bench.runs, "repetitions per case")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--n", bench.n, "override the per-case sample size");
  cmd->add_flag("--full", bench.full, "replication-scale sizes (slow)");
  cmd->add_option("--out", bench.out, "output directory")->required();
  cmd->callback([&] { runner = [&] { run_benchmark(bench); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    runner();
  } catch (const CLI::RuntimeError& e) {
    return e.get_exit_code();  // benchmark partial-failure path
  } catch (const pme::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const pme::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const pme::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const pme::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
