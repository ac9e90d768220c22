#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pme/fit.hpp"
#include "pme/gluing.hpp"
#include "pme/hdmde.hpp"
#include "pme/projection.hpp"

namespace pme {

/// Every tunable in one flat bag. Files are "key=value" lines with '#'
/// comments; 0 (or an empty grid) means "derive the default from the data".
struct RunConfig {
  // data reduction
  int n0 = 0;            // starting model size; 0: 20 * D
  double alpha = 0.05;   // significance level for the size rule
  int n_max = 0;         // size cap; 0: I / 2
  double em_eps = 1e-4;  // sup-norm stop for weight iterations
  int em_max_iter = 1000;
  // manifold fitting
  double eps_star = 1e-3;  // relative stop on the fit loop
  int max_outer = 100;
  int knn = 0;             // parameterization graph degree; 0: auto
  double lambda = 0.0;     // fixed smoothing; 0: select over the grid
  std::vector<double> lambda_grid;  // empty: stock grid
  // projection search
  int coarse_per_axis = 0;         // 0: 30/15/8 by dimension
  double refine_tol_factor = 1e-8;
  double tie_tol_factor = 1e-6;
  int projection_max_iter = 200;
  // closed manifolds
  int n_pieces = 6;
  int glue_axis = -1;        // -1: automatic
  int score_subsample = 1000;
  // run control
  int threads = 0;           // 0: all hardware threads
  std::uint64_t seed = 1;
};

/// Parses a config file over the given base values. Unknown keys and
/// malformed values raise errors naming the key.
RunConfig load_config(const std::string& path, RunConfig base = {});

/// Applies one "key" / "value" pair (CLI override path).
void set_key(RunConfig& cfg, const std::string& key, const std::string& value);

/// Writes every key (the resolved-configuration dump emitted next to
/// command outputs, sufficient to reproduce a run).
void save_config(const std::string& path, const RunConfig& cfg);

/// Range-checks every field, throwing ValidationError naming the first
/// offending key.
void validate_config(const RunConfig& cfg);

ProjectOptions projection_options(const RunConfig& cfg);
HdmdeOptions reduction_options(const RunConfig& cfg);
FitOptions fit_options(const RunConfig& cfg);
FitClosedOptions closed_options(const RunConfig& cfg);
Vector lambda_grid_or_default(const RunConfig& cfg);

}  // namespace pme
