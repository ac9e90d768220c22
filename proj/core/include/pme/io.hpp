#pragma once

#include <string>
#include <vector>

#include "pme/gluing.hpp"
#include "pme/hdmde.hpp"
#include "pme/interior.hpp"
#include "pme/spline.hpp"
#include "pme/types.hpp"

namespace pme {

// All text artifacts are comma-separated with '#' comment lines. Reals are
// written with 17 significant digits so load(save(x)) == x bitwise. Content
// problems raise ParseError with a line number; filesystem problems raise
// IoError.

/// One point per row. A trailing integer slice column is read when
/// slice_column is set or when the file's own header declares one.
PointCloud load_point_cloud(const std::string& path, bool slice_column = false);
void save_point_cloud(const std::string& path, const PointCloud& cloud);

/// Node summary: header with size, bandwidth and provenance, then one
/// "mu_1,...,mu_D,theta" row per node.
void save_waj(const std::string& path, const Waj& waj);
Waj load_waj(const std::string& path);

/// Model-size selection trace, one row per tested size.
void save_z_reports(const std::string& path, const std::vector<ZReport>& reports);

/// Optional fit provenance stored alongside a map.
struct SplineMetrics {
  double lambda = 0.0;
  double msd = 0.0;
  int n_iter = 0;
  bool converged = false;
};

/// Kernel-plus-affine map as sectioned CSV (knots, kernel, affine).
void save_spline_map(const std::string& path, const SplineMap& map,
                     const SplineMetrics* metrics = nullptr);
SplineMap load_spline_map(const std::string& path, SplineMetrics* metrics = nullptr);

/// Ring estimate as a directory: manifest.txt, one piece_XX.csv per piece,
/// one junction_XX.csv per junction, sectors.csv with the point partition.
void save_closed_fit(const std::string& dir, const ClosedFit& cf);
ClosedFit load_closed_fit(const std::string& dir);

/// Grid decisions: "coords...,label,provenance" rows; unlabeled points write
/// "unlabeled,none".
void save_grid_labels(const std::string& path, const GridLabels& labels);
GridLabels load_grid_labels(const std::string& path);

/// Triangulated surface sample: "v x y z" vertices from evaluating f over a
/// regular per_axis^2 lattice on its knot bounding box, then 1-based
/// "f i j k" triangles. Only d = 2, D = 3 maps can be meshed.
void save_mesh(const std::string& path, const SplineMap& f, int per_axis = 40);

/// One mesh per piece (piece_XX.obj inside dir). Vertices whose rotated
/// coordinates fall inside an adjacent junction's chart box are re-evaluated
/// through the blended map, so adjacent meshes agree across seams. Chart
/// inversions that fail at box fringes fall back to the raw piece value
/// (best-effort visualization; the CSV artifacts remain exact).
void save_closed_mesh(const std::string& dir, const ClosedFit& cf, int per_axis = 40);

}  // namespace pme
