#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace pme {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Ground-truth or inferred side of a closed manifold.
enum class Label { Interior, Exterior };

/// How a grid label was decided.
enum class Provenance { BoxReject, ScenarioI, ScenarioII, KnnFallback, None };

std::string to_string(Label l);
std::string to_string(Provenance p);

/// A set of observed points, one row per point. The optional slice tag marks
/// which scan plane a point belongs to (CT-like inputs); empty means untagged.
struct PointCloud {
  Matrix points;            // I x D
  std::vector<int> slice;   // empty or size I

  int count() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
  bool has_slices() const { return !slice.empty(); }
};

/// Axis-aligned evaluation lattice: per-axis [lo, hi] with n samples.
struct GridSpec {
  Vector lo, hi;
  std::vector<int> n;

  int dim() const { return static_cast<int>(n.size()); }
  std::int64_t total() const {
    std::int64_t t = 1;
    for (int k : n) t *= k;
    return t;
  }
};

/// Materializes the lattice points of a GridSpec in row-major order
/// (last axis fastest).
Matrix make_grid(const GridSpec& spec);

/// Diameter of a point set: max pairwise distance is quadratic, so this is
/// the bounding-box diagonal, which bounds it within sqrt(D).
double bbox_diameter(const Matrix& points);

}  // namespace pme
