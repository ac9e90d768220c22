#include "pme/types.hpp"

#include "pme/errors.hpp"

namespace pme {

std::string to_string(Label l) {
  return l == Label::Interior ? "interior" : "exterior";
}

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::BoxReject: return "box-reject";
    case Provenance::ScenarioI: return "scenario-i";
    case Provenance::ScenarioII: return "scenario-ii";
    case Provenance::KnnFallback: return "knn-fallback";
    case Provenance::None: return "none";
  }
  return "none";
}

Matrix make_grid(const GridSpec& spec) {
  int d = spec.dim();
  if (d == 0) throw ValidationError("make_grid: empty spec");
  if (spec.lo.size() != d || spec.hi.size() != d)
    throw ValidationError("make_grid: lo/hi/n dimension mismatch");
  for (int a = 0; a < d; ++a) {
    if (spec.n[a] < 1) throw ValidationError("make_grid: axis sample count must be >= 1");
    if (!(spec.lo[a] <= spec.hi[a])) throw ValidationError("make_grid: lo > hi");
  }
  std::int64_t total = spec.total();
  Matrix out(total, d);
  std::vector<int> idx(d, 0);
  for (std::int64_t r = 0; r < total; ++r) {
    for (int a = 0; a < d; ++a) {
      double t = spec.n[a] == 1 ? 0.5 : static_cast<double>(idx[a]) / (spec.n[a] - 1);
      out(r, a) = spec.lo[a] + t * (spec.hi[a] - spec.lo[a]);
    }
    for (int a = d - 1; a >= 0; --a) {  // last axis fastest
      if (++idx[a] < spec.n[a]) break;
      idx[a] = 0;
    }
  }
  return out;
}

double bbox_diameter(const Matrix& points) {
  if (points.rows() == 0) return 0.0;
  Vector lo = points.colwise().minCoeff();
  Vector hi = points.colwise().maxCoeff();
  return (hi - lo).norm();
}

}  // namespace pme
