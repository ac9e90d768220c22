#include "pme/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pme/errors.hpp"
#include "pme/rng.hpp"

namespace pme {

namespace {

struct SettingRow {
  Setting setting;
  const char* name;
};

const SettingRow kSettings[] = {
    {Setting::Fig3aLike, "fig3a-like"},
    {Setting::Fig3b, "fig3b"},
    {Setting::Fig3c, "fig3c"},
    {Setting::Fig3d, "fig3d"},
    {Setting::Fig4a, "fig4a"},
    {Setting::Fig4b, "fig4b"},
    {Setting::Fig4Surface, "fig4-surface"},
    {Setting::PunchedSphere, "punched-sphere"},
    {Setting::PunchedSphereNoiseless, "punched-sphere-noiseless"},
    {Setting::GlueParabola2d, "glue-parabola-2d"},
    {Setting::GlueParaboloid3d, "glue-paraboloid-3d"},
    {Setting::CircleWithOutliers, "circle-with-outliers"},
};

struct Shape {
  int D = 2;
  int d_latent = 1;
  double noise_sd = 0.0;
};

Shape shape_of(Setting s) {
  switch (s) {
    case Setting::Fig3aLike: return {2, 1, 0.1};
    case Setting::Fig3b: return {2, 1, 0.2};
    case Setting::Fig3c: return {2, 1, 0.1};
    case Setting::Fig3d: return {2, 1, 0.15};
    case Setting::Fig4a: return {3, 1, 0.1};
    case Setting::Fig4b: return {3, 1, 0.05};
    case Setting::Fig4Surface: return {3, 2, 0.05};
    case Setting::PunchedSphere: return {3, 2, 0.05};
    case Setting::PunchedSphereNoiseless: return {3, 2, 0.0};
    case Setting::GlueParabola2d: return {2, 1, 1.0};
    case Setting::GlueParaboloid3d: return {3, 2, 0.2};
    case Setting::CircleWithOutliers: return {2, 1, 0.05};
  }
  throw ValidationError("generate: unknown setting");
}

// Latent draw and noise-free location for one point of a given setting.
using RowRef = Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>>;
void draw_clean(Setting s, Rng& rng, RowRef latent, RowRef clean) {
  const double pi = M_PI;
  switch (s) {
    case Setting::Fig3aLike: {
      double tau = rng.uniform(0.0, 0.5 * pi);
      double r = 1.0 + 0.1 * std::sin(3.0 * tau);
      latent[0] = tau;
      clean << r * std::cos(tau), r * std::sin(tau);
      return;
    }
    case Setting::Fig3b: {
      double tau = rng.uniform(-3.0 * pi, 3.0 * pi);
      latent[0] = tau;
      clean << tau, std::sin(tau);
      return;
    }
    case Setting::Fig3c:
    case Setting::CircleWithOutliers: {
      double tau = rng.uniform(0.0, 1.5 * pi);
      latent[0] = tau;
      clean << std::cos(tau), std::sin(tau);
      return;
    }
    case Setting::Fig3d: {
      double tau = rng.normal();
      latent[0] = tau;
      clean << tau, std::cos(tau);
      return;
    }
    case Setting::Fig4a: {
      double tau = rng.uniform(-1.0, 1.0);
      latent[0] = tau;
      clean << tau, tau * tau, tau * tau * tau;
      return;
    }
    case Setting::Fig4b: {
      double tau = rng.uniform(0.5 * pi, 6.0 * pi);
      latent[0] = tau;
      clean << tau, std::cos(tau), std::sin(tau);
      return;
    }
    case Setting::Fig4Surface: {
      double t1 = rng.uniform(-1.0, 1.0);
      double t2 = rng.uniform(-1.0, 1.0);
      double q = t1 * t1 + t2 * t2;
      latent << t1, t2;
      clean << t1, 0.5 * (t2 + std::sqrt(3.0) * q), 0.5 * (q - std::sqrt(3.0));
      return;
    }
    case Setting::PunchedSphere:
    case Setting::PunchedSphereNoiseless: {
      double t1 = rng.uniform(0.25 * pi, 0.75 * pi);
      double t2 = rng.uniform(0.0, 2.0 * pi);
      latent << t1, t2;
      clean << std::sin(t1) * std::cos(t2), std::sin(t1) * std::sin(t2),
          std::cos(t1);
      return;
    }
    case Setting::GlueParabola2d: {
      double tau = rng.uniform(1.0, 4.0);
      latent[0] = tau;
      clean << tau, tau * tau;
      return;
    }
    case Setting::GlueParaboloid3d: {
      double t1 = rng.uniform(2.0, 4.0);
      double t2 = rng.uniform(2.0, 6.0);
      latent << t1, t2;
      clean << t1, t2, t1 * t1 + t2 * t2;
      return;
    }
  }
  throw ValidationError("generate: unknown setting");
}

testing::LatentSample generate_impl(const GeneratorSpec& spec) {
  const int I = spec.count;
  if (I < 1) throw ValidationError("generate: need at least one point");
  const Shape shape = shape_of(spec.name);
  const bool outliers = spec.name == Setting::CircleWithOutliers;
  if (outliers && I <= 10)
    throw ValidationError("generate: circle-with-outliers needs more than 10 points");

  testing::LatentSample out;
  out.cloud.points.resize(I, shape.D);
  out.clean.resize(I, shape.D);
  out.latent.resize(I, shape.d_latent);

  for (int i = 0; i < I; ++i) {
    Rng rng(spec.seed, static_cast<std::uint64_t>(i));
    if (outliers && i >= I - 10) {
      // Off-manifold cluster at the circle center.
      out.latent.row(i).setConstant(std::numeric_limits<double>::quiet_NaN());
      out.clean.row(i).setZero();
    } else {
      draw_clean(spec.name, rng, out.latent.row(i), out.clean.row(i));
    }
    for (int l = 0; l < shape.D; ++l)
      out.cloud.points(i, l) = out.clean(i, l) + shape.noise_sd * rng.normal();
  }
  return out;
}

}  // namespace

std::string to_string(Setting s) {
  for (const auto& row : kSettings)
    if (row.setting == s) return row.name;
  throw ValidationError("unknown setting");
}

Setting setting_from_name(const std::string& name) {
  for (const auto& row : kSettings)
    if (name == row.name) return row.setting;
  std::string known;
  for (const auto& row : kSettings) {
    if (!known.empty()) known += ", ";
    known += row.name;
  }
  throw ValidationError("unknown setting '" + name + "'; known settings: " + known);
}

const std::vector<std::string>& setting_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& row : kSettings) v.push_back(row.name);
    return v;
  }();
  return names;
}

PointCloud generate(const GeneratorSpec& spec) {
  return generate_impl(spec).cloud;
}

namespace testing {

LatentSample generate_with_latent(const GeneratorSpec& spec) {
  return generate_impl(spec);
}

}  // namespace testing

void tag_slices(PointCloud& cloud, const GridSpec& grid) {
  if (grid.dim() != cloud.dim())
    throw ValidationError("tag_slices: grid and cloud dimensions differ");
  const int axis = grid.dim() - 1;
  const int n = grid.n[static_cast<std::size_t>(axis)];
  const double lo = grid.lo[axis], hi = grid.hi[axis];
  cloud.slice.assign(static_cast<std::size_t>(cloud.count()), 0);
  for (int i = 0; i < cloud.count(); ++i) {
    int best = 0;
    if (n > 1) {
      double step = (hi - lo) / (n - 1);
      double pos = (cloud.points(i, axis) - lo) / step;
      best = static_cast<int>(std::lround(pos));
      best = std::max(0, std::min(n - 1, best));
    }
    cloud.slice[static_cast<std::size_t>(i)] = best;
  }
}

std::vector<Label> sphere_truth(const Matrix& grid_points) {
  std::vector<Label> truth(static_cast<std::size_t>(grid_points.rows()));
  for (Eigen::Index j = 0; j < grid_points.rows(); ++j)
    truth[static_cast<std::size_t>(j)] =
        grid_points.row(j).norm() < 1.0 ? Label::Interior : Label::Exterior;
  return truth;
}

}  // namespace pme
