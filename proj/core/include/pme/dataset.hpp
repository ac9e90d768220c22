#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pme/types.hpp"

namespace pme {

/// Synthetic data settings shipped with the library. Names follow the
/// CLI spelling in parentheses.
enum class Setting {
  Fig3aLike,               // wavy quarter arc (fig3a-like)
  Fig3b,                   // sine wave (fig3b)
  Fig3c,                   // three-quarter circle (fig3c)
  Fig3d,                   // cosine over a normal parameter (fig3d)
  Fig4a,                   // cubic space curve (fig4a)
  Fig4b,                   // helix (fig4b)
  Fig4Surface,             // tilted paraboloid sheet (fig4-surface)
  PunchedSphere,           // sphere band, noisy (punched-sphere)
  PunchedSphereNoiseless,  // sphere band, exact (punched-sphere-noiseless)
  GlueParabola2d,          // plane parabola segment (glue-parabola-2d)
  GlueParaboloid3d,        // paraboloid patch (glue-paraboloid-3d)
  CircleWithOutliers,      // three-quarter circle + 10 outliers (circle-with-outliers)
};

std::string to_string(Setting s);
Setting setting_from_name(const std::string& name);  // throws on unknown names
const std::vector<std::string>& setting_names();

struct GeneratorSpec {
  Setting name = Setting::Fig3c;
  int count = 0;
  std::uint64_t seed = 0;
};

/// Draws spec.count points of the chosen setting. Each point consumes its own
/// counter-based stream, so the same spec is bitwise reproducible no matter
/// how generation is scheduled. For circle-with-outliers the final 10 rows
/// are the off-manifold cluster.
PointCloud generate(const GeneratorSpec& spec);

namespace testing {

/// Generation transcript for assertions: the noisy cloud plus the latent
/// parameters and noise-free points behind each row (outlier rows carry NaN
/// latents). Kept out of the main API so production consumers see only the
/// observable cloud.
struct LatentSample {
  PointCloud cloud;
  Matrix clean;   // I x D
  Matrix latent;  // I x d_latent
};

LatentSample generate_with_latent(const GeneratorSpec& spec);

}  // namespace testing

/// Tags every point with the index of the nearest grid plane along the last
/// axis (CT-style slicing of a 3-D lattice).
void tag_slices(PointCloud& cloud, const GridSpec& grid);

/// True unit-sphere labels for evaluation points: interior iff ||xi|| < 1.
std::vector<Label> sphere_truth(const Matrix& grid_points);

}  // namespace pme
