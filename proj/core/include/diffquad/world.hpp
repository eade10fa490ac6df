#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "diffquad/adtape.hpp"
#include "diffquad/config.hpp"
#include "diffquad/linalg.hpp"

namespace diffquad {

/// Vertical cylinder standing on the ground plane, occupying z in [0, height].
struct Cylinder {
  double cx = 0.0;
  double cy = 0.0;
  double radius = 0.0;
  double height = 0.0;
};

struct ForestParams {
  double density = 0.02;        // obstacles per m^2
  double extent_x = 30.0;       // scene spans [-extent/2, extent/2]
  double extent_y = 30.0;
  std::uint64_t seed = 1;
  double radius_min = 0.2;
  double radius_max = 0.4;
  double height_min = 4.0;
  double height_max = 6.0;
  // obstacle-free band at both x ends; start and goal discs (radius 1.5 m)
  // live inside these bands
  double clearance_margin = 3.0;

  static ForestParams from_config(const Config& cfg);
};

/// Immutable after generation; safe for concurrent readers.
struct ObstacleField {
  std::vector<Cylinder> cylinders;
  double extent_x = 30.0;
  double extent_y = 30.0;
  double density = 0.0;
  std::uint64_t seed = 0;
  double clearance_margin = 3.0;

  bool empty() const { return cylinders.empty(); }

  void save(const std::string& path) const;
  static ObstacleField load(const std::string& path);
  static ObstacleField from_config(const Config& cfg);
};

/// Uniform random placement with minimum pairwise separation
/// (r_i + r_j) + 0.3 m, bounded rejection sampling. Deterministic in
/// (seed, density, extent). Throws naming the achieved density when
/// placement cannot satisfy the separation constraint.
ObstacleField generate_forest(const ForestParams& params);

struct NearestObstacle {
  double d_col = std::numeric_limits<double>::infinity();  // signed: <0 inside
  Vec3d p_col{};     // closest surface point (z matches the query)
  Vec3d normal{};    // outward unit, also valid inside
  int index = -1;    // argmin cylinder; ties break to the lowest index
};

/// Exhaustive scan over all cylinders using the horizontal distance to the
/// axis minus the radius. Empty fields return the +infinity sentinel.
NearestObstacle nearest_obstacle(const ObstacleField& field, const Vec3d& p);

/// Signed distance to the chosen cylinder as a differentiable expression of
/// p. The argmin is fixed from values (envelope theorem: the gradient is the
/// unit vector away from the obstacle axis).
template <class S>
S nearest_distance(const ObstacleField& field, const Vec3<S>& p,
                   int* index_out = nullptr) {
  const NearestObstacle n = nearest_obstacle(field, values_of(p));
  if (index_out) *index_out = n.index;
  if (n.index < 0) return S(std::numeric_limits<double>::infinity());
  const Cylinder& c = field.cylinders[static_cast<std::size_t>(n.index)];
  using std::sqrt;
  const S dx = p.x - c.cx;
  const S dy = p.y - c.cy;
  return sqrt(dx * dx + dy * dy + 1e-18) - c.radius;
}

struct CameraModel {
  double hfov = 87.0 * M_PI / 180.0;  // horizontal field of view [rad]
  double vfov = 58.0 * M_PI / 180.0;  // vertical field of view [rad]
  int rows = 96;
  int cols = 128;
  double max_range = 10.0;

  void validate() const;
  static CameraModel from_config(const Config& cfg);
};

struct DepthImage {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // row-major ranges [m], background = max_range

  double at(int r, int c) const {
    return data[static_cast<std::size_t>(r * cols + c)];
  }
  double& at(int r, int c) { return data[static_cast<std::size_t>(r * cols + c)]; }
};

/// Analytic per-pixel ray cast against the cylinder forest and the ground
/// plane. The camera looks along the body x-axis; pixel directions are
/// uniform in azimuth/elevation so a one-column yaw shifts the image by one
/// column. Row 0 is the top of the image, column 0 the left edge (+azimuth).
DepthImage render_depth(const Vec3d& p, const Quatd& q, const CameraModel& camera,
                        const ObstacleField& field, bool ground_plane = true);

enum class DepthInversion { kReciprocal, kComplement };

struct DepthPreprocess {
  int pooled_rows = 12;
  int pooled_cols = 16;
  DepthInversion inversion = DepthInversion::kReciprocal;
  double depth_floor = 0.1;  // clamp before inverting [m]
  double max_range = 10.0;   // used by the complement form

  static DepthPreprocess from_config(const Config& cfg);
};

/// Max-pool the inverted image down to pooled_rows x pooled_cols. Rejects
/// native resolutions not divisible by the pooled grid.
std::vector<double> preprocess_depth(const DepthImage& img, const DepthPreprocess& opts);

}  // namespace diffquad
