#include "diffquad/world.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace diffquad {

ForestParams ForestParams::from_config(const Config& cfg) {
  ForestParams p;
  p.density = cfg.get_double("world.density", p.density);
  p.extent_x = cfg.get_double("world.extent_x", p.extent_x);
  p.extent_y = cfg.get_double("world.extent_y", p.extent_y);
  p.seed = static_cast<std::uint64_t>(cfg.get_int("world.seed", static_cast<int>(p.seed)));
  p.radius_min = cfg.get_double("world.radius_min", p.radius_min);
  p.radius_max = cfg.get_double("world.radius_max", p.radius_max);
  p.height_min = cfg.get_double("world.height_min", p.height_min);
  p.height_max = cfg.get_double("world.height_max", p.height_max);
  p.clearance_margin = cfg.get_double("world.clearance_margin", p.clearance_margin);
  return p;
}

ObstacleField generate_forest(const ForestParams& params) {
  if (params.density < 0) throw std::invalid_argument("density must be >= 0");
  if (params.radius_min > params.radius_max || params.radius_min < 0)
    throw std::invalid_argument("bad radius range");

  ObstacleField field;
  field.extent_x = params.extent_x;
  field.extent_y = params.extent_y;
  field.density = params.density;
  field.seed = params.seed;
  field.clearance_margin = params.clearance_margin;

  const int count =
      static_cast<int>(std::llround(params.density * params.extent_x * params.extent_y));
  if (count == 0) return field;

  const double x_lo = -params.extent_x / 2 + params.clearance_margin;
  const double x_hi = params.extent_x / 2 - params.clearance_margin;
  if (x_lo >= x_hi)
    throw std::runtime_error("extent too small for the clearance bands");

  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> ux(x_lo, x_hi);
  std::uniform_real_distribution<double> uy(-params.extent_y / 2, params.extent_y / 2);
  std::uniform_real_distribution<double> ur(params.radius_min, params.radius_max);
  std::uniform_real_distribution<double> uh(params.height_min, params.height_max);

  constexpr int kMaxAttempts = 2000;
  field.cylinders.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
      Cylinder c;
      c.cx = ux(rng);
      c.cy = uy(rng);
      c.radius = ur(rng);
      c.height = uh(rng);
      bool ok = true;
      for (const Cylinder& other : field.cylinders) {
        const double dx = c.cx - other.cx, dy = c.cy - other.cy;
        const double min_sep = c.radius + other.radius + 0.3;
        if (dx * dx + dy * dy < min_sep * min_sep) {
          ok = false;
          break;
        }
      }
      if (ok) {
        field.cylinders.push_back(c);
        placed = true;
      }
    }
    if (!placed) {
      const double achieved =
          static_cast<double>(field.cylinders.size()) / (params.extent_x * params.extent_y);
      std::ostringstream msg;
      msg << "forest placement failed after " << kMaxAttempts << " attempts at cylinder "
          << field.cylinders.size() << "/" << count << " (achieved density " << achieved
          << " of requested " << params.density << ")";
      throw std::runtime_error(msg.str());
    }
  }
  return field;
}

void ObstacleField::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scene file: " + path);
  out.precision(17);
  out << "extent_x = " << extent_x << "\n";
  out << "extent_y = " << extent_y << "\n";
  out << "density = " << density << "\n";
  out << "seed = " << seed << "\n";
  out << "clearance_margin = " << clearance_margin << "\n";
  for (const Cylinder& c : cylinders)
    out << "cylinder = " << c.cx << " " << c.cy << " " << c.radius << " " << c.height
        << "\n";
}

ObstacleField ObstacleField::from_config(const Config& cfg) {
  ObstacleField f;
  f.extent_x = cfg.get_double("extent_x", f.extent_x);
  f.extent_y = cfg.get_double("extent_y", f.extent_y);
  f.density = cfg.get_double("density", f.density);
  f.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
  f.clearance_margin = cfg.get_double("clearance_margin", f.clearance_margin);
  const auto cyls = cfg.get_all_doubles("cylinder");
  if (!cyls.empty()) {
    for (const auto& v : cyls) {
      if (v.size() != 4)
        throw std::runtime_error("scene 'cylinder' entries need: cx cy radius height");
      f.cylinders.push_back({v[0], v[1], v[2], v[3]});
    }
    return f;
  }
  // no explicit list: regenerate deterministically from the metadata
  ForestParams p;
  p.density = f.density;
  p.extent_x = f.extent_x;
  p.extent_y = f.extent_y;
  p.seed = f.seed;
  p.clearance_margin = f.clearance_margin;
  p.radius_min = cfg.get_double("radius_min", p.radius_min);
  p.radius_max = cfg.get_double("radius_max", p.radius_max);
  p.height_min = cfg.get_double("height_min", p.height_min);
  p.height_max = cfg.get_double("height_max", p.height_max);
  return generate_forest(p);
}

ObstacleField ObstacleField::load(const std::string& path) {
  auto cfg = Config::parse_file(path);
  auto f = from_config(cfg);
  cfg.require_all_consumed();
  return f;
}

NearestObstacle nearest_obstacle(const ObstacleField& field, const Vec3d& p) {
  NearestObstacle best;
  for (std::size_t i = 0; i < field.cylinders.size(); ++i) {
    const Cylinder& c = field.cylinders[i];
    const double dx = p.x - c.cx, dy = p.y - c.cy;
    const double axial = std::sqrt(dx * dx + dy * dy);
    const double d = axial - c.radius;
    if (d < best.d_col) {  // strict: ties keep the lowest index
      best.d_col = d;
      best.index = static_cast<int>(i);
      Vec3d n{1, 0, 0};
      if (axial > 1e-12) n = {dx / axial, dy / axial, 0.0};
      best.normal = n;
      best.p_col = {c.cx + n.x * c.radius, c.cy + n.y * c.radius, p.z};
    }
  }
  return best;
}

void CameraModel::validate() const {
  if (!(hfov > 0 && hfov < M_PI) || !(vfov > 0 && vfov < M_PI))
    throw std::invalid_argument("camera FOV must lie in (0, pi)");
  if (rows <= 0 || cols <= 0 || rows % 12 != 0 || cols % 16 != 0)
    throw std::invalid_argument(
        "camera resolution must be divisible by the 12x16 pooled grid");
  if (!(max_range > 0)) throw std::invalid_argument("camera max_range must be > 0");
}

CameraModel CameraModel::from_config(const Config& cfg) {
  CameraModel c;
  c.hfov = cfg.get_double("camera.hfov_deg", c.hfov * 180.0 / M_PI) * M_PI / 180.0;
  c.vfov = cfg.get_double("camera.vfov_deg", c.vfov * 180.0 / M_PI) * M_PI / 180.0;
  c.rows = cfg.get_int("camera.rows", c.rows);
  c.cols = cfg.get_int("camera.cols", c.cols);
  c.max_range = cfg.get_double("camera.max_range", c.max_range);
  c.validate();
  return c;
}

DepthImage render_depth(const Vec3d& p, const Quatd& q, const CameraModel& camera,
                        const ObstacleField& field, bool ground_plane) {
  DepthImage img;
  img.rows = camera.rows;
  img.cols = camera.cols;
  img.data.assign(static_cast<std::size_t>(camera.rows * camera.cols), camera.max_range);

  // range culling: a cylinder whose surface is beyond max_range cannot be hit
  std::vector<const Cylinder*> nearby;
  nearby.reserve(field.cylinders.size());
  for (const Cylinder& c : field.cylinders) {
    const double dx = c.cx - p.x, dy = c.cy - p.y;
    if (std::sqrt(dx * dx + dy * dy) - c.radius <= camera.max_range)
      nearby.push_back(&c);
  }

  std::vector<double> cos_az(static_cast<std::size_t>(camera.cols));
  std::vector<double> sin_az(static_cast<std::size_t>(camera.cols));
  for (int j = 0; j < camera.cols; ++j) {
    const double az = camera.hfov / 2 - camera.hfov * (j + 0.5) / camera.cols;
    cos_az[static_cast<std::size_t>(j)] = std::cos(az);
    sin_az[static_cast<std::size_t>(j)] = std::sin(az);
  }

  for (int i = 0; i < camera.rows; ++i) {
    const double el = camera.vfov / 2 - camera.vfov * (i + 0.5) / camera.rows;
    const double cos_el = std::cos(el), sin_el = std::sin(el);
    for (int j = 0; j < camera.cols; ++j) {
      const Vec3d dir_body{cos_el * cos_az[static_cast<std::size_t>(j)],
                           cos_el * sin_az[static_cast<std::size_t>(j)], sin_el};
      const Vec3d dir = rotate(q, dir_body);
      double t_min = camera.max_range;

      if (ground_plane && dir.z < 0.0) {
        const double t = -p.z / dir.z;
        if (t > 0.0 && t < t_min) t_min = t;
      }

      for (const Cylinder* c : nearby) {
        const double ox = p.x - c->cx, oy = p.y - c->cy;
        const double a = dir.x * dir.x + dir.y * dir.y;
        const double b = 2.0 * (ox * dir.x + oy * dir.y);
        const double c0 = ox * ox + oy * oy - c->radius * c->radius;
        if (a > 1e-12) {
          const double disc = b * b - 4.0 * a * c0;
          if (disc >= 0.0) {
            const double sq = std::sqrt(disc);
            for (const double t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
              if (t > 1e-9 && t < t_min) {
                const double z = p.z + t * dir.z;
                if (z >= 0.0 && z <= c->height) {
                  t_min = t;
                  break;
                }
              }
            }
          }
        }
        // top cap
        if (std::abs(dir.z) > 1e-12) {
          const double t = (c->height - p.z) / dir.z;
          if (t > 1e-9 && t < t_min) {
            const double hx = ox + t * dir.x, hy = oy + t * dir.y;
            if (hx * hx + hy * hy <= c->radius * c->radius) t_min = t;
          }
        }
      }
      img.at(i, j) = t_min;
    }
  }
  return img;
}

DepthPreprocess DepthPreprocess::from_config(const Config& cfg) {
  DepthPreprocess p;
  const std::string inv = cfg.get_string("depth.inversion", "reciprocal");
  if (inv == "reciprocal")
    p.inversion = DepthInversion::kReciprocal;
  else if (inv == "complement")
    p.inversion = DepthInversion::kComplement;
  else
    throw std::runtime_error("depth.inversion must be 'reciprocal' or 'complement'");
  p.depth_floor = cfg.get_double("depth.floor", p.depth_floor);
  p.max_range = cfg.get_double("camera.max_range", p.max_range);
  return p;
}

std::vector<double> preprocess_depth(const DepthImage& img, const DepthPreprocess& opts) {
  if (opts.pooled_rows <= 0 || opts.pooled_cols <= 0 ||
      img.rows % opts.pooled_rows != 0 || img.cols % opts.pooled_cols != 0)
    throw std::invalid_argument("depth resolution not divisible by the pooled grid");
  const int wr = img.rows / opts.pooled_rows;
  const int wc = img.cols / opts.pooled_cols;

  const auto invert = [&](double d) {
    if (opts.inversion == DepthInversion::kReciprocal)
      return 1.0 / std::max(d, opts.depth_floor);
    return (opts.max_range - d) / opts.max_range;
  };

  std::vector<double> out(
      static_cast<std::size_t>(opts.pooled_rows * opts.pooled_cols));
  for (int pr = 0; pr < opts.pooled_rows; ++pr) {
    for (int pc = 0; pc < opts.pooled_cols; ++pc) {
      double m = -std::numeric_limits<double>::infinity();
      for (int r = pr * wr; r < (pr + 1) * wr; ++r)
        for (int c = pc * wc; c < (pc + 1) * wc; ++c)
          m = std::max(m, invert(img.at(r, c)));
      out[static_cast<std::size_t>(pr * opts.pooled_cols + pc)] = m;
    }
  }
  return out;
}

}  // namespace diffquad
