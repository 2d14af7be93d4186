#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "mrfup/errors.hpp"

namespace mrfup {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Row-major pixel lattice. Pixel index i = row * width + col.
class ImageGrid {
 public:
  ImageGrid() = default;
  ImageGrid(int width, int height) : width_(width), height_(height) {
    if (width < 3 || height < 3) {
      throw ConfigError("image grid must be at least 3x3, got " +
                        std::to_string(width) + "x" + std::to_string(height));
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }

  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * width_ + col;
  }
  int row(std::size_t i) const { return static_cast<int>(i / width_); }
  int col(std::size_t i) const { return static_cast<int>(i % width_); }
  bool contains(int row, int col) const {
    return row >= 0 && row < height_ && col >= 0 && col < width_;
  }

  friend bool operator==(const ImageGrid&, const ImageGrid&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
};

/// Rigid transform x' = R x + t.
struct RigidTransform {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
  RigidTransform inverse() const {
    const Eigen::Quaterniond inv = rotation.conjugate();
    return {inv, -(inv * translation)};
  }
};

enum class CameraKind { pinhole, orthographic };

/// Intrinsics in pixels. For orthographic cameras fx, fy are pixels per meter.
/// The extrinsic pose maps the range-sensor frame into the camera frame.
struct CameraModel {
  CameraKind kind = CameraKind::pinhole;
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  RigidTransform extrinsic;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) {
      throw ConfigError("camera focal lengths must be strictly positive");
    }
    if (!std::isfinite(cx) || !std::isfinite(cy)) {
      throw ConfigError("camera principal point must be finite");
    }
    const double qn = extrinsic.rotation.norm();
    if (!(std::abs(qn - 1.0) < 1e-9)) {
      throw ConfigError("extrinsic rotation quaternion must be unit length");
    }
    const Mat3 r = extrinsic.rotation.toRotationMatrix();
    if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
        std::abs(r.determinant() - 1.0) > 1e-9) {
      throw ConfigError("extrinsic rotation is not a proper rotation");
    }
  }
};

/// Per-pixel viewing rays in the camera frame. Directions are unit length, so
/// a depth is the metric distance from the ray origin along the ray.
struct RayField {
  ImageGrid grid;
  std::vector<Vec3> origins;
  std::vector<Vec3> directions;

  Vec3 point(std::size_t pixel, double depth) const {
    return origins[pixel] + depth * directions[pixel];
  }
};

/// Per-pixel depth (meters along the viewing ray) with a validity mask.
struct DepthField {
  ImageGrid grid;
  std::vector<double> depths;
  std::vector<bool> valid;

  DepthField() = default;
  explicit DepthField(const ImageGrid& g, double fill = 0.0, bool is_valid = false)
      : grid(g), depths(g.size(), fill), valid(g.size(), is_valid) {}

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (bool v : valid) n += v ? 1 : 0;
    return n;
  }
};

inline RayField build_ray_field(const CameraModel& camera, const ImageGrid& grid) {
  camera.validate();
  RayField rays;
  rays.grid = grid;
  rays.origins.resize(grid.size());
  rays.directions.resize(grid.size());
  for (int r = 0; r < grid.height(); ++r) {
    for (int c = 0; c < grid.width(); ++c) {
      const std::size_t i = grid.index(r, c);
      const double x = (c - camera.cx) / camera.fx;
      const double y = (r - camera.cy) / camera.fy;
      if (camera.kind == CameraKind::pinhole) {
        rays.origins[i] = Vec3::Zero();
        rays.directions[i] = Vec3(x, y, 1.0).normalized();
      } else {
        rays.origins[i] = Vec3(x, y, 0.0);
        rays.directions[i] = Vec3::UnitZ();
      }
    }
  }
  return rays;
}

inline Vec3 point_from_depth(const RayField& rays, std::size_t pixel, double depth) {
  return rays.point(pixel, depth);
}

/// Continuous pixel coordinates (col, row) and ray depth of a projected point.
struct Projection {
  Vec2 pixel;
  double depth = 0.0;

  /// Nearest pixel center as (row, col).
  std::pair<int, int> nearest() const {
    return {static_cast<int>(std::lround(pixel.y())),
            static_cast<int>(std::lround(pixel.x()))};
  }
};

/// Projects a camera-frame point. Returns nullopt when behind the camera or
/// outside the grid (pixel centers are integers, so the grid spans
/// [-0.5, W-0.5) x [-0.5, H-0.5)).
inline std::optional<Projection> project_camera_point(const CameraModel& camera,
                                                      const ImageGrid& grid,
                                                      const Vec3& p) {
  Projection out;
  if (camera.kind == CameraKind::pinhole) {
    if (!(p.z() > 0.0)) return std::nullopt;
    out.pixel = Vec2(camera.fx * p.x() / p.z() + camera.cx,
                     camera.fy * p.y() / p.z() + camera.cy);
    out.depth = p.norm();
  } else {
    if (!(p.z() > 0.0)) return std::nullopt;
    out.pixel = Vec2(camera.fx * p.x() + camera.cx, camera.fy * p.y() + camera.cy);
    out.depth = p.z();
  }
  if (!std::isfinite(out.pixel.x()) || !std::isfinite(out.pixel.y())) return std::nullopt;
  if (out.pixel.x() < -0.5 || out.pixel.x() >= grid.width() - 0.5 ||
      out.pixel.y() < -0.5 || out.pixel.y() >= grid.height() - 0.5) {
    return std::nullopt;
  }
  return out;
}

/// Applies the extrinsic pose, then projects.
inline std::optional<Projection> project_point(const CameraModel& camera,
                                               const ImageGrid& grid,
                                               const Vec3& point_sensor_frame) {
  return project_camera_point(camera, grid, camera.extrinsic.apply(point_sensor_frame));
}

/// 4-connected neighbors in up, left, right, down order.
inline std::vector<std::size_t> neighbors4(const ImageGrid& grid, std::size_t pixel) {
  const int r = grid.row(pixel);
  const int c = grid.col(pixel);
  std::vector<std::size_t> out;
  out.reserve(4);
  if (r > 0) out.push_back(grid.index(r - 1, c));
  if (c > 0) out.push_back(grid.index(r, c - 1));
  if (c + 1 < grid.width()) out.push_back(grid.index(r, c + 1));
  if (r + 1 < grid.height()) out.push_back(grid.index(r + 1, c));
  return out;
}

/// (j, i, k) with i the center pixel: (left, i, right) and (up, i, down).
struct Triple {
  std::size_t j;
  std::size_t i;
  std::size_t k;
  friend bool operator==(const Triple&, const Triple&) = default;
};

inline std::vector<Triple> collinearity_triples(const ImageGrid& grid, std::size_t pixel) {
  const int r = grid.row(pixel);
  const int c = grid.col(pixel);
  std::vector<Triple> out;
  if (c > 0 && c + 1 < grid.width()) {
    out.push_back({grid.index(r, c - 1), pixel, grid.index(r, c + 1)});
  }
  if (r > 0 && r + 1 < grid.height()) {
    out.push_back({grid.index(r - 1, c), pixel, grid.index(r + 1, c)});
  }
  return out;
}

}  // namespace mrfup
