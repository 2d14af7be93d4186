#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <vector>

#include "mrfup/delaunay.hpp"
#include "mrfup/errors.hpp"
#include "mrfup/geometry.hpp"
#include "mrfup/kdtree.hpp"

namespace mrfup {

/// Observations projected into the image: continuous pixel coordinates
/// (col, row), depth along the ray, and the camera-frame 3D point.
struct ProjectedObservations {
  struct Entry {
    Vec2 uv;
    double depth = 0.0;
    Vec3 point;
    std::size_t source = 0;
  };

  std::vector<Entry> entries;
  KdTree<2> index;

  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }
};

/// Builds the 2D spatial index over entry pixel coordinates.
inline void build_kdtree(ProjectedObservations& obs) {
  if (obs.entries.empty()) {
    throw ConfigError("no observations: upsampling is undefined without range data");
  }
  std::vector<Vec2> uv;
  uv.reserve(obs.entries.size());
  for (const auto& e : obs.entries) uv.push_back(e.uv);
  obs.index = KdTree<2>(std::move(uv));
}

inline std::size_t nearest_observation(const ProjectedObservations& obs, const Vec2& q) {
  return obs.index.nearest(q);
}

struct TriangleMesh {
  std::vector<TriangleIndices> triangles;
  /// Per-triangle pixel-space bounding box: (min col, min row, max col, max row).
  std::vector<Eigen::Vector4d> bounds;

  bool empty() const { return triangles.empty(); }
};

/// Delaunay triangulation of the projected pixel coordinates. Triangles with
/// signed area below min_area (pixels^2) are dropped.
inline TriangleMesh triangulate(const ProjectedObservations& obs, double min_area = 1e-9) {
  std::vector<Vec2> uv;
  uv.reserve(obs.entries.size());
  for (const auto& e : obs.entries) uv.push_back(e.uv);
  TriangleMesh mesh;
  for (const auto& t : delaunay_triangulate(uv)) {
    const double area = 0.5 * detail::orient2d(uv[t[0]], uv[t[1]], uv[t[2]]);
    if (!(area > min_area)) continue;
    mesh.triangles.push_back(t);
    const Vec2 lo = uv[t[0]].cwiseMin(uv[t[1]]).cwiseMin(uv[t[2]]);
    const Vec2 hi = uv[t[0]].cwiseMax(uv[t[1]]).cwiseMax(uv[t[2]]);
    mesh.bounds.emplace_back(lo.x(), lo.y(), hi.x(), hi.y());
  }
  return mesh;
}

/// Depth interval [lo, hi] applied to initial and optimized depths.
struct DepthBounds {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();

  double clamp(double d) const { return std::min(std::max(d, lo), hi); }
  bool contains(double d) const { return d >= lo && d <= hi; }
};

/// Observed depth range widened by the factor (1 + margin) on both sides:
/// [min / (1 + margin), max * (1 + margin)]. margin = 0 gives exactly the
/// observed range.
inline DepthBounds observed_bounds(const std::vector<double>& depths, double margin) {
  if (depths.empty()) throw ConfigError("no observations to derive depth bounds from");
  const auto [mn, mx] = std::minmax_element(depths.begin(), depths.end());
  DepthBounds b;
  b.lo = *mn / (1.0 + margin);
  b.hi = *mx * (1.0 + margin);
  return b;
}

/// Which path produced each pixel's initial depth.
enum class InitSource : unsigned char { triangle, nearest };

struct InitResult {
  DepthField depth;
  std::vector<InitSource> source;
  std::vector<long> triangle;  // covering triangle id, -1 when uncovered

  std::size_t covered() const {
    return static_cast<std::size_t>(
        std::count(source.begin(), source.end(), InitSource::triangle));
  }
};

/// Ray / triangle-plane intersection for pixels covered by the mesh, nearest
/// observation depth elsewhere, all clamped to bounds.
inline InitResult init_depth_detailed(const RayField& rays, const ProjectedObservations& obs,
                                      const TriangleMesh& mesh, const ImageGrid& grid,
                                      const DepthBounds& bounds) {
  if (obs.empty()) throw ConfigError("no observations: cannot initialize depths");
  if (obs.index.size() != obs.size()) throw ConfigError("observation index not built");
  InitResult out;
  out.depth = DepthField(grid, 0.0, true);
  out.source.assign(grid.size(), InitSource::nearest);
  out.triangle.assign(grid.size(), -1);

  // Lowest triangle index wins: only unassigned pixels are written.
  constexpr double kEdgeTol = 1e-12;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    const Vec2& a = obs.entries[tri[0]].uv;
    const Vec2& b = obs.entries[tri[1]].uv;
    const Vec2& c = obs.entries[tri[2]].uv;
    const double area2 = detail::orient2d(a, b, c);
    const auto& bb = mesh.bounds[t];
    const int c0 = std::max(0, static_cast<int>(std::ceil(bb(0) - kEdgeTol)));
    const int r0 = std::max(0, static_cast<int>(std::ceil(bb(1) - kEdgeTol)));
    const int c1 = std::min(grid.width() - 1, static_cast<int>(std::floor(bb(2) + kEdgeTol)));
    const int r1 = std::min(grid.height() - 1, static_cast<int>(std::floor(bb(3) + kEdgeTol)));
    for (int r = r0; r <= r1; ++r) {
      for (int col = c0; col <= c1; ++col) {
        const std::size_t i = grid.index(r, col);
        if (out.triangle[i] >= 0) continue;
        const Vec2 q(col, r);
        const double tol = kEdgeTol * area2;
        if (detail::orient2d(a, b, q) < -tol || detail::orient2d(b, c, q) < -tol ||
            detail::orient2d(c, a, q) < -tol) {
          continue;
        }
        out.triangle[i] = static_cast<long>(t);
      }
    }
  }

  for (std::size_t i = 0; i < grid.size(); ++i) {
    bool ok = false;
    if (out.triangle[i] >= 0) {
      const auto& tri = mesh.triangles[static_cast<std::size_t>(out.triangle[i])];
      const Vec3& pa = obs.entries[tri[0]].point;
      const Vec3& pb = obs.entries[tri[1]].point;
      const Vec3& pc = obs.entries[tri[2]].point;
      const Vec3 n = (pb - pa).cross(pc - pa);
      const double nn = n.norm();
      if (nn > 0.0) {
        const Vec3 unit = n / nn;
        const double denom = unit.dot(rays.directions[i]);
        if (std::abs(denom) >= 1e-12) {
          const double d = unit.dot(pa - rays.origins[i]) / denom;
          if (std::isfinite(d) && d > 0.0) {
            out.depth.depths[i] = bounds.clamp(d);
            out.source[i] = InitSource::triangle;
            ok = true;
          }
        }
      }
    }
    if (!ok) {
      const std::size_t k = nearest_observation(obs, Vec2(grid.col(i), grid.row(i)));
      out.depth.depths[i] = bounds.clamp(obs.entries[k].depth);
      out.source[i] = InitSource::nearest;
      out.triangle[i] = -1;
    }
  }
  return out;
}

inline DepthField init_depth(const RayField& rays, const ProjectedObservations& obs,
                             const TriangleMesh& mesh, const ImageGrid& grid,
                             const DepthBounds& bounds) {
  return init_depth_detailed(rays, obs, mesh, grid, bounds).depth;
}

/// Every pixel set to the median observed depth; the reference start point
/// that mesh initialization is compared against.
inline DepthField constant_init(const ImageGrid& grid, const ProjectedObservations& obs) {
  if (obs.empty()) throw ConfigError("no observations: cannot initialize depths");
  std::vector<double> d;
  d.reserve(obs.size());
  for (const auto& e : obs.entries) d.push_back(e.depth);
  std::nth_element(d.begin(), d.begin() + (d.size() - 1) / 2, d.end());
  return DepthField(grid, d[(d.size() - 1) / 2], true);
}

}  // namespace mrfup
