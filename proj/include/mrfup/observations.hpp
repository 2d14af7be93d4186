#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <vector>

#include "mrfup/errors.hpp"
#include "mrfup/features.hpp"
#include "mrfup/geometry.hpp"
#include "mrfup/prior.hpp"

namespace mrfup {

/// One range observation assigned to a pixel. When has_normal is set the
/// observation also anchors the plane normal^T x = plane_offset.
struct Observation {
  std::size_t pixel = 0;
  double depth = 0.0;
  bool has_normal = false;
  Vec3 normal = Vec3::Zero();
  double plane_offset = 0.0;
};

/// Sparse depth observations, at most one per pixel, ordered by pixel index.
struct ObservationSet {
  ImageGrid grid;
  std::vector<Observation> items;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }

  std::vector<double> depths() const {
    std::vector<double> d;
    d.reserve(items.size());
    for (const auto& o : items) d.push_back(o.depth);
    return d;
  }

  double ratio() const { return static_cast<double>(items.size()) / grid.size(); }

  void validate() const {
    std::size_t prev = 0;
    for (std::size_t k = 0; k < items.size(); ++k) {
      const auto& o = items[k];
      if (o.pixel >= grid.size()) throw ConfigError("observation pixel outside grid");
      if (k > 0 && o.pixel <= prev) throw ConfigError("observations must be unique and ordered");
      if (!(std::isfinite(o.depth) && o.depth > 0.0)) {
        throw ConfigError("observation depth must be finite and positive at pixel " +
                          std::to_string(o.pixel));
      }
      prev = o.pixel;
    }
  }
};

/// Keeps the smallest depth when several observations hit one pixel.
inline ObservationSet make_observation_set(const ImageGrid& grid,
                                           const std::vector<Observation>& raw) {
  std::map<std::size_t, Observation> best;
  for (const auto& o : raw) {
    auto it = best.find(o.pixel);
    if (it == best.end() || o.depth < it->second.depth) best[o.pixel] = o;
  }
  ObservationSet set;
  set.grid = grid;
  for (auto& [p, o] : best) set.items.push_back(o);
  set.validate();
  return set;
}

/// Valid pixels of a sparse depth raster.
inline ObservationSet observations_from_depth(const DepthField& sparse) {
  std::vector<Observation> raw;
  for (std::size_t i = 0; i < sparse.grid.size(); ++i) {
    if (!sparse.valid[i]) continue;
    raw.push_back({i, sparse.depths[i]});
  }
  return make_observation_set(sparse.grid, raw);
}

/// Attaches unit normals (camera frame) to observations and derives the plane
/// offset from the observed point. Normals are flipped to face the viewer.
inline void attach_normals(ObservationSet& obs, const RayField& rays,
                           const std::vector<std::optional<Vec3>>& normals) {
  if (normals.size() != obs.size()) throw ConfigError("one normal slot per observation required");
  for (std::size_t k = 0; k < obs.size(); ++k) {
    auto& o = obs.items[k];
    o.has_normal = false;
    if (!normals[k]) continue;
    Vec3 n = normals[k]->normalized();
    if (!n.allFinite()) continue;
    if (n.dot(rays.directions[o.pixel]) > 0.0) n = -n;
    o.has_normal = true;
    o.normal = n;
    o.plane_offset = n.dot(rays.point(o.pixel, o.depth));
  }
}

/// PCA normals from the observed points themselves (back-projected).
inline void estimate_observation_normals(ObservationSet& obs, const RayField& rays,
                                         const NormalEstimationOptions& opt) {
  std::vector<Vec3> pts;
  pts.reserve(obs.size());
  for (const auto& o : obs.items) pts.push_back(rays.point(o.pixel, o.depth));
  const NormalSet ns = estimate_normals(pts, Vec3::Zero(), opt);
  std::vector<std::optional<Vec3>> slots(obs.size());
  for (std::size_t k = 0; k < obs.size(); ++k)
    if (ns.valid[k]) slots[k] = ns.normals[k];
  attach_normals(obs, rays, slots);
}

/// Pixel-center projections of an observation set.
inline ProjectedObservations project_observations(const ObservationSet& obs,
                                                  const RayField& rays) {
  ProjectedObservations p;
  p.entries.reserve(obs.size());
  for (std::size_t k = 0; k < obs.size(); ++k) {
    const auto& o = obs.items[k];
    p.entries.push_back({Vec2(obs.grid.col(o.pixel), obs.grid.row(o.pixel)), o.depth,
                         rays.point(o.pixel, o.depth), k});
  }
  build_kdtree(p);
  return p;
}

/// Result of mapping a sensor-frame point cloud into the image.
struct CloudProjection {
  ObservationSet observations;
  ProjectedObservations projected;
  /// Camera-frame point and input cloud index per observation.
  std::vector<Vec3> camera_points;
  std::vector<std::size_t> sources;
  std::size_t dropped = 0;
};

/// Transforms points into the camera frame, projects them, and assigns each
/// pixel its closest return. Projected entries keep continuous coordinates
/// and the original 3D point; one entry per observed pixel.
inline CloudProjection project_cloud(const CameraModel& camera, const ImageGrid& grid,
                                     const std::vector<Vec3>& sensor_points) {
  CloudProjection out;
  struct Hit {
    Projection proj;
    Vec3 point;
    std::size_t source;
  };
  std::map<std::size_t, Hit> best;
  for (std::size_t s = 0; s < sensor_points.size(); ++s) {
    const Vec3 pc = camera.extrinsic.apply(sensor_points[s]);
    const auto proj = project_camera_point(camera, grid, pc);
    if (!proj || !(proj->depth > 0.0)) {
      ++out.dropped;
      continue;
    }
    const auto [r, c] = proj->nearest();
    if (!grid.contains(r, c)) {
      ++out.dropped;
      continue;
    }
    const std::size_t pix = grid.index(r, c);
    auto it = best.find(pix);
    if (it == best.end() || proj->depth < it->second.proj.depth) best[pix] = {*proj, pc, s};
  }
  out.observations.grid = grid;
  for (const auto& [pix, h] : best) {
    out.observations.items.push_back({pix, h.proj.depth});
    out.projected.entries.push_back(
        {h.proj.pixel, h.proj.depth, h.point, out.observations.items.size() - 1});
    out.camera_points.push_back(h.point);
    out.sources.push_back(h.source);
  }
  out.observations.validate();
  if (!out.projected.empty()) build_kdtree(out.projected);
  return out;
}

}  // namespace mrfup
