#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mrfup/bench.hpp"
#include "mrfup/config.hpp"
#include "mrfup/confidence.hpp"
#include "mrfup/io.hpp"
#include "mrfup/pipeline.hpp"

namespace mrfup::commands {

namespace fs = std::filesystem;

/// Unit normal of the dense surface at pixel i from central differences of
/// neighboring points, facing the viewer. nullopt at invalid neighborhoods.
inline std::optional<Vec3> surface_normal(const RayField& rays, const DepthField& d, std::size_t i) {
  const ImageGrid& g = d.grid;
  const int r = g.row(i), c = g.col(i);
  auto pt = [&](int rr, int cc) -> std::optional<Vec3> {
    if (!g.contains(rr, cc)) return std::nullopt;
    const std::size_t k = g.index(rr, cc);
    if (!d.valid[k]) return std::nullopt;
    return rays.point(k, d.depths[k]);
  };
  const auto center = pt(r, c);
  if (!center) return std::nullopt;
  auto diff = [&](int dr, int dc) -> std::optional<Vec3> {
    const auto a = pt(r + dr, c + dc), b = pt(r - dr, c - dc);
    if (a && b) return *a - *b;
    if (a) return *a - *center;
    if (b) return *center - *b;
    return std::nullopt;
  };
  const auto du = diff(0, 1), dv = diff(1, 0);
  if (!du || !dv) return std::nullopt;
  Vec3 n = du->cross(*dv);
  if (!(n.norm() > 0.0)) return std::nullopt;
  n.normalize();
  if (n.dot(rays.origins[i] - *center) < 0.0) n = -n;
  return n;
}

inline void write_summary(const fs::path& path, const UpsampleResult& res) {
  nlohmann::json s;
  s["width"] = res.estimate.grid.width();
  s["height"] = res.estimate.grid.height();
  s["observations"] = res.observations.size();
  s["init_covered_px"] = res.init_covered;
  s["initial_cost"] = res.report.initial_cost;
  s["final_cost"] = res.report.final_cost;
  s["iterations"] = res.report.iterations;
  s["accepted_steps"] = res.report.accepted_steps;
  s["termination"] = to_string(res.report.termination);
  s["filtered_px"] = res.filtered;
  s["kept_px"] = res.output.valid_count();
  s["variance_available_px"] = res.confidence ? res.confidence->available_count() : 0;
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << s.dump(2) << "\n";
}

/// Full pipeline driven by a run config. Returns the process exit code;
/// errors propagate as mrfup::Error.
inline int cmd_upsample(const fs::path& config_path, std::ostream& log) {
  const config::RunConfig rc = config::load_run_config(config_path);
  const FeatureImage features =
      io::load_features(rc.rgb, rc.certainty ? std::optional<fs::path>(*rc.certainty) : std::nullopt);
  const ImageGrid grid = features.grid;
  auto rays = std::make_shared<const RayField>(build_ray_field(rc.camera, grid));

  UpsampleInputs in;
  in.rays = rays;
  in.features = features;
  PipelineOptions opt = rc.pipeline;
  if (rc.points) {
    const auto cloud = io::read_ply(*rc.points);
    std::vector<Vec3> pts;
    pts.reserve(cloud.size());
    for (const auto& p : cloud) pts.push_back(p.position);
    CloudProjection proj = project_cloud(rc.camera, grid, pts);
    if (proj.observations.empty()) throw ConfigError("no point of '" + *rc.points + "' projects into the image");
    // Normals: from the file when present, else PCA over the in-view cloud.
    std::vector<std::optional<Vec3>> normals(proj.observations.size());
    bool any = false;
    for (std::size_t k = 0; k < proj.observations.size(); ++k) {
      const auto& src = cloud[proj.sources[k]];
      if (src.normal) {
        normals[k] = rc.camera.extrinsic.rotation * *src.normal;
        any = true;
      }
    }
    if (!any && opt.estimate_normals) {
      std::vector<Vec3> cam_pts;
      cam_pts.reserve(pts.size());
      for (const auto& p : pts) cam_pts.push_back(rc.camera.extrinsic.apply(p));
      const NormalSet ns = estimate_normals(cam_pts, Vec3::Zero(), opt.normals);
      for (std::size_t k = 0; k < proj.observations.size(); ++k) {
        const std::size_t s = proj.sources[k];
        if (ns.valid[s]) normals[k] = ns.normals[s];
      }
      any = true;
    }
    if (any) attach_normals(proj.observations, *rays, normals);
    opt.estimate_normals = false;
    in.observations = std::move(proj.observations);
    in.projected = std::move(proj.projected);
    log << "projected " << in.observations.size() << " of " << cloud.size() << " points\n";
  } else {
    const DepthField sparse = io::to_depth_field(io::read_pfm(*rc.sparse_depth));
    if (!(sparse.grid == grid)) {
      throw ConfigError("sparse depth '" + *rc.sparse_depth + "' does not match the RGB raster size");
    }
    in.observations = observations_from_depth(sparse);
  }

  const UpsampleResult res = run_upsampling(in, opt);
  log << "observations " << res.observations.size() << ", iterations " << res.report.iterations
      << ", cost " << res.report.initial_cost << " -> " << res.report.final_cost << " ("
      << to_string(res.report.termination) << ")\n";

  io::write_pfm(rc.out_depth, io::to_image(res.output));
  if (rc.out_variance) {
    io::FloatImage var{grid.width(), grid.height(), {}};
    var.data.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      var.data[i] = res.confidence && res.confidence->available[i]
                        ? static_cast<float>(res.confidence->variance[i])
                        : std::numeric_limits<float>::quiet_NaN();
    }
    io::write_pfm(*rc.out_variance, var);
  }
  if (rc.out_cloud) {
    std::vector<io::CloudPoint> pts;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (!res.output.valid[i]) continue;
      io::CloudPoint p;
      p.position = rays->point(i, res.output.depths[i]);
      p.normal = surface_normal(*rays, res.output, i);
      Eigen::Matrix<std::uint8_t, 3, 1> c;
      for (int ch = 0; ch < 3; ++ch) {
        c(ch) = static_cast<std::uint8_t>(std::lround(features.rgb[i](ch) * 255.0));
      }
      p.color = c;
      if (res.confidence && res.confidence->available[i]) p.variance = res.confidence->variance[i];
      pts.push_back(p);
    }
    io::write_ply(*rc.out_cloud, pts);
  }
  if (rc.out_summary) write_summary(*rc.out_summary, res);
  return 0;
}

/// Runs compare_methods for every configured scene and writes the CSV.
/// Exit 0 only when every cell completed.
inline int cmd_benchmark(const fs::path& config_path, std::ostream& log) {
  const config::BenchConfig bc = config::load_bench_config(config_path);
  std::vector<bench::BenchRow> rows;
  for (std::size_t k = 0; k < bc.scenes.size(); ++k) {
    std::vector<bench::BenchRow> scene_rows;
    try {
      const bench::SyntheticScene scene = bench::generate_scene(bc.scenes[k], bc.scene_seeds[k]);
      scene_rows = bench::compare_methods(scene, bc.compare);
    } catch (const Error& e) {
      // Scene generation failed: one error row per cell keeps the table shape.
      for (double r : bc.compare.ratios)
        for (auto m : bc.compare.modes)
          for (auto s : bc.compare.seeds)
            for (auto method : bc.compare.methods) {
              bench::BenchRow row;
              row.scene = bc.scenes[k].name;
              row.method = method;
              row.mode = m;
              row.ratio_requested = r;
              row.seed = s;
              row.error = e.what();
              scene_rows.push_back(row);
            }
    }
    rows.insert(rows.end(), scene_rows.begin(), scene_rows.end());
  }
  std::ofstream out(bc.output);
  if (!out) throw IoError("cannot open '" + bc.output + "' for writing");
  bench::write_csv(out, rows);
  std::size_t failed = 0;
  for (const auto& r : rows) failed += r.ok() ? 0 : 1;
  log << rows.size() << " cells, " << failed << " failed -> " << bc.output << "\n";
  return failed == 0 ? 0 : 3;
}

struct FilterCounts {
  std::size_t kept = 0;
  std::size_t filtered = 0;
};

/// Masks depths whose variance is unavailable (NaN) or >= threshold.
inline FilterCounts filter_rasters(const io::FloatImage& depth, const io::FloatImage& var,
                                   double threshold, io::FloatImage& out) {
  if (depth.width != var.width || depth.height != var.height) {
    throw ConfigError("depth raster is " + std::to_string(depth.width) + "x" +
                      std::to_string(depth.height) + " but variance raster is " +
                      std::to_string(var.width) + "x" + std::to_string(var.height));
  }
  out = depth;
  FilterCounts counts;
  for (std::size_t i = 0; i < depth.data.size(); ++i) {
    const float v = var.data[i];
    const bool keep = std::isfinite(depth.data[i]) && std::isfinite(v) && v >= 0.0f &&
                      static_cast<double>(v) < threshold;
    if (keep) {
      ++counts.kept;
    } else {
      out.data[i] = std::numeric_limits<float>::quiet_NaN();
      ++counts.filtered;
    }
  }
  return counts;
}

inline int cmd_filter(const fs::path& depth_path, const fs::path& var_path, double threshold,
                      const fs::path& out_path, std::ostream& log) {
  if (std::isnan(threshold)) throw ConfigError("threshold must be a number");
  const io::FloatImage depth = io::read_pfm(depth_path);
  const io::FloatImage var = io::read_pfm(var_path);
  io::FloatImage out;
  const FilterCounts c = filter_rasters(depth, var, threshold, out);
  io::write_pfm(out_path, out);
  log << "kept " << c.kept << " filtered " << c.filtered << "\n";
  return 0;
}

/// Writes a synthetic scene as CLI inputs: rgb.ppm, certainty.pgm,
/// truth.pfm, sparse.pfm, cloud.ply and a ready-to-run upsample.json.
inline int cmd_synth(const fs::path& scene_config, const fs::path& out_dir, double ratio,
                     const std::string& mode, std::uint64_t seed, std::ostream& log) {
  const auto j = config::read_json_file(scene_config);
  const bench::SceneSpec spec = config::scene_from_json(j);
  const bench::SyntheticScene scene = bench::generate_scene(spec, seed);
  const ObservationSet obs =
      bench::downsample(scene, ratio, bench::sampling_mode_from_string(mode), seed);
  fs::create_directories(out_dir);

  io::write_pnm(out_dir / "rgb.ppm", io::rgb_to_bytes(scene.features));
  io::write_pnm(out_dir / "certainty.pgm", io::certainty_to_bytes(scene.features));
  io::write_pfm(out_dir / "truth.pfm", io::to_image(scene.truth));
  DepthField sparse(scene.grid);
  std::vector<io::CloudPoint> cloud;
  const RigidTransform to_sensor = spec.camera.extrinsic.inverse();
  for (const auto& o : obs.items) {
    sparse.valid[o.pixel] = true;
    sparse.depths[o.pixel] = o.depth;
    io::CloudPoint p;
    p.position = to_sensor.apply(scene.rays->point(o.pixel, o.depth));
    if (o.has_normal) p.normal = spec.camera.extrinsic.rotation.conjugate() * o.normal;
    cloud.push_back(p);
  }
  io::write_pfm(out_dir / "sparse.pfm", io::to_image(sparse));
  io::write_ply(out_dir / "cloud.ply", cloud);

  config::RunConfig rc;
  rc.camera = spec.camera;
  rc.rgb = "rgb.ppm";
  rc.certainty = "certainty.pgm";
  rc.sparse_depth = "sparse.pfm";
  rc.pipeline.compute_variance = true;
  rc.out_depth = "dense.pfm";
  rc.out_variance = "variance.pfm";
  rc.out_cloud = "dense.ply";
  rc.out_summary = "summary.json";
  rc.seed = seed;
  std::ofstream cfg(out_dir / "upsample.json");
  if (!cfg) throw IoError("cannot write '" + (out_dir / "upsample.json").string() + "'");
  cfg << config::to_json(rc).dump(2) << "\n";
  log << "wrote " << obs.size() << " observations of a " << scene.grid.width() << "x"
      << scene.grid.height() << " scene to " << out_dir.string() << "\n";
  return 0;
}

}  // namespace mrfup::commands
