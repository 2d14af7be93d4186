#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "mrfup/errors.hpp"
#include "mrfup/features.hpp"
#include "mrfup/geometry.hpp"
#include "mrfup/observations.hpp"
#include "mrfup/pipeline.hpp"

namespace mrfup::bench {

/// One planar patch of a synthetic scene. The region is the half-open pixel
/// rectangle [col0, col1) x [row0, row1); later planes paint over earlier
/// ones.
struct PlaneRegion {
  Vec3 normal = Vec3::UnitZ();
  double offset = 5.0;
  Vec3 rgb = Vec3::Constant(0.5);
  int col0 = 0, row0 = 0, col1 = 1 << 30, row1 = 1 << 30;
};

enum class NormalSource { none, truth, estimated };

struct SceneSpec {
  std::string name = "scene";
  int width = 64;
  int height = 64;
  CameraModel camera;
  std::vector<PlaneRegion> planes;
  /// Gaussian depth noise added to observations (meters).
  double noise_sigma = 0.0;
  /// Perturbation of truth normals (radians) when normals come from truth.
  double normal_noise_angle = 0.0;
  NormalSource normals = NormalSource::none;
  /// Zero semantic certainty on pixels next to a region boundary.
  bool boundary_band = true;
  /// Uniform per-pixel RGB jitter amplitude (drawn from the scene seed).
  double rgb_noise = 0.0;
};

struct SyntheticScene {
  SceneSpec spec;
  ImageGrid grid;
  std::shared_ptr<const RayField> rays;
  DepthField truth;
  FeatureImage features;
  std::vector<int> region;  // plane index per pixel
  std::vector<Vec3> plane_normals;
  std::vector<double> plane_offsets;
};

/// Default camera for a W x H grid: principal point at the image center and
/// roughly 60 degrees horizontal field of view.
inline CameraModel default_camera(int width, int height) {
  CameraModel cam;
  cam.kind = CameraKind::pinhole;
  cam.fx = cam.fy = 0.866 * width;
  cam.cx = 0.5 * (width - 1);
  cam.cy = 0.5 * (height - 1);
  return cam;
}

inline SyntheticScene generate_scene(const SceneSpec& spec, std::uint64_t seed) {
  if (spec.planes.empty()) throw ConfigError("scene '" + spec.name + "' has no planes");
  SyntheticScene s;
  s.spec = spec;
  s.grid = ImageGrid(spec.width, spec.height);
  s.rays = std::make_shared<const RayField>(build_ray_field(spec.camera, s.grid));
  s.truth = DepthField(s.grid, 0.0, true);
  s.features = FeatureImage(s.grid);
  s.region.assign(s.grid.size(), -1);

  for (const auto& p : spec.planes) {
    const double len = p.normal.norm();
    if (!(len > 0.0) || !std::isfinite(len)) {
      throw ConfigError("scene '" + spec.name + "': plane normal must be non-zero");
    }
    s.plane_normals.push_back(p.normal / len);
    s.plane_offsets.push_back(p.offset / len);
    if (p.rgb.minCoeff() < 0.0 || p.rgb.maxCoeff() > 1.0) {
      throw ConfigError("scene '" + spec.name + "': plane colors must lie in [0,1]");
    }
  }
  for (int r = 0; r < s.grid.height(); ++r) {
    for (int c = 0; c < s.grid.width(); ++c) {
      int owner = -1;
      for (std::size_t k = 0; k < spec.planes.size(); ++k) {
        const auto& p = spec.planes[k];
        if (c >= p.col0 && c < p.col1 && r >= p.row0 && r < p.row1) owner = static_cast<int>(k);
      }
      if (owner < 0) {
        throw ConfigError("scene '" + spec.name + "': pixel (" + std::to_string(r) + "," +
                          std::to_string(c) + ") belongs to no plane");
      }
      s.region[s.grid.index(r, c)] = owner;
    }
  }

  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    const auto k = static_cast<std::size_t>(s.region[i]);
    const Vec3& n = s.plane_normals[k];
    const double denom = n.dot(s.rays->directions[i]);
    const double num = s.plane_offsets[k] - n.dot(s.rays->origins[i]);
    if (std::abs(num) < 1e-12) {
      throw ConfigError("scene '" + spec.name + "': plane " + std::to_string(k) +
                        " passes through a ray origin");
    }
    const double d = num / denom;
    if (!(std::abs(denom) > 1e-9) || !std::isfinite(d) || !(d > 0.0)) {
      throw ConfigError("scene '" + spec.name + "': plane " + std::to_string(k) +
                        " is not in front of the camera at pixel " + std::to_string(i));
    }
    s.truth.depths[i] = d;
    s.features.rgb[i] = spec.planes[k].rgb;
  }

  if (spec.rgb_noise > 0.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-spec.rgb_noise, spec.rgb_noise);
    for (auto& c : s.features.rgb) {
      for (int ch = 0; ch < 3; ++ch) c(ch) = std::clamp(c(ch) + u(rng), 0.0, 1.0);
    }
  }
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    double cert = 1.0;
    if (spec.boundary_band) {
      for (std::size_t j : neighbors4(s.grid, i)) {
        if (s.region[j] != s.region[i]) cert = 0.0;
      }
    }
    s.features.certainty[i] = cert;
  }
  return s;
}

enum class SamplingMode { equidistant, random };

inline const char* to_string(SamplingMode m) {
  return m == SamplingMode::equidistant ? "equidistant" : "random";
}

inline SamplingMode sampling_mode_from_string(const std::string& s) {
  if (s == "equidistant") return SamplingMode::equidistant;
  if (s == "random") return SamplingMode::random;
  throw ConfigError("unknown downsampling mode '" + s + "'");
}

/// Sub-grid stride for an equidistant ratio r: round(1 / sqrt(r)).
inline int equidistant_stride(double ratio) {
  return std::max(1, static_cast<int>(std::lround(1.0 / std::sqrt(ratio))));
}

/// Selects observed pixels and draws their (noisy) depths. Equidistant mode
/// takes a regular sub-grid centered in the image; random mode draws
/// floor(r |I|) pixels without replacement.
inline ObservationSet downsample(const SyntheticScene& scene, double ratio, SamplingMode mode,
                                 std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ConfigError("downsampling ratio must lie in (0, 1]");
  const ImageGrid& grid = scene.grid;
  std::vector<std::size_t> pixels;
  if (mode == SamplingMode::equidistant) {
    const int stride = equidistant_stride(ratio);
    const int nc = (grid.width() - 1) / stride + 1;
    const int nr = (grid.height() - 1) / stride + 1;
    const int oc = ((grid.width() - 1) - (nc - 1) * stride) / 2;
    const int orow = ((grid.height() - 1) - (nr - 1) * stride) / 2;
    for (int r = 0; r < nr; ++r)
      for (int c = 0; c < nc; ++c) pixels.push_back(grid.index(orow + r * stride, oc + c * stride));
  } else {
    const auto count = static_cast<std::size_t>(std::floor(ratio * grid.size() + 1e-9));
    std::vector<std::size_t> all(grid.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t k = 0; k < count && k < all.size(); ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, all.size() - 1);
      std::swap(all[k], all[pick(rng)]);
    }
    pixels.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(std::min(count, all.size())));
    std::sort(pixels.begin(), pixels.end());
  }
  if (pixels.size() < 3) {
    throw ConfigError("downsampling ratio " + std::to_string(ratio) + " yields fewer than 3 observations");
  }

  // Separate stream for noise so the pixel pattern does not depend on sigma.
  std::mt19937_64 noise_rng(seed ^ 0x9E3779B97F4A7C15ULL);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<Observation> raw;
  raw.reserve(pixels.size());
  for (std::size_t p : pixels) {
    Observation o;
    o.pixel = p;
    o.depth = scene.truth.depths[p];
    if (scene.spec.noise_sigma > 0.0) {
      o.depth = std::max(o.depth + scene.spec.noise_sigma * noise(noise_rng), 1e-3);
    }
    raw.push_back(o);
  }
  ObservationSet obs = make_observation_set(grid, raw);

  if (scene.spec.normals == NormalSource::truth) {
    std::vector<std::optional<Vec3>> normals(obs.size());
    for (std::size_t k = 0; k < obs.size(); ++k) {
      Vec3 n = scene.plane_normals[static_cast<std::size_t>(scene.region[obs.items[k].pixel])];
      if (scene.spec.normal_noise_angle > 0.0) {
        // Rotate about a random axis perpendicular to n.
        Vec3 axis(noise(noise_rng), noise(noise_rng), noise(noise_rng));
        axis = (axis - axis.dot(n) * n).normalized();
        if (axis.allFinite()) {
          n = Eigen::AngleAxisd(scene.spec.normal_noise_angle, axis) * n;
        }
      }
      normals[k] = n;
    }
    attach_normals(obs, *scene.rays, normals);
  }
  return obs;
}

struct EvalResult {
  double mae = 0.0;
  double medae = 0.0;
  double max_abs = 0.0;
  double ratio = 0.0;
  std::size_t evaluated = 0;
  /// Pixels excluded because the estimate was invalid.
  std::size_t invalid = 0;
  /// |estimate - truth| per pixel, NaN where not evaluated.
  std::vector<double> error;
  double runtime_s = 0.0;
};

/// Mean and median absolute error over valid estimate pixels. The median of
/// an even count is the lower middle order statistic.
inline EvalResult evaluate(const DepthField& estimate, const DepthField& truth) {
  if (!(estimate.grid == truth.grid)) throw ConfigError("estimate and truth grids differ");
  EvalResult res;
  res.error.assign(truth.grid.size(), std::numeric_limits<double>::quiet_NaN());
  std::vector<double> abs_err;
  abs_err.reserve(truth.grid.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.grid.size(); ++i) {
    if (!truth.valid[i]) continue;
    if (!estimate.valid[i]) {
      ++res.invalid;
      continue;
    }
    const double e = std::abs(estimate.depths[i] - truth.depths[i]);
    res.error[i] = e;
    abs_err.push_back(e);
    sum += e;
    res.max_abs = std::max(res.max_abs, e);
  }
  if (abs_err.empty()) throw ConfigError("evaluation has no valid pixels");
  res.evaluated = abs_err.size();
  res.mae = sum / static_cast<double>(abs_err.size());
  const std::size_t mid = (abs_err.size() - 1) / 2;
  std::nth_element(abs_err.begin(), abs_err.begin() + static_cast<std::ptrdiff_t>(mid), abs_err.end());
  res.medae = abs_err[mid];
  return res;
}

/// Inputs for the full pipeline on a synthetic scene.
inline UpsampleInputs scene_inputs(const SyntheticScene& scene, const ObservationSet& obs) {
  UpsampleInputs in;
  in.rays = scene.rays;
  in.features = scene.features;
  in.observations = obs;
  return in;
}

struct BenchRow {
  std::string scene;
  RegularizerMode method = RegularizerMode::planar;
  SamplingMode mode = SamplingMode::equidistant;
  double ratio_requested = 0.0;
  double ratio_achieved = 0.0;
  std::uint64_t seed = 0;
  double mae = std::numeric_limits<double>::quiet_NaN();
  double medae = std::numeric_limits<double>::quiet_NaN();
  std::size_t filtered = 0;
  double runtime_s = 0.0;
  int iterations = 0;
  std::string error;

  bool ok() const { return error.empty(); }
};

struct CompareOptions {
  std::vector<double> ratios;
  std::vector<SamplingMode> modes;
  std::vector<std::uint64_t> seeds;
  std::vector<RegularizerMode> methods{RegularizerMode::planar, RegularizerMode::baseline};
  PipelineOptions pipeline;
};

/// Runs every (method, ratio, mode, seed) cell on identical inputs per
/// (ratio, mode, seed). Failures are recorded per row, not thrown.
inline std::vector<BenchRow> compare_methods(const SyntheticScene& scene, const CompareOptions& opt) {
  if (opt.ratios.empty() || opt.modes.empty() || opt.seeds.empty() || opt.methods.empty()) {
    throw ConfigError("benchmark parameter lists must be non-empty");
  }
  std::vector<BenchRow> rows;
  for (double ratio : opt.ratios) {
    for (SamplingMode mode : opt.modes) {
      for (std::uint64_t seed : opt.seeds) {
        ObservationSet obs;
        std::string sample_error;
        try {
          obs = downsample(scene, ratio, mode, seed);
        } catch (const Error& e) {
          sample_error = e.what();
        }
        for (RegularizerMode method : opt.methods) {
          BenchRow row;
          row.scene = scene.spec.name;
          row.method = method;
          row.mode = mode;
          row.ratio_requested = ratio;
          row.seed = seed;
          if (!sample_error.empty()) {
            row.error = sample_error;
            rows.push_back(row);
            continue;
          }
          row.ratio_achieved = obs.ratio();
          try {
            PipelineOptions p = opt.pipeline;
            p.problem.mode = method;
            if (scene.spec.normals == NormalSource::estimated) p.estimate_normals = true;
            const UpsampleResult res = run_upsampling(scene_inputs(scene, obs), p);
            const EvalResult ev = evaluate(res.output, scene.truth);
            row.mae = ev.mae;
            row.medae = ev.medae;
            row.filtered = res.filtered;
            row.runtime_s = res.runtime_s;
            row.iterations = res.report.iterations;
          } catch (const Error& e) {
            row.error = e.what();
          }
          rows.push_back(row);
        }
      }
    }
  }
  return rows;
}

inline const char* csv_header() {
  return "scene,method,mode,ratio_requested,ratio_achieved,seed,mae_m,medae_m,filtered_px,"
         "runtime_s,error";
}

/// One CSV line. Numeric columns other than runtime use shortest round-trip form.
inline std::string csv_row(const BenchRow& r) {
  auto num = [](double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  };
  std::string err = r.error;
  std::replace(err.begin(), err.end(), ',', ';');
  std::replace(err.begin(), err.end(), '\n', ' ');
  char rt[64];
  std::snprintf(rt, sizeof rt, "%.6f", r.runtime_s);
  return r.scene + "," + to_string(r.method) + "," + to_string(r.mode) + "," +
         num(r.ratio_requested) + "," + num(r.ratio_achieved) + "," + std::to_string(r.seed) +
         "," + num(r.mae) + "," + num(r.medae) + "," + std::to_string(r.filtered) + "," + rt +
         "," + err;
}

inline void write_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << csv_header() << "\n";
  for (const auto& r : rows) out << csv_row(r) << "\n";
}

}  // namespace mrfup::bench
