#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mrfup/bench.hpp"
#include "mrfup/errors.hpp"
#include "mrfup/pipeline.hpp"

namespace mrfup::config {

using nlohmann::json;
namespace fs = std::filesystem;

/// Everything `upsample` needs. Paths are stored as written; `resolve`
/// anchors relative ones at the config file's directory.
struct RunConfig {
  CameraModel camera;
  std::string rgb;
  std::optional<std::string> certainty;
  std::optional<std::string> points;        // ASCII PLY, sensor frame
  std::optional<std::string> sparse_depth;  // PFM with NaN holes
  PipelineOptions pipeline;
  std::string out_depth;
  std::optional<std::string> out_variance;
  std::optional<std::string> out_cloud;
  std::optional<std::string> out_summary;
  std::uint64_t seed = 0;
};

struct BenchConfig {
  std::vector<bench::SceneSpec> scenes;
  std::vector<std::uint64_t> scene_seeds;
  bench::CompareOptions compare;
  std::string output;
};

namespace detail {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

template <typename T>
T require(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) {
    throw ConfigError(std::string("missing required field '") + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

inline std::optional<std::string> get_path(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}

inline Vec3 vec3(const json& j, const char* key, const Vec3& fallback) {
  if (!j.contains(key)) return fallback;
  const auto v = j.at(key).get<std::vector<double>>();
  if (v.size() != 3) throw ConfigError(std::string("field '") + key + "' needs 3 numbers");
  return Vec3(v[0], v[1], v[2]);
}

inline json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace detail

// -- camera ----------------------------------------------------------------

inline CameraModel camera_from_json(const json& j) {
  CameraModel cam;
  const auto kind = detail::get_or<std::string>(j, "kind", "pinhole");
  if (kind == "pinhole") cam.kind = CameraKind::pinhole;
  else if (kind == "orthographic") cam.kind = CameraKind::orthographic;
  else throw ConfigError("unknown camera kind '" + kind + "'");
  cam.fx = detail::require<double>(j, "fx");
  cam.fy = detail::require<double>(j, "fy");
  cam.cx = detail::require<double>(j, "cx");
  cam.cy = detail::require<double>(j, "cy");
  const auto q = detail::get_or<std::vector<double>>(j, "rotation_wxyz", {1.0, 0.0, 0.0, 0.0});
  if (q.size() != 4) throw ConfigError("rotation_wxyz needs 4 numbers");
  cam.extrinsic.rotation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]);
  cam.extrinsic.translation = detail::vec3(j, "translation", Vec3::Zero());
  cam.validate();
  return cam;
}

inline json to_json(const CameraModel& cam) {
  const auto& q = cam.extrinsic.rotation;
  return json{{"kind", cam.kind == CameraKind::pinhole ? "pinhole" : "orthographic"},
              {"fx", cam.fx},
              {"fy", cam.fy},
              {"cx", cam.cx},
              {"cy", cam.cy},
              {"rotation_wxyz", json::array({q.w(), q.x(), q.y(), q.z()})},
              {"translation", detail::to_json(cam.extrinsic.translation)}};
}

// -- pipeline sections -----------------------------------------------------

inline LinearSolverKind linear_solver_from_string(const std::string& s) {
  if (s == "auto") return LinearSolverKind::automatic;
  if (s == "cholesky") return LinearSolverKind::cholesky;
  if (s == "cg") return LinearSolverKind::conjugate_gradient;
  throw ConfigError("unknown linear solver '" + s + "'");
}

inline const char* to_string(LinearSolverKind k) {
  switch (k) {
    case LinearSolverKind::automatic: return "auto";
    case LinearSolverKind::cholesky: return "cholesky";
    case LinearSolverKind::conjugate_gradient: return "cg";
  }
  return "auto";
}

/// Reads weights/problem/init/normals/solver/confidence sections from the
/// config root. Absent sections keep their defaults.
inline PipelineOptions pipeline_from_json(const json& root) {
  PipelineOptions p;
  if (root.contains("weights")) {
    const json& w = root.at("weights");
    p.weights.kind = weight_kind_from_string(detail::get_or<std::string>(w, "kind", "exponential"));
    p.weights.alpha = detail::get_or(w, "alpha", p.weights.alpha);
    p.weights.tau = detail::get_or(w, "tau", p.weights.tau);
  }
  p.weights.validate();
  if (root.contains("problem")) {
    const json& pr = root.at("problem");
    p.problem.w_data = detail::get_or(pr, "w_data", p.problem.w_data);
    p.problem.mode = regularizer_mode_from_string(detail::get_or<std::string>(pr, "mode", "planar"));
    p.problem.bound_margin = detail::get_or(pr, "bound_margin", p.problem.bound_margin);
    p.problem.eps_len = detail::get_or(pr, "eps_len", p.problem.eps_len);
  }
  p.problem.validate();
  const auto init = detail::get_or<std::string>(root, "init", "mesh");
  if (init == "mesh") p.init = InitMode::mesh;
  else if (init == "constant") p.init = InitMode::constant;
  else throw ConfigError("unknown init mode '" + init + "'");
  if (root.contains("normals")) {
    const json& n = root.at("normals");
    p.estimate_normals = detail::get_or(n, "estimate", false);
    p.normals.radius = detail::get_or(n, "radius", p.normals.radius);
    p.normals.degeneracy_ratio = detail::get_or(n, "degeneracy_ratio", p.normals.degeneracy_ratio);
    if (!(p.normals.radius > 0.0)) throw ConfigError("normals.radius must be > 0");
  }
  if (root.contains("solver")) {
    const json& s = root.at("solver");
    auto& c = p.solver;
    c.max_iterations = detail::get_or(s, "max_iterations", c.max_iterations);
    c.gradient_tolerance = detail::get_or(s, "gradient_tolerance", c.gradient_tolerance);
    c.step_tolerance = detail::get_or(s, "step_tolerance", c.step_tolerance);
    c.cost_tolerance = detail::get_or(s, "cost_tolerance", c.cost_tolerance);
    c.initial_damping = detail::get_or(s, "initial_damping", c.initial_damping);
    c.damping_increase = detail::get_or(s, "damping_increase", c.damping_increase);
    c.damping_decrease = detail::get_or(s, "damping_decrease", c.damping_decrease);
    c.linear_solver = linear_solver_from_string(detail::get_or<std::string>(s, "linear_solver", "auto"));
    c.cg_threshold = detail::get_or(s, "cg_threshold", c.cg_threshold);
  }
  p.solver.validate();
  if (root.contains("confidence")) {
    const json& c = root.at("confidence");
    p.compute_variance = detail::get_or(c, "compute", false);
    if (c.contains("threshold") && !c.at("threshold").is_null()) {
      p.variance_threshold = c.at("threshold").get<double>();
      if (!(*p.variance_threshold >= 0.0)) throw ConfigError("confidence.threshold must be >= 0");
    }
    if (c.contains("pixels")) p.variance.pixels = c.at("pixels").get<std::vector<std::size_t>>();
  }
  if (p.variance_threshold && !p.compute_variance) {
    throw ConfigError("confidence.threshold requires confidence.compute = true");
  }
  return p;
}

inline void pipeline_to_json(const PipelineOptions& p, json& root) {
  root["weights"] = {{"kind", to_string(p.weights.kind)},
                     {"alpha", p.weights.alpha},
                     {"tau", p.weights.tau}};
  root["problem"] = {{"w_data", p.problem.w_data},
                     {"mode", to_string(p.problem.mode)},
                     {"bound_margin", p.problem.bound_margin},
                     {"eps_len", p.problem.eps_len}};
  root["init"] = p.init == InitMode::mesh ? "mesh" : "constant";
  root["normals"] = {{"estimate", p.estimate_normals},
                     {"radius", p.normals.radius},
                     {"degeneracy_ratio", p.normals.degeneracy_ratio}};
  const auto& c = p.solver;
  root["solver"] = {{"max_iterations", c.max_iterations},
                    {"gradient_tolerance", c.gradient_tolerance},
                    {"step_tolerance", c.step_tolerance},
                    {"cost_tolerance", c.cost_tolerance},
                    {"initial_damping", c.initial_damping},
                    {"damping_increase", c.damping_increase},
                    {"damping_decrease", c.damping_decrease},
                    {"linear_solver", to_string(c.linear_solver)},
                    {"cg_threshold", c.cg_threshold}};
  json conf = {{"compute", p.compute_variance}};
  conf["threshold"] = p.variance_threshold ? json(*p.variance_threshold) : json(nullptr);
  if (!p.variance.pixels.empty()) conf["pixels"] = p.variance.pixels;
  root["confidence"] = conf;
}

// -- run config ------------------------------------------------------------

inline RunConfig run_config_from_json(const json& root) {
  RunConfig rc;
  if (!root.is_object()) throw ConfigError("config root must be an object");
  rc.camera = camera_from_json(detail::require<json>(root, "camera"));
  const json inputs = detail::require<json>(root, "inputs");
  rc.rgb = detail::require<std::string>(inputs, "rgb");
  rc.certainty = detail::get_path(inputs, "certainty");
  rc.points = detail::get_path(inputs, "points");
  rc.sparse_depth = detail::get_path(inputs, "sparse_depth");
  if (rc.points.has_value() == rc.sparse_depth.has_value()) {
    throw ConfigError("inputs need exactly one of 'points' or 'sparse_depth'");
  }
  rc.pipeline = pipeline_from_json(root);
  const json outputs = detail::require<json>(root, "outputs");
  rc.out_depth = detail::require<std::string>(outputs, "depth");
  rc.out_variance = detail::get_path(outputs, "variance");
  rc.out_cloud = detail::get_path(outputs, "cloud");
  rc.out_summary = detail::get_path(outputs, "summary");
  if (rc.out_variance && !rc.pipeline.compute_variance) {
    throw ConfigError("outputs.variance requires confidence.compute = true");
  }
  rc.seed = detail::get_or<std::uint64_t>(root, "seed", 0);
  return rc;
}

inline json to_json(const RunConfig& rc) {
  json root;
  root["camera"] = to_json(rc.camera);
  json inputs = {{"rgb", rc.rgb}};
  if (rc.certainty) inputs["certainty"] = *rc.certainty;
  if (rc.points) inputs["points"] = *rc.points;
  if (rc.sparse_depth) inputs["sparse_depth"] = *rc.sparse_depth;
  root["inputs"] = inputs;
  pipeline_to_json(rc.pipeline, root);
  json outputs = {{"depth", rc.out_depth}};
  if (rc.out_variance) outputs["variance"] = *rc.out_variance;
  if (rc.out_cloud) outputs["cloud"] = *rc.out_cloud;
  if (rc.out_summary) outputs["summary"] = *rc.out_summary;
  root["outputs"] = outputs;
  root["seed"] = rc.seed;
  return root;
}

inline json parse_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse '" + origin + "': " + e.what());
  }
}

inline json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str(), path.string());
}

inline std::string resolve(const fs::path& base_dir, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? p : (base_dir / path).lexically_normal().string();
}

/// Loads a run config, anchors relative paths at the config directory and
/// checks that every input exists.
inline RunConfig load_run_config(const fs::path& path) {
  RunConfig rc = run_config_from_json(read_json_file(path));
  const fs::path base = path.parent_path();
  auto fix = [&](std::string& p) { p = resolve(base, p); };
  auto fix_opt = [&](std::optional<std::string>& p) {
    if (p) fix(*p);
  };
  fix(rc.rgb);
  fix_opt(rc.certainty);
  fix_opt(rc.points);
  fix_opt(rc.sparse_depth);
  fix(rc.out_depth);
  fix_opt(rc.out_variance);
  fix_opt(rc.out_cloud);
  fix_opt(rc.out_summary);
  for (const auto* p : {&rc.rgb}) {
    if (!fs::exists(*p)) throw IoError("input file not found: '" + *p + "'");
  }
  for (const auto* p : {&rc.certainty, &rc.points, &rc.sparse_depth}) {
    if (*p && !fs::exists(**p)) throw IoError("input file not found: '" + **p + "'");
  }
  return rc;
}

// -- benchmark config ------------------------------------------------------

inline bench::SceneSpec scene_from_json(const json& j) {
  bench::SceneSpec s;
  s.name = detail::get_or<std::string>(j, "name", "scene");
  s.width = detail::get_or(j, "width", 64);
  s.height = detail::get_or(j, "height", 64);
  s.camera = j.contains("camera") ? camera_from_json(j.at("camera"))
                                  : bench::default_camera(s.width, s.height);
  s.noise_sigma = detail::get_or(j, "noise_sigma", 0.0);
  s.normal_noise_angle = detail::get_or(j, "normal_noise_angle", 0.0);
  const auto normals = detail::get_or<std::string>(j, "normals", "none");
  if (normals == "none") s.normals = bench::NormalSource::none;
  else if (normals == "truth") s.normals = bench::NormalSource::truth;
  else if (normals == "estimated") s.normals = bench::NormalSource::estimated;
  else throw ConfigError("unknown normal source '" + normals + "'");
  s.boundary_band = detail::get_or(j, "boundary_band", true);
  s.rgb_noise = detail::get_or(j, "rgb_noise", 0.0);
  if (!(s.noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
  for (const json& pj : detail::require<json>(j, "planes")) {
    bench::PlaneRegion p;
    p.normal = detail::vec3(pj, "normal", p.normal);
    p.offset = detail::require<double>(pj, "offset");
    p.rgb = detail::vec3(pj, "rgb", p.rgb);
    if (pj.contains("region")) {
      const auto r = pj.at("region").get<std::vector<int>>();
      if (r.size() != 4) throw ConfigError("plane region needs [col0, row0, col1, row1]");
      p.col0 = r[0], p.row0 = r[1], p.col1 = r[2], p.row1 = r[3];
    }
    s.planes.push_back(p);
  }
  if (s.planes.empty()) throw ConfigError("scene '" + s.name + "' needs at least one plane");
  return s;
}

inline json to_json(const bench::SceneSpec& s) {
  json planes = json::array();
  for (const auto& p : s.planes) {
    planes.push_back({{"normal", detail::to_json(p.normal)},
                      {"offset", p.offset},
                      {"rgb", detail::to_json(p.rgb)},
                      {"region", json::array({p.col0, p.row0, p.col1, p.row1})}});
  }
  const char* normals = s.normals == bench::NormalSource::none    ? "none"
                        : s.normals == bench::NormalSource::truth ? "truth"
                                                                  : "estimated";
  return json{{"name", s.name},
              {"width", s.width},
              {"height", s.height},
              {"camera", to_json(s.camera)},
              {"noise_sigma", s.noise_sigma},
              {"normal_noise_angle", s.normal_noise_angle},
              {"normals", normals},
              {"boundary_band", s.boundary_band},
              {"rgb_noise", s.rgb_noise},
              {"planes", planes}};
}

inline BenchConfig bench_config_from_json(const json& root) {
  BenchConfig bc;
  if (!root.is_object()) throw ConfigError("config root must be an object");
  for (const json& sj : detail::require<json>(root, "scenes")) {
    bc.scenes.push_back(scene_from_json(sj));
    bc.scene_seeds.push_back(detail::get_or<std::uint64_t>(sj, "seed", 0));
  }
  if (bc.scenes.empty()) throw ConfigError("benchmark needs at least one scene");
  bc.compare.ratios = detail::require<std::vector<double>>(root, "ratios");
  for (const auto& m : detail::require<std::vector<std::string>>(root, "modes")) {
    bc.compare.modes.push_back(bench::sampling_mode_from_string(m));
  }
  bc.compare.seeds = detail::require<std::vector<std::uint64_t>>(root, "seeds");
  if (root.contains("methods")) {
    bc.compare.methods.clear();
    for (const auto& m : root.at("methods").get<std::vector<std::string>>()) {
      bc.compare.methods.push_back(regularizer_mode_from_string(m));
    }
  }
  if (bc.compare.ratios.empty()) throw ConfigError("benchmark 'ratios' must be non-empty");
  if (bc.compare.modes.empty()) throw ConfigError("benchmark 'modes' must be non-empty");
  if (bc.compare.seeds.empty()) throw ConfigError("benchmark 'seeds' must be non-empty");
  if (bc.compare.methods.empty()) throw ConfigError("benchmark 'methods' must be non-empty");
  for (double r : bc.compare.ratios) {
    if (!(r > 0.0 && r <= 1.0)) throw ConfigError("benchmark ratios must lie in (0, 1]");
  }
  bc.compare.pipeline = pipeline_from_json(root);
  bc.output = detail::require<std::string>(root, "output");
  return bc;
}

inline json to_json(const BenchConfig& bc) {
  json root;
  json scenes = json::array();
  for (std::size_t k = 0; k < bc.scenes.size(); ++k) {
    json s = to_json(bc.scenes[k]);
    s["seed"] = bc.scene_seeds[k];
    scenes.push_back(s);
  }
  root["scenes"] = scenes;
  root["ratios"] = bc.compare.ratios;
  json modes = json::array();
  for (auto m : bc.compare.modes) modes.push_back(bench::to_string(m));
  root["modes"] = modes;
  root["seeds"] = bc.compare.seeds;
  json methods = json::array();
  for (auto m : bc.compare.methods) methods.push_back(to_string(m));
  root["methods"] = methods;
  pipeline_to_json(bc.compare.pipeline, root);
  root["output"] = bc.output;
  return root;
}

inline BenchConfig load_bench_config(const fs::path& path) {
  BenchConfig bc = bench_config_from_json(read_json_file(path));
  bc.output = resolve(path.parent_path(), bc.output);
  return bc;
}

}  // namespace mrfup::config
