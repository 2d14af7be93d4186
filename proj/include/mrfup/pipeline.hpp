#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include "mrfup/confidence.hpp"
#include "mrfup/features.hpp"
#include "mrfup/geometry.hpp"
#include "mrfup/observations.hpp"
#include "mrfup/prior.hpp"
#include "mrfup/problem.hpp"
#include "mrfup/solver.hpp"

namespace mrfup {

enum class InitMode { mesh, constant };

struct PipelineOptions {
  WeightFunction weights;
  ProblemConfig problem;
  SolverConfig solver;
  InitMode init = InitMode::mesh;
  /// Estimate PCA normals for observations that carry none.
  bool estimate_normals = false;
  NormalEstimationOptions normals;
  bool compute_variance = false;
  VarianceOptions variance;
  /// Applied when set; requires compute_variance.
  std::optional<double> variance_threshold;
};

struct UpsampleInputs {
  std::shared_ptr<const RayField> rays;
  FeatureImage features;
  ObservationSet observations;
  /// Continuous projections with their 3D points. Derived from the
  /// observation set at pixel centers when absent.
  std::optional<ProjectedObservations> projected;
};

struct UpsampleResult {
  DepthField init;
  std::size_t init_covered = 0;
  /// Optimized depths, every pixel valid.
  DepthField estimate;
  /// Estimate after confidence filtering (equals estimate when not filtering).
  DepthField output;
  SolveReport report;
  std::optional<ConfidenceField> confidence;
  std::size_t filtered = 0;
  ObservationSet observations;
  double runtime_s = 0.0;
};

/// prior -> assemble -> solve -> (variances -> filter).
inline UpsampleResult run_upsampling(const UpsampleInputs& in, const PipelineOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!in.rays) throw ConfigError("pipeline needs a ray field");
  const ImageGrid& grid = in.rays->grid;
  if (!(in.features.grid == grid)) throw ConfigError("feature image size differs from the camera grid");
  if (in.observations.empty()) throw ConfigError("no observations: upsampling is undefined");
  if (opt.variance_threshold && !opt.compute_variance) {
    throw ConfigError("a variance threshold requires variance computation");
  }
  opt.problem.validate();

  UpsampleResult res;
  res.observations = in.observations;
  if (opt.estimate_normals) {
    bool any = false;
    for (const auto& o : res.observations.items) any = any || o.has_normal;
    if (!any) estimate_observation_normals(res.observations, *in.rays, opt.normals);
  }

  const WeightField weights = compute_weight_field(in.features, opt.weights);
  const ResidualGraph graph = assemble(in.rays, res.observations, weights, opt.problem);

  const ProjectedObservations projected =
      in.projected ? *in.projected : project_observations(res.observations, *in.rays);
  if (opt.init == InitMode::mesh) {
    const TriangleMesh mesh = triangulate(projected);
    const InitResult init = init_depth_detailed(*in.rays, projected, mesh, grid, graph.bounds());
    res.init = init.depth;
    res.init_covered = init.covered();
  } else {
    res.init = constant_init(grid, projected);
  }

  auto [estimate, report] = solve(graph, res.init, opt.solver);
  res.estimate = std::move(estimate);
  res.report = std::move(report);
  res.output = res.estimate;

  if (opt.compute_variance) {
    res.confidence = estimate_variances(graph, res.estimate, opt.variance);
    if (opt.variance_threshold) {
      apply_threshold(*res.confidence, *opt.variance_threshold);
      res.output = filter_depths(res.estimate, *res.confidence, *opt.variance_threshold);
      res.filtered = grid.size() - res.output.valid_count();
    }
  }
  res.runtime_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace mrfup
