// Upsamples a 64x64 slanted plane from 1% of its pixels with both
// regularizers and prints the errors.
#include <cstdio>

#include "mrfup/bench.hpp"

int main() {
  using namespace mrfup;
  bench::SceneSpec spec;
  spec.name = "slanted";
  spec.camera = bench::default_camera(spec.width, spec.height);
  bench::PlaneRegion plane;
  plane.normal = Vec3(0.3, -0.2, 1.0);
  plane.offset = 5.0;
  spec.planes.push_back(plane);

  const bench::SyntheticScene scene = bench::generate_scene(spec, 1);
  const ObservationSet obs = bench::downsample(scene, 0.01, bench::SamplingMode::equidistant, 1);
  std::printf("%zu observations (r = %.4f)\n", obs.size(), obs.ratio());

  for (RegularizerMode mode : {RegularizerMode::planar, RegularizerMode::baseline}) {
    PipelineOptions opt;
    opt.problem.mode = mode;
    opt.compute_variance = true;
    const UpsampleResult res = run_upsampling(bench::scene_inputs(scene, obs), opt);
    const bench::EvalResult ev = bench::evaluate(res.estimate, scene.truth);
    std::printf("%-8s mae %.3e m  medae %.3e m  iterations %d  cost %.3e  (%s)\n",
                to_string(mode), ev.mae, ev.medae, res.report.iterations, res.report.final_cost,
                to_string(res.report.termination));
  }
  return 0;
}
