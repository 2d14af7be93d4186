#include <sstream>

#include <gtest/gtest.h>

#include "mrfup/bench.hpp"

using namespace mrfup;

namespace {

bench::SceneSpec plane_spec(int w, int h, Vec3 n, double offset) {
  bench::SceneSpec s;
  s.width = w;
  s.height = h;
  s.camera = bench::default_camera(w, h);
  bench::PlaneRegion p;
  p.normal = n;
  p.offset = offset;
  s.planes.push_back(p);
  return s;
}

}  // namespace

TEST(Scene, FrontoParallel) {
  const auto s = bench::generate_scene(plane_spec(16, 12, Vec3::UnitZ(), 5.0), 0);
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    EXPECT_NEAR(s.rays->point(i, s.truth.depths[i]).z(), 5.0, 1e-12);
    EXPECT_GT(s.truth.depths[i], 0.0);
  }
}

TEST(Scene, SlantedPlaneCenterDepth) {
  const Vec3 n = Vec3(1, 0, 2).normalized();
  // Center pixel of an odd grid looks along the optical axis: depth 4 -> offset 4 n_z.
  const auto s = bench::generate_scene(plane_spec(17, 17, n, 4.0 * n.z()), 0);
  EXPECT_NEAR(s.truth.depths[s.grid.index(8, 8)], 4.0, 1e-12);
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    EXPECT_NEAR(n.dot(s.rays->point(i, s.truth.depths[i])), 4.0 * n.z(), 1e-12);
  }
}

TEST(Scene, Validation) {
  bench::SceneSpec s = plane_spec(8, 8, Vec3::UnitZ(), 5.0);
  s.planes[0].col1 = 4;
  EXPECT_THROW(bench::generate_scene(s, 0), ConfigError);
  s = plane_spec(8, 8, Vec3::UnitZ(), -5.0);
  EXPECT_THROW(bench::generate_scene(s, 0), ConfigError);
  s.planes.clear();
  EXPECT_THROW(bench::generate_scene(s, 0), ConfigError);
}

TEST(Scene, BoundaryCertaintyAndWeights) {
  bench::SceneSpec s = plane_spec(10, 6, Vec3::UnitZ(), 5.0);
  s.planes[0].rgb = Vec3(0.9, 0.1, 0.1);
  s.planes[0].col1 = 5;
  bench::PlaneRegion q;
  q.normal = Vec3(0.2, 0, 1);
  q.offset = 4.0;
  q.rgb = Vec3(0.1, 0.1, 0.9);
  q.col0 = 5;
  s.planes.push_back(q);
  const auto scene = bench::generate_scene(s, 0);
  EXPECT_EQ(scene.features.certainty[scene.grid.index(2, 4)], 0.0);
  EXPECT_EQ(scene.features.certainty[scene.grid.index(2, 5)], 0.0);
  EXPECT_EQ(scene.features.certainty[scene.grid.index(2, 1)], 1.0);
  const WeightField w = compute_weight_field(scene.features, WeightFunction{});
  EXPECT_LT(w.pair(scene.grid.index(2, 5), scene.grid.index(2, 4)),
            w.pair(scene.grid.index(2, 1), scene.grid.index(2, 2)) + 1e-15);
}

TEST(Downsample, FullRatio) {
  const auto s = bench::generate_scene(plane_spec(9, 7, Vec3::UnitZ(), 5.0), 0);
  for (auto m : {bench::SamplingMode::equidistant, bench::SamplingMode::random}) {
    const ObservationSet o = bench::downsample(s, 1.0, m, 3);
    EXPECT_EQ(o.size(), s.grid.size());
  }
}

TEST(Downsample, EquidistantStride) {
  const auto s = bench::generate_scene(plane_spec(100, 100, Vec3::UnitZ(), 5.0), 0);
  const ObservationSet o = bench::downsample(s, 0.01, bench::SamplingMode::equidistant, 0);
  EXPECT_EQ(bench::equidistant_stride(0.01), 10);
  EXPECT_EQ(o.size(), 100u);
  EXPECT_DOUBLE_EQ(o.ratio(), 0.01);
  for (std::size_t k = 1; k < o.size(); ++k) {
    const int dc = s.grid.col(o.items[k].pixel) - s.grid.col(o.items[k - 1].pixel);
    if (dc > 0) EXPECT_EQ(dc, 10);
  }
}

TEST(Downsample, RandomDeterministic) {
  const auto s = bench::generate_scene(plane_spec(32, 32, Vec3(0.1, 0.2, 1), 5.0), 0);
  const auto a = bench::downsample(s, 0.05, bench::SamplingMode::random, 42);
  const auto b = bench::downsample(s, 0.05, bench::SamplingMode::random, 42);
  const auto c = bench::downsample(s, 0.05, bench::SamplingMode::random, 43);
  ASSERT_EQ(a.size(), b.size());
  bool same = true, differ = false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    same = same && a.items[k].pixel == b.items[k].pixel && a.items[k].depth == b.items[k].depth;
    differ = differ || a.items[k].pixel != c.items[k].pixel;
  }
  EXPECT_TRUE(same);
  EXPECT_TRUE(differ);
  EXPECT_EQ(a.size(), 51u);
}

TEST(Downsample, NoiseAndNormals) {
  bench::SceneSpec spec = plane_spec(20, 20, Vec3(0.1, 0.2, 1), 5.0);
  spec.noise_sigma = 0.01;
  spec.normals = bench::NormalSource::truth;
  const auto s = bench::generate_scene(spec, 0);
  const auto o = bench::downsample(s, 0.1, bench::SamplingMode::random, 1);
  double sq = 0.0;
  for (const auto& it : o.items) {
    sq += std::pow(it.depth - s.truth.depths[it.pixel], 2);
    EXPECT_TRUE(it.has_normal);
    EXPECT_LE(it.normal.dot(s.rays->directions[it.pixel]), 0.0);
  }
  const double rms = std::sqrt(sq / o.size());
  EXPECT_GT(rms, 0.003);
  EXPECT_LT(rms, 0.03);
  EXPECT_THROW(bench::downsample(s, 0.0, bench::SamplingMode::random, 1), ConfigError);
}

TEST(Evaluate, Examples) {
  const ImageGrid g(3, 3);
  DepthField truth(g, 5.0, true);
  EXPECT_EQ(bench::evaluate(truth, truth).mae, 0.0);
  EXPECT_EQ(bench::evaluate(truth, truth).medae, 0.0);

  DepthField est = truth;
  for (std::size_t i = 0; i < 9; ++i) est.valid[i] = i < 3;
  est.depths[0] = 6, est.depths[1] = 7, est.depths[2] = 8;
  auto r = bench::evaluate(est, truth);
  EXPECT_DOUBLE_EQ(r.mae, 2.0);
  EXPECT_DOUBLE_EQ(r.medae, 2.0);
  EXPECT_EQ(r.invalid, 6u);
  EXPECT_EQ(r.evaluated, 3u);

  est.valid[3] = true;
  est.depths[3] = 105;
  r = bench::evaluate(est, truth);
  EXPECT_DOUBLE_EQ(r.mae, 26.5);
  EXPECT_DOUBLE_EQ(r.medae, 2.0);
  EXPECT_LE(r.medae, r.max_abs);
}

TEST(Compare, RowsAndPlanarAdvantage) {
  const auto s = bench::generate_scene(plane_spec(32, 32, Vec3(0.3, -0.2, 1), 5.0), 1);
  bench::CompareOptions opt;
  opt.ratios = {0.02, 0.05};
  opt.modes = {bench::SamplingMode::equidistant, bench::SamplingMode::random};
  opt.seeds = {1};
  const auto rows = bench::compare_methods(s, opt);
  ASSERT_EQ(rows.size(), 8u);
  for (std::size_t k = 0; k < rows.size(); k += 2) {
    ASSERT_TRUE(rows[k].ok()) << rows[k].error;
    EXPECT_EQ(rows[k].method, RegularizerMode::planar);
    EXPECT_EQ(rows[k + 1].method, RegularizerMode::baseline);
    EXPECT_LT(rows[k].mae, rows[k + 1].mae);
  }
  const auto again = bench::compare_methods(s, opt);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    EXPECT_EQ(rows[k].mae, again[k].mae);
    EXPECT_EQ(rows[k].medae, again[k].medae);
  }
  opt.ratios.clear();
  EXPECT_THROW(bench::compare_methods(s, opt), ConfigError);
}

TEST(Csv, HeaderAndRow) {
  std::ostringstream out;
  bench::BenchRow r;
  r.scene = "s";
  r.ratio_requested = 0.01;
  r.ratio_achieved = 0.0125;
  r.seed = 3;
  r.mae = 0.5;
  r.medae = 0.25;
  r.filtered = 2;
  r.runtime_s = 1.5;
  bench::write_csv(out, {r});
  EXPECT_EQ(out.str(),
            "scene,method,mode,ratio_requested,ratio_achieved,seed,mae_m,medae_m,filtered_px,runtime_s,error\n"
            "s,planar,equidistant,0.01,0.0125,3,0.5,0.25,2,1.500000,\n");
}
