#include <algorithm>

#include <gtest/gtest.h>

#include "mrfup/pipeline.hpp"
#include "oracles.hpp"

using namespace mrfup;

namespace {

Eigen::VectorXd dense_inverse_diagonal(const ResidualGraph& g, const std::vector<double>& x) {
  const Eigen::MatrixXd jac = oracle::dense_jacobian(g, x);
  const Eigen::MatrixXd jtj = jac.transpose() * jac;
  return jtj.fullPivLu().inverse().diagonal();
}

}  // namespace

TEST(Confidence, ScalarExamples) {
  const ImageGrid grid(3, 3);
  auto rays = std::make_shared<const RayField>(build_ray_field(CameraModel{}, grid));
  for (double sw : {1.0, 10.0}) {
    ResidualGraph g(rays, 1e-9);
    ResidualBlock b;
    b.params[0] = 4;
    b.observed = 2.0;
    b.sqrt_weight = sw;
    g.add(b);
    const ConfidenceField c = estimate_variances(g, DepthField(grid, 2.0, true));
    EXPECT_TRUE(c.available[4]);
    EXPECT_NEAR(c.variance[4], 1.0 / (sw * sw), 1e-15);
    EXPECT_EQ(c.available_count(), 1u);
    EXPECT_FALSE(c.available[0]);
    EXPECT_TRUE(std::isnan(c.variance[0]));
  }
}

TEST(Confidence, MatchesDenseInverse) {
  for (int rep = 0; rep < 5; ++rep) {
    oracle::Instance in = oracle::make_instance(4, 4, 60 + rep, 4, 0.05, rep % 2 == 0);
    const auto [x, r] = solve(in.graph, DepthField(in.rays->grid, in.obs.items[0].depth, true), SolverConfig{});
    const ConfidenceField c = estimate_variances(in.graph, x);
    const Eigen::VectorXd ref = dense_inverse_diagonal(in.graph, x.depths);
    for (std::size_t i = 0; i < x.depths.size(); ++i) {
      ASSERT_TRUE(c.available[i]);
      EXPECT_NEAR(c.variance[i], ref(static_cast<Eigen::Index>(i)), 1e-8 * std::max(1.0, ref(static_cast<Eigen::Index>(i))));
      EXPECT_GE(c.variance[i], 0.0);
    }
  }
}

TEST(Confidence, SubsetOfPixels) {
  oracle::Instance in = oracle::make_instance(5, 5, 71, 5, 0.0, false);
  VarianceOptions opt;
  opt.pixels = {0, 12, 24};
  DepthField truth(in.rays->grid, 0.0, true);
  truth.depths = in.truth;
  const ConfidenceField all = estimate_variances(in.graph, truth);
  const ConfidenceField sub = estimate_variances(in.graph, truth, opt);
  for (std::size_t i = 0; i < truth.depths.size(); ++i) {
    const bool wanted = i == 0 || i == 12 || i == 24;
    EXPECT_EQ(sub.available[i], wanted);
    if (wanted) EXPECT_DOUBLE_EQ(sub.variance[i], all.variance[i]);
  }
}

TEST(Confidence, WeightScalingScalesVariance) {
  oracle::Instance in = oracle::make_instance(4, 4, 81, 4, 0.0, false);
  DepthField truth(in.rays->grid, 0.0, true);
  truth.depths = in.truth;
  const ConfidenceField base = estimate_variances(in.graph, truth);
  ResidualGraph scaled(in.rays, in.graph.eps_len());
  for (ResidualBlock b : in.graph.blocks()) {
    b.sqrt_weight *= std::sqrt(7.0);
    scaled.add(b);
  }
  scaled.set_bounds(in.graph.bounds());
  const ConfidenceField s = estimate_variances(scaled, truth);
  for (std::size_t i = 0; i < truth.depths.size(); ++i) EXPECT_NEAR(s.variance[i] * 7.0, base.variance[i], 1e-10 * base.variance[i]);
}

TEST(Confidence, DecoupledPixelFiltered) {
  oracle::Instance in = oracle::make_instance(5, 5, 91, 6, 0.0, false);
  // Isolate the pixel (1, 1): distinct color, no observation.
  const std::size_t iso = in.rays->grid.index(1, 1);
  std::vector<Observation> raw;
  for (const auto& o : in.obs.items)
    if (o.pixel != iso) raw.push_back(o);
  in.obs = make_observation_set(in.rays->grid, raw);
  in.features.rgb[iso] = Vec3(1.0, 1.0, 1.0);
  for (std::size_t n : neighbors4(in.rays->grid, iso)) in.features.rgb[n] = Vec3(0.0, 0.0, 0.0);
  for (std::size_t i = 0; i < in.features.certainty.size(); ++i) in.features.certainty[i] = 1.0;
  WeightFunction g;
  g.alpha = 20.0;
  const ResidualGraph graph = assemble(in.rays, in.obs, compute_weight_field(in.features, g), in.cfg);
  DepthField truth(in.rays->grid, 0.0, true);
  truth.depths = in.truth;
  const ConfidenceField c = estimate_variances(graph, truth);

  std::vector<double> avail;
  for (std::size_t i = 0; i < c.variance.size(); ++i)
    if (c.available[i] && i != iso) avail.push_back(c.variance[i]);
  std::nth_element(avail.begin(), avail.begin() + avail.size() / 2, avail.end());
  const double median = avail[avail.size() / 2];
  EXPECT_TRUE(!c.available[iso] || c.variance[iso] >= 1e3 * median);
  const DepthField filtered = filter_depths(truth, c, 100.0 * median);
  EXPECT_FALSE(filtered.valid[iso]);
}

TEST(Confidence, Thresholds) {
  oracle::Instance in = oracle::make_instance(4, 4, 13, 5, 0.0, false);
  DepthField truth(in.rays->grid, 0.0, true);
  truth.depths = in.truth;
  ConfidenceField c = estimate_variances(in.graph, truth);
  const DepthField keep_all = filter_depths(truth, c, std::numeric_limits<double>::infinity());
  EXPECT_EQ(keep_all.valid_count(), c.available_count());
  const DepthField none = filter_depths(truth, c, 0.0);
  EXPECT_EQ(none.valid_count(), 0u);
  apply_threshold(c, 0.5);
  for (std::size_t i = 0; i < c.keep.size(); ++i) {
    EXPECT_EQ(c.keep[i], c.available[i] && c.variance[i] < 0.5);
  }
}
