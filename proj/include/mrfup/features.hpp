#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "mrfup/errors.hpp"
#include "mrfup/geometry.hpp"
#include "mrfup/kdtree.hpp"
#include "mrfup/parallel.hpp"

namespace mrfup {

/// Per-pixel guidance features: RGB in [0,1] and a semantic certainty in [0,1].
struct FeatureImage {
  ImageGrid grid;
  std::vector<Vec3> rgb;
  std::vector<double> certainty;

  FeatureImage() = default;
  explicit FeatureImage(const ImageGrid& g)
      : grid(g), rgb(g.size(), Vec3::Zero()), certainty(g.size(), 1.0) {}

  void validate() const {
    if (rgb.size() != grid.size() || certainty.size() != grid.size()) {
      throw ConfigError("feature image channels do not match the grid");
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (!(rgb[i].minCoeff() >= 0.0 && rgb[i].maxCoeff() <= 1.0) ||
          !(certainty[i] >= 0.0 && certainty[i] <= 1.0)) {
        throw ConfigError("feature channels must lie in [0,1] (pixel " +
                          std::to_string(i) + ")");
      }
    }
  }
};

/// Normalized improvement of the top softmax probability over uniform guessing.
inline double semantic_certainty(double p_max, int num_classes) {
  if (num_classes < 2) throw DomainError("semantic certainty needs at least 2 classes");
  const double n = num_classes;
  // Allow rounding noise right at the uniform floor.
  if (!(p_max >= 1.0 / n - 1e-12) || !(p_max <= 1.0 + 1e-12)) {
    throw DomainError("top class probability must lie in [1/N, 1]");
  }
  return std::clamp((n * p_max - 1.0) / (n - 1.0), 0.0, 1.0);
}

enum class WeightKind { exponential, sigmoid, step, constant };

inline const char* to_string(WeightKind k) {
  switch (k) {
    case WeightKind::exponential: return "exponential";
    case WeightKind::sigmoid: return "sigmoid";
    case WeightKind::step: return "step";
    case WeightKind::constant: return "constant";
  }
  return "?";
}

inline WeightKind weight_kind_from_string(const std::string& s) {
  if (s == "exponential") return WeightKind::exponential;
  if (s == "sigmoid") return WeightKind::sigmoid;
  if (s == "step") return WeightKind::step;
  if (s == "constant") return WeightKind::constant;
  throw ConfigError("unknown weight function kind '" + s + "'");
}

/// Scalar weighting function g: [0, inf) -> (0, 1], non-increasing, g(0) = 1.
struct WeightFunction {
  /// Floor for the step kind so the graph never fully disconnects.
  static constexpr double kStepFloor = 1e-3;
  /// An RGB step of 0.2 at full certainty halves the weight.
  static constexpr double kDefaultAlpha = 17.328679513998633;  // ln 2 / 0.04

  WeightKind kind = WeightKind::exponential;
  double alpha = kDefaultAlpha;
  double tau = 0.0;

  void validate() const {
    if (kind != WeightKind::constant && kind != WeightKind::step &&
        !(alpha > 0.0 && std::isfinite(alpha))) {
      throw ConfigError("weight function scale alpha must be > 0");
    }
    if (!(tau >= 0.0 && std::isfinite(tau))) {
      throw ConfigError("weight function threshold tau must be >= 0");
    }
    if (kind == WeightKind::step && !(tau > 0.0)) {
      throw ConfigError("step weight function needs tau > 0");
    }
  }

  double operator()(double x) const {
    if (!(x >= 0.0)) throw DomainError("weight function argument must be >= 0");
    switch (kind) {
      case WeightKind::exponential:
        return std::exp(-alpha * x);
      case WeightKind::sigmoid: {
        // Logistic rescaled by its value at 0 so that g(0) = 1.
        const double at0 = 1.0 + std::exp(-alpha * tau);
        return at0 / (1.0 + std::exp(alpha * (x - tau)));
      }
      case WeightKind::step:
        return x < tau ? 1.0 : kStepFloor;
      case WeightKind::constant:
        return 1.0;
    }
    return 1.0;
  }
};

inline double eval_weight_function(const WeightFunction& g, double x) { return g(x); }

/// w_ij = g(|rgb_i - rgb_j|^2 * certainty_i). Not symmetric in i, j.
inline double pairwise_weight(const FeatureImage& f, const WeightFunction& g, std::size_t i,
                              std::size_t j) {
  return g((f.rgb[i] - f.rgb[j]).squaredNorm() * f.certainty[i]);
}

/// Pairwise weights for every ordered 4-neighbor pair, stored per pixel in
/// direction slots (up, left, right, down). Missing neighbors hold 0.
class WeightField {
 public:
  enum Direction { up = 0, left = 1, right = 2, down = 3 };

  WeightField() = default;
  explicit WeightField(const ImageGrid& grid, double fill = 1.0)
      : grid_(grid), w_(grid.size(), {fill, fill, fill, fill}) {}

  const ImageGrid& grid() const { return grid_; }

  double& at(std::size_t i, Direction d) { return w_[i][d]; }
  double at(std::size_t i, Direction d) const { return w_[i][d]; }

  /// Weight of ordered pair (i, j); j must be a 4-neighbor of i.
  double pair(std::size_t i, std::size_t j) const { return w_[i][direction(i, j)]; }
  double& pair(std::size_t i, std::size_t j) { return w_[i][direction(i, j)]; }

  Direction direction(std::size_t i, std::size_t j) const {
    const int dr = grid_.row(j) - grid_.row(i);
    const int dc = grid_.col(j) - grid_.col(i);
    if (dr == -1 && dc == 0) return up;
    if (dr == 1 && dc == 0) return down;
    if (dr == 0 && dc == -1) return left;
    if (dr == 0 && dc == 1) return right;
    throw ConfigError("pixels " + std::to_string(i) + " and " + std::to_string(j) +
                      " are not 4-neighbors");
  }

  /// Multiplies every weight by s (used by scaling checks).
  void scale(double s) {
    for (auto& a : w_)
      for (auto& v : a) v *= s;
  }

 private:
  ImageGrid grid_;
  std::vector<std::array<double, 4>> w_;
};

inline WeightField compute_weight_field(const FeatureImage& features, const WeightFunction& g) {
  g.validate();
  features.validate();
  WeightField field(features.grid, 0.0);
  const ImageGrid& grid = features.grid;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j : neighbors4(grid, i)) field.pair(i, j) = pairwise_weight(features, g, i, j);
  }
  return field;
}

/// w_i(D) = w_ij * w_ik for the triple (j, i, k).
inline double triple_weight(const WeightField& w, const Triple& t) {
  return w.pair(t.i, t.j) * w.pair(t.i, t.k);
}

struct NormalSet {
  std::vector<Vec3> normals;
  std::vector<bool> valid;

  std::size_t size() const { return normals.size(); }
};

struct NormalEstimationOptions {
  double radius = 0.5;
  /// Neighborhoods with lambda_mid <= ratio * lambda_small are rejected.
  double degeneracy_ratio = 2.0;
  std::size_t min_neighbors = 3;
};

/// PCA normals: eigenvector of the smallest eigenvalue of the neighborhood
/// covariance, oriented toward the viewpoint.
inline NormalSet estimate_normals(const std::vector<Vec3>& points, const Vec3& viewpoint,
                                  const NormalEstimationOptions& opt) {
  if (!(opt.radius > 0.0)) throw DomainError("normal estimation radius must be > 0");
  NormalSet out;
  out.normals.assign(points.size(), Vec3::Zero());
  out.valid.assign(points.size(), false);
  if (points.empty()) return out;

  const KdTree<3> tree(points);
  std::vector<char> valid(points.size(), 0);
  parallel_for(points.size(), [&](std::size_t q) {
    const auto nb = tree.within_radius(points[q], opt.radius);
    if (nb.size() < opt.min_neighbors) return;
    Vec3 mean = Vec3::Zero();
    for (std::size_t k : nb) mean += points[k];
    mean /= static_cast<double>(nb.size());
    Mat3 cov = Mat3::Zero();
    for (std::size_t k : nb) {
      const Vec3 d = points[k] - mean;
      cov += d * d.transpose();
    }
    cov /= static_cast<double>(nb.size());
    const Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
    if (es.info() != Eigen::Success) return;
    const Eigen::Vector3d ev = es.eigenvalues();  // ascending
    // Second condition catches collinear sets whose two small eigenvalues
    // are both rounding noise.
    if (ev(1) <= opt.degeneracy_ratio * std::max(ev(0), 0.0) || ev(1) <= 1e-12 * ev(2)) return;
    Vec3 n = es.eigenvectors().col(0).normalized();
    if (n.dot(viewpoint - points[q]) < 0.0) n = -n;
    out.normals[q] = n;
    valid[q] = 1;
  });
  for (std::size_t q = 0; q < points.size(); ++q) out.valid[q] = valid[q] != 0;
  return out;
}

inline NormalSet estimate_normals(const std::vector<Vec3>& points, double radius,
                                  const Vec3& viewpoint) {
  NormalEstimationOptions opt;
  opt.radius = radius;
  return estimate_normals(points, viewpoint, opt);
}

}  // namespace mrfup
