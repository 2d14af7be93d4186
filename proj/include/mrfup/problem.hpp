#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "mrfup/errors.hpp"
#include "mrfup/features.hpp"
#include "mrfup/geometry.hpp"
#include "mrfup/observations.hpp"
#include "mrfup/prior.hpp"

namespace mrfup {

// Residual kernels. Each returns the unweighted residual; Jacobians are with
// respect to the depths of the involved pixels.

inline double depth_residual(double d_hat, double d_obs) { return d_hat - d_obs; }
inline double depth_residual_jacobian() { return 1.0; }

/// Signed distance of the neighbor's point to the plane normal^T x = d_plane.
inline double normal_residual(const RayField& rays, const Vec3& normal, double d_plane,
                              std::size_t neighbor, double d_hat_n) {
  return normal.dot(rays.point(neighbor, d_hat_n)) - d_plane;
}

inline double normal_residual_jacobian(const RayField& rays, const Vec3& normal,
                                       std::size_t neighbor) {
  return normal.dot(rays.directions[neighbor]);
}

inline double baseline_residual(double d_hat_i, double d_hat_n) { return d_hat_i - d_hat_n; }

/// Difference of the unit directions j->i and i->k. Zero exactly when the
/// three points are collinear with i between j and k.
inline Vec3 collinearity_residual(const Vec3& p_j, const Vec3& p_i, const Vec3& p_k) {
  return (p_i - p_j).normalized() - (p_k - p_i).normalized();
}

/// Collinearity residual of three ray points with its 3x3 Jacobian (columns
/// d/dd_j, d/dd_i, d/dd_k). Returns false when either segment is shorter than
/// eps_len; residual and Jacobian are then zero.
inline bool collinearity_residual_and_jacobian(const RayField& rays, const Triple& t,
                                               double d_j, double d_i, double d_k,
                                               double eps_len, Vec3& residual,
                                               Mat3* jacobian) {
  const Vec3 pj = rays.point(t.j, d_j);
  const Vec3 pi = rays.point(t.i, d_i);
  const Vec3 pk = rays.point(t.k, d_k);
  const Vec3 d1 = pi - pj;
  const Vec3 d2 = pk - pi;
  const double l1 = d1.norm();
  const double l2 = d2.norm();
  if (!(l1 >= eps_len) || !(l2 >= eps_len)) {
    residual.setZero();
    if (jacobian) jacobian->setZero();
    return false;
  }
  const Vec3 u1 = d1 / l1;
  const Vec3 u2 = d2 / l2;
  residual = u1 - u2;
  if (jacobian) {
    // d(u)/d(delta) = (I - u u^T) / |delta|
    const Mat3 p1 = (Mat3::Identity() - u1 * u1.transpose()) / l1;
    const Mat3 p2 = (Mat3::Identity() - u2 * u2.transpose()) / l2;
    const Vec3& aj = rays.directions[t.j];
    const Vec3& ai = rays.directions[t.i];
    const Vec3& ak = rays.directions[t.k];
    jacobian->col(0) = -p1 * aj;
    jacobian->col(1) = p1 * ai + p2 * ai;
    jacobian->col(2) = -p2 * ak;
  }
  return true;
}

enum class RegularizerMode { planar, baseline };

inline const char* to_string(RegularizerMode m) {
  return m == RegularizerMode::planar ? "planar" : "baseline";
}

inline RegularizerMode regularizer_mode_from_string(const std::string& s) {
  if (s == "planar" || s == "collinear") return RegularizerMode::planar;
  if (s == "baseline" || s == "constant") return RegularizerMode::baseline;
  throw ConfigError("unknown regularizer mode '" + s + "'");
}

struct ProblemConfig {
  double w_data = 1.0;
  RegularizerMode mode = RegularizerMode::planar;
  /// Depth bounds are the observed range widened by the factor
  /// (1 + bound_margin) on both sides.
  double bound_margin = 0.5;
  double eps_len = 1e-9;

  void validate() const {
    if (!(w_data > 0.0 && std::isfinite(w_data))) throw ConfigError("w_data must be > 0");
    if (!(bound_margin >= 0.0 && std::isfinite(bound_margin))) {
      throw ConfigError("bound_margin must be >= 0");
    }
    if (!(eps_len > 0.0)) throw ConfigError("eps_len must be > 0");
  }
};

enum class BlockKind : unsigned char { depth, normal, collinear, baseline };

inline const char* to_string(BlockKind k) {
  switch (k) {
    case BlockKind::depth: return "depth";
    case BlockKind::normal: return "normal";
    case BlockKind::collinear: return "collinear";
    case BlockKind::baseline: return "baseline";
  }
  return "?";
}

/// One residual term. `sqrt_weight` multiplies the residual so the sum of
/// squares carries the energy weight itself.
struct ResidualBlock {
  BlockKind kind = BlockKind::depth;
  std::array<std::size_t, 3> params{};
  double sqrt_weight = 1.0;
  double observed = 0.0;       // depth: observed depth; normal: plane offset
  Vec3 normal = Vec3::Zero();  // normal blocks only

  int num_params() const { return kind == BlockKind::collinear ? 3 : kind == BlockKind::baseline ? 2 : 1; }
  int num_residuals() const { return kind == BlockKind::collinear ? 3 : 1; }
};

/// The assembled sparse least-squares problem over all pixel depths.
class ResidualGraph {
 public:
  ResidualGraph() = default;
  ResidualGraph(std::shared_ptr<const RayField> rays, double eps_len)
      : rays_(std::move(rays)), eps_len_(eps_len) {}

  const ImageGrid& grid() const { return rays_->grid; }
  const RayField& rays() const { return *rays_; }
  std::size_t num_parameters() const { return rays_->grid.size(); }
  std::size_t num_residuals() const { return num_residuals_; }
  const std::vector<ResidualBlock>& blocks() const { return blocks_; }
  const std::vector<std::size_t>& row_offsets() const { return row_offsets_; }
  const DepthBounds& bounds() const { return bounds_; }
  void set_bounds(const DepthBounds& b) { bounds_ = b; }
  double eps_len() const { return eps_len_; }

  void add(const ResidualBlock& b) {
    row_offsets_.push_back(num_residuals_);
    num_residuals_ += static_cast<std::size_t>(b.num_residuals());
    blocks_.push_back(b);
  }

  std::size_t count(BlockKind k) const {
    std::size_t n = 0;
    for (const auto& b : blocks_) n += b.kind == k ? 1 : 0;
    return n;
  }

  /// Weighted residual (up to 3 rows) and Jacobian (rows x params) of block
  /// b. Returns false for a deactivated collinear block.
  bool evaluate_block(std::size_t b, const std::vector<double>& x, Vec3& r, Mat3& jac) const {
    const ResidualBlock& blk = blocks_[b];
    const RayField& rays = *rays_;
    r.setZero();
    jac.setZero();
    bool active = true;
    switch (blk.kind) {
      case BlockKind::depth:
        r(0) = depth_residual(x[blk.params[0]], blk.observed);
        jac(0, 0) = depth_residual_jacobian();
        break;
      case BlockKind::normal:
        r(0) = normal_residual(rays, blk.normal, blk.observed, blk.params[0], x[blk.params[0]]);
        jac(0, 0) = normal_residual_jacobian(rays, blk.normal, blk.params[0]);
        break;
      case BlockKind::baseline:
        r(0) = baseline_residual(x[blk.params[0]], x[blk.params[1]]);
        jac(0, 0) = 1.0;
        jac(0, 1) = -1.0;
        break;
      case BlockKind::collinear: {
        const Triple t{blk.params[0], blk.params[1], blk.params[2]};
        active = collinearity_residual_and_jacobian(rays, t, x[t.j], x[t.i], x[t.k], eps_len_,
                                                    r, &jac);
        break;
      }
    }
    r *= blk.sqrt_weight;
    jac *= blk.sqrt_weight;
    return active;
  }

  /// Weighted residual vector.
  std::vector<double> residuals(const std::vector<double>& x) const {
    std::vector<double> out(num_residuals_, 0.0);
    Vec3 r;
    Mat3 j;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      evaluate_block(b, x, r, j);
      for (int k = 0; k < blocks_[b].num_residuals(); ++k) out[row_offsets_[b] + k] = r(k);
    }
    return out;
  }

  /// Sum of squared weighted residuals.
  double cost(const std::vector<double>& x) const {
    double c = 0.0;
    Vec3 r;
    Mat3 j;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      evaluate_block(b, x, r, j);
      c += r.head(blocks_[b].num_residuals()).squaredNorm();
    }
    return c;
  }

 private:
  std::shared_ptr<const RayField> rays_;
  double eps_len_ = 1e-9;
  std::vector<ResidualBlock> blocks_;
  std::vector<std::size_t> row_offsets_;
  std::size_t num_residuals_ = 0;
  DepthBounds bounds_;
};

/// Builds the energy: per observation a depth block and (with a normal) one
/// normal block per 4-neighbor, all scaled by sqrt(w_data); per pixel the
/// horizontal and vertical collinearity blocks scaled by sqrt(w_ij w_ik), or
/// in baseline mode one pair block per ordered 4-neighbor scaled by sqrt(w_in).
inline ResidualGraph assemble(std::shared_ptr<const RayField> rays, const ObservationSet& obs,
                              const WeightField& weights, const ProblemConfig& cfg) {
  cfg.validate();
  const ImageGrid& grid = rays->grid;
  if (!(obs.grid == grid) || !(weights.grid() == grid)) {
    throw ConfigError("rays, observations and weights must share one grid");
  }
  if (obs.empty()) throw ConfigError("no observations: cannot assemble the energy");
  obs.validate();

  ResidualGraph g(rays, cfg.eps_len);
  const double sw_data = std::sqrt(cfg.w_data);
  for (const auto& o : obs.items) {
    ResidualBlock b;
    b.kind = BlockKind::depth;
    b.params[0] = o.pixel;
    b.sqrt_weight = sw_data;
    b.observed = o.depth;
    g.add(b);
    if (!o.has_normal) continue;
    for (std::size_t n : neighbors4(grid, o.pixel)) {
      ResidualBlock nb;
      nb.kind = BlockKind::normal;
      nb.params[0] = n;
      nb.sqrt_weight = sw_data;
      nb.observed = o.plane_offset;
      nb.normal = o.normal;
      g.add(nb);
    }
  }

  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (cfg.mode == RegularizerMode::planar) {
      for (const Triple& t : collinearity_triples(grid, i)) {
        ResidualBlock b;
        b.kind = BlockKind::collinear;
        b.params = {t.j, t.i, t.k};
        b.sqrt_weight = std::sqrt(triple_weight(weights, t));
        g.add(b);
      }
    } else {
      for (std::size_t n : neighbors4(grid, i)) {
        ResidualBlock b;
        b.kind = BlockKind::baseline;
        b.params = {i, n, 0};
        b.sqrt_weight = std::sqrt(weights.pair(i, n));
        g.add(b);
      }
    }
  }
  g.set_bounds(observed_bounds(obs.depths(), cfg.bound_margin));
  return g;
}

inline ResidualGraph assemble(const RayField& rays, const ObservationSet& obs,
                              const WeightField& weights, const ProblemConfig& cfg) {
  return assemble(std::make_shared<const RayField>(rays), obs, weights, cfg);
}

}  // namespace mrfup
