#pragma once

// Independent reference computations for the unit and acceptance tests.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "mrfup/pipeline.hpp"

namespace oracle {

using mrfup::Vec3;

/// Viewing ray of pixel (row, col) straight from the intrinsics.
inline void camera_ray(const mrfup::CameraModel& cam, int row, int col, Vec3& origin, Vec3& dir) {
  const double x = (col - cam.cx) / cam.fx;
  const double y = (row - cam.cy) / cam.fy;
  if (cam.kind == mrfup::CameraKind::pinhole) {
    origin = Vec3::Zero();
    dir = Vec3(x, y, 1.0) / std::sqrt(x * x + y * y + 1.0);
  } else {
    origin = Vec3(x, y, 0.0);
    dir = Vec3(0.0, 0.0, 1.0);
  }
}

inline double weight(const mrfup::FeatureImage& f, const mrfup::WeightFunction& g, int i, int j) {
  const Vec3 d = f.rgb[i] - f.rgb[j];
  return g(d.dot(d) * f.certainty[i]);
}

/// Energy written out term by term from the model definition, without the
/// residual graph.
inline double energy(const mrfup::CameraModel& cam, int w, int h, const mrfup::ObservationSet& obs,
                     const mrfup::FeatureImage& f, const mrfup::WeightFunction& g,
                     const mrfup::ProblemConfig& cfg, const std::vector<double>& x) {
  std::vector<Vec3> pts(static_cast<std::size_t>(w * h)), org(pts.size()), dir(pts.size());
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const int i = r * w + c;
      camera_ray(cam, r, c, org[i], dir[i]);
      pts[i] = org[i] + x[i] * dir[i];
    }
  }
  double e = 0.0;
  for (const auto& o : obs.items) {
    const double r = x[o.pixel] - o.depth;
    e += cfg.w_data * r * r;
    if (!o.has_normal) continue;
    const int pr = static_cast<int>(o.pixel) / w, pc = static_cast<int>(o.pixel) % w;
    const int dr[4] = {-1, 0, 0, 1}, dc[4] = {0, -1, 1, 0};
    for (int k = 0; k < 4; ++k) {
      const int rr = pr + dr[k], cc = pc + dc[k];
      if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
      const double s = o.normal.dot(pts[rr * w + cc]) - o.plane_offset;
      e += cfg.w_data * s * s;
    }
  }
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const int i = r * w + c;
      if (cfg.mode == mrfup::RegularizerMode::planar) {
        auto term = [&](int j, int k) {
          const double wt = weight(f, g, i, j) * weight(f, g, i, k);
          const Vec3 u = (pts[i] - pts[j]).normalized() - (pts[k] - pts[i]).normalized();
          return wt * u.squaredNorm();
        };
        if (c > 0 && c + 1 < w) e += term(i - 1, i + 1);
        if (r > 0 && r + 1 < h) e += term(i - w, i + w);
      } else {
        const int nb[4][2] = {{r - 1, c}, {r, c - 1}, {r, c + 1}, {r + 1, c}};
        for (const auto& q : nb) {
          if (q[0] < 0 || q[0] >= h || q[1] < 0 || q[1] >= w) continue;
          const int j = q[0] * w + q[1];
          const double d = x[i] - x[j];
          e += weight(f, g, i, j) * d * d;
        }
      }
    }
  }
  return e;
}

/// Central-difference Jacobian of f: R^n -> R^m.
inline Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double rel_step = 1e-6) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd jac(f0.size(), x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double hk = rel_step * std::max(1.0, std::abs(x(k)));
    Eigen::VectorXd xp = x, xm = x;
    xp(k) += hk;
    xm(k) -= hk;
    jac.col(k) = (f(xp) - f(xm)) / (2.0 * hk);
  }
  return jac;
}

/// Dense copy of the analytic sparse Jacobian at x.
inline Eigen::MatrixXd dense_jacobian(const mrfup::ResidualGraph& g, const std::vector<double>& x) {
  return Eigen::MatrixXd(mrfup::evaluate(g, x).jacobian);
}

inline Eigen::VectorXd residual_vector(const mrfup::ResidualGraph& g, const Eigen::VectorXd& x) {
  const std::vector<double> xs(x.data(), x.data() + x.size());
  const std::vector<double> r = g.residuals(xs);
  return Eigen::Map<const Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size()));
}

struct DenseResult {
  Eigen::VectorXd x;
  double cost = 0.0;
  int iterations = 0;
};

/// Dense Gauss-Newton with backtracking on the full residual vector, using
/// a finite-difference Jacobian and a dense LDLT. Unbounded.
inline DenseResult dense_gauss_newton(const mrfup::ResidualGraph& g, Eigen::VectorXd x,
                                      int max_iterations = 500, double grad_tol = 1e-13) {
  auto f = [&](const Eigen::VectorXd& v) { return residual_vector(g, v); };
  DenseResult out;
  Eigen::VectorXd r = f(x);
  double cost = r.squaredNorm();
  double mu = 0.0;
  for (int it = 0; it < max_iterations; ++it) {
    const Eigen::MatrixXd jac = fd_jacobian(f, x, 1e-7);
    const Eigen::VectorXd grad = jac.transpose() * r;
    out.iterations = it;
    if (grad.lpNorm<Eigen::Infinity>() < grad_tol) break;
    Eigen::MatrixXd a = jac.transpose() * jac;
    a.diagonal().array() += mu;
    const Eigen::VectorXd step = a.ldlt().solve(-grad);
    double t = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
      const Eigen::VectorXd xn = x + t * step;
      const Eigen::VectorXd rn = f(xn);
      if (rn.allFinite() && rn.squaredNorm() < cost) {
        x = xn;
        r = rn;
        cost = rn.squaredNorm();
        improved = true;
        break;
      }
    }
    if (!improved) {
      // Plain Gauss-Newton stalled: regularize and retry, stop when hopeless.
      mu = mu == 0.0 ? 1e-8 * a.diagonal().maxCoeff() : mu * 10.0;
      if (mu > 1e12) break;
    } else {
      mu = 0.0;
    }
  }
  out.x = x;
  out.cost = cost;
  return out;
}

/// Small randomized upsampling instance on a pinhole camera: a random
/// plane with noisy observations and random colors.
struct Instance {
  mrfup::CameraModel camera;
  std::shared_ptr<const mrfup::RayField> rays;
  mrfup::FeatureImage features;
  mrfup::ObservationSet obs;
  mrfup::WeightFunction g;
  mrfup::ProblemConfig cfg;
  mrfup::ResidualGraph graph;
  std::vector<double> truth;
};

inline Instance make_instance(int w, int h, std::uint64_t seed, std::size_t num_obs,
                              double noise, bool normals,
                              mrfup::RegularizerMode mode = mrfup::RegularizerMode::planar) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> nrm(0.0, 1.0);
  Instance in;
  in.camera.fx = in.camera.fy = 0.9 * w * (0.8 + 0.4 * u(rng));
  in.camera.cx = 0.5 * (w - 1) + (u(rng) - 0.5);
  in.camera.cy = 0.5 * (h - 1) + (u(rng) - 0.5);
  const mrfup::ImageGrid grid(w, h);
  in.rays = std::make_shared<const mrfup::RayField>(mrfup::build_ray_field(in.camera, grid));

  const Vec3 n = Vec3(0.4 * (u(rng) - 0.5), 0.4 * (u(rng) - 0.5), 1.0).normalized();
  const double offset = 3.0 + 2.0 * u(rng);
  in.truth.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    in.truth[i] = offset / n.dot(in.rays->directions[i]);
  }

  in.features = mrfup::FeatureImage(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    in.features.rgb[i] = Vec3(u(rng), u(rng), u(rng)) * 0.3 + Vec3::Constant(0.35);
    in.features.certainty[i] = 0.5 + 0.5 * u(rng);
  }

  std::vector<std::size_t> all(grid.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::shuffle(all.begin(), all.end(), rng);
  std::vector<mrfup::Observation> raw;
  for (std::size_t k = 0; k < std::min(num_obs, all.size()); ++k) {
    mrfup::Observation o;
    o.pixel = all[k];
    o.depth = in.truth[o.pixel] + noise * nrm(rng);
    raw.push_back(o);
  }
  in.obs = mrfup::make_observation_set(grid, raw);
  if (normals) {
    std::vector<std::optional<Vec3>> slots(in.obs.size());
    for (std::size_t k = 0; k < slots.size(); ++k) {
      slots[k] = (n + 0.05 * Vec3(nrm(rng), nrm(rng), nrm(rng))).normalized();
    }
    mrfup::attach_normals(in.obs, *in.rays, slots);
  }
  in.cfg.mode = mode;
  in.graph = mrfup::assemble(in.rays, in.obs, mrfup::compute_weight_field(in.features, in.g), in.cfg);
  return in;
}

}  // namespace oracle
