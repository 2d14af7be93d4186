#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "mrfup/errors.hpp"
#include "mrfup/problem.hpp"

namespace mrfup {

using SparseMatrix = Eigen::SparseMatrix<double>;
using VectorX = Eigen::VectorXd;

enum class LinearSolverKind { automatic, cholesky, conjugate_gradient };

struct SolverConfig {
  int max_iterations = 200;
  /// Converged when |gradient|_inf < gradient_tolerance * (1 + cost).
  double gradient_tolerance = 1e-8;
  double step_tolerance = 1e-10;
  /// Converged when an accepted step lowers the cost by less than this fraction.
  double cost_tolerance = 1e-9;
  double initial_damping = 1e-4;
  double damping_increase = 10.0;
  double damping_decrease = 3.0;
  double max_damping = 1e16;
  /// Minimum gain ratio for accepting a step.
  double min_gain_ratio = 1e-3;
  LinearSolverKind linear_solver = LinearSolverKind::automatic;
  /// `automatic` switches from Cholesky to CG above this parameter count.
  std::size_t cg_threshold = 250000;
  double cg_tolerance = 1e-12;

  void validate() const {
    if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
    if (!(gradient_tolerance > 0.0) || !(step_tolerance > 0.0) || !(cost_tolerance > 0.0)) {
      throw ConfigError("solver tolerances must be > 0");
    }
    if (!(initial_damping > 0.0) || !(damping_increase > 1.0) || !(damping_decrease > 1.0) ||
        !(max_damping > initial_damping)) {
      throw ConfigError("invalid damping schedule");
    }
  }
};

enum class Termination { converged_gradient, converged_step, converged_cost, max_iterations };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::converged_gradient: return "converged-gradient";
    case Termination::converged_step: return "converged-step";
    case Termination::converged_cost: return "converged-cost";
    case Termination::max_iterations: return "max-iter";
  }
  return "?";
}

struct SolveReport {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  int accepted_steps = 0;
  Termination termination = Termination::max_iterations;
  /// Cost after initialization followed by the cost of every accepted step.
  std::vector<double> cost_trace;
};

struct Evaluation {
  double cost = 0.0;
  VectorX residuals;
  /// 2 J^T r
  VectorX gradient;
  SparseMatrix jacobian;
};

/// Residuals, cost, gradient and the sparse Jacobian. Rows follow block order;
/// each block contributes its rows at graph.row_offsets()[b].
inline Evaluation evaluate(const ResidualGraph& graph, const std::vector<double>& x) {
  const std::size_t n = graph.num_parameters();
  if (x.size() != n) throw ConfigError("depth vector size does not match the problem");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x[i])) {
      throw NumericalError("non-finite depth at pixel " + std::to_string(i));
    }
  }
  Evaluation ev;
  ev.residuals.setZero(static_cast<Eigen::Index>(graph.num_residuals()));
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(graph.num_residuals() * 3);
  Vec3 r;
  Mat3 jac;
  const auto& blocks = graph.blocks();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const bool active = graph.evaluate_block(b, x, r, jac);
    const auto& blk = blocks[b];
    const std::size_t row0 = graph.row_offsets()[b];
    for (int k = 0; k < blk.num_residuals(); ++k) {
      if (!std::isfinite(r(k))) {
        throw NumericalError("non-finite residual in block " + std::to_string(b) + " (" +
                                 to_string(blk.kind) + ")",
                             static_cast<long>(b));
      }
      ev.residuals(static_cast<Eigen::Index>(row0 + k)) = r(k);
      if (!active) continue;
      for (int p = 0; p < blk.num_params(); ++p) {
        if (!std::isfinite(jac(k, p))) {
          throw NumericalError("non-finite Jacobian in block " + std::to_string(b),
                               static_cast<long>(b));
        }
        if (jac(k, p) != 0.0) {
          trip.emplace_back(static_cast<int>(row0 + k), static_cast<int>(blk.params[p]),
                            jac(k, p));
        }
      }
    }
  }
  ev.jacobian.resize(static_cast<Eigen::Index>(graph.num_residuals()),
                     static_cast<Eigen::Index>(n));
  ev.jacobian.setFromTriplets(trip.begin(), trip.end());
  ev.cost = ev.residuals.squaredNorm();
  ev.gradient = 2.0 * (ev.jacobian.transpose() * ev.residuals);
  return ev;
}

inline Evaluation evaluate(const ResidualGraph& graph, const DepthField& depths) {
  return evaluate(graph, depths.depths);
}

namespace detail {

/// Solves (A + lambda D) x = b. Returns false when the factorization fails.
inline bool solve_damped(const SparseMatrix& a, const VectorX& diag, double lambda,
                         const VectorX& b, const SolverConfig& cfg, VectorX& x) {
  SparseMatrix m = a;
  for (Eigen::Index i = 0; i < m.rows(); ++i) m.coeffRef(i, i) += lambda * diag(i);
  m.makeCompressed();
  const bool use_cg =
      cfg.linear_solver == LinearSolverKind::conjugate_gradient ||
      (cfg.linear_solver == LinearSolverKind::automatic &&
       static_cast<std::size_t>(m.rows()) > cfg.cg_threshold);
  if (use_cg) {
    Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>>
        cg;
    cg.setTolerance(cfg.cg_tolerance);
    cg.setMaxIterations(std::max<Eigen::Index>(10 * m.rows(), 1000));
    cg.compute(m);
    if (cg.info() != Eigen::Success) return false;
    x = cg.solve(b);
    return x.allFinite();
  }
  Eigen::SimplicialLDLT<SparseMatrix> chol;
  chol.compute(m);
  if (chol.info() != Eigen::Success) return false;
  // LDLT succeeds on indefinite input; require a positive pivot spectrum.
  const VectorX d = chol.vectorD();
  if (d.size() > 0 && !(d.minCoeff() > 0.0)) return false;
  x = chol.solve(b);
  return chol.info() == Eigen::Success && x.allFinite();
}

}  // namespace detail

/// Levenberg-Marquardt with Marquardt scaling and box bounds applied by
/// projecting trial points. Minimizes the sum of squared weighted residuals.
inline std::pair<DepthField, SolveReport> solve(const ResidualGraph& graph, const DepthField& init,
                                                const SolverConfig& cfg) {
  cfg.validate();
  if (graph.blocks().empty()) throw ConfigError("cannot solve an empty residual graph");
  if (!(init.grid == graph.grid())) throw ConfigError("initial depths are on a different grid");
  const DepthBounds& bounds = graph.bounds();
  const std::size_t n = graph.num_parameters();

  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = bounds.clamp(init.depths[i]);

  Evaluation ev = evaluate(graph, x);
  SolveReport rep;
  rep.initial_cost = ev.cost;
  rep.cost_trace.push_back(ev.cost);
  double lambda = cfg.initial_damping;
  rep.termination = Termination::max_iterations;

  std::vector<double> trial(n);
  VectorX delta;
  while (rep.iterations < cfg.max_iterations) {
    const double g_inf = ev.gradient.size() ? ev.gradient.cwiseAbs().maxCoeff() : 0.0;
    if (g_inf < cfg.gradient_tolerance * (1.0 + ev.cost)) {
      rep.termination = Termination::converged_gradient;
      break;
    }
    ++rep.iterations;

    const SparseMatrix jtj = SparseMatrix(ev.jacobian.transpose() * ev.jacobian);
    VectorX diag = jtj.diagonal();
    for (Eigen::Index i = 0; i < diag.size(); ++i) diag(i) = std::clamp(diag(i), 1e-6, 1e32);
    const VectorX rhs = -(ev.jacobian.transpose() * ev.residuals);

    if (!detail::solve_damped(jtj, diag, lambda, rhs, cfg, delta)) {
      lambda *= cfg.damping_increase;
      if (lambda > cfg.max_damping) {
        throw NumericalError("normal equations remain singular at maximum damping");
      }
      continue;
    }

    double step_inf = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      trial[i] = bounds.clamp(x[i] + delta(static_cast<Eigen::Index>(i)));
      step_inf = std::max(step_inf, std::abs(trial[i] - x[i]));
    }
    if (step_inf < cfg.step_tolerance) {
      rep.termination = Termination::converged_step;
      break;
    }

    VectorX eff(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) eff(static_cast<Eigen::Index>(i)) = trial[i] - x[i];
    const double predicted = ev.cost - (ev.residuals + ev.jacobian * eff).squaredNorm();
    double trial_cost = std::numeric_limits<double>::infinity();
    Evaluation trial_ev;
    bool trial_ok = true;
    try {
      trial_ev = evaluate(graph, trial);
      trial_cost = trial_ev.cost;
    } catch (const NumericalError&) {
      trial_ok = false;
    }
    const double actual = ev.cost - trial_cost;
    const bool accept = trial_ok && std::isfinite(trial_cost) && actual > 0.0 &&
                        predicted > 0.0 && actual / predicted > cfg.min_gain_ratio;
    if (!accept) {
      lambda *= cfg.damping_increase;
      if (lambda > cfg.max_damping) {
        rep.termination = Termination::converged_step;
        break;
      }
      continue;
    }

    const double previous = ev.cost;
    x.swap(trial);
    ev = std::move(trial_ev);
    lambda = std::max(lambda / cfg.damping_decrease, 1e-16);
    ++rep.accepted_steps;
    rep.cost_trace.push_back(ev.cost);
    if (actual < cfg.cost_tolerance * previous) {
      rep.termination = Termination::converged_cost;
      break;
    }
  }

  rep.final_cost = ev.cost;
  DepthField out(graph.grid(), 0.0, true);
  out.depths = x;
  return {out, rep};
}

}  // namespace mrfup
