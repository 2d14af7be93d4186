#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/SparseCholesky>

#include "mrfup/errors.hpp"
#include "mrfup/parallel.hpp"
#include "mrfup/solver.hpp"

namespace mrfup {

/// Per-pixel depth variances from the diagonal of (J^T J)^-1, plus the keep
/// mask of the last threshold applied.
struct ConfidenceField {
  ImageGrid grid;
  std::vector<double> variance;
  std::vector<bool> available;
  std::vector<bool> keep;

  std::size_t available_count() const {
    return static_cast<std::size_t>(std::count(available.begin(), available.end(), true));
  }
};

struct VarianceOptions {
  /// Pixels to compute; empty means all. Each one costs a triangular solve
  /// pair against the shared factorization.
  std::vector<std::size_t> pixels;
  /// Diagonal entries and factor pivots at or below rank_tolerance times the
  /// largest diagonal entry mark their pixel as unavailable.
  double rank_tolerance = 1e-12;
};

/// Unit-noise covariance diagonal at the solution. Pixels whose parameter is
/// decoupled (zero column) or that the factorization finds rank deficient
/// are flagged unavailable instead of failing globally.
inline ConfidenceField estimate_variances(const ResidualGraph& graph, const DepthField& solution,
                                          const VarianceOptions& opt = {}) {
  const ImageGrid& grid = graph.grid();
  if (!(solution.grid == grid)) throw ConfigError("solution is on a different grid");
  const std::size_t n = grid.size();
  const Evaluation ev = evaluate(graph, solution.depths);
  const SparseMatrix jtj = SparseMatrix(ev.jacobian.transpose() * ev.jacobian);
  const VectorX diag = jtj.diagonal();
  const double max_diag = diag.size() ? diag.maxCoeff() : 0.0;
  const double floor = opt.rank_tolerance * max_diag;

  ConfidenceField out;
  out.grid = grid;
  out.variance.assign(n, std::numeric_limits<double>::quiet_NaN());
  out.available.assign(n, false);
  out.keep.assign(n, false);
  if (!(max_diag > 0.0)) return out;

  std::vector<bool> active(n, false);
  for (std::size_t i = 0; i < n; ++i) active[i] = diag(static_cast<Eigen::Index>(i)) > floor;

  // Deflate: drop parameters whose pivot collapses, refactor the rest.
  Eigen::SimplicialLDLT<SparseMatrix> chol;
  std::vector<std::size_t> map;  // reduced index -> pixel
  for (std::size_t attempt = 0; attempt <= n; ++attempt) {
    map.clear();
    std::vector<Eigen::Index> to_reduced(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
      if (active[i]) {
        to_reduced[i] = static_cast<Eigen::Index>(map.size());
        map.push_back(i);
      }
    }
    if (map.empty()) return out;
    std::vector<Eigen::Triplet<double>> trip;
    for (Eigen::Index c = 0; c < jtj.outerSize(); ++c) {
      for (SparseMatrix::InnerIterator it(jtj, c); it; ++it) {
        const Eigen::Index rr = to_reduced[static_cast<std::size_t>(it.row())];
        const Eigen::Index cc = to_reduced[static_cast<std::size_t>(it.col())];
        if (rr >= 0 && cc >= 0) trip.emplace_back(rr, cc, it.value());
      }
    }
    const auto m = static_cast<Eigen::Index>(map.size());
    SparseMatrix reduced(m, m);
    reduced.setFromTriplets(trip.begin(), trip.end());
    chol.compute(reduced);
    if (chol.info() != Eigen::Success) {
      throw NumericalError("covariance factorization failed");
    }
    const VectorX d = chol.vectorD();
    bool deflated = false;
    for (Eigen::Index k = 0; k < d.size(); ++k) {
      if (!(d(k) > floor)) {
        // vectorD is in permuted order; map back through the fill-reducing permutation.
        const Eigen::Index orig = chol.permutationPinv().indices()(k);
        active[map[static_cast<std::size_t>(orig)]] = false;
        deflated = true;
      }
    }
    if (!deflated) break;
  }

  std::vector<Eigen::Index> to_reduced(n, -1);
  for (std::size_t k = 0; k < map.size(); ++k) to_reduced[map[k]] = static_cast<Eigen::Index>(k);

  std::vector<std::size_t> wanted = opt.pixels;
  if (wanted.empty()) {
    wanted.resize(n);
    for (std::size_t i = 0; i < n; ++i) wanted[i] = i;
  }
  const auto m = static_cast<Eigen::Index>(map.size());
  std::vector<double> var(wanted.size(), std::numeric_limits<double>::quiet_NaN());
  parallel_for(wanted.size(), [&](std::size_t w) {
    const std::size_t pix = wanted[w];
    if (pix >= n || to_reduced[pix] < 0) return;
    VectorX e = VectorX::Zero(m);
    e(to_reduced[pix]) = 1.0;
    const VectorX col = chol.solve(e);
    var[w] = col(to_reduced[pix]);
  });
  for (std::size_t w = 0; w < wanted.size(); ++w) {
    const std::size_t pix = wanted[w];
    if (pix >= n || !std::isfinite(var[w]) || var[w] < 0.0) continue;
    out.variance[pix] = var[w];
    out.available[pix] = true;
    out.keep[pix] = true;
  }
  return out;
}

/// Sets keep = available && variance < threshold.
inline void apply_threshold(ConfidenceField& conf, double threshold) {
  for (std::size_t i = 0; i < conf.variance.size(); ++i) {
    conf.keep[i] = conf.available[i] && conf.variance[i] < threshold;
  }
}

/// Invalidates depths without an available variance below threshold. Depth
/// values are never modified.
inline DepthField filter_depths(const DepthField& depths, const ConfidenceField& conf,
                                double threshold) {
  if (!(depths.grid == conf.grid)) throw ConfigError("depth and confidence grids differ");
  DepthField out = depths;
  for (std::size_t i = 0; i < out.depths.size(); ++i) {
    const bool keep = conf.available[i] && conf.variance[i] < threshold;
    out.valid[i] = out.valid[i] && keep;
  }
  return out;
}

}  // namespace mrfup
