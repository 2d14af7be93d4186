#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace mrfup {

using TriangleIndices = std::array<std::size_t, 3>;

namespace detail {

inline double orient2d(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                       const Eigen::Vector2d& c) {
  return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

/// True when d lies strictly inside the circumcircle of the CCW triangle abc,
/// beyond a relative rounding margin.
inline bool in_circumcircle(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                            const Eigen::Vector2d& c, const Eigen::Vector2d& d) {
  const double adx = a.x() - d.x(), ady = a.y() - d.y();
  const double bdx = b.x() - d.x(), bdy = b.y() - d.y();
  const double cdx = c.x() - d.x(), cdy = c.y() - d.y();
  const double alift = adx * adx + ady * ady;
  const double blift = bdx * bdx + bdy * bdy;
  const double clift = cdx * cdx + cdy * cdy;
  const double det = alift * (bdx * cdy - cdx * bdy) + blift * (cdx * ady - adx * cdy) +
                     clift * (adx * bdy - bdx * ady);
  const double perm = alift * (std::abs(bdx * cdy) + std::abs(cdx * bdy)) +
                      blift * (std::abs(cdx * ady) + std::abs(adx * cdy)) +
                      clift * (std::abs(adx * bdy) + std::abs(bdx * ady));
  return det > 1e-12 * perm;
}

}  // namespace detail

/// 2D Delaunay triangulation (Bowyer-Watson). Triangles are counter-clockwise
/// in (x, y) and listed in ascending lexicographic order of their sorted
/// vertex indices. Fewer than three points, or all points collinear, yields
/// an empty list. Exact duplicates of an earlier point are ignored.
inline std::vector<TriangleIndices> delaunay_triangulate(const std::vector<Eigen::Vector2d>& input) {
  const std::size_t n = input.size();
  if (n < 3) return {};

  // Work in a normalized frame so tolerances are scale free.
  Eigen::Vector2d lo = input[0], hi = input[0];
  for (const auto& p : input) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double extent = std::max((hi - lo).maxCoeff(), 1e-300);
  const Eigen::Vector2d center = 0.5 * (lo + hi);
  std::vector<Eigen::Vector2d> pts;
  pts.reserve(n + 3);
  for (const auto& p : input) pts.push_back((p - center) / extent);

  {
    // Collinearity: every point on the line through the two farthest apart.
    std::size_t a = 0, b = 0;
    double best = -1.0;
    for (std::size_t i = 1; i < n; ++i) {
      const double d = (pts[i] - pts[0]).squaredNorm();
      if (d > best) best = d, b = i;
    }
    best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = (pts[i] - pts[b]).squaredNorm();
      if (d > best) best = d, a = i;
    }
    const double len = (pts[b] - pts[a]).norm();
    bool collinear = true;
    for (std::size_t i = 0; i < n && collinear; ++i) {
      if (std::abs(detail::orient2d(pts[a], pts[b], pts[i])) > 1e-12 * len) collinear = false;
    }
    if (collinear) return {};
  }

  constexpr double kSuper = 1e3;
  const std::size_t s0 = n, s1 = n + 1, s2 = n + 2;
  pts.emplace_back(-3.0 * kSuper, -3.0 * kSuper);
  pts.emplace_back(3.0 * kSuper, -3.0 * kSuper);
  pts.emplace_back(0.0, 3.0 * kSuper);

  struct Tri {
    TriangleIndices v;
    bool alive = true;
  };
  std::vector<Tri> tris;
  tris.push_back({{s0, s1, s2}});

  std::vector<std::size_t> bad;
  std::vector<std::pair<std::size_t, std::size_t>> boundary;
  std::vector<std::size_t> inserted;
  inserted.reserve(n);

  auto edge_key = [](std::size_t a, std::size_t b) {
    return a < b ? std::pair{a, b} : std::pair{b, a};
  };

  for (std::size_t p = 0; p < n; ++p) {
    bool duplicate = false;
    for (std::size_t q : inserted) {
      if ((pts[q] - pts[p]).squaredNorm() < 1e-24) {
        duplicate = true;
        break;
      }
    }
    if (duplicate) continue;

    bad.clear();
    for (std::size_t t = 0; t < tris.size(); ++t) {
      if (!tris[t].alive) continue;
      const auto& v = tris[t].v;
      if (detail::in_circumcircle(pts[v[0]], pts[v[1]], pts[v[2]], pts[p])) bad.push_back(t);
    }
    if (bad.empty()) {
      // On a circumcircle boundary everywhere: take the containing triangle.
      for (std::size_t t = 0; t < tris.size(); ++t) {
        if (!tris[t].alive) continue;
        const auto& v = tris[t].v;
        if (detail::orient2d(pts[v[0]], pts[v[1]], pts[p]) >= 0 &&
            detail::orient2d(pts[v[1]], pts[v[2]], pts[p]) >= 0 &&
            detail::orient2d(pts[v[2]], pts[v[0]], pts[p]) >= 0) {
          bad.push_back(t);
          break;
        }
      }
    }

    // Grow the cavity until every new fan triangle is properly oriented.
    for (;;) {
      std::map<std::pair<std::size_t, std::size_t>, int> count;
      for (std::size_t t : bad) {
        const auto& v = tris[t].v;
        for (int e = 0; e < 3; ++e) ++count[edge_key(v[e], v[(e + 1) % 3])];
      }
      boundary.clear();
      for (std::size_t t : bad) {
        const auto& v = tris[t].v;
        for (int e = 0; e < 3; ++e) {
          const std::size_t a = v[e], b = v[(e + 1) % 3];
          if (count[edge_key(a, b)] == 1) boundary.emplace_back(a, b);
        }
      }
      std::size_t grow = tris.size();
      for (const auto& [a, b] : boundary) {
        const double o = detail::orient2d(pts[a], pts[b], pts[p]);
        const double scale = (pts[b] - pts[a]).norm() * ((pts[p] - pts[a]).norm() + 1e-300);
        if (o <= 1e-12 * scale) {
          // Absorb the triangle on the other side of edge (a, b).
          for (std::size_t t = 0; t < tris.size(); ++t) {
            if (!tris[t].alive || std::find(bad.begin(), bad.end(), t) != bad.end()) continue;
            const auto& v = tris[t].v;
            int hits = 0;
            for (std::size_t x : v) hits += (x == a || x == b) ? 1 : 0;
            if (hits == 2) {
              grow = t;
              break;
            }
          }
          if (grow != tris.size()) break;
        }
      }
      if (grow == tris.size()) break;
      bad.push_back(grow);
    }

    for (std::size_t t : bad) tris[t].alive = false;
    for (const auto& [a, b] : boundary) tris.push_back({{a, b, p}});
    inserted.push_back(p);

    // Compact occasionally so scans stay proportional to live triangles.
    if (tris.size() > 4 * (2 * inserted.size() + 8)) {
      std::vector<Tri> live;
      live.reserve(tris.size());
      for (const auto& t : tris)
        if (t.alive) live.push_back(t);
      tris.swap(live);
    }
  }

  std::vector<TriangleIndices> out;
  for (const auto& t : tris) {
    if (!t.alive) continue;
    if (t.v[0] >= n || t.v[1] >= n || t.v[2] >= n) continue;
    TriangleIndices v = t.v;
    if (detail::orient2d(pts[v[0]], pts[v[1]], pts[v[2]]) < 0) std::swap(v[1], v[2]);
    // Rotate so the smallest index leads; orientation is preserved.
    while (v[0] > v[1] || v[0] > v[2]) v = {v[1], v[2], v[0]};
    out.push_back(v);
  }
  std::sort(out.begin(), out.end(), [](const TriangleIndices& x, const TriangleIndices& y) {
    auto sx = x, sy = y;
    std::sort(sx.begin(), sx.end());
    std::sort(sy.begin(), sy.end());
    return sx < sy;
  });
  return out;
}

}  // namespace mrfup
