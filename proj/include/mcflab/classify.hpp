#pragma once

#include "mcflab/barrier.hpp"
#include "mcflab/core.hpp"
#include "mcflab/flow.hpp"
#include "mcflab/grid.hpp"
#include "mcflab/immersion.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace mcflab {

enum class LimitClass { Constant, Rank1Geodesic, Rank2Flat, NotMinimal, Inconclusive };

inline const char* to_string(LimitClass c) {
  switch (c) {
    case LimitClass::Constant:
      return "Constant";
    case LimitClass::Rank1Geodesic:
      return "Rank1Geodesic";
    case LimitClass::Rank2Flat:
      return "Rank2Flat";
    case LimitClass::NotMinimal:
      return "NotMinimal";
    case LimitClass::Inconclusive:
      return "Inconclusive";
  }
  return "Inconclusive";
}

struct ClassifyTolerances {
  double sv_tol = 1e-4;
  double sv_var_tol = 1e-3;
  double A_tol = 1e-4;
  double H_tol = 1e-5;
  double flat_tol = 1e-8;
  double diam_tol = 1e-3;  // image diameter of a constant limit
};

struct LimitReport {
  LimitClass cls = LimitClass::Inconclusive;
  double max_H = 0.0;
  double max_A = 0.0;
  int rank = 0;
  bool rank_uniform = true;
  double mean_lambda = 0.0;
  double mean_mu = 0.0;
  double std_lambda = 0.0;
  double std_mu = 0.0;
  double max_abs_sigma_N = 0.0;  // on the image
  double image_diameter = 0.0;
  bool image_closed_curve = false;
  bool contradiction = false;  // positive Ricci forces constant minimal maps
  std::string reason;
  std::vector<std::string> untested = {"Euler characteristic of M", "local product structure of M",
                                       "Riemannian submersion onto the image (only constancy of lambda is checked)"};
};

namespace detail {

// True when some periodic axis of M is carried around a closed loop with
// nonzero net displacement of the image.
inline bool has_winding(const GraphMapField& f) {
  const Grid& G = f.grid();
  const ChartManifold& M = G.M();
  for (int a = 0; a < G.dim(); ++a) {
    const ChartAxis& ca = M.axes()[static_cast<std::size_t>(a)];
    if (!ca.periodic) continue;
    const GridAxis& ax = G.axis(a);
    if (ax.kind == AxisKind::Affine) {
      if (ax.slope.norm() * ca.period() > 1e-9) return true;
      continue;
    }
    if (ax.kind != AxisKind::Periodic) continue;
    auto idx = G.multi_index(0);
    Eigen::Vector2d total = Eigen::Vector2d::Zero();
    for (int j = 0; j < ax.n; ++j) {
      idx[static_cast<std::size_t>(a)] = j;
      const int here = G.linear_index(idx);
      idx[static_cast<std::size_t>(a)] = j + 1;
      total += f.offset_at(idx, f.value(here));
    }
    if (total.norm() > 1e-9) return true;
  }
  return false;
}

}  // namespace detail

// status: flow status of the final state; a Running state whose max |H| is
// already below tolerance counts as stationary.
inline LimitReport classify_limit(const GraphMapField& f, FlowStatus status, const ClassifyTolerances& tol = {},
                                  bool positive_ricci = false) {
  LimitReport r;
  const std::vector<PointGeometry> pgs = all_point_geometry(f);
  const double n = static_cast<double>(pgs.size());
  int rank_min = 3, rank_max = -1;
  for (const PointGeometry& pg : pgs) {
    r.max_H = std::max(r.max_H, std::sqrt(pg.H2));
    r.max_A = std::max(r.max_A, std::sqrt(pg.A2));
    r.mean_lambda += pg.lambda() / n;
    r.mean_mu += pg.mu() / n;
    const int rk = (pg.lambda() > tol.sv_tol ? 1 : 0) + (pg.mu() > tol.sv_tol ? 1 : 0);
    rank_min = std::min(rank_min, rk);
    rank_max = std::max(rank_max, rk);
    r.max_abs_sigma_N = std::max(r.max_abs_sigma_N, std::abs(gauss_curvature_at(f.N(), pg.y)));
  }
  for (const PointGeometry& pg : pgs) {
    r.std_lambda += (pg.lambda() - r.mean_lambda) * (pg.lambda() - r.mean_lambda) / n;
    r.std_mu += (pg.mu() - r.mean_mu) * (pg.mu() - r.mean_mu) / n;
  }
  r.std_lambda = std::sqrt(r.std_lambda);
  r.std_mu = std::sqrt(r.std_mu);
  r.rank = rank_max;
  r.rank_uniform = rank_min == rank_max;
  r.image_closed_curve = r.rank == 1 && detail::has_winding(f);

  const bool stationary = r.max_H < tol.H_tol;
  if (status == FlowStatus::Aborted || status == FlowStatus::Drifting || !stationary) {
    r.cls = LimitClass::NotMinimal;
    r.reason = std::string("flow ") + to_string(status) + ", max|H| = " + std::to_string(r.max_H);
    return r;
  }
  const bool constant_sv = r.std_lambda < tol.sv_var_tol && r.std_mu < tol.sv_var_tol;
  const bool geodesic = r.max_A < tol.A_tol;
  if (!r.rank_uniform) {
    r.cls = LimitClass::Inconclusive;
    r.reason = "rank of df varies over M";
  } else if (r.rank == 0) {
    r.image_diameter = image_diameter(f);
    r.cls = r.image_diameter < tol.diam_tol ? LimitClass::Constant : LimitClass::Inconclusive;
    r.reason = r.cls == LimitClass::Constant ? "all singular values below sv_tol"
                                             : "rank 0 but image diameter " + std::to_string(r.image_diameter);
  } else if (!geodesic || !constant_sv) {
    r.cls = LimitClass::Inconclusive;
    r.reason = !geodesic ? "minimal but |A| above A_tol" : "singular values not constant";
  } else if (r.rank == 1) {
    r.cls = r.image_closed_curve ? LimitClass::Rank1Geodesic : LimitClass::Inconclusive;
    r.reason = r.image_closed_curve ? "totally geodesic, rank 1, image winds around a closed curve"
                                    : "rank 1 but no closed image curve detected";
  } else {
    r.cls = r.max_abs_sigma_N < tol.flat_tol ? LimitClass::Rank2Flat : LimitClass::Inconclusive;
    r.reason = r.cls == LimitClass::Rank2Flat ? "totally geodesic, rank 2, flat image"
                                              : "rank 2 but the image is not flat";
  }
  r.contradiction = positive_ricci && (r.cls == LimitClass::Rank1Geodesic || r.cls == LimitClass::Rank2Flat);
  return r;
}

}  // namespace mcflab
