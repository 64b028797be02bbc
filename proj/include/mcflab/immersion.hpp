#pragma once

#include "mcflab/core.hpp"
#include "mcflab/frames.hpp"
#include "mcflab/geometry.hpp"
#include "mcflab/grid.hpp"

#include <cmath>
#include <vector>

namespace mcflab {

// Graph geometry at one point. A^xi, A^eta are in the e-basis.
struct PointGeometry {
  Vec x;
  Eigen::Vector2d y = Eigen::Vector2d::Zero();
  Mat J;
  Mat gM;
  Mat gN;
  Mat g;
  Mat g_inv;
  SVDFrame frame;
  std::vector<Vec> W;  // W[i*m+j]: covariant second derivative of F in M x N chart components
  Mat A_xi;
  Mat A_eta;
  double H_xi = 0.0;
  double H_eta = 0.0;
  double A2 = 0.0;
  double H2 = 0.0;
  Vec H;  // mean curvature vector, m + 2 chart components

  int m() const { return static_cast<int>(x.size()); }
  double p() const { return frame.p; }
  double lambda() const { return frame.lambda; }
  double mu() const { return frame.mu; }
};

// Christoffels of N at y, with the metric.
struct TargetJet {
  Mat gN;
  Christoffel gamma;
};

inline TargetJet target_jet(const ChartManifold& N, const Eigen::Vector2d& y) {
  const MetricJet jet = N.jet(Vec(y), 1);
  return {jet.g, christoffel_from_jet(jet, checked_inverse(jet.g))};
}

inline PointGeometry point_geometry_from_jet(const MapJet& mj, const Mat& gM, const Christoffel& gammaM,
                                             const ChartManifold& N) {
  const int m = static_cast<int>(mj.x.size());
  PointGeometry pg;
  pg.x = mj.x;
  pg.y = mj.y;
  pg.J = mj.J;
  pg.gM = gM;
  const TargetJet tj = target_jet(N, mj.y);
  pg.gN = tj.gN;
  pg.g = gM + mj.J.transpose() * tj.gN * mj.J;
  try {
    pg.g_inv = checked_inverse(pg.g);
  } catch (const DegenerateMetricError&) {
    throw StateError("induced metric is not positive definite");
  }
  pg.frame = build_svd_frame({mj.J, gM, tj.gN});

  pg.W.assign(static_cast<std::size_t>(m * m), Vec::Zero(m + 2));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      Vec& w = pg.W[static_cast<std::size_t>(i * m + j)];
      for (int k = 0; k < m; ++k) w(k) = gammaM(k, i, j);
      for (int a = 0; a < 2; ++a) {
        double s = mj.D2[static_cast<std::size_t>(a)](i, j);
        for (int b = 0; b < 2; ++b)
          for (int c = 0; c < 2; ++c) s += tj.gamma(a, b, c) * mj.J(b, i) * mj.J(c, j);
        w(m + a) = s;
      }
    }

  const Mat G = product_metric(gM, tj.gN);
  const Vec xi_low = G * pg.frame.xi;
  const Vec eta_low = G * pg.frame.eta;
  Mat Ax(m, m), Ae(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      Ax(i, j) = pg.W[static_cast<std::size_t>(i * m + j)].dot(xi_low);
      Ae(i, j) = pg.W[static_cast<std::size_t>(i * m + j)].dot(eta_low);
    }
  const Mat& E = pg.frame.e;
  pg.A_xi = E.transpose() * Ax * E;
  pg.A_eta = E.transpose() * Ae * E;
  pg.H_xi = pg.A_xi.trace();
  pg.H_eta = pg.A_eta.trace();
  pg.A2 = pg.A_xi.squaredNorm() + pg.A_eta.squaredNorm();
  pg.H2 = pg.H_xi * pg.H_xi + pg.H_eta * pg.H_eta;
  pg.H = pg.H_xi * pg.frame.xi + pg.H_eta * pg.frame.eta;
  return pg;
}

inline PointGeometry point_geometry(const GraphMapField& field, int node) {
  const NodeData& nd = field.grid().node(node);
  return point_geometry_from_jet(field.jet(node), nd.gM, nd.gammaM, field.N());
}

inline std::vector<PointGeometry> all_point_geometry(const GraphMapField& field) {
  std::vector<PointGeometry> out(static_cast<std::size_t>(field.size()));
  parallel_for(field.size(), [&](int i) { out[static_cast<std::size_t>(i)] = point_geometry(field, i); }, 64);
  return out;
}

// Point geometry at a quadrature sample of node i (shifted along affine axes).
inline PointGeometry sample_geometry(const GraphMapField& field, int node, const SamplePoint& sp) {
  MapJet mj = field.jet(node);
  mj.x = sp.x;
  mj.y = field.wrap_target(mj.y + sp.offset);
  return point_geometry_from_jet(mj, sp.gM, sp.gammaM, field.N());
}

// Curvature of M along the alpha-frame and of N at the image point.
struct CurvatureInputs {
  Mat ricM;
  double sigmaM_12 = 0.0;  // sigma_M(alpha_1 ^ alpha_2)
  double sigmaN = 0.0;
  double min_ricM = 0.0;   // smallest eigenvalue of Ric_M at x

  double ric(const Vec& u, const Vec& v) const { return u.dot(ricM * v); }
};

inline double gauss_curvature_at(const ChartManifold& N, const Eigen::Vector2d& y) {
  if (N.hints.gauss_curvature) return N.hints.gauss_curvature(Vec(y));
  if (N.hints.constant_sectional) return *N.hints.constant_sectional;
  return 0.5 * curvature_package(N, Vec(y)).scalar;
}

inline CurvatureInputs curvature_inputs(const CurvatureTensors& curvM, const ChartManifold& N, const PointGeometry& pg) {
  CurvatureInputs ci;
  ci.ricM = curvM.ricci;
  ci.sigmaM_12 = sectional(curvM, pg.frame.alpha.col(0), pg.frame.alpha.col(1));
  ci.sigmaN = gauss_curvature_at(N, pg.y);
  ci.min_ricM = ricci_eigenvalues(curvM).minCoeff();
  return ci;
}

inline CurvatureInputs curvature_inputs(const ChartManifold& M, const ChartManifold& N, const PointGeometry& pg) {
  return curvature_inputs(curvature_package(M, pg.x), N, pg);
}

inline double quantity_Q(const SVDFrame& fr, const CurvatureInputs& ci) {
  if (!(fr.p > 0.0)) throw DomainError("Q requires p > 0");
  const double l2 = fr.lambda * fr.lambda, u2 = fr.mu * fr.mu;
  const double D = (1.0 + l2) * (1.0 + u2);
  const Vec a1 = fr.alpha.col(0), a2 = fr.alpha.col(1);
  const double r11 = ci.ric(a1, a1), r22 = ci.ric(a2, a2);
  const double bric = r11 + r22 - ci.sigmaM_12;
  return 2.0 * l2 * u2 * (2.0 + fr.p) / D * (bric - ci.sigmaN) + 2.0 * l2 * fr.p / D * r11 +
         2.0 * u2 * fr.p / D * r22;
}

inline double quantity_Q(const PointGeometry& pg, const CurvatureInputs& ci) { return quantity_Q(pg.frame, ci); }

struct RVW {
  double R = 0.0;
  Vec v;
  Vec w;
};

inline RVW quantity_R_vw(const SVDFrame& fr, double H_xi, double H_eta, const CurvatureInputs& ci) {
  const double l2 = fr.lambda * fr.lambda, u2 = fr.mu * fr.mu;
  const double D = (1.0 + l2) * (1.0 + u2);
  const double a = fr.lambda / std::sqrt(1.0 + l2);
  const double b = fr.mu / std::sqrt(1.0 + u2);
  const Vec a1 = fr.alpha.col(0), a2 = fr.alpha.col(1);
  RVW out;
  out.v = a * H_xi * a1 + b * H_eta * a2;
  out.w = -a * H_eta * a1 + b * H_xi * a2;
  const double H2 = H_xi * H_xi + H_eta * H_eta;
  const double r11 = ci.ric(a1, a1), r22 = ci.ric(a2, a2);
  const double bric = r11 + r22 - ci.sigmaM_12;
  // |w|^2 in g_M; alpha is g_M-orthonormal so this is the coefficient sum
  const double w2 = a * a * H_eta * H_eta + b * b * H_xi * H_xi;
  out.R = 2.0 * l2 * u2 * H2 / D * (bric - ci.sigmaN) + 2.0 * ci.ric(out.v, out.v) -
          2.0 * l2 * u2 * H2 / D * (r11 + r22) + 2.0 * ci.sigmaN * w2;
  return out;
}

inline RVW quantity_R_vw(const PointGeometry& pg, const CurvatureInputs& ci) {
  return quantity_R_vw(pg.frame, pg.H_xi, pg.H_eta, ci);
}

// |w|^2 closed form from the frame scalars.
inline double w_norm2_closed(double lambda, double mu, double H_xi, double H_eta) {
  const double l2 = lambda * lambda, u2 = mu * mu;
  return (l2 * H_eta * H_eta + u2 * H_xi * H_xi + l2 * u2 * (H_xi * H_xi + H_eta * H_eta)) /
         ((1.0 + l2) * (1.0 + u2));
}

inline double theta(const PointGeometry& pg) {
  if (!(pg.p() > 0.0)) throw DomainError("theta requires p > 0");
  return pg.H2 / pg.p();
}

// Same quantity assembled from the singular values directly.
inline double theta_from_components(double lambda, double mu, double H_xi, double H_eta) {
  const double l2 = lambda * lambda, u2 = mu * mu;
  return (H_xi * H_xi + H_eta * H_eta) * (1.0 + l2) * (1.0 + u2) / (2.0 * (1.0 - l2 * u2));
}

// Nodal p for a whole field.
inline std::vector<double> nodal(const std::vector<PointGeometry>& pgs, double (*fn)(const PointGeometry&)) {
  std::vector<double> out(pgs.size());
  for (std::size_t i = 0; i < pgs.size(); ++i) out[i] = fn(pgs[i]);
  return out;
}

inline double pg_p(const PointGeometry& pg) { return pg.p(); }
inline double pg_H2(const PointGeometry& pg) { return pg.H2; }
inline double pg_Hnorm(const PointGeometry& pg) { return std::sqrt(pg.H2); }

// |discrete d_{e_k} p - (2 A^xi_1k T11 + 2 A^eta_2k T22)| for each k.
inline Vec p_gradient_check(const GraphMapField& field, const std::vector<PointGeometry>& pgs, int node) {
  const std::vector<double> p = nodal(pgs, pg_p);
  const ScalarJet sj = scalar_jet(field.grid(), p, node);
  const PointGeometry& pg = pgs[static_cast<std::size_t>(node)];
  const int m = pg.m();
  Vec res(m);
  for (int k = 0; k < m; ++k) {
    const double discrete = sj.grad.dot(pg.frame.e.col(k));
    const double formula = 2.0 * pg.A_xi(0, k) * pg.frame.T11 + 2.0 * pg.A_eta(1, k) * pg.frame.T22;
    res(k) = std::abs(discrete - formula);
  }
  return res;
}

inline Vec p_gradient_check(const GraphMapField& field, int node) {
  return p_gradient_check(field, all_point_geometry(field), node);
}

// Largest tangential component of the second fundamental form at node i,
// |<W_ij - dF(Gamma(g)^l_ij d_l), dF(e_k)>|, with Gamma(g) finite-differenced
// from the induced metric field. Needs a grid without affine axes and a node
// whose stencil avoids pole ghosts.
inline double tangency_residual(const GraphMapField& field, const std::vector<PointGeometry>& pgs, int node) {
  const Grid& G = field.grid();
  const int m = G.dim();
  for (int a = 0; a < m; ++a)
    if (!G.is_grid_axis(a)) throw ConfigurationError("tangency residual needs every axis discretized");
  if (!G.interior(node)) throw DomainError("tangency residual stencil crosses a pole");
  const PointGeometry& pg = pgs[static_cast<std::size_t>(node)];
  const auto idx = G.multi_index(node);
  std::vector<Mat> dg(static_cast<std::size_t>(m));
  for (int a = 0; a < m; ++a) {
    auto up = idx, dn = idx;
    up[static_cast<std::size_t>(a)] += 1;
    dn[static_cast<std::size_t>(a)] -= 1;
    const Mat& gu = pgs[static_cast<std::size_t>(G.resolve(up).node)].g;
    const Mat& gd = pgs[static_cast<std::size_t>(G.resolve(dn).node)].g;
    dg[static_cast<std::size_t>(a)] = (gu - gd) / (2.0 * G.spacing(a));
  }
  MetricJet jet;
  jet.order = 1;
  jet.g = pg.g;
  jet.dg = dg;
  const Christoffel gam = christoffel_from_jet(jet, pg.g_inv);
  const Mat Gm = product_metric(pg.gM, pg.gN);
  double worst = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      Vec t = pg.W[static_cast<std::size_t>(i * m + j)];
      for (int l = 0; l < m; ++l) {
        Vec dl = Vec::Zero(m);
        dl(l) = 1.0;
        t -= gam(l, i, j) * graph_push(pg.J, dl);
      }
      for (int k = 0; k < m; ++k)
        worst = std::max(worst, std::abs(t.dot(Gm * graph_push(pg.J, pg.frame.e.col(k)))));
    }
  return worst;
}

}  // namespace mcflab
