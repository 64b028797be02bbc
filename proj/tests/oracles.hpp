#pragma once

// Independent reference computations used by the tests and the acceptance
// binary. They avoid the chart machinery of the library: the graph of an
// equivariant map S^2 -> S^2 is embedded in R^3 x R^3 and differentiated by hand.

#include "mcflab/mcflab.hpp"

#include <cmath>
#include <memory>
#include <utility>

namespace oracle {

using mcflab::kPi;
using V3 = Eigen::Vector3d;
using V6 = Eigen::Matrix<double, 6, 1>;

inline V3 X(double t, double p) { return {std::sin(t) * std::cos(p), std::sin(t) * std::sin(p), std::cos(t)}; }
inline V3 Xt(double t, double p) { return {std::cos(t) * std::cos(p), std::cos(t) * std::sin(p), -std::sin(t)}; }
inline V3 Xp(double t, double p) { return {-std::sin(t) * std::sin(p), std::sin(t) * std::cos(p), 0.0}; }
inline V3 Xtt(double t, double p) { return -X(t, p); }
inline V3 Xpp(double t, double p) { return {-std::sin(t) * std::cos(p), -std::sin(t) * std::sin(p), 0.0}; }
inline V3 Xtp(double t, double p) { return {-std::cos(t) * std::sin(p), std::cos(t) * std::cos(p), 0.0}; }

// Reduced grid for f(theta, phi) = (eps sin theta, phi) on the unit sphere.
inline mcflab::GraphMapField equivariant_field(int J, double eps, double phi_rep = 0.0) {
  using namespace mcflab;
  auto S = std::make_shared<const ChartManifold>(round_sphere(2));
  auto G = std::make_shared<const Grid>(
      S, std::vector<GridAxis>{GridAxis::pole(J, 1, 1, true), GridAxis::affine(Eigen::Vector2d(0, 1), phi_rep, 1)});
  GraphMapField f(G, S);
  for (int i = 0; i < f.size(); ++i) f.set(i, Eigen::Vector2d(eps * std::sin(G->node(i).x(0)), phi_rep));
  return f;
}

struct Embedded {
  Eigen::Matrix<double, 6, 6> normal_projector;  // onto the normal space of the graph inside T(S^2 x S^2)
  V6 mean_curvature;                              // exact H of the graph in R^6 coordinates
  V3 dY_theta, dY_phi;                            // chart basis of T_y S^2 in R^3
  double sqrt_det_g = 0.0;
};

// Exact second-order geometry of the graph of (eps sin theta, phi) at (theta, phi).
inline Embedded embedded_graph(double eps, double th, double ph) {
  const double u = eps * std::sin(th), du = eps * std::cos(th), ddu = -eps * std::sin(th);
  V6 Ft, Fp, Ftt, Fpp, Ftp;
  Ft << Xt(th, ph), du * Xt(u, ph);
  Fp << Xp(th, ph), Xp(u, ph);
  Ftt << Xtt(th, ph), ddu * Xt(u, ph) + du * du * Xtt(u, ph);
  Fpp << Xpp(th, ph), Xpp(u, ph);
  Ftp << Xtp(th, ph), du * Xtp(u, ph);
  Eigen::Matrix2d g;
  g << Ft.dot(Ft), Ft.dot(Fp), Fp.dot(Ft), Fp.dot(Fp);
  const Eigen::Matrix2d gi = g.inverse();
  const V6 L = gi(0, 0) * Ftt + gi(1, 1) * Fpp + 2.0 * gi(0, 1) * Ftp;
  Eigen::Matrix<double, 6, 2> T;
  T << Ft, Fp;
  Eigen::Matrix<double, 6, 4> B = Eigen::Matrix<double, 6, 4>::Zero();
  B.block<3, 1>(0, 0) = Xt(th, ph);
  B.block<3, 1>(0, 1) = Xp(th, ph).normalized();
  B.block<3, 1>(3, 2) = Xt(u, ph);
  B.block<3, 1>(3, 3) = Xp(u, ph).normalized();
  Embedded e;
  e.normal_projector = B * B.transpose() - T * gi * T.transpose();
  e.mean_curvature = e.normal_projector * L;
  e.dY_theta = Xt(u, ph);
  e.dY_phi = Xp(u, ph);
  e.sqrt_det_g = std::sqrt(g.determinant());
  return e;
}

// Normal part of (0, V) - H at every node: L2(d mu) and max norms.
inline std::pair<double, double> nonparametric_consistency(int J, double eps) {
  const double ph = 0.3;
  const mcflab::GraphMapField f = equivariant_field(J, eps, ph);
  const mcflab::Grid& G = f.grid();
  double l2 = 0.0, linf = 0.0;
  for (int i = 0; i < f.size(); ++i) {
    const double th = G.node(i).x(0);
    const Embedded e = embedded_graph(eps, th, ph);
    const Eigen::Vector2d V = mcflab::nonparametric_rhs(f, i);
    V6 V6v;
    V6v << V3::Zero(), V(0) * e.dY_theta + V(1) * e.dY_phi;
    const double r = (e.normal_projector * (V6v - e.mean_curvature)).norm();
    l2 += r * r * e.sqrt_det_g * (kPi / J) * 2.0 * kPi;
    linf = std::max(linf, r);
  }
  return {std::sqrt(l2), linf};
}

// Runs the equivariant flow to exactly t_star and returns the residual of the
// p evolution equation on the (previous, t_star, next) step triple.
inline mcflab::CheckpointResidual p_residual_at(int J, double eps, double t_star) {
  using namespace mcflab;
  const GraphMapField f = equivariant_field(J, eps);
  FlowState s(f);
  FlowParams P;
  P.t_end = 1.0;
  Snapshot prev{0.0, f.values()};
  while (s.t < t_star - 1e-14) {
    prev = {s.t, s.field.values()};
    advance(s, P, t_star - s.t);
  }
  const Snapshot cur{s.t, s.field.values()};
  advance(s, P);
  const Snapshot next{s.t, s.field.values()};
  return residual_p_evolution(f, {prev, cur, next}, node_curvatures(f.grid()));
}

}  // namespace oracle
