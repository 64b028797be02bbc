#pragma once

#include "mcflab/core.hpp"
#include "mcflab/geometry.hpp"
#include "mcflab/grid.hpp"
#include "mcflab/immersion.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace mcflab {

enum class Integrator { Euler, RK2, RK4 };
enum class FlowStatus { Running, Converged, Drifting, Aborted };

inline const char* to_string(FlowStatus s) {
  switch (s) {
    case FlowStatus::Running:
      return "Running";
    case FlowStatus::Converged:
      return "Converged";
    case FlowStatus::Drifting:
      return "Drifting";
    case FlowStatus::Aborted:
      return "Aborted";
  }
  return "Running";
}

inline const char* to_string(Integrator i) {
  switch (i) {
    case Integrator::Euler:
      return "euler";
    case Integrator::RK2:
      return "rk2";
    case Integrator::RK4:
      return "rk4";
  }
  return "rk2";
}

struct FlowParams {
  double cfl = 0.4;
  double t_end = 1.0;
  double dt_max = std::numeric_limits<double>::infinity();
  int record_every = 10;
  double H_tol = 1e-6;
  double diam_tol = 1e-3;
  int converge_steps = 100;
  Integrator integrator = Integrator::RK2;
  double blowup_factor = 1e3;
  bool stop_on_converged = true;
};

// Velocity and cheap scalars at one point, from the map jet alone.
struct NodeRate {
  Eigen::Vector2d V = Eigen::Vector2d::Zero();
  double H2 = 0.0;
  double sqrt_det_g = 0.0;
  double p = 2.0;
  double lambda = 0.0;
  double mu = 0.0;
  double lam_grid = 0.0;    // largest eigenvalue of g^{-1} on the discretized axes
  double lam_affine = 0.0;  // same on the affine axes
  double dmu = 0.0;         // volume carried by the node (filled by evaluate_state)
};

// V^a = g^{ij} (d_ij f^a - Gamma_M^k_ij d_k f^a + Gamma_N^a_bc d_i f^b d_j f^c).
// (0, V) differs from the mean curvature vector by a tangent vector, so |H|^2 is
// |V|^2 minus the squared tangential part.
inline NodeRate evaluate_rate(const MapJet& mj, const Mat& gM, const Christoffel& gammaM, const ChartManifold& N,
                              const Grid* grid = nullptr) {
  const int m = static_cast<int>(mj.x.size());
  const TargetJet tj = target_jet(N, mj.y);
  const Mat& J = mj.J;
  const Mat g = gM + J.transpose() * tj.gN * J;
  Eigen::LLT<Mat> llt(g);
  if (llt.info() != Eigen::Success) throw StateError("induced metric is not positive definite");
  const Mat g_inv = llt.solve(Mat::Identity(m, m));
  NodeRate r;
  for (int a = 0; a < 2; ++a) {
    double s = 0.0;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        double t = mj.D2[static_cast<std::size_t>(a)](i, j);
        for (int k = 0; k < m; ++k) t -= gammaM(k, i, j) * J(a, k);
        for (int b = 0; b < 2; ++b)
          for (int c = 0; c < 2; ++c) t += tj.gamma(a, b, c) * J(b, i) * J(c, j);
        s += g_inv(i, j) * t;
      }
    r.V(a) = s;
  }
  const Eigen::Vector2d gV = tj.gN * r.V;
  const Vec c = J.transpose() * gV;
  r.H2 = std::max(0.0, r.V.dot(gV) - c.dot(g_inv * c));
  const double detg = llt.matrixL().determinant();
  r.sqrt_det_g = detg;
  // lambda^2, mu^2: eigenvalues of g_N J g_M^{-1} J^T
  const Mat P = tj.gN * J * gM.llt().solve(J.transpose());
  const double tr = P.trace(), det = std::max(0.0, P.determinant());
  const double disc = std::sqrt(std::max(0.0, tr * tr - 4.0 * det));
  const double l2 = std::max(0.0, 0.5 * (tr + disc));
  const double u2 = std::max(0.0, 0.5 * (tr - disc));
  r.lambda = std::sqrt(l2);
  r.mu = std::sqrt(u2);
  r.p = 2.0 * (1.0 - det) / (1.0 + tr + det);
  if (grid) {
    std::vector<int> gi, ai;
    for (int a = 0; a < m; ++a) (grid->is_grid_axis(a) ? gi : ai).push_back(a);
    auto top_eig = [&](const std::vector<int>& ax) {
      if (ax.empty()) return 0.0;
      const int n = static_cast<int>(ax.size());
      Mat B(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) B(i, j) = g_inv(ax[static_cast<std::size_t>(i)], ax[static_cast<std::size_t>(j)]);
      if (n == 1) return B(0, 0);
      return Eigen::SelfAdjointEigenSolver<Mat>(B, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
    };
    r.lam_grid = top_eig(gi);
    r.lam_affine = top_eig(ai);
  }
  return r;
}

inline Eigen::Vector2d nonparametric_rhs(const GraphMapField& field, int node) {
  const NodeData& nd = field.grid().node(node);
  return evaluate_rate(field.jet(node), nd.gM, nd.gammaM, field.N()).V;
}

// Field-wide quantities of one state.
struct StateSummary {
  double min_p = 2.0;
  double max_H2 = 0.0;
  double max_df2 = 0.0;
  double max_lambda = 0.0;
  double max_mu = 0.0;
  double H2_integral = 0.0;  // integral of |H|^2 d mu
  double volume = 0.0;       // integral of d mu
  double lam_grid = 0.0;
  double lam_affine = 0.0;
  bool finite = true;
};

inline StateSummary evaluate_state(const GraphMapField& field, std::vector<NodeRate>& rates) {
  const Grid& G = field.grid();
  const int n = field.size();
  rates.resize(static_cast<std::size_t>(n));
  std::vector<double> h2int(static_cast<std::size_t>(n)), vol(static_cast<std::size_t>(n));
  parallel_for(n, [&](int i) {
    const NodeData& nd = G.node(i);
    const MapJet mj = field.jet(i);
    NodeRate& r = rates[static_cast<std::size_t>(i)];
    r = evaluate_rate(mj, nd.gM, nd.gammaM, field.N(), &G);
    double hi = 0.0, vi = 0.0;
    for (const SamplePoint& sp : nd.samples) {
      if (sp.offset.isZero(0.0) && sp.x == nd.x) {
        hi += sp.weight * r.H2 * r.sqrt_det_g;
        vi += sp.weight * r.sqrt_det_g;
        continue;
      }
      MapJet sj = mj;
      sj.x = sp.x;
      sj.y = field.wrap_target(mj.y + sp.offset);
      const NodeRate sr = evaluate_rate(sj, sp.gM, sp.gammaM, field.N());
      hi += sp.weight * sr.H2 * sr.sqrt_det_g;
      vi += sp.weight * sr.sqrt_det_g;
    }
    h2int[static_cast<std::size_t>(i)] = hi;
    vol[static_cast<std::size_t>(i)] = vi;
    r.dmu = vi;
  });
  StateSummary s;
  s.min_p = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const NodeRate& r = rates[static_cast<std::size_t>(i)];
    s.min_p = std::min(s.min_p, r.p);
    s.max_H2 = std::max(s.max_H2, r.H2);
    s.max_df2 = std::max(s.max_df2, r.lambda * r.lambda + r.mu * r.mu);
    s.max_lambda = std::max(s.max_lambda, r.lambda);
    s.max_mu = std::max(s.max_mu, r.mu);
    s.lam_grid = std::max(s.lam_grid, r.lam_grid);
    s.lam_affine = std::max(s.lam_affine, r.lam_affine);
    s.H2_integral += h2int[static_cast<std::size_t>(i)];
    s.volume += vol[static_cast<std::size_t>(i)];
    s.finite = s.finite && r.V.allFinite() && std::isfinite(r.p);
  }
  return s;
}

// dt = cfl * min(h_min^2 / (2 m_d Lambda_d), 1 / Lambda_a), capped by dt_max.
// m_d counts the discretized axes, Lambda_d and Lambda_a are the largest
// eigenvalues of g^{-1} restricted to the discretized and the affine axes.
inline double stable_dt(const Grid& G, const StateSummary& s, const FlowParams& params) {
  int md = 0;
  for (int a = 0; a < G.dim(); ++a) md += G.is_grid_axis(a) ? 1 : 0;
  double dt = std::numeric_limits<double>::infinity();
  if (md > 0 && s.lam_grid > 0.0) dt = std::min(dt, G.h_min() * G.h_min() / (2.0 * md * s.lam_grid));
  if (s.lam_affine > 0.0) dt = std::min(dt, 1.0 / s.lam_affine);
  dt *= params.cfl;
  return std::min(dt, params.dt_max);
}

struct FlowState {
  GraphMapField field;
  double t = 0.0;
  long step = 0;
  FlowStatus status = FlowStatus::Running;
  std::string diagnostic;
  double last_dt = 0.0;
  int converged_streak = 0;
  double H2_time_integral = 0.0;  // int_0^t int |H|^2 d mu dt (trapezoid)
  double initial_max_df2 = 0.0;
  StateSummary summary;
  std::vector<NodeRate> rates;

  explicit FlowState(GraphMapField f) : field(std::move(f)) { refresh(); initial_max_df2 = summary.max_df2; }

  void refresh() { summary = evaluate_state(field, rates); }
};

namespace detail {

inline std::vector<Eigen::Vector2d> velocities(const std::vector<NodeRate>& rates) {
  std::vector<Eigen::Vector2d> v(rates.size());
  for (std::size_t i = 0; i < rates.size(); ++i) v[i] = rates[i].V;
  return v;
}

inline GraphMapField displaced(const GraphMapField& base, const std::vector<Eigen::Vector2d>& k, double dt) {
  GraphMapField out = base;
  for (int i = 0; i < base.size(); ++i) out.set(i, base.value(i) + dt * k[static_cast<std::size_t>(i)]);
  return out;
}

inline std::vector<Eigen::Vector2d> stage(const GraphMapField& f) {
  std::vector<NodeRate> r;
  const StateSummary s = evaluate_state(f, r);
  if (!s.finite) throw StateError("non-finite velocity in an intermediate stage");
  return velocities(r);
}

}  // namespace detail

// Advances the state by one step. dt_override > 0 replaces the CFL step
// (used to land exactly on t_end).
inline void advance(FlowState& s, const FlowParams& params, double dt_override = 0.0) {
  if (s.status != FlowStatus::Running && s.status != FlowStatus::Converged)
    throw StateError("cannot step a flow that is " + std::string(to_string(s.status)));
  double dt = stable_dt(s.field.grid(), s.summary, params);
  if (dt_override > 0.0) dt = std::min(dt, dt_override);
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    // nothing moves: no discretized and no affine directions with curvature
    dt = dt_override > 0.0 ? dt_override : params.dt_max;
  }
  const StateSummary before = s.summary;
  try {
    const auto k1 = detail::velocities(s.rates);
    GraphMapField next = s.field;
    switch (params.integrator) {
      case Integrator::Euler:
        next = detail::displaced(s.field, k1, dt);
        break;
      case Integrator::RK2: {
        const auto k2 = detail::stage(detail::displaced(s.field, k1, dt));
        std::vector<Eigen::Vector2d> k(k1.size());
        for (std::size_t i = 0; i < k.size(); ++i) k[i] = 0.5 * (k1[i] + k2[i]);
        next = detail::displaced(s.field, k, dt);
        break;
      }
      case Integrator::RK4: {
        const auto k2 = detail::stage(detail::displaced(s.field, k1, 0.5 * dt));
        const auto k3 = detail::stage(detail::displaced(s.field, k2, 0.5 * dt));
        const auto k4 = detail::stage(detail::displaced(s.field, k3, dt));
        std::vector<Eigen::Vector2d> k(k1.size());
        for (std::size_t i = 0; i < k.size(); ++i) k[i] = (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0;
        next = detail::displaced(s.field, k, dt);
        break;
      }
    }
    s.field = std::move(next);
    s.refresh();
  } catch (const Error& e) {
    s.status = FlowStatus::Aborted;
    s.diagnostic = std::string("step failed at t = ") + std::to_string(s.t) + ": " + e.what();
    return;
  }
  s.t += dt;
  s.step += 1;
  s.last_dt = dt;
  s.H2_time_integral += 0.5 * dt * (before.H2_integral + s.summary.H2_integral);

  if (!s.summary.finite) {
    s.status = FlowStatus::Aborted;
    s.diagnostic = "non-finite field at t = " + std::to_string(s.t);
    return;
  }
  if (!(s.summary.min_p > 0.0)) {
    s.status = FlowStatus::Aborted;
    s.diagnostic = "min p = " + std::to_string(s.summary.min_p) + " <= 0 at t = " + std::to_string(s.t);
    return;
  }
  if (s.summary.max_df2 > params.blowup_factor * std::max(1.0, s.initial_max_df2)) {
    s.status = FlowStatus::Aborted;
    s.diagnostic = "|df|^2 grew to " + std::to_string(s.summary.max_df2) + " (step size too large?) at t = " +
                   std::to_string(s.t);
    return;
  }
  if (std::sqrt(s.summary.max_H2) < params.H_tol) {
    if (++s.converged_streak >= params.converge_steps) s.status = FlowStatus::Converged;
  } else {
    s.converged_streak = 0;
    s.status = FlowStatus::Running;
  }
}

inline FlowState step(FlowState s, const FlowParams& params) {
  advance(s, params);
  return s;
}

// Status at t_end for a run that neither converged nor aborted: Drifting when
// the image displacement grew monotonically without slowing down (the gain
// over the second half of the run is at least half the gain over the first
// half) and int |H|^2 d mu decreased.
inline FlowStatus terminal_status(FlowStatus current, const std::vector<double>& times,
                                  const std::vector<double>& displacement, const std::vector<double>& H2_integral) {
  if (current != FlowStatus::Running || displacement.size() < 3 || times.size() != displacement.size()) return current;
  bool monotone = displacement.back() > displacement.front();
  for (std::size_t i = 1; i < displacement.size(); ++i) monotone = monotone && displacement[i] >= displacement[i - 1];
  bool decreasing = true;
  for (std::size_t i = 1; i < H2_integral.size(); ++i) decreasing = decreasing && H2_integral[i] <= H2_integral[i - 1];
  const double t_mid = 0.5 * (times.front() + times.back());
  std::size_t k = 0;
  while (k + 1 < times.size() && times[k + 1] <= t_mid) ++k;
  const double first = displacement[k] - displacement.front();
  const double second = displacement.back() - displacement[k];
  const bool sustained = second >= 0.5 * first;
  return monotone && decreasing && sustained ? FlowStatus::Drifting : current;
}

// Largest chart displacement of the image from a reference field.
inline double image_displacement(const GraphMapField& f, const GraphMapField& ref) {
  double d = 0.0;
  for (int i = 0; i < f.size(); ++i) d = std::max(d, f.difference(f.value(i), ref.value(i)).norm());
  return d;
}

// ---------------------------------------------------------------------------
// Circle drift: f(s, p) = (s, z) from S^1 x S^2 into a warped surface stays of
// this form, so the flow is the scalar ODE z' = Phi(z).

struct CircleDriftODE {
  std::shared_ptr<const ChartManifold> M;
  std::shared_ptr<const ChartManifold> N;
  std::shared_ptr<const Grid> grid;

  double phi(double z) const {
    GraphMapField f(grid, N);
    f.set(0, Eigen::Vector2d(0.0, z));
    return nonparametric_rhs(f, 0)(1);
  }

  // RK4 trajectory sampled at every step.
  std::vector<std::pair<double, double>> integrate(double z0, double t_end, double dt) const {
    std::vector<std::pair<double, double>> out;
    double z = z0, t = 0.0;
    out.push_back({t, z});
    while (t < t_end - 1e-12) {
      const double h = std::min(dt, t_end - t);
      const double k1 = phi(z);
      const double k2 = phi(z + 0.5 * h * k1);
      const double k3 = phi(z + 0.5 * h * k2);
      const double k4 = phi(z + h * k3);
      z += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
      t += h;
      out.push_back({t, z});
    }
    return out;
  }
};

// M must be S^1 x S^2 in (s, theta, phi) coordinates and N a warped surface in (s, z).
inline CircleDriftODE reduce_circle_drift(std::shared_ptr<const ChartManifold> M, std::shared_ptr<const ChartManifold> N) {
  if (M->dim() != 3 || N->dim() != 2) throw ConfigurationError("circle drift needs M = S^1 x S^2 and a surface N");
  const double ratio = N->axes()[0].period() / M->axes()[0].period();
  std::vector<GridAxis> axes = {GridAxis::affine(Eigen::Vector2d(ratio, 0.0), 0.0),
                                GridAxis::affine(Eigen::Vector2d::Zero(), 0.5 * kPi),
                                GridAxis::affine(Eigen::Vector2d::Zero(), 0.0)};
  CircleDriftODE ode;
  ode.M = M;
  ode.N = N;
  ode.grid = std::make_shared<const Grid>(M, axes);
  return ode;
}

}  // namespace mcflab
