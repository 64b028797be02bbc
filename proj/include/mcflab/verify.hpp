#pragma once

#include "mcflab/core.hpp"
#include "mcflab/flow.hpp"
#include "mcflab/geometry.hpp"
#include "mcflab/grid.hpp"
#include "mcflab/immersion.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace mcflab {

struct BoundConstants {
  double rho0 = 0.0;
  double c0 = 0.0;
  double c1 = 0.0;
  double eps0 = 0.0;
  double eps1 = 0.0;
  double a0 = 0.0;
  double theta0 = 0.0;  // max Theta at t = 0

  double bound_p(double t) const {
    const double e = c0 * std::exp(eps0 * t);
    return 2.0 * e / std::sqrt(1.0 + e * e);
  }
  double bound_df2(double t) const { return c1 * std::exp(-eps0 * t); }
  double bound_H2(double t) const { return a0 * std::exp(2.0 * std::max(0.0, eps1) * t); }
  double bound_theta(double t) const { return theta0 * std::exp(2.0 * std::max(0.0, eps1) * t); }
};

// c0 solves 2 c0 / sqrt(1 + c0^2) = rho0; a0 = 2 max Theta(0) since p <= 2.
inline BoundConstants compute_bound_constants(double rho0, double min_ric, double sup_sigma_N, double max_theta0) {
  if (!(rho0 > 0.0)) throw NotAreaDecreasingError("initial min p = " + std::to_string(rho0) + " is not positive");
  if (rho0 >= 2.0) rho0 = std::nextafter(2.0, 0.0);
  BoundConstants b;
  b.rho0 = rho0;
  b.c0 = rho0 / std::sqrt(4.0 - rho0 * rho0);
  b.c1 = 2.0 / b.c0;
  b.eps0 = min_ric >= 0.0 ? 0.25 * min_ric : 0.5 * min_ric;
  b.eps1 = sup_sigma_N - min_ric;
  b.theta0 = max_theta0;
  b.a0 = 2.0 * max_theta0;
  return b;
}

inline BoundConstants compute_bound_constants(const FlowState& initial, const CurvatureReport& report) {
  double theta0 = 0.0;
  for (const PointGeometry& pg : all_point_geometry(initial.field)) {
    if (!(pg.p() > 0.0)) throw NotAreaDecreasingError("initial map has p <= 0");
    theta0 = std::max(theta0, theta(pg));
  }
  return compute_bound_constants(initial.summary.min_p, report.min_Ric, report.sup_sigma_N, theta0);
}

struct TimeSeriesRecord {
  double t = 0.0;
  double min_p = 0.0;
  double max_lambda = 0.0;
  double max_mu = 0.0;
  double max_df2 = 0.0;
  double max_H2 = 0.0;
  double max_A2 = 0.0;
  double max_theta = 0.0;
  double total_volume = 0.0;
  double image_diameter = 0.0;
  double bound_p = std::numeric_limits<double>::quiet_NaN();
  double bound_df2 = std::numeric_limits<double>::quiet_NaN();
  double bound_H2 = std::numeric_limits<double>::quiet_NaN();
  double residual_p_L2 = std::numeric_limits<double>::quiet_NaN();
  double residual_p_Linf = std::numeric_limits<double>::quiet_NaN();
};

// ---------------------------------------------------------------------------
// Decay bounds

struct DecayRow {
  double t = 0.0;
  double margin_p = 0.0;      // min p - bound
  double margin_df2 = 0.0;    // bound - max |df|^2
  double margin_H2 = 0.0;     // bound - max |H|^2
  double margin_theta = 0.0;  // bound - max Theta
};

struct DecayReport {
  bool applicable = false;
  bool pass = false;
  double tol = 0.0;
  std::vector<DecayRow> rows;
  DecayRow worst;  // componentwise minimum margins
  std::string note;
};

inline DecayReport check_decay_bounds(const std::vector<TimeSeriesRecord>& series, const BoundConstants& c,
                                      bool condition_A, double tol) {
  DecayReport r;
  r.tol = tol;
  if (!condition_A) {
    r.note = "not applicable: condition (A) is not certified for this scenario";
    return r;
  }
  r.applicable = true;
  const double inf = std::numeric_limits<double>::infinity();
  r.worst = {0.0, inf, inf, inf, inf};
  for (const TimeSeriesRecord& rec : series) {
    DecayRow row;
    row.t = rec.t;
    row.margin_p = rec.min_p - c.bound_p(rec.t);
    row.margin_df2 = c.bound_df2(rec.t) - rec.max_df2;
    row.margin_H2 = c.bound_H2(rec.t) - rec.max_H2;
    row.margin_theta = c.bound_theta(rec.t) - rec.max_theta;
    r.worst.margin_p = std::min(r.worst.margin_p, row.margin_p);
    r.worst.margin_df2 = std::min(r.worst.margin_df2, row.margin_df2);
    r.worst.margin_H2 = std::min(r.worst.margin_H2, row.margin_H2);
    r.worst.margin_theta = std::min(r.worst.margin_theta, row.margin_theta);
    r.rows.push_back(row);
  }
  r.pass = r.worst.margin_p >= -tol && r.worst.margin_df2 >= -tol && r.worst.margin_H2 >= -tol &&
           r.worst.margin_theta >= -tol;
  r.note = "a0 = 2 max Theta(0) is a reconstruction of a constant depending only on f0";
  return r;
}

// ---------------------------------------------------------------------------
// Evolution residuals on recorded snapshots

struct Snapshot {
  double t = 0.0;
  std::vector<Eigen::Vector2d> f;
};

struct SnapshotTriple {
  Snapshot prev, cur, next;
};

inline std::vector<CurvatureTensors> node_curvatures(const Grid& G) {
  std::vector<CurvatureTensors> out(static_cast<std::size_t>(G.size()));
  parallel_for(G.size(), [&](int i) { out[static_cast<std::size_t>(i)] = curvature_package(G.M(), G.node(i).x); });
  return out;
}

namespace detail {

inline GraphMapField with_values(const GraphMapField& proto, const std::vector<Eigen::Vector2d>& f) {
  if (static_cast<int>(f.size()) != proto.size()) throw ConfigurationError("snapshot size does not match the grid");
  GraphMapField out = proto;
  out.values() = f;
  return out;
}

// Central difference on a nonuniform three-point stencil.
inline double time_derivative(double up, double uc, double un, double dp, double dn) {
  return -dn / (dp * (dp + dn)) * up + (dn - dp) / (dp * dn) * uc + dp / (dn * (dp + dn)) * un;
}

// g^{ij} (d_ij u - Gamma_M^k_ij d_k u). In the nonparametric gauge the time
// derivative at fixed x already carries the tangential transport, which turns
// the induced Laplacian into this operator.
inline double gauge_laplacian(const ScalarJet& sj, const Mat& g_inv, const Christoffel& gammaM) {
  const int m = static_cast<int>(sj.grad.size());
  double s = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      double t = sj.hess(i, j);
      for (int k = 0; k < m; ++k) t -= gammaM(k, i, j) * sj.grad(k);
      s += g_inv(i, j) * t;
    }
  return s;
}

struct TripleData {
  GraphMapField cur;
  std::vector<NodeRate> prev_rates, cur_rates, next_rates;
  std::vector<PointGeometry> pgs;
  double dp = 0.0, dn = 0.0;
};

inline TripleData prepare(const GraphMapField& proto, const SnapshotTriple& tr) {
  TripleData d{with_values(proto, tr.cur.f), {}, {}, {}, {}, 0.0, 0.0};
  d.dp = tr.cur.t - tr.prev.t;
  d.dn = tr.next.t - tr.cur.t;
  if (!(d.dp > 0.0) || !(d.dn > 0.0)) throw ConfigurationError("snapshot times must increase");
  evaluate_state(with_values(proto, tr.prev.f), d.prev_rates);
  evaluate_state(d.cur, d.cur_rates);
  evaluate_state(with_values(proto, tr.next.f), d.next_rates);
  d.pgs = all_point_geometry(d.cur);
  return d;
}

}  // namespace detail

// Right-hand side of the evolution equation of p at one point.
inline double p_evolution_rhs(const PointGeometry& pg, const CurvatureInputs& ci, double grad_p_norm2) {
  const SVDFrame& fr = pg.frame;
  const int m = pg.m();
  const double p = fr.p;
  double s = 2.0 * p * pg.A2;
  for (int k = 0; k < m; ++k)
    for (int i = 2; i < m; ++i) {
      s += 2.0 * pg.A_xi(k, i) * pg.A_xi(k, i) * (1.0 - fr.S_diag(0));
      s += 2.0 * pg.A_eta(k, i) * pg.A_eta(k, i) * (1.0 - fr.S_diag(1));
    }
  double cross = 0.0;
  for (int k = 0; k < m; ++k) {
    const double v = pg.A_xi(0, k) * fr.T22 + pg.A_eta(1, k) * fr.T11;
    cross += v * v;
  }
  s += (4.0 * cross - grad_p_norm2) / (2.0 * p);
  return s + quantity_Q(fr, ci);
}

struct CheckpointResidual {
  double t = 0.0;
  double L2 = 0.0;    // L^2(d mu) norm of LHS - RHS
  double Linf = 0.0;
  int worst_node = -1;
};

inline CheckpointResidual residual_p_evolution(const GraphMapField& proto, const SnapshotTriple& tr,
                                               const std::vector<CurvatureTensors>& curvM) {
  const detail::TripleData d = detail::prepare(proto, tr);
  const Grid& G = proto.grid();
  const int n = G.size();
  std::vector<double> p(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    p[static_cast<std::size_t>(i)] = d.pgs[static_cast<std::size_t>(i)].p();
    if (!(p[static_cast<std::size_t>(i)] > 0.0)) throw DomainError("p <= 0 at node " + std::to_string(i));
  }
  std::vector<double> res(static_cast<std::size_t>(n));
  parallel_for(n, [&](int i) {
    const auto u = static_cast<std::size_t>(i);
    const PointGeometry& pg = d.pgs[u];
    const ScalarJet sj = scalar_jet(G, p, i);
    const double dt_p = detail::time_derivative(d.prev_rates[u].p, d.cur_rates[u].p, d.next_rates[u].p, d.dp, d.dn);
    const double lhs = dt_p - detail::gauge_laplacian(sj, pg.g_inv, G.node(i).gammaM);
    const CurvatureInputs ci = curvature_inputs(curvM[u], proto.N(), pg);
    const double rhs = p_evolution_rhs(pg, ci, sj.grad.dot(pg.g_inv * sj.grad));
    res[u] = lhs - rhs;
  });
  CheckpointResidual out;
  out.t = tr.cur.t;
  double l2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    l2 += res[u] * res[u] * d.cur_rates[u].dmu;
    if (std::abs(res[u]) > out.Linf) {
      out.Linf = std::abs(res[u]);
      out.worst_node = i;
    }
  }
  out.L2 = std::sqrt(l2);
  return out;
}

struct InequalityReport {
  bool pass = true;
  double tol = 0.0;
  double worst_slack_H = std::numeric_limits<double>::infinity();
  double worst_slack_theta = std::numeric_limits<double>::infinity();
  double worst_t = 0.0;
  int worst_node = -1;
  long evaluated = 0;
  double worst_w_excess = -std::numeric_limits<double>::infinity();  // max of |w|^2 - |H|^2

  void merge(const InequalityReport& o) {
    if (o.evaluated == 0) return;
    if (std::min(o.worst_slack_H, o.worst_slack_theta) < std::min(worst_slack_H, worst_slack_theta)) {
      worst_t = o.worst_t;
      worst_node = o.worst_node;
    }
    worst_slack_H = std::min(worst_slack_H, o.worst_slack_H);
    worst_slack_theta = std::min(worst_slack_theta, o.worst_slack_theta);
    worst_w_excess = std::max(worst_w_excess, o.worst_w_excess);
    evaluated += o.evaluated;
    pass = pass && o.pass;
  }
};

// Slack of the |H|^2 and Theta differential inequalities at one checkpoint,
// at nodes with |H| > delta whose stencils stay `margin` nodes away from poles.
inline InequalityReport check_H_and_theta_inequalities(const GraphMapField& proto, const SnapshotTriple& tr,
                                                       const std::vector<CurvatureTensors>& curvM, double eps1,
                                                       double dt, double delta = 1e-8, int margin = 2) {
  const detail::TripleData d = detail::prepare(proto, tr);
  const Grid& G = proto.grid();
  const int n = G.size();
  const double h = std::isfinite(G.h_min()) ? G.h_min() : 0.0;
  InequalityReport rep;
  rep.tol = 1e-6 + 10.0 * (h * h + dt);
  rep.worst_t = tr.cur.t;
  std::vector<double> Hn(static_cast<std::size_t>(n)), H2(static_cast<std::size_t>(n)), th(static_cast<std::size_t>(n)),
      p(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    H2[u] = d.pgs[u].H2;
    Hn[u] = std::sqrt(H2[u]);
    p[u] = d.pgs[u].p();
    th[u] = H2[u] / p[u];
  }
  for (int i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    if (Hn[u] <= delta || !G.interior(i, margin)) continue;
    const PointGeometry& pg = d.pgs[u];
    const Mat& gi = pg.g_inv;
    const Christoffel& gam = G.node(i).gammaM;
    const CurvatureInputs ci = curvature_inputs(curvM[u], proto.N(), pg);
    const RVW rvw = quantity_R_vw(pg, ci);

    const ScalarJet jH2 = scalar_jet(G, H2, i);
    const ScalarJet jHn = scalar_jet(G, Hn, i);
    const double lhsH = detail::time_derivative(d.prev_rates[u].H2, d.cur_rates[u].H2, d.next_rates[u].H2, d.dp, d.dn) -
                        detail::gauge_laplacian(jH2, gi, gam);
    const double rhsH = -2.0 * jHn.grad.dot(gi * jHn.grad) + 2.0 * pg.A2 * pg.H2 + rvw.R;

    const ScalarJet jth = scalar_jet(G, th, i);
    const ScalarJet jp = scalar_jet(G, p, i);
    const auto theta_of = [](const NodeRate& r) { return r.H2 / r.p; };
    const double lhsT = detail::time_derivative(theta_of(d.prev_rates[u]), theta_of(d.cur_rates[u]),
                                                theta_of(d.next_rates[u]), d.dp, d.dn) -
                        detail::gauge_laplacian(jth, gi, gam);
    const double rhsT = jth.grad.dot(gi * jp.grad) / p[u] + 2.0 * std::max(0.0, eps1) * th[u];

    const double sH = rhsH - lhsH, sT = rhsT - lhsT;
    if (std::min(sH, sT) < std::min(rep.worst_slack_H, rep.worst_slack_theta)) rep.worst_node = i;
    rep.worst_slack_H = std::min(rep.worst_slack_H, sH);
    rep.worst_slack_theta = std::min(rep.worst_slack_theta, sT);
    rep.worst_w_excess = std::max(rep.worst_w_excess, rvw.w.dot(pg.gM * rvw.w) - pg.H2);
    ++rep.evaluated;
  }
  if (rep.evaluated > 0) rep.pass = std::min(rep.worst_slack_H, rep.worst_slack_theta) >= -rep.tol;
  return rep;
}

// ---------------------------------------------------------------------------
// Volume budget: vol(0) - vol(T) against int_0^T int |H|^2 d mu dt.

struct BudgetReport {
  double volume_drop = 0.0;
  double H2_integral = 0.0;
  double relative_error = 0.0;
  bool pass = false;
};

inline BudgetReport volume_budget(double volume0, double volumeT, double H2_integral, double rel_tol = 0.02) {
  BudgetReport b;
  b.volume_drop = volume0 - volumeT;
  b.H2_integral = H2_integral;
  const double diff = std::abs(b.volume_drop - H2_integral);
  const double scale = std::max(std::abs(b.volume_drop), std::abs(H2_integral));
  b.relative_error = scale > 1e-12 ? diff / scale : 0.0;
  b.pass = scale <= 1e-12 ? diff <= 1e-12 : b.relative_error <= rel_tol;
  return b;
}

}  // namespace mcflab
