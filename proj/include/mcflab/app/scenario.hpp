#pragma once

#include "mcflab/app/config.hpp"
#include "mcflab/barrier.hpp"
#include "mcflab/flow.hpp"
#include "mcflab/frames.hpp"
#include "mcflab/geometry.hpp"
#include "mcflab/grid.hpp"

#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace mcflab::app {

// Everything a run needs, resolved from a config.
struct Setup {
  std::shared_ptr<const ChartManifold> M;
  std::shared_ptr<const ChartManifold> N;
  std::shared_ptr<const Grid> grid;           // empty for pointwise scenarios
  std::optional<GraphMapField> initial;
  FlowParams params;
  std::optional<BarrierFunction> barrier;
  int barrier_m = 0;
};

inline std::shared_ptr<const ChartManifold> build_M(const ScenarioConfig& c) {
  if (c.M_kind == "round_sphere") return std::make_shared<const ChartManifold>(round_sphere(c.M_dim, c.M_radius));
  if (c.M_kind == "flat_torus") return std::make_shared<const ChartManifold>(flat_torus(c.M_dim, c.M_scale));
  if (c.M_kind == "product_s1xs2") {
    if (c.M_dim != 3) throw ConfigurationError("invalid value for 'M.dim': product_s1xs2 has dimension 3");
    return std::make_shared<const ChartManifold>(product_s1xs2(c.M_radius));
  }
  if (c.M_kind == "hopf_s3") {
    if (c.M_dim != 3) throw ConfigurationError("invalid value for 'M.dim': hopf_s3 has dimension 3");
    return std::make_shared<const ChartManifold>(hopf_s3());
  }
  throw ConfigurationError("invalid value for 'M.kind': '" + c.M_kind + "'");
}

inline std::shared_ptr<const ChartManifold> build_N(const ScenarioConfig& c) {
  if (c.N_kind == "round_sphere") return std::make_shared<const ChartManifold>(round_sphere(2, c.N_radius));
  if (c.N_kind == "flat_torus") return std::make_shared<const ChartManifold>(flat_torus(2, c.N_scale));
  if (c.N_kind == "warped")
    return std::make_shared<const ChartManifold>(
        WarpedSurface(make_warp(c.N_warp, c.N_warp_coefficients), c.N_z_min, c.N_z_max).chart());
  throw ConfigurationError("invalid value for 'N.kind': '" + c.N_kind + "'");
}

inline Integrator parse_integrator(const std::string& s) {
  if (s == "euler") return Integrator::Euler;
  if (s == "rk4") return Integrator::RK4;
  return Integrator::RK2;
}

inline FlowParams flow_params(const ScenarioConfig& c) {
  FlowParams p;
  p.cfl = c.cfl;
  p.t_end = c.t_end;
  p.dt_max = c.dt_max;
  p.record_every = c.record_every;
  p.H_tol = c.H_tol;
  p.diam_tol = c.diam_tol;
  p.converge_steps = c.converge_steps;
  p.integrator = parse_integrator(c.integrator);
  p.blowup_factor = c.blowup_factor;
  return p;
}

// "coef:a:b; coef:a:b" -> coef * y0^a * y1^b summed.
inline std::vector<PolynomialTerm> parse_terms(const std::string& s) {
  std::vector<PolynomialTerm> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ';')) {
    item = trim(item);
    if (item.empty()) continue;
    std::stringstream is(item);
    std::string c, a, b;
    if (!std::getline(is, c, ':') || !std::getline(is, a, ':') || !std::getline(is, b))
      throw ConfigurationError("invalid value for 'barrier.terms': expected 'coef:a:b', got '" + item + "'");
    try {
      out.push_back({detail::parse_real(trim(c)), static_cast<int>(detail::parse_integer(trim(a))),
                     static_cast<int>(detail::parse_integer(trim(b)))});
    } catch (const ConfigurationError& e) {
      throw ConfigurationError(std::string("invalid value for 'barrier.terms': ") + e.what());
    }
  }
  if (out.empty()) throw ConfigurationError("invalid value for 'barrier.terms': no terms");
  return out;
}

inline std::optional<BarrierFunction> build_barrier(const ScenarioConfig& c, const ChartManifold& M,
                                                    const ChartManifold& N) {
  const int m = M.dim();
  if (c.barrier_kind == "none") return std::nullopt;
  if (c.barrier_kind == "squared_distance_to_point")
    return squared_distance_to_point(N, Eigen::Vector2d(c.barrier_point[0], c.barrier_point[1]), c.barrier_c);
  if (c.barrier_kind == "squared_distance_to_waist_geodesic")
    return squared_distance_to_waist_geodesic(m, c.barrier_z0, c.barrier_c);
  if (c.barrier_kind == "coordinate_height") return coordinate_height(m, c.barrier_axis, c.barrier_c);
  if (c.barrier_kind == "custom_polynomial_in_chart")
    return custom_polynomial_in_chart(m, parse_terms(c.barrier_terms), c.barrier_c);
  throw ConfigurationError("invalid value for 'barrier.kind': '" + c.barrier_kind + "'");
}

namespace detail {

inline double s_ratio(const ChartManifold& M, const ChartManifold& N) {
  return N.axes()[0].period() / M.axes()[0].period();
}

// Grid axes for the requested mode; reduced grids follow the symmetry of the initial map.
inline std::vector<GridAxis> grid_axes(const ScenarioConfig& c, const ChartManifold& M, const ChartManifold& N) {
  const int m = M.dim();
  const int n = c.grid_n;
  if (c.grid_mode == "reduced") {
    if (c.M_kind == "round_sphere" && m == 2 && (c.map_kind == "equivariant_sine" || c.map_kind == "constant")) {
      const bool reflect = c.map_kind == "equivariant_sine";
      const Eigen::Vector2d slope = reflect ? Eigen::Vector2d(0.0, 1.0) : Eigen::Vector2d::Zero();
      return {GridAxis::pole(n, 1, 1, reflect), GridAxis::affine(slope, 0.0, c.grid_quad_n > 0 ? c.grid_quad_n : 1)};
    }
    if (c.M_kind == "product_s1xs2" && c.map_kind == "circle") {
      return {GridAxis::affine(Eigen::Vector2d(s_ratio(M, N), 0.0), 0.0, c.grid_quad_n),
              GridAxis::affine(Eigen::Vector2d::Zero(), 0.5 * kPi, c.grid_quad_n),
              GridAxis::affine(Eigen::Vector2d::Zero(), 0.0, c.grid_quad_n)};
    }
    throw ConfigurationError("invalid value for 'grid.mode': no reduced grid for map '" + c.map_kind + "' on '" +
                             c.M_kind + "'");
  }
  std::vector<GridAxis> axes;
  int last_periodic = -1;
  for (int a = 0; a < m; ++a)
    if (M.axes()[static_cast<std::size_t>(a)].periodic) last_periodic = a;
  for (int a = 0; a < m; ++a) {
    if (M.axes()[static_cast<std::size_t>(a)].periodic) {
      axes.push_back(GridAxis::periodic(n));
    } else {
      if (last_periodic < 0) throw ConfigurationError("full grid needs a periodic partner axis");
      axes.push_back(GridAxis::pole(n, last_periodic, last_periodic));
    }
  }
  return axes;
}

inline Eigen::Vector2d initial_value(const ScenarioConfig& c, const ChartManifold& M, const ChartManifold& N,
                                     const Vec& x) {
  const std::string& k = c.map_kind;
  if (k == "equivariant_sine") return {c.map_amplitude * std::sin(x(0)), x(x.size() - 1)};
  if (k == "circle") return {s_ratio(M, N) * x(0), c.map_z0};
  if (k == "projection" || k == "identity") return {x(0), x(1)};
  if (k == "constant") return {c.map_value[0], c.map_value[1]};
  throw ConfigurationError("invalid value for 'map.kind': '" + k + "' has no field initializer");
}

inline void check_map_compatibility(const ScenarioConfig& c) {
  const std::string& k = c.map_kind;
  auto need = [&](bool ok, const std::string& what) {
    if (!ok) throw ConfigurationError("invalid value for 'map.kind': '" + k + "' " + what);
  };
  if (k == "equivariant_sine")
    need(c.M_kind == "round_sphere" && c.M_dim == 2 && c.N_kind == "round_sphere", "needs M = S^2 and N = S^2");
  if (k == "circle") need(c.M_kind == "product_s1xs2" && c.N_kind == "warped", "needs M = S^1 x S^2 and a warped N");
  if (k == "projection") need(c.M_kind == "flat_torus" && c.N_kind == "flat_torus", "needs flat tori");
  if (k == "identity")
    need(c.M_kind == "flat_torus" && c.M_dim == 2 && c.N_kind == "flat_torus", "needs M = N = T^2");
  if (k == "hopf") need(c.M_kind == "hopf_s3" && c.N_kind == "round_sphere", "needs M = S^3 and N = S^2");
  if (c.M_kind == "hopf_s3") need(k == "hopf", "is not available on hopf_s3");
}

}  // namespace detail

// Resolves manifolds, grid, initial map, flow parameters and barrier. Throws
// NotAreaDecreasingError when the initial map has p <= 0 somewhere.
inline Setup build_setup(const ScenarioConfig& c) {
  validate(c);
  detail::check_map_compatibility(c);
  Setup s;
  s.M = build_M(c);
  s.N = build_N(c);
  s.params = flow_params(c);
  s.barrier = build_barrier(c, *s.M, *s.N);
  s.barrier_m = c.barrier_m > 0 ? c.barrier_m : s.M->dim();
  if (s.barrier_m > s.M->dim() + 2) throw ConfigurationError("invalid value for 'barrier.m': exceeds dim(M x N)");
  if (c.grid_mode == "pointwise") {
    if (c.map_kind != "hopf") throw ConfigurationError("invalid value for 'grid.mode': pointwise needs map 'hopf'");
    return s;
  }
  if (c.map_kind == "hopf") throw ConfigurationError("invalid value for 'grid.mode': map 'hopf' is pointwise only");
  s.grid = std::make_shared<const Grid>(s.M, detail::grid_axes(c, *s.M, *s.N));
  GraphMapField f(s.grid, s.N);
  for (int i = 0; i < f.size(); ++i) f.set(i, detail::initial_value(c, *s.M, *s.N, s.grid->node(i).x));
  double min_p = std::numeric_limits<double>::infinity();
  for (int i = 0; i < f.size(); ++i) {
    const NodeData& nd = s.grid->node(i);
    min_p = std::min(min_p, evaluate_rate(f.jet(i), nd.gM, nd.gammaM, *s.N).p);
  }
  if (!(min_p > 1e-12)) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", std::abs(min_p) < 1e-12 ? 0.0 : min_p);
    throw NotAreaDecreasingError(std::string("initial map is not strictly area decreasing: min p = ") + buf);
  }
  s.initial = std::move(f);
  return s;
}

// ---------------------------------------------------------------------------
// Hopf map S^3 -> S^2 sampled pointwise.

struct HopfReport {
  int samples = 0;
  std::uint64_t seed = 0;
  double max_dev_lambda = 0.0;
  double max_dev_mu = 0.0;
  double max_deviation = 0.0;
  double p = 0.0;  // identical at every point
  bool pass = false;
};

// In Hopf coordinates (eta, xi1, xi2) the map is (theta, phi) = (2 eta, xi1 - xi2).
inline Mat hopf_jacobian() {
  Mat J(2, 3);
  J << 2.0, 0.0, 0.0, 0.0, 1.0, -1.0;
  return J;
}

inline HopfReport hopf_singular_values(const ChartManifold& S3, const ChartManifold& S2, int samples,
                                       std::uint64_t seed, double tol = 1e-10) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> eta(0.0, 0.5 * kPi), ang(0.0, 2.0 * kPi);
  HopfReport r;
  r.samples = samples;
  r.seed = seed;
  const Mat J = hopf_jacobian();
  for (int k = 0; k < samples; ++k) {
    double e = eta(rng);
    while (e <= 0.0) e = eta(rng);
    Vec x(3);
    x << e, ang(rng), ang(rng);
    Vec y(2);
    y << 2.0 * e, wrap_periodic(x(1) - x(2), 0.0, 2.0 * kPi);
    const DifferentialSample ds{J, S3.metric_at(x), S2.metric_at(y)};
    const auto [l, u] = singular_values(ds);
    r.max_dev_lambda = std::max(r.max_dev_lambda, std::abs(l - 2.0));
    r.max_dev_mu = std::max(r.max_dev_mu, std::abs(u - 2.0));
    r.p = p_value(l, u);
  }
  r.max_deviation = std::max(r.max_dev_lambda, r.max_dev_mu);
  r.pass = r.max_deviation <= tol;
  return r;
}

}  // namespace mcflab::app
