// Acceptance criteria 1-10 at their stated tolerances. Prints one PASS/FAIL
// line per criterion and exits nonzero if any criterion fails.

#include "mcflab/mcflab.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

using namespace mcflab;
using namespace mcflab::app;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

bool in_range(double r, double lo, double hi) { return r >= lo && r <= hi; }

struct FlowRun {
  ScenarioConfig cfg;
  Setup setup;
  RecordedRun rec;
  Analysis analysis;
  double seconds = 0.0;
};

FlowRun run(ScenarioConfig cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  FlowRun r{cfg, build_setup(cfg), {}, {}, 0.0};
  r.rec = run_flow(r.setup, r.cfg);
  r.analysis = analyze(r.setup, r.cfg, r.rec);
  r.seconds = seconds_since(t0);
  return r;
}

// 1. Randomized algebraic identities.
Outcome c1() {
  const auto t0 = std::chrono::steady_clock::now();
  const IdentityReport r = run_identities(10000, 20240601);
  const double s = seconds_since(t0);
  return {r.pass && r.max_error <= 1e-10 && s < 10.0, fmt("10000 samples, max error %.2e, %.2f s", r.max_error, s)};
}

// 2. Hopf map singular values.
Outcome c2() {
  const ScenarioConfig cfg = load_config(MCFLAB_CONFIG_DIR "/hopf_pointwise.ini");
  const Setup s = build_setup(cfg);
  const HopfReport h = hopf_singular_values(*s.M, *s.N, std::max(1000, cfg.samples), cfg.seed);
  return {h.max_deviation <= 1e-10 && h.samples >= 1000,
          fmt("%.0f points, max |(lambda, mu) - (2, 2)| = %.2e", h.samples, h.max_deviation)};
}

// 3. Nonparametric velocity against the embedded mean curvature.
Outcome c3() {
  const double e16 = oracle::nonparametric_consistency(16, 0.5).first;
  const double e32 = oracle::nonparametric_consistency(32, 0.5).first;
  const double e64 = oracle::nonparametric_consistency(64, 0.5).first;
  const double r1 = e16 / e32, r2 = e32 / e64;
  return {in_range(r1, 3.0, 5.0) && in_range(r2, 3.0, 5.0),
          fmt("L2 errors %.2e %.2e %.2e, ratios %.2f", e16, e32, e64, r1) + fmt(" %.2f", r2)};
}

// 4. Evolution equation of p.
Outcome c4() {
  const double t_star = 0.05;
  const double e16 = oracle::p_residual_at(16, 0.5, t_star).L2;
  const double e32 = oracle::p_residual_at(32, 0.5, t_star).L2;
  const double e64 = oracle::p_residual_at(64, 0.5, t_star).L2;
  const double r1 = e16 / e32, r2 = e32 / e64;
  const Setup torus = build_setup(load_config(MCFLAB_CONFIG_DIR "/torus_projection.ini"));
  FlowState st(*torus.initial);
  std::vector<Snapshot> snaps;
  for (int k = 0; k < 3; ++k) {
    snaps.push_back({st.t, st.field.values()});
    advance(st, torus.params);
  }
  const double torus_res =
      residual_p_evolution(*torus.initial, {snaps[0], snaps[1], snaps[2]}, node_curvatures(*torus.grid)).Linf;
  return {in_range(r1, 3.0, 5.0) && in_range(r2, 3.0, 5.0) && torus_res <= 1e-10,
          fmt("t* = %.2f, L2 residuals %.2e %.2e %.2e", t_star, e16, e32, e64) + fmt(", ratios %.2f %.2f", r1, r2) +
              fmt(", flat torus Linf %.1e", torus_res)};
}

// 5. Decay bounds on the equivariant sphere flow up to t = 5.
Outcome c5() {
  ScenarioConfig cfg = load_config(MCFLAB_CONFIG_DIR "/tsui_wang_s2.ini");
  cfg.t_end = 5.0;
  cfg.bound_tol = 1e-4;
  cfg.inequalities = false;
  const FlowRun r = run(cfg);
  const DecayReport& d = *r.analysis.decay;
  const bool ok = d.applicable && d.pass && r.rec.t_final >= 5.0 - 1e-12 && r.seconds < 30.0;
  return {ok, fmt("worst margins p %.2e, |df|^2 %.2e, |H|^2 %.2e", d.worst.margin_p, d.worst.margin_df2,
                  d.worst.margin_H2) +
                  fmt(", Theta %.2e, %.1f s", d.worst.margin_theta, r.seconds)};
}

// 6. Convergence to a constant map with exponential diameter decay.
Outcome c6(const FlowRun& r) {
  const double diam = r.analysis.series.back().image_diameter;
  const bool converged = r.rec.status == FlowStatus::Converged;
  const bool constant = r.analysis.limit && r.analysis.limit->cls == LimitClass::Constant;
  const double eps0 = r.analysis.constants->eps0;
  const bool slope = r.analysis.diameter.slope <= -0.5 * eps0 + 0.05;
  return {converged && diam < 1e-3 && constant && slope,
          std::string(to_string(r.rec.status)) + fmt(" at t = %.2f, diameter %.2e, log-slope %.3f (need <= %.3f)",
                                                     r.rec.t_final, diam, r.analysis.diameter.slope,
                                                     -0.5 * eps0 + 0.05) +
              ", limit " + (r.analysis.limit ? to_string(r.analysis.limit->cls) : "none")};
}

// Largest |z_grid - z_ode| over records of a full-grid circle flow on [0, t_end].
double full_grid_vs_ode(const std::string& name, double t_end) {
  ScenarioConfig cfg = load_config(std::string(MCFLAB_CONFIG_DIR) + "/" + name + ".ini");
  cfg.grid_mode = "full";
  cfg.grid_n = 4;
  cfg.t_end = t_end;
  cfg.record_every = 10;
  const Setup s = build_setup(cfg);
  const RecordedRun rec = run_flow(s, cfg);
  if (rec.status == FlowStatus::Aborted) return std::numeric_limits<double>::infinity();
  const CircleDriftODE ode = reduce_circle_drift(s.M, s.N);
  double worst = 0.0;
  for (const Snapshot& snap : rec.records) {
    const double z = ode.integrate(cfg.map_z0, snap.t, 1e-3).back().second;
    for (const auto& y : snap.f) worst = std::max(worst, std::abs(y(1) - z));
  }
  return worst;
}

// 7. Circle flows on warped cylinders: drift up a funnel, convergence to the waist.
Outcome c7(const FlowRun& waist) {
  const FlowRun drift = run(load_config(MCFLAB_CONFIG_DIR "/cylinder_drift.ini"));
  const auto& ser = drift.analysis.series;
  bool volume_down = true;
  for (std::size_t k = 1; k < ser.size(); ++k) volume_down = volume_down && ser[k].total_volume < ser[k - 1].total_volume;
  const double z0 = drift.rec.records.front().f[0](1), z5 = drift.rec.records.back().f[0](1);
  const CircleDriftODE ode = reduce_circle_drift(drift.setup.M, drift.setup.N);
  bool rising = true;
  for (const Snapshot& s : drift.rec.records) rising = rising && ode.phi(s.f[0](1)) > 0.0;
  const bool funnel = drift.rec.t_final >= 5.0 - 1e-12 && z5 > z0 && rising && volume_down;

  const double zw = waist.rec.records.back().f[0](1);
  const bool waist_ok = waist.rec.status == FlowStatus::Converged && std::abs(zw) < 1e-4 && waist.analysis.limit &&
                        waist.analysis.limit->cls == LimitClass::Rank1Geodesic;

  const double dd = full_grid_vs_ode("cylinder_drift", 5.0);
  const double dw = full_grid_vs_ode("cylinder_waist", 5.0);
  return {funnel && waist_ok && dd <= 1e-3 && dw <= 1e-3,
          fmt("drift z(0) = %.3f -> z(5) = %.3f; ", z0, z5) + (volume_down ? "volume decreasing" : "volume NOT decreasing") +
              fmt("; waist z = %.1e at t = %.2f, ", zw, waist.rec.t_final) +
              (waist.analysis.limit ? to_string(waist.analysis.limit->cls) : "none") +
              fmt("; full grid n = 4 vs ODE %.1e (drift) %.1e (waist)", dd, dw)};
}

// 8. Barrier containment and m-convexity against brute force.
Outcome c8(const FlowRun& waist) {
  const Analysis& a = waist.analysis;
  const bool contained = a.containment && a.containment->contained && a.certificate && a.certificate->verdict;
  std::mt19937_64 rng(8);
  const Setup& s = waist.setup;
  double worst_gap = 0.0, worst_below = 0.0;
  int points = 0;
  for (int k = 0; k < 20; ++k) {
    Vec z(5);
    z << 2.0 * kPi * k / 20.0, 0.2 + 0.1 * k, 0.3 * k, 0.0, -0.7 + 0.07 * k;
    if (!(s.barrier->phi(z) < s.barrier->c)) continue;
    ++points;
    const CovariantHessian ch = covariant_hessian(*s.barrier, *s.M, *s.N, z);
    const double eig = sum_smallest(hessian_eigenvalues(ch), s.barrier_m);
    const double brute = m_convexity_brute_force(ch, s.barrier_m, 1000, rng, 5000);
    worst_gap = std::max(worst_gap, std::abs(brute - eig));
    worst_below = std::max(worst_below, eig - brute);
  }
  const double margin = a.containment ? a.containment->margins.back().second : -1.0;
  return {contained && points > 0 && worst_gap <= 1e-10 && worst_below <= 1e-10,
          std::string(contained ? "contained" : "NOT contained") + fmt(" (final margin %.3f), certificate worst %.2e",
                                                                       margin, a.certificate->worst_value) +
              fmt("; brute force vs eigenvalues on %.0f points: max gap %.1e", points, worst_gap)};
}

// 9. Volume budget on converging scenarios.
Outcome c9(const std::vector<const FlowRun*>& runs) {
  bool ok = true;
  std::string d;
  for (const FlowRun* r : runs) {
    const BudgetReport& b = *r->analysis.budget;
    ok = ok && b.relative_error <= 0.02;
    d += (d.empty() ? "" : ", ") + r->cfg.name + fmt(" %.1e", b.relative_error);
  }
  return {ok, "relative errors " + d};
}

// 10. Curvature conditions.
Outcome c10() {
  bool ok = true;
  std::ostringstream d;
  const CurvatureReport hs = curvature_conditions_report(hopf_s3(), round_sphere(2));
  ok = ok && hs.condA && hs.condB && hs.condC && std::abs(hs.min_BRic - 3.0) < 1e-10;
  d << "S3/S2 BRic " << hs.min_BRic;
  SamplingParams sp;
  sp.point_count = 100;
  const CurvatureReport pc =
      curvature_conditions_report(product_s1xs2(), WarpedSurface(make_warp("cosh"), -3.0, 3.0).chart(), sp);
  ok = ok && std::abs(pc.min_BRic - 1.0) < 1e-8 && pc.condA;
  d << fmt(", S1xS2/cosh BRic %.10f", pc.min_BRic);
  const CurvatureReport ff = curvature_conditions_report(flat_torus(3), flat_torus(2));
  ok = ok && std::abs(ff.min_BRic) < 1e-12 && std::abs(ff.sup_sigma_N) < 1e-12 && ff.condA && ff.condB && ff.condC;
  d << ", flat/flat equality";
  // S^m into a sphere with sigma_N = 2m - 3 is the borderline of condition A
  for (int m = 2; m <= 5; ++m) {
    const double r_eq = 1.0 / std::sqrt(2.0 * m - 3.0);
    const CurvatureReport eq = curvature_conditions_report(round_sphere(m), round_sphere(2, r_eq));
    const CurvatureReport over = curvature_conditions_report(round_sphere(m), round_sphere(2, 0.99 * r_eq));
    const bool m_ok = std::abs(eq.min_BRic - (2 * m - 3)) < 1e-12 &&
                      eq.min_BRic >= eq.sup_sigma_N - 1e-12 && !over.condA;
    ok = ok && m_ok;
  }
  d << ", (2m-3) sigma_M >= sigma_N borderline for m = 2..5";
  return {ok, d.str()};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s  C%-2d %-34s %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  };

  report(1, "algebraic identities", c1);
  report(2, "Hopf singular values", c2);
  report(3, "mean curvature consistency", c3);
  report(4, "p evolution residual", c4);
  report(5, "decay bounds to t = 5", c5);

  std::optional<FlowRun> sphere, waist, torus, constant;
  auto guarded = [](auto&& make) -> std::optional<FlowRun> {
    try {
      return make();
    } catch (const std::exception& e) {
      std::printf("  run failed: %s\n", e.what());
      return std::nullopt;
    }
  };
  sphere = guarded([] { return run(load_config(MCFLAB_CONFIG_DIR "/tsui_wang_s2.ini")); });
  waist = guarded([] { return run(load_config(MCFLAB_CONFIG_DIR "/cylinder_waist.ini")); });
  torus = guarded([] { return run(load_config(MCFLAB_CONFIG_DIR "/torus_projection.ini")); });
  constant = guarded([] { return run(load_config(MCFLAB_CONFIG_DIR "/constant_map.ini")); });

  auto need = [](const std::optional<FlowRun>& r) {
    if (!r) throw Error("prerequisite run failed");
    return &*r;
  };
  report(6, "convergence to a constant map", [&] { return c6(*need(sphere)); });
  report(7, "circle drift and waist", [&] { return c7(*need(waist)); });
  report(8, "barrier containment, m-convexity", [&] { return c8(*need(waist)); });
  report(9, "volume budget", [&] { return c9({need(sphere), need(waist), need(torus), need(constant)}); });
  report(10, "curvature conditions", c10);

  std::printf("%d of 10 criteria passed\n", 10 - failed);
  return failed == 0 ? 0 : 1;
}
