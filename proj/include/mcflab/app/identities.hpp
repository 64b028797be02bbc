#pragma once

#include "mcflab/barrier.hpp"
#include "mcflab/frames.hpp"
#include "mcflab/immersion.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace mcflab::app {

// Randomized algebraic identities on differentials df: (T_xM, g_M) -> (T_yN, g_N)
// with random metrics and random m in [2, 5]. Every entry is an absolute error
// (or the amount by which an inequality is violated) maximized over samples.
struct IdentityReport {
  int samples = 0;
  std::uint64_t seed = 0;
  int area_decreasing_samples = 0;
  std::vector<std::pair<std::string, double>> errors;
  double max_error = 0.0;
  double tol = 1e-10;
  bool pass = false;
};

namespace detail {

inline Mat random_spd(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Mat B(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) B(i, j) = 0.5 * nd(rng);
  return B * B.transpose() + 0.5 * Mat::Identity(n, n);
}

inline Mat random_symmetric(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Mat B(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) B(i, j) = nd(rng);
  return 0.5 * (B + B.transpose());
}

class ErrorTable {
 public:
  void add(const std::string& name, double err) {
    for (auto& [n, e] : rows_)
      if (n == name) {
        e = std::max(e, std::abs(err));
        return;
      }
    rows_.push_back({name, std::abs(err)});
  }
  const std::vector<std::pair<std::string, double>>& rows() const { return rows_; }

 private:
  std::vector<std::pair<std::string, double>> rows_;
};

}  // namespace detail

inline IdentityReport run_identities(int samples, std::uint64_t seed, double tol = 1e-10) {
  if (samples < 1) throw ConfigurationError("identities need at least one sample");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dim(2, 5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> nd;
  detail::ErrorTable tab;
  IdentityReport rep;
  rep.samples = samples;
  rep.seed = seed;
  rep.tol = tol;

  for (int k = 0; k < samples; ++k) {
    const int m = dim(rng);
    const Mat gM = detail::random_spd(m, rng);
    const Mat gN = detail::random_spd(2, rng);
    Mat J(2, m);
    for (int a = 0; a < 2; ++a)
      for (int i = 0; i < m; ++i) J(a, i) = nd(rng);
    // Every other sample is rescaled into the strictly area decreasing regime.
    if (k % 2 == 0) {
      const auto [l0, u0] = singular_values({J, gM, gN});
      if (l0 * u0 > 0.0) J *= std::sqrt(0.999 * unit(rng) / (l0 * u0));
    }
    const DifferentialSample ds{J, gM, gN};
    const SVDFrame fr = build_svd_frame(ds);
    const double l = fr.lambda, u = fr.mu;
    const double l2 = l * l, u2 = u * u, D = (1.0 + l2) * (1.0 + u2);

    const FrameResidual res = frame_residual(ds, fr);
    tab.add("frame orthonormality", std::max({res.alpha_ortho, res.beta_ortho, res.e_ortho, res.normal_ortho}));
    tab.add("frame normality", res.normality);
    tab.add("singular vectors", res.svd);

    // s = g_M - g_N evaluated on the graph frame, compared with the closed forms.
    Mat Sform = product_metric(gM, gN);
    Sform.bottomRightCorner(2, 2) *= -1.0;
    Mat dFe(m + 2, m);
    for (int i = 0; i < m; ++i) dFe.col(i) = graph_push(J, fr.e.col(i));
    Mat nu(m + 2, 2);
    nu.col(0) = fr.xi;
    nu.col(1) = fr.eta;
    const Mat S = dFe.transpose() * Sform * dFe;
    const Mat Sp = nu.transpose() * Sform * nu;
    const Mat T = dFe.transpose() * Sform * nu;

    Mat S_closed = Mat::Identity(m, m);
    S_closed(0, 0) = (1.0 - l2) / (1.0 + l2);
    S_closed(1, 1) = (1.0 - u2) / (1.0 + u2);
    tab.add("S(e_i, e_j) diagonal form", (S - S_closed).cwiseAbs().maxCoeff());
    Mat Sp_closed = Mat::Zero(2, 2);
    Sp_closed(0, 0) = -(1.0 - l2) / (1.0 + l2);
    Sp_closed(1, 1) = -(1.0 - u2) / (1.0 + u2);
    tab.add("S(xi, eta) normal form", (Sp - Sp_closed).cwiseAbs().maxCoeff());
    Mat T_closed = Mat::Zero(m, 2);
    T_closed(0, 0) = -2.0 * l / (1.0 + l2);
    T_closed(1, 1) = -2.0 * u / (1.0 + u2);
    tab.add("S(e_i, normal) mixed form", (T - T_closed).cwiseAbs().maxCoeff());
    tab.add("S_11^2 + T_11^2 = 1", S(0, 0) * S(0, 0) + T(0, 0) * T(0, 0) - 1.0);
    tab.add("S_22^2 + T_22^2 = 1", S(1, 1) * S(1, 1) + T(1, 1) * T(1, 1) - 1.0);
    tab.add("p = S_11 + S_22", S(0, 0) + S(1, 1) - 2.0 * (1.0 - l2 * u2) / D);
    tab.add("stored frame scalars", std::max({std::abs(fr.S_diag(0) - S(0, 0)), std::abs(fr.S_diag(1) - S(1, 1)),
                                             std::abs(fr.T11 - T(0, 0)), std::abs(fr.T22 - T(1, 1)),
                                             std::abs(fr.p - (S(0, 0) + S(1, 1)))}));

    if (l * u < 1.0) {
      ++rep.area_decreasing_samples;
      const double p = fr.p;
      const double mid = 2.0 * (l2 + u2) / D;
      const double lo = 1.0 - 0.25 * p * p, hi = 2.0 * (1.0 - 0.25 * p * p);
      tab.add("1 - p^2/4 <= 2(l^2+u^2)/D <= 2(1 - p^2/4)", std::max({0.0, lo - mid, mid - hi}));
    }

    // v, w built from random mean curvature components and a random Ricci form.
    const double Hx = nd(rng), He = nd(rng);
    const double H2 = Hx * Hx + He * He;
    CurvatureInputs ci;
    ci.ricM = detail::random_symmetric(m, rng);
    ci.sigmaM_12 = nd(rng);
    ci.sigmaN = nd(rng);
    const RVW rvw = quantity_R_vw(fr, Hx, He, ci);
    const double w2 = rvw.w.dot(gM * rvw.w);
    const double w2_closed = l2 / (1.0 + l2) * H2 + (u2 - l2) / D * Hx * Hx;
    tab.add("|w|^2 closed form", w2 - w2_closed);
    tab.add("|w|^2 component form", w2 - w_norm2_closed(l, u, Hx, He));
    tab.add("|w|^2 <= |H|^2", std::max(0.0, w2 - H2));
    const Vec a1 = fr.alpha.col(0), a2 = fr.alpha.col(1);
    const double ric_sum = ci.ric(rvw.v, rvw.v) + ci.ric(rvw.w, rvw.w);
    const double ric_closed = (l2 / (1.0 + l2) * ci.ric(a1, a1) + u2 / (1.0 + u2) * ci.ric(a2, a2)) * H2;
    tab.add("Ric(v,v) + Ric(w,w) identity", ric_sum - ric_closed);

    // m-convexity: eigenvalue sum equals the trace on the eigenvector frame
    // and bounds the trace on any orthonormal frame from below.
    const int n = m + 2;
    CovariantHessian ch{detail::random_symmetric(n, rng), product_metric(gM, gN)};
    const int mm = std::uniform_int_distribution<int>(1, n)(rng);
    const double oracle = sum_smallest(hessian_eigenvalues(ch), mm);
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(ch.hess, ch.metric);
    const Mat Q = es.eigenvectors().leftCols(mm);
    tab.add("m-convexity eigenvector frame", (Q.transpose() * ch.hess * Q).trace() - oracle);
    tab.add("m-convexity eigenvector orthonormality",
            (Q.transpose() * ch.metric * Q - Mat::Identity(mm, mm)).cwiseAbs().maxCoeff());
    Mat R(n, mm);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < mm; ++j) R(i, j) = nd(rng);
    const Mat L = Eigen::LLT<Mat>(ch.metric).matrixL();
    const Mat Qr = L.transpose().triangularView<Eigen::Upper>().solve(
        Mat(Eigen::HouseholderQR<Mat>(R).householderQ() * Mat::Identity(n, mm)));
    tab.add("m-convexity lower bound", std::max(0.0, oracle - (Qr.transpose() * ch.hess * Qr).trace()));
  }
  rep.errors = tab.rows();
  for (const auto& [name, e] : rep.errors) rep.max_error = std::max(rep.max_error, e);
  rep.pass = rep.max_error <= tol;
  return rep;
}

}  // namespace mcflab::app
