#pragma once

#include "mcflab/core.hpp"

#include <cmath>
#include <utility>

namespace mcflab {

// df at a point in chart bases. J(a, i) = d_i f^a, so J is 2 x m.
struct DifferentialSample {
  Mat J;
  Mat gM;
  Mat gN;

  int m() const { return static_cast<int>(gM.rows()); }
};

// Singular value decomposition of df with the adapted frames.
// Tangent vectors of M are columns with m chart components; normal vectors
// of the graph live in T(M x N) and carry m + 2 components (M part first).
struct SVDFrame {
  double lambda = 0.0;
  double mu = 0.0;
  Mat alpha;  // m x m, orthonormal w.r.t. g_M
  Mat beta;   // 2 x 2, orthonormal w.r.t. g_N
  Mat e;      // m x m, orthonormal w.r.t. g = g_M + f*g_N
  Vec xi;
  Vec eta;
  Vec S_diag;      // m
  Vec Sperp_diag;  // 2
  double T11 = 0.0;
  double T22 = 0.0;
  double p = 2.0;
};

struct AreaStatus {
  double p = 2.0;
  bool strictly_decreasing = true;
  double dil2 = 0.0;
};

inline double p_value(double lambda, double mu) {
  return 2.0 * (1.0 - lambda * lambda * mu * mu) / ((1.0 + lambda * lambda) * (1.0 + mu * mu));
}

inline AreaStatus area_decreasing_status(double lambda, double mu) {
  return {p_value(lambda, mu), lambda * mu < 1.0, lambda * mu};
}

namespace detail {

inline Mat lower_cholesky(const Mat& g, const char* what) {
  Eigen::LLT<Mat> llt(g);
  if (llt.info() != Eigen::Success) throw DegenerateMetricError(std::string(what) + " is not positive definite");
  return llt.matrixL();
}

// Flips v so that its first component with magnitude above tol is positive.
inline void fix_sign(Eigen::Ref<Vec> v, double tol = 1e-12) {
  for (int i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > tol) {
      if (v(i) < 0) v = -v;
      return;
    }
  }
}

// Orthonormal basis of span(P) (columns orthonormal, Euclidean) chosen
// deterministically: the first vector maximizes the lexicographically first
// coordinate that does not vanish on the span.
inline Mat lexicographic_basis(const Mat& P) {
  const int n = static_cast<int>(P.rows());
  Mat out = P;
  for (int k = 0; k < n; ++k) {
    Vec proj = P * P.row(k).transpose();
    if (proj.norm() > 1e-8) {
      out.col(0) = proj.normalized();
      break;
    }
  }
  // complement inside the span
  Vec c = P.col(0) - out.col(0) * out.col(0).dot(P.col(0));
  if (c.norm() < 1e-8) c = P.col(1) - out.col(0) * out.col(0).dot(P.col(1));
  out.col(1) = c.normalized();
  fix_sign(out.col(1));
  return out;
}

}  // namespace detail

// Whitened 2 x m matrix C = K^T J L^{-T} with g_M = L L^T, g_N = K K^T.
struct WhitenedDifferential {
  Mat L;
  Mat K;
  Mat C;
};

inline WhitenedDifferential whiten(const DifferentialSample& s) {
  const int m = s.m();
  if (s.J.rows() != 2 || s.J.cols() != m || s.gN.rows() != 2)
    throw ConfigurationError("differential sample has inconsistent dimensions");
  WhitenedDifferential w;
  w.L = detail::lower_cholesky(s.gM, "g_M");
  w.K = detail::lower_cholesky(s.gN, "g_N");
  const Mat Linv_T = w.L.transpose().triangularView<Eigen::Upper>().solve(Mat::Identity(m, m));
  w.C = w.K.transpose() * s.J * Linv_T;
  return w;
}

inline std::pair<double, double> singular_values(const DifferentialSample& s) {
  const WhitenedDifferential w = whiten(s);
  Eigen::JacobiSVD<Mat> svd(w.C.transpose());
  const Vec sv = svd.singularValues();
  return {sv(0), sv.size() > 1 ? sv(1) : 0.0};
}

inline SVDFrame build_svd_frame(const DifferentialSample& s) {
  const int m = s.m();
  if (m < 2) throw ConfigurationError("domain dimension must be at least 2");
  const WhitenedDifferential wd = whiten(s);
  const Mat Linv_T = wd.L.transpose().triangularView<Eigen::Upper>().solve(Mat::Identity(m, m));
  const Mat Kinv_T = wd.K.transpose().triangularView<Eigen::Upper>().solve(Mat::Identity(2, 2));

  Eigen::JacobiSVD<Mat> svd(wd.C.transpose(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec sv = svd.singularValues();
  SVDFrame fr;
  fr.lambda = sv(0);
  fr.mu = sv(1);
  const double zero_tol = 1e-13 * std::max(1.0, fr.lambda);

  Mat V = svd.matrixU();  // m x m right singular vectors of C
  Mat U(2, 2);
  if (fr.lambda <= zero_tol) {
    V = Mat::Identity(m, m);
    U = Mat::Identity(2, 2);
  } else {
    if (std::abs(fr.lambda - fr.mu) <= 1e-12 * std::max(1.0, fr.lambda)) {
      const Mat P = V.leftCols(2);
      V.leftCols(2) = detail::lexicographic_basis(P);
    }
    for (int i = 0; i < m; ++i) detail::fix_sign(V.col(i));
    U.col(0) = wd.C * V.col(0) / fr.lambda;
    if (fr.mu > zero_tol) {
      U.col(1) = wd.C * V.col(1) / fr.mu;
    } else {
      U.col(1) = Eigen::Vector2d(-U(1, 0), U(0, 0));
      detail::fix_sign(U.col(1));
    }
  }

  fr.alpha = Linv_T * V;
  fr.beta = Kinv_T * U;

  const double a = std::sqrt(1.0 + fr.lambda * fr.lambda);
  const double b = std::sqrt(1.0 + fr.mu * fr.mu);
  fr.e = fr.alpha;
  fr.e.col(0) /= a;
  fr.e.col(1) /= b;
  fr.xi = Vec::Zero(m + 2);
  fr.xi.head(m) = -fr.lambda * fr.alpha.col(0) / a;
  fr.xi.tail(2) = fr.beta.col(0) / a;
  fr.eta = Vec::Zero(m + 2);
  fr.eta.head(m) = -fr.mu * fr.alpha.col(1) / b;
  fr.eta.tail(2) = fr.beta.col(1) / b;

  const double l2 = fr.lambda * fr.lambda;
  const double u2 = fr.mu * fr.mu;
  fr.S_diag = Vec::Ones(m);
  fr.S_diag(0) = (1.0 - l2) / (1.0 + l2);
  fr.S_diag(1) = (1.0 - u2) / (1.0 + u2);
  fr.Sperp_diag = Vec(2);
  fr.Sperp_diag << -fr.S_diag(0), -fr.S_diag(1);
  fr.T11 = -2.0 * fr.lambda / (1.0 + l2);
  fr.T22 = -2.0 * fr.mu / (1.0 + u2);
  fr.p = p_value(fr.lambda, fr.mu);
  return fr;
}

// Block metric of M x N at (x, f(x)).
inline Mat product_metric(const Mat& gM, const Mat& gN) {
  const int m = static_cast<int>(gM.rows());
  Mat G = Mat::Zero(m + 2, m + 2);
  G.topLeftCorner(m, m) = gM;
  G.bottomRightCorner(2, 2) = gN;
  return G;
}

// dF(v) = v (+) df(v) for a chart vector v of M.
inline Vec graph_push(const Mat& J, const Vec& v) {
  Vec out(v.size() + 2);
  out.head(v.size()) = v;
  out.tail(2) = J * v;
  return out;
}

// Largest violation of the frame identities, measured by direct inner products.
struct FrameResidual {
  double svd = 0.0;           // df(alpha_i) against lambda_i beta_i
  double alpha_ortho = 0.0;   // alpha^T g_M alpha - I
  double beta_ortho = 0.0;    // beta^T g_N beta - I
  double e_ortho = 0.0;       // e^T g e - I
  double normal_ortho = 0.0;  // {xi, eta} orthonormal in g_{MxN}
  double normality = 0.0;     // <dF(e_i), xi>, <dF(e_i), eta>
  double S = 0.0;             // s(dF e_i, dF e_j) against S_diag
  double Sperp = 0.0;
  double T = 0.0;

  double max() const {
    return std::max({svd, alpha_ortho, beta_ortho, e_ortho, normal_ortho, normality, S, Sperp, T});
  }
};

inline FrameResidual frame_residual(const DifferentialSample& s, const SVDFrame& fr) {
  const int m = s.m();
  FrameResidual r;
  for (int i = 0; i < m; ++i) {
    Vec target = Vec::Zero(2);
    if (i == 0) target = fr.lambda * fr.beta.col(0);
    if (i == 1) target = fr.mu * fr.beta.col(1);
    r.svd = std::max(r.svd, (s.J * fr.alpha.col(i) - target).cwiseAbs().maxCoeff());
  }
  r.alpha_ortho = (fr.alpha.transpose() * s.gM * fr.alpha - Mat::Identity(m, m)).cwiseAbs().maxCoeff();
  r.beta_ortho = (fr.beta.transpose() * s.gN * fr.beta - Mat::Identity(2, 2)).cwiseAbs().maxCoeff();
  const Mat g = s.gM + s.J.transpose() * s.gN * s.J;
  r.e_ortho = (fr.e.transpose() * g * fr.e - Mat::Identity(m, m)).cwiseAbs().maxCoeff();
  const Mat G = product_metric(s.gM, s.gN);
  Mat nu(m + 2, 2);
  nu.col(0) = fr.xi;
  nu.col(1) = fr.eta;
  r.normal_ortho = (nu.transpose() * G * nu - Mat::Identity(2, 2)).cwiseAbs().maxCoeff();
  // s_{MxN} = g_M - g_N
  Mat Sform = G;
  Sform.bottomRightCorner(2, 2) *= -1.0;
  Mat dFe(m + 2, m);
  for (int i = 0; i < m; ++i) dFe.col(i) = graph_push(s.J, fr.e.col(i));
  r.normality = (nu.transpose() * G * dFe).cwiseAbs().maxCoeff();
  r.S = (dFe.transpose() * Sform * dFe - Mat(fr.S_diag.asDiagonal())).cwiseAbs().maxCoeff();
  r.Sperp = (nu.transpose() * Sform * nu - Mat(fr.Sperp_diag.asDiagonal())).cwiseAbs().maxCoeff();
  r.T = std::max(std::abs(dFe.col(0).dot(Sform * fr.xi) - fr.T11), std::abs(dFe.col(1).dot(Sform * fr.eta) - fr.T22));
  return r;
}

}  // namespace mcflab
