#pragma once

#include "mcflab/core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace mcflab {

// Curvature sign convention used throughout the library:
//
//   R(a,b,c,d) = < R(d_a, d_b) d_c, d_d >,   R(X,Y) = [nabla_X, nabla_Y] - nabla_[X,Y]
//   sigma(v ^ w) = R(v,w,w,v) / (|v|^2 |w|^2 - <v,w>^2)
//
// so the unit round sphere has sigma = +1 and Ric(Y,Y) = sum_k sigma(e_k ^ Y).

struct ChartAxis {
  double lo = 0.0;
  double hi = 1.0;
  bool periodic = false;

  double period() const { return hi - lo; }
};

// Metric components and coordinate derivatives at one chart point.
struct MetricJet {
  int order = 0;
  Mat g;
  std::vector<Mat> dg;   // dg[k](i,j)      = d_k g_ij
  std::vector<Mat> ddg;  // ddg[k*m+l](i,j) = d_k d_l g_ij
};

// Christoffel symbols of the second kind, Gamma^k_ij, stored densely.
class Christoffel {
 public:
  Christoffel() = default;
  explicit Christoffel(int dim) : m_(dim), data_(static_cast<std::size_t>(dim * dim * dim), 0.0) {}

  int dim() const { return m_; }
  double operator()(int k, int i, int j) const { return data_[idx(k, i, j)]; }
  double& operator()(int k, int i, int j) { return data_[idx(k, i, j)]; }

  // Gamma^k_ij u^i w^j
  Vec contract(const Vec& u, const Vec& w) const {
    Vec out = Vec::Zero(m_);
    for (int k = 0; k < m_; ++k) {
      double s = 0.0;
      for (int i = 0; i < m_; ++i)
        for (int j = 0; j < m_; ++j) s += data_[idx(k, i, j)] * u(i) * w(j);
      out(k) = s;
    }
    return out;
  }

 private:
  std::size_t idx(int k, int i, int j) const { return static_cast<std::size_t>((k * m_ + i) * m_ + j); }
  int m_ = 0;
  std::vector<double> data_;
};

// Fully covariant Riemann tensor in the convention documented above.
class RiemannTensor {
 public:
  RiemannTensor() = default;
  explicit RiemannTensor(int dim) : m_(dim), data_(static_cast<std::size_t>(dim * dim * dim * dim), 0.0) {}

  int dim() const { return m_; }
  double operator()(int a, int b, int c, int d) const { return data_[idx(a, b, c, d)]; }
  double& operator()(int a, int b, int c, int d) { return data_[idx(a, b, c, d)]; }

  // R(u, v, w, z) for chart vectors.
  double eval(const Vec& u, const Vec& v, const Vec& w, const Vec& z) const {
    double s = 0.0;
    for (int a = 0; a < m_; ++a) {
      if (u(a) == 0.0) continue;
      for (int b = 0; b < m_; ++b) {
        if (v(b) == 0.0) continue;
        for (int c = 0; c < m_; ++c) {
          if (w(c) == 0.0) continue;
          for (int d = 0; d < m_; ++d) s += u(a) * v(b) * w(c) * z(d) * data_[idx(a, b, c, d)];
        }
      }
    }
    return s;
  }

 private:
  std::size_t idx(int a, int b, int c, int d) const {
    return static_cast<std::size_t>(((a * m_ + b) * m_ + c) * m_ + d);
  }
  int m_ = 0;
  std::vector<double> data_;
};

struct CurvatureTensors {
  Mat g;
  Mat g_inv;
  Christoffel gamma;
  RiemannTensor riemann;
  Mat ricci;
  double scalar = 0.0;
};

// Closed-form curvature facts a manifold may declare. They make the
// curvature-condition report exact instead of sampled.
struct CurvatureHints {
  std::optional<double> constant_sectional;
  std::function<double(const Vec&)> gauss_curvature;  // dim 2 only
};

class ChartManifold {
 public:
  using MetricFn = std::function<Mat(const Vec&)>;
  using JetFn = std::function<MetricJet(const Vec&, int)>;
  using DistanceFn = std::function<double(const Vec&, const Vec&)>;
  using ReflectFn = std::function<Vec(const Vec&)>;

  ChartManifold(std::string name, std::vector<ChartAxis> axes, MetricFn metric, JetFn analytic_jet = {},
                int stencil_order = 4)
      : name_(std::move(name)),
        axes_(std::move(axes)),
        metric_(std::move(metric)),
        jet_(std::move(analytic_jet)),
        stencil_order_(stencil_order) {
    if (axes_.empty()) throw ConfigurationError("manifold '" + name_ + "' has no axes");
    if (stencil_order_ != 2 && stencil_order_ != 4)
      throw ConfigurationError("derivative stencil order must be 2 or 4");
  }

  const std::string& name() const { return name_; }
  int dim() const { return static_cast<int>(axes_.size()); }
  const std::vector<ChartAxis>& axes() const { return axes_; }
  bool has_analytic_jet() const { return static_cast<bool>(jet_); }
  int stencil_order() const { return stencil_order_; }

  CurvatureHints hints;
  DistanceFn distance;  // closed-form geodesic distance, if known
  ReflectFn pole_reflect;  // re-expresses a point near a chart pole in the mirrored chart
  std::optional<int> translation_axis;  // periodic axis the metric does not depend on

  // Periodic wrap; throws DomainError outside a non-periodic range.
  Vec wrap(const Vec& x) const {
    check_dim(x);
    Vec y = x;
    for (int i = 0; i < dim(); ++i) {
      const auto& ax = axes_[static_cast<std::size_t>(i)];
      if (ax.periodic) {
        y(i) = wrap_periodic(x(i), ax.lo, ax.period());
      } else if (x(i) < ax.lo || x(i) > ax.hi) {
        throw DomainError("coordinate " + std::to_string(i) + " = " + std::to_string(x(i)) +
                          " outside chart range of '" + name_ + "'");
      }
    }
    return y;
  }

  Mat metric_at(const Vec& x) const {
    check_dim(x);
    return metric_(x);
  }

  // Metric jet of the requested order (0, 1 or 2); analytic when available.
  MetricJet jet(const Vec& x, int order) const {
    check_dim(x);
    if (jet_) return jet_(x, order);
    return finite_difference_jet(x, order);
  }

 private:
  void check_dim(const Vec& x) const {
    if (x.size() != dim())
      throw DomainError("point of dimension " + std::to_string(x.size()) + " passed to " +
                        std::to_string(dim()) + "-dimensional manifold '" + name_ + "'");
  }

  MetricJet finite_difference_jet(const Vec& x, int order) const {
    const int m = dim();
    MetricJet jet;
    jet.order = order;
    jet.g = metric_(x);
    if (order < 1) return jet;
    const double h = stencil_order_ == 4 ? 2e-3 : 1e-4;
    auto at = [&](int k, double sk, int l = -1, double sl = 0.0) {
      Vec y = x;
      y(k) += sk;
      if (l >= 0) y(l) += sl;
      return metric_(y);
    };
    jet.dg.assign(static_cast<std::size_t>(m), Mat::Zero(m, m));
    for (int k = 0; k < m; ++k) {
      if (stencil_order_ == 4)
        jet.dg[static_cast<std::size_t>(k)] =
            (-at(k, 2 * h) + 8.0 * at(k, h) - 8.0 * at(k, -h) + at(k, -2 * h)) / (12.0 * h);
      else
        jet.dg[static_cast<std::size_t>(k)] = (at(k, h) - at(k, -h)) / (2.0 * h);
    }
    if (order < 2) return jet;
    jet.ddg.assign(static_cast<std::size_t>(m * m), Mat::Zero(m, m));
    const double h2 = stencil_order_ == 4 ? 4e-3 : 1e-3;
    for (int k = 0; k < m; ++k) {
      for (int l = k; l < m; ++l) {
        Mat d;
        if (k == l) {
          if (stencil_order_ == 4)
            d = (-at(k, 2 * h2) + 16.0 * at(k, h2) - 30.0 * jet.g + 16.0 * at(k, -h2) - at(k, -2 * h2)) /
                (12.0 * h2 * h2);
          else
            d = (at(k, h2) - 2.0 * jet.g + at(k, -h2)) / (h2 * h2);
        } else if (stencil_order_ == 4) {
          static constexpr double w[4] = {1.0, -8.0, 8.0, -1.0};
          static constexpr double s[4] = {-2.0, -1.0, 1.0, 2.0};
          d = Mat::Zero(m, m);
          for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) d += w[a] * w[b] * at(k, s[a] * h2, l, s[b] * h2);
          d /= (144.0 * h2 * h2);
        } else {
          d = (at(k, h2, l, h2) - at(k, h2, l, -h2) - at(k, -h2, l, h2) + at(k, -h2, l, -h2)) / (4.0 * h2 * h2);
        }
        jet.ddg[static_cast<std::size_t>(k * m + l)] = d;
        jet.ddg[static_cast<std::size_t>(l * m + k)] = d;
      }
    }
    return jet;
  }

  std::string name_;
  std::vector<ChartAxis> axes_;
  MetricFn metric_;
  JetFn jet_;
  int stencil_order_;
};

// ---------------------------------------------------------------------------
// Tensor calculus from a metric jet.

inline Mat checked_inverse(const Mat& g) {
  if (g.isDiagonal(0.0)) {
    // exact reciprocal; polar charts approach their axis with tiny but valid entries
    const Vec d = g.diagonal();
    if (!(d.array() > 0.0).all() || !d.cwiseInverse().allFinite())
      throw DegenerateMetricError("metric is not positive definite");
    return Mat(d.cwiseInverse().asDiagonal());
  }
  Eigen::LLT<Mat> llt(g);
  if (llt.info() != Eigen::Success || !g.allFinite())
    throw DegenerateMetricError("metric is not positive definite");
  const double scale = g.diagonal().cwiseAbs().maxCoeff();
  const Vec d = llt.matrixLLT().diagonal();
  if (d.minCoeff() * d.minCoeff() < 1e-14 * scale)
    throw DegenerateMetricError("metric is numerically degenerate");
  return llt.solve(Mat::Identity(g.rows(), g.cols()));
}

inline Christoffel christoffel_from_jet(const MetricJet& jet, const Mat& g_inv) {
  const int m = static_cast<int>(jet.g.rows());
  Christoffel gamma(m);
  if (jet.order < 1) return gamma;
  // first kind: Gamma_lij = 1/2 (d_i g_lj + d_j g_li - d_l g_ij)
  std::vector<double> first(static_cast<std::size_t>(m * m * m));
  for (int l = 0; l < m; ++l)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        first[static_cast<std::size_t>((l * m + i) * m + j)] =
            0.5 * (jet.dg[static_cast<std::size_t>(i)](l, j) + jet.dg[static_cast<std::size_t>(j)](l, i) -
                   jet.dg[static_cast<std::size_t>(l)](i, j));
  for (int k = 0; k < m; ++k)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        double s = 0.0;
        for (int l = 0; l < m; ++l) s += g_inv(k, l) * first[static_cast<std::size_t>((l * m + i) * m + j)];
        gamma(k, i, j) = s;
      }
  return gamma;
}

inline Christoffel christoffel_at(const ChartManifold& manifold, const Vec& x) {
  const MetricJet jet = manifold.jet(x, 1);
  return christoffel_from_jet(jet, checked_inverse(jet.g));
}

// Gamma, Riemann, Ricci and scalar curvature at x.
inline CurvatureTensors curvature_package(const ChartManifold& manifold, const Vec& x) {
  const Vec y = manifold.wrap(x);
  const int m = manifold.dim();
  const MetricJet jet = manifold.jet(y, 2);
  CurvatureTensors out;
  out.g = jet.g;
  out.g_inv = checked_inverse(jet.g);
  out.gamma = christoffel_from_jet(jet, out.g_inv);

  // Rlow[r][s][u][v] = 1/2 (d_s d_u g_rv + d_r d_v g_su - d_s d_v g_ru - d_r d_u g_sv)
  //                   + g_ze (Gamma^z_su Gamma^e_rv - Gamma^z_sv Gamma^e_ru)
  // and R(a,b,c,d) = Rlow[d][c][a][b].
  auto dd = [&](int k, int l, int i, int j) { return jet.ddg[static_cast<std::size_t>(k * m + l)](i, j); };
  std::vector<double> lowered(static_cast<std::size_t>(m * m));
  auto gamma_lowered = [&](int s, int u, int r, int v) {
    double acc = 0.0;
    for (int z = 0; z < m; ++z) {
      double gz = 0.0;
      for (int e = 0; e < m; ++e) gz += jet.g(z, e) * out.gamma(e, r, v);
      acc += out.gamma(z, s, u) * gz;
    }
    return acc;
  };
  out.riemann = RiemannTensor(m);
  for (int r = 0; r < m; ++r)
    for (int s = 0; s < m; ++s)
      for (int u = 0; u < m; ++u)
        for (int v = 0; v < m; ++v) {
          const double second = 0.5 * (dd(s, u, r, v) + dd(r, v, s, u) - dd(s, v, r, u) - dd(r, u, s, v));
          const double quad = gamma_lowered(s, u, r, v) - gamma_lowered(s, v, r, u);
          out.riemann(u, v, s, r) = second + quad;
        }

  out.ricci = Mat::Zero(m, m);
  for (int b = 0; b < m; ++b)
    for (int c = 0; c < m; ++c) {
      double s = 0.0;
      for (int a = 0; a < m; ++a)
        for (int d = 0; d < m; ++d) s += out.g_inv(a, d) * out.riemann(a, b, c, d);
      out.ricci(b, c) = s;
    }
  out.scalar = (out.g_inv.cwiseProduct(out.ricci)).sum();
  return out;
}

inline double sectional(const CurvatureTensors& curv, const Vec& v, const Vec& w) {
  const double vv = v.dot(curv.g * v);
  const double ww = w.dot(curv.g * w);
  const double vw = v.dot(curv.g * w);
  const double area2 = vv * ww - vw * vw;
  if (!(area2 > 1e-24 * std::max(vv * ww, std::numeric_limits<double>::min())))
    throw DegeneratePlaneError("vectors span a degenerate plane");
  return curv.riemann.eval(v, w, w, v) / area2;
}

inline double sectional(const ChartManifold& manifold, const Vec& x, const Vec& v, const Vec& w) {
  return sectional(curvature_package(manifold, x), v, w);
}

inline double bi_ricci(const CurvatureTensors& curv, const Vec& v, const Vec& w, double tol = 1e-8) {
  const double vv = v.dot(curv.g * v);
  const double ww = w.dot(curv.g * w);
  const double vw = v.dot(curv.g * w);
  if (std::abs(vv - 1.0) > tol || std::abs(ww - 1.0) > tol || std::abs(vw) > tol)
    throw FrameError("bi-Ricci curvature requires an orthonormal pair");
  return v.dot(curv.ricci * v) + w.dot(curv.ricci * w) - curv.riemann.eval(v, w, w, v);
}

inline double bi_ricci(const ChartManifold& manifold, const Vec& x, const Vec& v, const Vec& w) {
  return bi_ricci(curvature_package(manifold, x), v, w);
}

// Smallest eigenvalue of Ric with respect to g, i.e. min Ric(u,u) over unit u.
inline Eigen::VectorXd ricci_eigenvalues(const CurvatureTensors& curv) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(curv.ricci, curv.g, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

// ---------------------------------------------------------------------------
// Diagonal metrics with closed-form derivatives.

// Component i of a diagonal metric as a product of per-axis factors
// g_ii(x) = c_i * prod_k phi_ik(x_k); each factor supplies value, first and
// second derivative.
struct AxisFactor {
  std::function<double(double)> f;
  std::function<double(double)> df;
  std::function<double(double)> ddf;
};

struct DiagonalMetricSpec {
  std::vector<double> constant;                     // c_i
  std::vector<std::vector<std::pair<int, AxisFactor>>> factors;  // per component: (axis, factor)
};

inline Mat diagonal_metric(const DiagonalMetricSpec& spec, const Vec& x) {
  const int m = static_cast<int>(spec.constant.size());
  Mat g = Mat::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    double v = spec.constant[static_cast<std::size_t>(i)];
    for (const auto& [axis, fac] : spec.factors[static_cast<std::size_t>(i)]) v *= fac.f(x(axis));
    g(i, i) = v;
  }
  return g;
}

inline MetricJet diagonal_jet(const DiagonalMetricSpec& spec, const Vec& x, int order) {
  const int m = static_cast<int>(spec.constant.size());
  MetricJet jet;
  jet.order = order;
  jet.g = diagonal_metric(spec, x);
  if (order >= 1) jet.dg.assign(static_cast<std::size_t>(m), Mat::Zero(m, m));
  if (order >= 2) jet.ddg.assign(static_cast<std::size_t>(m * m), Mat::Zero(m, m));
  if (order < 1) return jet;
  for (int i = 0; i < m; ++i) {
    const auto& facs = spec.factors[static_cast<std::size_t>(i)];
    const int nf = static_cast<int>(facs.size());
    std::vector<double> val(static_cast<std::size_t>(nf)), d1(static_cast<std::size_t>(nf)),
        d2(static_cast<std::size_t>(nf));
    for (int a = 0; a < nf; ++a) {
      const double t = x(facs[static_cast<std::size_t>(a)].first);
      val[static_cast<std::size_t>(a)] = facs[static_cast<std::size_t>(a)].second.f(t);
      d1[static_cast<std::size_t>(a)] = facs[static_cast<std::size_t>(a)].second.df(t);
      d2[static_cast<std::size_t>(a)] = facs[static_cast<std::size_t>(a)].second.ddf(t);
    }
    const double c = spec.constant[static_cast<std::size_t>(i)];
    // product of all factor values except the listed ones
    auto prod_except = [&](int skip1, int skip2) {
      double p = c;
      for (int a = 0; a < nf; ++a)
        if (a != skip1 && a != skip2) p *= val[static_cast<std::size_t>(a)];
      return p;
    };
    for (int a = 0; a < nf; ++a) {
      const int ka = facs[static_cast<std::size_t>(a)].first;
      jet.dg[static_cast<std::size_t>(ka)](i, i) += prod_except(a, -1) * d1[static_cast<std::size_t>(a)];
      if (order < 2) continue;
      jet.ddg[static_cast<std::size_t>(ka * m + ka)](i, i) += prod_except(a, -1) * d2[static_cast<std::size_t>(a)];
      for (int b = 0; b < nf; ++b) {
        if (b == a) continue;
        const int kb = facs[static_cast<std::size_t>(b)].first;
        jet.ddg[static_cast<std::size_t>(ka * m + kb)](i, i) +=
            prod_except(a, b) * d1[static_cast<std::size_t>(a)] * d1[static_cast<std::size_t>(b)];
      }
    }
  }
  return jet;
}

inline ChartManifold make_diagonal_manifold(std::string name, std::vector<ChartAxis> axes, DiagonalMetricSpec spec) {
  auto shared = std::make_shared<const DiagonalMetricSpec>(std::move(spec));
  return ChartManifold(
      std::move(name), std::move(axes), [shared](const Vec& x) { return diagonal_metric(*shared, x); },
      [shared](const Vec& x, int order) { return diagonal_jet(*shared, x, order); });
}

inline AxisFactor sin_squared_factor() {
  return {[](double t) { return std::sin(t) * std::sin(t); }, [](double t) { return std::sin(2.0 * t); },
          [](double t) { return 2.0 * std::cos(2.0 * t); }};
}

inline AxisFactor cos_squared_factor() {
  return {[](double t) { return std::cos(t) * std::cos(t); }, [](double t) { return -std::sin(2.0 * t); },
          [](double t) { return -2.0 * std::cos(2.0 * t); }};
}

// ---------------------------------------------------------------------------
// Builtin manifolds.

// Angle between unit vectors, accurate for nearby and antipodal pairs.
inline double great_circle(const Vec& a, const Vec& b) {
  return 2.0 * std::atan2((a - b).norm(), (a + b).norm());
}

// Unit-sphere embedding of hyperspherical coordinates (x_0..x_{m-2} polar, x_{m-1} azimuth).
inline Vec hyperspherical_embedding(const Vec& x) {
  const int m = static_cast<int>(x.size());
  Vec p(m + 1);
  double s = 1.0;
  for (int i = 0; i < m - 1; ++i) {
    p(i) = s * std::cos(x(i));
    s *= std::sin(x(i));
  }
  p(m - 1) = s * std::cos(x(m - 1));
  p(m) = s * std::sin(x(m - 1));
  return p;
}

// T^m = R^m / (2 pi Z)^m with metric scale^2 * delta.
inline ChartManifold flat_torus(int m, double scale = 1.0) {
  if (m < 1) throw ConfigurationError("flat torus dimension must be positive");
  std::vector<ChartAxis> axes(static_cast<std::size_t>(m), ChartAxis{0.0, 2.0 * kPi, true});
  DiagonalMetricSpec spec;
  spec.constant.assign(static_cast<std::size_t>(m), scale * scale);
  spec.factors.resize(static_cast<std::size_t>(m));
  ChartManifold M = make_diagonal_manifold("flat_torus", std::move(axes), std::move(spec));
  M.hints.constant_sectional = 0.0;
  M.hints.gauss_curvature = [](const Vec&) { return 0.0; };
  M.distance = [scale](const Vec& a, const Vec& b) {
    double s = 0.0;
    for (int i = 0; i < a.size(); ++i) {
      const double d = wrap_difference(a(i) - b(i), 2.0 * kPi);
      s += d * d;
    }
    return scale * std::sqrt(s);
  };
  return M;
}

// Round S^m of the given radius in hyperspherical coordinates; the last axis is
// the periodic azimuth, the others are polar angles in (0, pi).
inline ChartManifold round_sphere(int m, double radius = 1.0) {
  if (m < 2) throw ConfigurationError("round sphere dimension must be at least 2");
  std::vector<ChartAxis> axes;
  for (int i = 0; i < m - 1; ++i) axes.push_back({0.0, kPi, false});
  axes.push_back({0.0, 2.0 * kPi, true});
  DiagonalMetricSpec spec;
  spec.constant.assign(static_cast<std::size_t>(m), radius * radius);
  spec.factors.resize(static_cast<std::size_t>(m));
  for (int i = 1; i < m; ++i)
    for (int j = 0; j < i; ++j) spec.factors[static_cast<std::size_t>(i)].push_back({j, sin_squared_factor()});
  ChartManifold S = make_diagonal_manifold("round_sphere", std::move(axes), std::move(spec));
  const double kappa = 1.0 / (radius * radius);
  S.hints.constant_sectional = kappa;
  if (m == 2) S.hints.gauss_curvature = [kappa](const Vec&) { return kappa; };
  S.distance = [radius](const Vec& a, const Vec& b) {
    return radius * great_circle(hyperspherical_embedding(a), hyperspherical_embedding(b));
  };
  if (m == 2) {
    S.pole_reflect = [](const Vec& y) {
      Vec r = y;
      r(0) = y(0) < 0.5 * kPi ? -y(0) : 2.0 * kPi - y(0);
      r(1) = y(1) + kPi;
      return r;
    };
  }
  return S;
}

// S^1 x S^2 with the product of the unit circle (length 2 pi) and the round
// sphere of the given radius. Coordinates (s, theta, phi).
inline ChartManifold product_s1xs2(double radius = 1.0) {
  std::vector<ChartAxis> axes = {{0.0, 2.0 * kPi, true}, {0.0, kPi, false}, {0.0, 2.0 * kPi, true}};
  DiagonalMetricSpec spec;
  spec.constant = {1.0, radius * radius, radius * radius};
  spec.factors.resize(3);
  spec.factors[2].push_back({1, sin_squared_factor()});
  ChartManifold P = make_diagonal_manifold("product_s1xs2", std::move(axes), std::move(spec));
  P.distance = [radius](const Vec& a, const Vec& b) {
    const double ds = wrap_difference(a(0) - b(0), 2.0 * kPi);
    const Vec pa = hyperspherical_embedding(a.tail(2));
    const Vec pb = hyperspherical_embedding(b.tail(2));
    const double dsph = radius * great_circle(pa, pb);
    return std::sqrt(ds * ds + dsph * dsph);
  };
  return P;
}

// Unit S^3 in Hopf coordinates (eta, xi1, xi2):
// z1 = e^{i xi1} sin(eta), z2 = e^{i xi2} cos(eta), metric d eta^2 + sin^2 d xi1^2 + cos^2 d xi2^2.
inline ChartManifold hopf_s3() {
  std::vector<ChartAxis> axes = {{0.0, 0.5 * kPi, false}, {0.0, 2.0 * kPi, true}, {0.0, 2.0 * kPi, true}};
  DiagonalMetricSpec spec;
  spec.constant = {1.0, 1.0, 1.0};
  spec.factors.resize(3);
  spec.factors[1].push_back({0, sin_squared_factor()});
  spec.factors[2].push_back({0, cos_squared_factor()});
  ChartManifold S = make_diagonal_manifold("hopf_s3", std::move(axes), std::move(spec));
  S.hints.constant_sectional = 1.0;
  return S;
}

// ---------------------------------------------------------------------------
// Warped surfaces dz^2 + w(z)^2 ds^2.

struct Warp {
  std::string kind;
  std::vector<double> coefficients;  // polynomial warps only
  std::function<double(double)> w;
  std::function<double(double)> dw;
  std::function<double(double)> ddw;
  std::optional<double> constant_curvature;
};

inline Warp make_warp(const std::string& kind, std::vector<double> coefficients = {}) {
  Warp wp;
  wp.kind = kind;
  if (kind == "const") {
    const double c = coefficients.empty() ? 1.0 : coefficients.front();
    wp.w = [c](double) { return c; };
    wp.dw = [](double) { return 0.0; };
    wp.ddw = [](double) { return 0.0; };
    wp.constant_curvature = 0.0;
    wp.coefficients = {c};
  } else if (kind == "sin") {
    wp.w = [](double z) { return std::sin(z); };
    wp.dw = [](double z) { return std::cos(z); };
    wp.ddw = [](double z) { return -std::sin(z); };
    wp.constant_curvature = 1.0;
  } else if (kind == "cosh") {
    wp.w = [](double z) { return std::cosh(z); };
    wp.dw = [](double z) { return std::sinh(z); };
    wp.ddw = [](double z) { return std::cosh(z); };
    wp.constant_curvature = -1.0;
  } else if (kind == "exp_neg") {
    wp.w = [](double z) { return std::exp(-z); };
    wp.dw = [](double z) { return -std::exp(-z); };
    wp.ddw = [](double z) { return std::exp(-z); };
    wp.constant_curvature = -1.0;
  } else if (kind == "polynomial") {
    if (coefficients.empty()) throw ConfigurationError("polynomial warp needs coefficients");
    wp.coefficients = coefficients;
    auto eval = [](const std::vector<double>& c, double z, int deriv) {
      double s = 0.0;
      double zp = 1.0;
      for (int k = deriv; k < static_cast<int>(c.size()); ++k) {
        double fac = 1.0;
        for (int j = 0; j < deriv; ++j) fac *= static_cast<double>(k - j);
        s += fac * c[static_cast<std::size_t>(k)] * zp;
        zp *= z;
      }
      return s;
    };
    wp.w = [eval, coefficients](double z) { return eval(coefficients, z, 0); };
    wp.dw = [eval, coefficients](double z) { return eval(coefficients, z, 1); };
    wp.ddw = [eval, coefficients](double z) { return eval(coefficients, z, 2); };
  } else {
    throw ConfigurationError("unknown warp '" + kind + "' (expected const, sin, cosh, exp_neg, polynomial)");
  }
  return wp;
}

struct WarpedSurface {
  Warp warp;
  double period = 2.0 * kPi;  // circumferential
  double z_lo = -5.0;
  double z_hi = 5.0;

  WarpedSurface(Warp w, double z_min, double z_max, double circumferential_period = 2.0 * kPi)
      : warp(std::move(w)), period(circumferential_period), z_lo(z_min), z_hi(z_max) {
    if (!(period > 0.0)) throw ConfigurationError("warped surface period must be positive");
    if (!(z_hi > z_lo)) throw ConfigurationError("warped surface needs z_lo < z_hi");
    for (int i = 0; i <= 1000; ++i) {
      const double z = z_lo + (z_hi - z_lo) * i / 1000.0;
      if (!(warp.w(z) > 0.0) || !std::isfinite(warp.ddw(z) / warp.w(z)))
        throw ConfigurationError("warp must be positive on the declared z-range");
    }
  }

  // Coordinates (s, z); metric w(z)^2 ds^2 + dz^2.
  ChartManifold chart() const {
    std::vector<ChartAxis> axes = {{0.0, period, true}, {z_lo, z_hi, false}};
    DiagonalMetricSpec spec;
    spec.constant = {1.0, 1.0};
    spec.factors.resize(2);
    const Warp wp = warp;
    spec.factors[0].push_back(
        {1, AxisFactor{[wp](double z) { return wp.w(z) * wp.w(z); },
                       [wp](double z) { return 2.0 * wp.w(z) * wp.dw(z); },
                       [wp](double z) { return 2.0 * (wp.dw(z) * wp.dw(z) + wp.w(z) * wp.ddw(z)); }}});
    ChartManifold N = make_diagonal_manifold("warped_cylinder_" + warp.kind, std::move(axes), std::move(spec));
    N.hints.constant_sectional = warp.constant_curvature;
    N.hints.gauss_curvature = [wp](const Vec& y) { return -wp.ddw(y(1)) / wp.w(y(1)); };
    N.translation_axis = 0;
    return N;
  }
};

inline double warped_curvature(const WarpedSurface& N, double z) {
  if (z < N.z_lo || z > N.z_hi) throw DomainError("z outside the warped surface range");
  return -N.warp.ddw(z) / N.warp.w(z);
}

// ---------------------------------------------------------------------------
// Chart geodesic distance for 2-dimensional charts without a closed form.
//
// Relaxes a discrete geodesic (polyline with the second-order geodesic
// equation) between the endpoints for each winding class of the periodic
// axes and returns the shortest polyline length. Any polyline length bounds
// the distance from above, so the estimate errs on the long side.
inline double polyline_length(const ChartManifold& N, const std::vector<Vec>& pts) {
  double len = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const Vec d = pts[i + 1] - pts[i];
    const Mat g = N.metric_at(0.5 * (pts[i] + pts[i + 1]));
    len += std::sqrt(std::max(0.0, d.dot(g * d)));
  }
  return len;
}

inline double relaxed_geodesic_length(const ChartManifold& N, const Vec& a, const Vec& b) {
  const int dim = N.dim();
  auto clamp_chart = [&](Vec& p) {
    for (int k = 0; k < dim; ++k) {
      const auto& ax = N.axes()[static_cast<std::size_t>(k)];
      if (ax.periodic) continue;
      const double pad = 1e-9 * ax.period();
      p(k) = std::clamp(p(k), ax.lo + pad, ax.hi - pad);
    }
  };
  std::vector<Vec> pts = {a, b};
  double best = polyline_length(N, {a, b});
  for (int level = 0; level < 5; ++level) {
    std::vector<Vec> fine;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      fine.push_back(pts[i]);
      fine.push_back(0.5 * (pts[i] + pts[i + 1]));
    }
    fine.push_back(pts.back());
    pts = std::move(fine);
    const int n = static_cast<int>(pts.size());
    const int sweeps = 12 * n;
    for (int s = 0; s < sweeps; ++s) {
      double moved = 0.0;
      for (int i = 1; i + 1 < n; ++i) {
        Vec& p = pts[static_cast<std::size_t>(i)];
        const Vec delta = 0.5 * (pts[static_cast<std::size_t>(i + 1)] - pts[static_cast<std::size_t>(i - 1)]);
        const Christoffel gam = christoffel_at(N, p);
        const Vec target = 0.5 * (pts[static_cast<std::size_t>(i + 1)] + pts[static_cast<std::size_t>(i - 1)]) +
                           0.5 * gam.contract(delta, delta);
        // damped update; the undamped one overshoots on coarse levels
        Vec next = p + 0.5 * (target - p);
        clamp_chart(next);
        moved = std::max(moved, (next - p).cwiseAbs().maxCoeff());
        p = next;
      }
      if (moved < 1e-13) break;
    }
    best = std::min(best, polyline_length(N, pts));
  }
  return best;
}

inline double chart_distance(const ChartManifold& N, const Vec& a, const Vec& b) {
  if (N.distance) return N.distance(a, b);
  const int m = N.dim();
  std::vector<int> periodic;
  for (int i = 0; i < m; ++i)
    if (N.axes()[static_cast<std::size_t>(i)].periodic) periodic.push_back(i);
  // nearest image first, then one winding either way on each periodic axis
  Vec base = b;
  for (int i : periodic) base(i) = a(i) + wrap_difference(b(i) - a(i), N.axes()[static_cast<std::size_t>(i)].period());
  double best = std::numeric_limits<double>::infinity();
  const int combos = static_cast<int>(std::pow(3, periodic.size()));
  for (int c = 0; c < combos; ++c) {
    Vec target = base;
    int code = c;
    bool far = false;
    for (int i : periodic) {
      const int shift = code % 3 - 1;
      code /= 3;
      target(i) += shift * N.axes()[static_cast<std::size_t>(i)].period();
      far = far || shift != 0;
    }
    // a wound path only competes when the nearest image is at least a quarter period away
    if (far) {
      bool worth = false;
      for (int i : periodic)
        worth = worth || std::abs(base(i) - a(i)) > 0.25 * N.axes()[static_cast<std::size_t>(i)].period();
      if (!worth) continue;
    }
    best = std::min(best, relaxed_geodesic_length(N, a, target));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Curvature conditions.

struct SamplingParams {
  int point_count = 200;
  int frames_per_point = 64;
  int descent_steps = 20;
  int n_samples_N = 1001;
  unsigned seed = 12345;
};

struct CurvatureReport {
  double min_Ric = 0.0;
  double min_BRic = 0.0;
  double sup_sigma_N = 0.0;
  double min_Scal = 0.0;
  bool condA = false;
  bool condB = false;
  bool condC = false;
  bool exact = false;  // constant-curvature closed forms were used
  // Trace inequalities implied by condition A, checked on every sample when condA holds:
  //   (m-3) Ric(v,v) + Scal >= (m-1) sup sigma_N,   Scal >= m(m-1)/(2m-3) sup sigma_N
  bool trace_inequalities_hold = true;
  int point_count = 0;
  int frame_count = 0;
  unsigned seed = 0;
};

namespace detail {

inline Vec sample_point(const ChartManifold& M, std::mt19937_64& rng) {
  Vec x(M.dim());
  for (int i = 0; i < M.dim(); ++i) {
    const auto& ax = M.axes()[static_cast<std::size_t>(i)];
    const double margin = ax.periodic ? 0.0 : 1e-3 * ax.period();
    std::uniform_real_distribution<double> u(ax.lo + margin, ax.hi - margin);
    x(i) = u(rng);
  }
  return x;
}

// Minimum over orthonormal 2-frames of BRic at one point: random frames in
// g-orthonormal coordinates followed by Givens-rotation descent.
inline double min_bi_ricci_sampled(const CurvatureTensors& curv, int frames, int descent_steps,
                                   std::mt19937_64& rng) {
  const int m = static_cast<int>(curv.g.rows());
  Eigen::LLT<Mat> llt(curv.g);
  const Mat L_inv_T = Mat(llt.matrixL()).inverse().transpose();  // maps orthonormal coords to chart vectors
  auto value = [&](const Mat& Q) {
    const Vec v = L_inv_T * Q.col(0);
    const Vec w = L_inv_T * Q.col(1);
    return v.dot(curv.ricci * v) + w.dot(curv.ricci * w) - curv.riemann.eval(v, w, w, v);
  };
  std::normal_distribution<double> nd;
  double best = std::numeric_limits<double>::infinity();
  for (int f = 0; f < frames; ++f) {
    Mat R(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) R(i, j) = nd(rng);
    Eigen::HouseholderQR<Mat> qr(R);
    Mat Q = qr.householderQ();
    double cur = value(Q);
    double step = 0.3;
    for (int s = 0; s < descent_steps; ++s) {
      bool improved = false;
      for (int a = 0; a < 2; ++a)
        for (int b = a + 1; b < m; ++b)
          for (double sign : {1.0, -1.0}) {
            const double c = std::cos(sign * step), sn = std::sin(sign * step);
            Mat trial = Q;
            trial.col(a) = c * Q.col(a) + sn * Q.col(b);
            trial.col(b) = -sn * Q.col(a) + c * Q.col(b);
            const double val = value(trial);
            if (val < cur) {
              cur = val;
              Q = trial;
              improved = true;
            }
          }
      if (!improved) step *= 0.5;
    }
    best = std::min(best, cur);
  }
  return best;
}

}  // namespace detail

inline double sup_gauss_curvature(const ChartManifold& N, const SamplingParams& params) {
  if (N.dim() != 2) throw ConfigurationError("target manifold must be a surface");
  if (N.hints.constant_sectional) return *N.hints.constant_sectional;
  // deterministic tensor-product sampling over the chart
  const int n = std::max(2, static_cast<int>(std::sqrt(static_cast<double>(params.n_samples_N))));
  double sup = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Vec y(2);
      for (int k = 0; k < 2; ++k) {
        const auto& ax = N.axes()[static_cast<std::size_t>(k)];
        const int idx = k == 0 ? i : j;
        y(k) = ax.periodic ? ax.lo + ax.period() * idx / n : ax.lo + (ax.hi - ax.lo) * (idx + 0.5) / n;
      }
      const double K = N.hints.gauss_curvature ? N.hints.gauss_curvature(y) : 0.5 * curvature_package(N, y).scalar;
      sup = std::max(sup, K);
    }
  return sup;
}

inline CurvatureReport curvature_conditions_report(const ChartManifold& M, const ChartManifold& N,
                                                   const SamplingParams& params = {}) {
  if (params.point_count <= 0 || params.frames_per_point <= 0 || params.n_samples_N <= 0)
    throw ConfigurationError("curvature sampling parameters must be positive");
  const int m = M.dim();
  CurvatureReport rep;
  rep.seed = params.seed;
  rep.sup_sigma_N = sup_gauss_curvature(N, params);
  const double sN = rep.sup_sigma_N;

  if (M.hints.constant_sectional) {
    const double k = *M.hints.constant_sectional;
    rep.exact = true;
    rep.min_Ric = (m - 1) * k;
    rep.min_BRic = (2 * m - 3) * k;
    rep.min_Scal = m * (m - 1) * k;
    rep.point_count = 0;
    rep.frame_count = 0;
  } else {
    std::mt19937_64 rng(params.seed);
    rep.min_Ric = std::numeric_limits<double>::infinity();
    rep.min_BRic = std::numeric_limits<double>::infinity();
    rep.min_Scal = std::numeric_limits<double>::infinity();
    std::vector<CurvatureTensors> samples;
    samples.reserve(static_cast<std::size_t>(params.point_count));
    for (int p = 0; p < params.point_count; ++p) {
      const CurvatureTensors curv = curvature_package(M, detail::sample_point(M, rng));
      const Vec eig = ricci_eigenvalues(curv);
      rep.min_Ric = std::min(rep.min_Ric, eig.minCoeff());
      rep.min_Scal = std::min(rep.min_Scal, curv.scalar);
      // m = 2: BRic = K; m = 3: BRic(v,w) = Scal/2 for every orthonormal pair
      double bric;
      if (m == 2 || m == 3) {
        bric = 0.5 * curv.scalar;
      } else {
        bric = detail::min_bi_ricci_sampled(curv, params.frames_per_point, params.descent_steps, rng);
        rep.frame_count += params.frames_per_point;
      }
      rep.min_BRic = std::min(rep.min_BRic, bric);
      samples.push_back(curv);
    }
    rep.point_count = params.point_count;
    if (rep.min_BRic >= sN) {
      for (const auto& curv : samples) {
        const Vec eig = ricci_eigenvalues(curv);
        const double ric_term = m >= 3 ? (m - 3) * eig.minCoeff() : (m - 3) * eig.maxCoeff();
        const double tol = 1e-8 * (1.0 + std::abs(curv.scalar));
        if (ric_term + curv.scalar < (m - 1) * sN - tol) rep.trace_inequalities_hold = false;
        if (curv.scalar < m * (m - 1.0) / (2.0 * m - 3.0) * sN - tol) rep.trace_inequalities_hold = false;
      }
    }
  }
  // Closed forms are exact; sampled curvature carries finite-difference noise.
  const double tol = rep.exact ? 0.0 : 1e-8;
  rep.condA = rep.min_BRic >= sN - tol;
  rep.condB = rep.min_Ric >= -tol;
  rep.condC = rep.min_Ric >= sN - tol;
  return rep;
}

}  // namespace mcflab
