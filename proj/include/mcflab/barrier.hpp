#pragma once

#include "mcflab/core.hpp"
#include "mcflab/frames.hpp"
#include "mcflab/geometry.hpp"
#include "mcflab/grid.hpp"
#include "mcflab/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <tuple>
#include <vector>

namespace mcflab {

// A function on M x N. Points are (x, y) stacked into m + 2 chart components.
struct BarrierFunction {
  std::string kind;
  std::function<double(const Vec&)> phi;
  std::function<Vec(const Vec&)> grad;  // chart gradient; finite differences when empty
  std::function<Mat(const Vec&)> hess;  // chart second derivatives; finite differences when empty
  double c = 0.0;
};

inline Vec stack_point(const Vec& x, const Eigen::Vector2d& y) {
  Vec z(x.size() + 2);
  z.head(x.size()) = x;
  z.tail(2) = y;
  return z;
}

namespace detail {

inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& z, double h = 1e-5) {
  Vec g(z.size());
  for (int i = 0; i < z.size(); ++i) {
    Vec a = z, b = z;
    a(i) += h;
    b(i) -= h;
    g(i) = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

inline Mat fd_hessian(const std::function<double(const Vec&)>& f, const Vec& z, double h = 1e-4) {
  const int n = static_cast<int>(z.size());
  Mat H(n, n);
  const double f0 = f(z);
  for (int i = 0; i < n; ++i) {
    Vec a = z, b = z;
    a(i) += h;
    b(i) -= h;
    H(i, i) = (f(a) - 2.0 * f0 + f(b)) / (h * h);
    for (int j = i + 1; j < n; ++j) {
      auto at = [&](double si, double sj) {
        Vec w = z;
        w(i) += si;
        w(j) += sj;
        return f(w);
      };
      H(i, j) = H(j, i) = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
    }
  }
  return H;
}

}  // namespace detail

// D^2 phi = d^2 phi - Gamma d phi with the Levi-Civita connection of g_M + g_N,
// together with the product metric at the point.
struct CovariantHessian {
  Mat hess;
  Mat metric;
};

inline CovariantHessian covariant_hessian(const BarrierFunction& bf, const ChartManifold& M, const ChartManifold& N,
                                          const Vec& z) {
  const int m = M.dim();
  const Vec x = z.head(m);
  const Vec y = z.tail(2);
  const Vec d = bf.grad ? bf.grad(z) : detail::fd_gradient(bf.phi, z);
  Mat H = bf.hess ? bf.hess(z) : detail::fd_hessian(bf.phi, z);
  const Christoffel gM = christoffel_at(M, x);
  const Christoffel gN = christoffel_at(N, y);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < m; ++k) H(i, j) -= gM(k, i, j) * d(k);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) H(m + i, m + j) -= gN(k, i, j) * d(m + k);
  return {0.5 * (H + H.transpose()), product_metric(M.metric_at(x), N.metric_at(y))};
}

// Generalized eigenvalues of D^2 phi against the product metric, ascending.
inline Vec hessian_eigenvalues(const CovariantHessian& ch) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(ch.hess, ch.metric, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw DegenerateMetricError("product metric is not positive definite");
  return es.eigenvalues();
}

inline double sum_smallest(const Vec& ascending, int m) {
  if (m < 1 || m > ascending.size()) throw ConfigurationError("m-convexity needs 1 <= m <= dim(M x N)");
  return ascending.head(m).sum();
}

// Minimum over orthonormal m-frames of sum_k D^2 phi(e_k, e_k).
inline double m_convexity_at(const BarrierFunction& bf, const ChartManifold& M, const ChartManifold& N, const Vec& z,
                             int m) {
  return sum_smallest(hessian_eigenvalues(covariant_hessian(bf, M, N, z)), m);
}

// Smallest trace sum_k D^2 phi(e_k, e_k) over random orthonormal m-frames.
// With descent_iters > 0 each frame is improved by subspace iteration on
// (s I - D^2 phi), which lowers the trace monotonically toward the minimum.
// The result is never below the eigenvalue sum.
inline double m_convexity_brute_force(const CovariantHessian& ch, int m, int frames, std::mt19937_64& rng,
                                      int descent_iters = 0) {
  const int n = static_cast<int>(ch.metric.rows());
  const Mat L = Eigen::LLT<Mat>(ch.metric).matrixL();
  const Mat Linv_T = L.transpose().triangularView<Eigen::Upper>().solve(Mat::Identity(n, n));
  const Mat A = Linv_T.transpose() * ch.hess * Linv_T;  // Hessian in a g-orthonormal basis
  const Mat shifted = (A.norm() + 1.0) * Mat::Identity(n, n) - A;
  auto orthonormal = [&](const Mat& Q) { return Mat(Eigen::HouseholderQR<Mat>(Q).householderQ() * Mat::Identity(n, m)); };
  std::normal_distribution<double> nd;
  double best = std::numeric_limits<double>::infinity();
  for (int f = 0; f < frames; ++f) {
    Mat Q(n, m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) Q(i, j) = nd(rng);
    Q = orthonormal(Q);
    double tr = (Q.transpose() * A * Q).trace();
    for (int it = 0; it < descent_iters; ++it) {
      Q = orthonormal(shifted * Q);
      const double next = (Q.transpose() * A * Q).trace();
      const bool done = std::abs(tr - next) < 1e-15 * std::max(1.0, std::abs(next));
      tr = next;
      if (done) break;
    }
    best = std::min(best, tr);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Barrier families

inline BarrierFunction squared_distance_to_point(const ChartManifold& N, const Eigen::Vector2d& q, double c) {
  if (!N.distance) throw ConfigurationError("squared_distance_to_point needs a closed-form distance on '" + N.name() + "'");
  BarrierFunction bf;
  bf.kind = "squared_distance_to_point";
  bf.c = c;
  const auto dist = N.distance;
  bf.phi = [dist, q](const Vec& z) {
    const double d = dist(Vec(z.tail(2)), Vec(q));
    return d * d;
  };
  return bf;
}

// (z - z0)^2 on a warped surface: the squared distance to the circle {z = z0}.
inline BarrierFunction squared_distance_to_waist_geodesic(int m, double z0, double c) {
  BarrierFunction bf;
  bf.kind = "squared_distance_to_waist_geodesic";
  bf.c = c;
  bf.phi = [m, z0](const Vec& z) { return (z(m + 1) - z0) * (z(m + 1) - z0); };
  bf.grad = [m, z0](const Vec& z) {
    Vec g = Vec::Zero(z.size());
    g(m + 1) = 2.0 * (z(m + 1) - z0);
    return g;
  };
  bf.hess = [m](const Vec& z) {
    Mat H = Mat::Zero(z.size(), z.size());
    H(m + 1, m + 1) = 2.0;
    return H;
  };
  return bf;
}

inline BarrierFunction coordinate_height(int m, int axis, double c) {
  if (axis < 0 || axis > 1) throw ConfigurationError("coordinate_height axis must be 0 or 1");
  BarrierFunction bf;
  bf.kind = "coordinate_height";
  bf.c = c;
  bf.phi = [m, axis](const Vec& z) { return z(m + axis); };
  bf.grad = [m, axis](const Vec& z) {
    Vec g = Vec::Zero(z.size());
    g(m + axis) = 1.0;
    return g;
  };
  bf.hess = [](const Vec& z) { return Mat(Mat::Zero(z.size(), z.size())); };
  return bf;
}

// sum_k c_k y0^a_k y1^b_k in the chart of N.
struct PolynomialTerm {
  double coefficient = 0.0;
  int a = 0;
  int b = 0;
};

inline BarrierFunction custom_polynomial_in_chart(int m, std::vector<PolynomialTerm> terms, double c) {
  for (const auto& t : terms)
    if (t.a < 0 || t.b < 0) throw ConfigurationError("polynomial exponents must be nonnegative");
  BarrierFunction bf;
  bf.kind = "custom_polynomial_in_chart";
  bf.c = c;
  auto mono = [](double v, int e, int deriv) {
    if (deriv > e) return 0.0;
    double fac = 1.0;
    for (int j = 0; j < deriv; ++j) fac *= static_cast<double>(e - j);
    return fac * std::pow(v, e - deriv);
  };
  bf.phi = [m, terms, mono](const Vec& z) {
    double s = 0.0;
    for (const auto& t : terms) s += t.coefficient * mono(z(m), t.a, 0) * mono(z(m + 1), t.b, 0);
    return s;
  };
  bf.grad = [m, terms, mono](const Vec& z) {
    Vec g = Vec::Zero(z.size());
    for (const auto& t : terms) {
      g(m) += t.coefficient * mono(z(m), t.a, 1) * mono(z(m + 1), t.b, 0);
      g(m + 1) += t.coefficient * mono(z(m), t.a, 0) * mono(z(m + 1), t.b, 1);
    }
    return g;
  };
  bf.hess = [m, terms, mono](const Vec& z) {
    Mat H = Mat::Zero(z.size(), z.size());
    for (const auto& t : terms) {
      H(m, m) += t.coefficient * mono(z(m), t.a, 2) * mono(z(m + 1), t.b, 0);
      H(m + 1, m + 1) += t.coefficient * mono(z(m), t.a, 0) * mono(z(m + 1), t.b, 2);
      const double mixed = t.coefficient * mono(z(m), t.a, 1) * mono(z(m + 1), t.b, 1);
      H(m, m + 1) += mixed;
      H(m + 1, m) += mixed;
    }
    return H;
  };
  return bf;
}

// ---------------------------------------------------------------------------
// Certification and containment

struct ConvexityCertificate {
  bool verdict = false;
  Vec worst_point;
  double worst_value = std::numeric_limits<double>::infinity();
  int grid_samples = 0;
  int random_samples = 0;
  std::string note = "audit by sampling the sublevel set, not a proof";
};

// Samples (x, y) with x on the run grid and its cell midpoints, y on the image
// of f, plus ten times as many random points of M x N; keeps phi < c.
inline ConvexityCertificate certify_m_convexity(const BarrierFunction& bf, const GraphMapField& f, int m,
                                                std::uint64_t seed, double tol = 1e-12) {
  const Grid& G = f.grid();
  const ChartManifold& M = G.M();
  const ChartManifold& N = f.N();
  ConvexityCertificate cert;
  auto consider = [&](const Vec& z, int& counter) {
    if (!(bf.phi(z) < bf.c)) return;
    ++counter;
    const double v = m_convexity_at(bf, M, N, z, m);
    if (v < cert.worst_value) {
      cert.worst_value = v;
      cert.worst_point = z;
    }
  };
  for (int i = 0; i < G.size(); ++i) {
    const Vec x = G.node(i).x;
    Vec mid = x;
    for (int a = 0; a < G.dim(); ++a)
      if (G.is_grid_axis(a)) mid(a) = std::min(M.axes()[static_cast<std::size_t>(a)].hi - 1e-9, x(a) + 0.5 * G.spacing(a));
    consider(stack_point(x, f.value(i)), cert.grid_samples);
    consider(stack_point(mid, f.value(i)), cert.grid_samples);
  }
  std::mt19937_64 rng(seed);
  const int target = 10 * std::max(1, cert.grid_samples);
  auto uniform_in = [&](const ChartAxis& ax) {
    const double pad = ax.periodic ? 0.0 : 1e-6 * ax.period();
    return std::uniform_real_distribution<double>(ax.lo + pad, ax.hi - pad)(rng);
  };
  for (int k = 0; k < 40 * target && cert.random_samples < target; ++k) {
    Vec z(M.dim() + 2);
    for (int a = 0; a < M.dim(); ++a) z(a) = uniform_in(M.axes()[static_cast<std::size_t>(a)]);
    // random N points near the sampled image keep the sublevel hit rate useful
    const Eigen::Vector2d base = f.value(static_cast<int>(rng() % static_cast<std::uint64_t>(f.size())));
    for (int b = 0; b < 2; ++b) {
      const auto& ax = N.axes()[static_cast<std::size_t>(b)];
      z(M.dim() + b) = (k % 2 == 0) ? uniform_in(ax)
                                    : std::clamp(base(b) + 0.1 * ax.period() * std::normal_distribution<double>()(rng),
                                                 ax.lo + 1e-6 * ax.period(), ax.hi - 1e-6 * ax.period());
    }
    consider(z, cert.random_samples);
  }
  cert.verdict = cert.grid_samples + cert.random_samples > 0 && cert.worst_value >= -tol;
  return cert;
}

// Largest barrier value over the graph of f, including orbit points along affine axes.
inline double max_barrier_on_graph(const BarrierFunction& bf, const GraphMapField& f) {
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < f.size(); ++i)
    for (const SamplePoint& sp : f.grid().node(i).samples)
      best = std::max(best, bf.phi(stack_point(sp.x, f.wrap_target(f.value(i) + sp.offset))));
  return best;
}

struct ContainmentReport {
  double c = 0.0;
  bool contained = true;
  std::vector<std::pair<double, double>> margins;  // (t, c - max phi)
  int first_escape = -1;
  double first_escape_t = std::numeric_limits<double>::quiet_NaN();
  std::string note = "containment tested as max phi < c with the margin reported; the sublevel set is open";
};

inline ContainmentReport containment_monitor(const std::vector<Snapshot>& run, const GraphMapField& proto,
                                             const BarrierFunction& bf) {
  ContainmentReport r;
  r.c = bf.c;
  GraphMapField f = proto;
  for (std::size_t k = 0; k < run.size(); ++k) {
    f.values() = run[k].f;
    const double margin = bf.c - max_barrier_on_graph(bf, f);
    if (k == 0 && !(margin > 0.0))
      throw StateError("initial graph is not inside the sublevel set (margin " + std::to_string(margin) + ")");
    r.margins.push_back({run[k].t, margin});
    if (!(margin > 0.0) && r.first_escape < 0) {
      r.contained = false;
      r.first_escape = static_cast<int>(k);
      r.first_escape_t = run[k].t;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Image diameter

// Image points of f: node values plus orbit points along affine axes that move the image.
inline std::vector<Eigen::Vector2d> image_points(const GraphMapField& f, int orbit_samples = 8) {
  const Grid& G = f.grid();
  const ChartManifold& M = G.M();
  std::vector<std::vector<Eigen::Vector2d>> per_axis;
  for (int a = 0; a < G.dim(); ++a) {
    const GridAxis& ax = G.axis(a);
    if (ax.kind != AxisKind::Affine || ax.slope.isZero(0.0)) continue;
    const ChartAxis& ca = M.axes()[static_cast<std::size_t>(a)];
    std::vector<Eigen::Vector2d> offs;
    if (ca.periodic) {
      for (int k = 0; k < orbit_samples; ++k) offs.push_back(ax.slope * (ca.period() * k / orbit_samples));
    } else {
      for (double x : {ca.lo, 0.5 * (ca.lo + ca.hi), ca.hi}) offs.push_back(ax.slope * (x - ax.representative));
    }
    per_axis.push_back(std::move(offs));
  }
  std::vector<Eigen::Vector2d> shifts = {Eigen::Vector2d::Zero()};
  for (const auto& offs : per_axis) {
    std::vector<Eigen::Vector2d> next;
    for (const auto& s : shifts)
      for (const auto& o : offs) next.push_back(s + o);
    shifts = std::move(next);
  }
  std::vector<Eigen::Vector2d> pts;
  for (int i = 0; i < f.size(); ++i)
    for (const auto& s : shifts) pts.push_back(f.wrap_target(f.value(i) + s));
  return pts;
}

// Distance with a cache keyed by the offset along a translation-invariant axis.
class DistanceCache {
 public:
  explicit DistanceCache(const ChartManifold& N) : N_(N) {}

  double operator()(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    if (N_.distance || !N_.translation_axis) return chart_distance(N_, Vec(a), Vec(b));
    const int t = *N_.translation_axis, o = 1 - t;
    const double period = N_.axes()[static_cast<std::size_t>(t)].period();
    double ds = std::abs(wrap_difference(b(t) - a(t), period));
    double z1 = a(o), z2 = b(o);
    if (z1 > z2) std::swap(z1, z2);
    const auto key = std::make_tuple(std::round(ds * 1e12), std::round(z1 * 1e12), std::round(z2 * 1e12));
    const auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    Vec p(2), q(2);
    p(t) = 0.0;
    p(o) = z1;
    q(t) = ds;
    q(o) = z2;
    const double d = chart_distance(N_, p, q);
    cache_.emplace(key, d);
    return d;
  }

 private:
  const ChartManifold& N_;
  std::map<std::tuple<double, double, double>, double> cache_;
};

// Largest pairwise distance between image points. At most max_points are used
// (evenly strided) when N has no closed-form distance.
inline double image_diameter(const GraphMapField& f, DistanceCache& dist, int max_points = 32) {
  std::vector<Eigen::Vector2d> pts = image_points(f);
  const int cap = f.N().distance ? 4096 : max_points;
  if (static_cast<int>(pts.size()) > cap) {
    std::vector<Eigen::Vector2d> sub;
    const double stride = static_cast<double>(pts.size()) / cap;
    for (int k = 0; k < cap; ++k) sub.push_back(pts[static_cast<std::size_t>(k * stride)]);
    pts = std::move(sub);
  }
  double d = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) d = std::max(d, dist(pts[i], pts[j]));
  return d;
}

inline double image_diameter(const GraphMapField& f) {
  DistanceCache dist(f.N());
  return image_diameter(f, dist);
}

struct DiameterFit {
  double slope = std::numeric_limits<double>::quiet_NaN();  // least-squares slope of log diameter
  double required = std::numeric_limits<double>::quiet_NaN();
  bool applicable = false;
  bool pass = false;
};

// Log-slope of the diameter over the final half of the series, compared with -eps0/2 + tol.
inline DiameterFit diameter_series(const std::vector<std::pair<double, double>>& series, double eps0, double tol = 0.05) {
  DiameterFit fit;
  if (series.size() < 4) return fit;
  const double t_half = 0.5 * (series.front().first + series.back().first);
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [t, d] : series) {
    if (t < t_half || !(d > 0.0)) continue;
    const double y = std::log(d);
    n += 1;
    sx += t;
    sy += y;
    sxx += t * t;
    sxy += t * y;
  }
  if (n < 2 || n * sxx - sx * sx <= 0.0) return fit;
  fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  if (eps0 > 0.0) {
    fit.applicable = true;
    fit.required = -0.5 * eps0 + tol;
    fit.pass = fit.slope <= fit.required;
  }
  return fit;
}

}  // namespace mcflab
