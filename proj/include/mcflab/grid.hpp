#pragma once

#include "mcflab/core.hpp"
#include "mcflab/geometry.hpp"

#include <array>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace mcflab {

// How one chart axis of M is discretized.
//   Periodic: uniform nodes x_j = lo + j h, h = (hi - lo) / n.
//   Pole:     cell-centered nodes x_j = lo + (j + 1/2) h; a ghost beyond an end
//             is the mirrored node with the partner axis shifted by half its period.
//   Affine:   no nodes; f is affine in this coordinate with the given slope.
//             One representative coordinate; quadrature nodes for integrals.
enum class AxisKind { Periodic, Pole, Affine };

struct GridAxis {
  AxisKind kind = AxisKind::Periodic;
  int n = 1;
  int partner_lo = -1;  // Pole: axis rotated by half a period across the lower end
  int partner_hi = -1;  // Pole: same across the upper end
  bool reflect_image = false;  // Pole: re-express ghost values through N's pole reflection
  Eigen::Vector2d slope = Eigen::Vector2d::Zero();  // Affine
  double representative = 0.0;                        // Affine
  int quad_n = 0;  // Affine quadrature nodes; 0 picks a default

  static GridAxis periodic(int n) {
    GridAxis a;
    a.kind = AxisKind::Periodic;
    a.n = n;
    return a;
  }
  static GridAxis pole(int n, int partner_lo, int partner_hi, bool reflect_image = false) {
    GridAxis a;
    a.kind = AxisKind::Pole;
    a.n = n;
    a.partner_lo = partner_lo;
    a.partner_hi = partner_hi;
    a.reflect_image = reflect_image;
    return a;
  }
  static GridAxis affine(Eigen::Vector2d slope, double representative, int quad_n = 0) {
    GridAxis a;
    a.kind = AxisKind::Affine;
    a.n = 1;
    a.slope = slope;
    a.representative = representative;
    a.quad_n = quad_n;
    return a;
  }
};

// Gauss-Legendre nodes and weights on [lo, hi] (Golub-Welsch).
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n, double lo, double hi) {
  Mat T = Mat::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    T(k, k - 1) = b;
    T(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(T);
  std::vector<double> x(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    x[static_cast<std::size_t>(i)] = 0.5 * (lo + hi) + 0.5 * (hi - lo) * es.eigenvalues()(i);
    const double v0 = es.eigenvectors()(0, i);
    w[static_cast<std::size_t>(i)] = (hi - lo) * v0 * v0;
  }
  return {x, w};
}

// Quadrature point attached to a node: M data at a shifted coordinate along the affine axes.
struct SamplePoint {
  Vec x;
  double weight = 0.0;
  Eigen::Vector2d offset = Eigen::Vector2d::Zero();  // f(x) - f(node)
  Mat gM;
  Christoffel gammaM;
};

struct NodeData {
  Vec x;
  Mat gM;
  Christoffel gammaM;
  std::vector<SamplePoint> samples;
};

class Grid {
 public:
  Grid(std::shared_ptr<const ChartManifold> M, std::vector<GridAxis> axes) : M_(std::move(M)), axes_(std::move(axes)) {
    const int m = M_->dim();
    if (static_cast<int>(axes_.size()) != m)
      throw ConfigurationError("grid has " + std::to_string(axes_.size()) + " axes but M has dimension " +
                               std::to_string(m));
    strides_.assign(static_cast<std::size_t>(m), 1);
    total_ = 1;
    for (int a = m - 1; a >= 0; --a) {
      auto& ax = axes_[static_cast<std::size_t>(a)];
      const auto& ca = M_->axes()[static_cast<std::size_t>(a)];
      if (ax.kind == AxisKind::Affine) {
        ax.n = 1;
        if (ax.representative < ca.lo || ax.representative > ca.hi)
          throw ConfigurationError("affine representative outside the chart range of axis " + std::to_string(a));
      } else if (ax.n < 2 || (ax.kind == AxisKind::Pole && ax.n < 4)) {
        throw ConfigurationError("axis " + std::to_string(a) + " has too few nodes");
      }
      if (ax.kind == AxisKind::Periodic && !ca.periodic)
        throw ConfigurationError("axis " + std::to_string(a) + " of M is not periodic");
      if (ax.kind == AxisKind::Pole) {
        if (ca.periodic) throw ConfigurationError("pole axis " + std::to_string(a) + " must be a bounded chart axis");
        for (int partner : {ax.partner_lo, ax.partner_hi}) {
          if (partner < 0 || partner >= m || partner == a)
            throw ConfigurationError("pole axis " + std::to_string(a) + " needs a valid partner axis");
          const auto& pa = axes_[static_cast<std::size_t>(partner)];
          if (!M_->axes()[static_cast<std::size_t>(partner)].periodic)
            throw ConfigurationError("pole partner axis must be periodic");
          if (pa.kind == AxisKind::Periodic && pa.n % 2 != 0)
            throw ConfigurationError("pole partner axis needs an even node count");
        }
      }
      strides_[static_cast<std::size_t>(a)] = total_;
      total_ *= ax.n;
    }
    build_nodes();
  }

  const ChartManifold& M() const { return *M_; }
  std::shared_ptr<const ChartManifold> M_ptr() const { return M_; }
  int dim() const { return static_cast<int>(axes_.size()); }
  int size() const { return total_; }
  const std::vector<GridAxis>& axes() const { return axes_; }
  const GridAxis& axis(int a) const { return axes_[static_cast<std::size_t>(a)]; }
  const NodeData& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }

  bool is_grid_axis(int a) const { return axis(a).kind != AxisKind::Affine; }

  double spacing(int a) const {
    const auto& ca = M_->axes()[static_cast<std::size_t>(a)];
    return (ca.hi - ca.lo) / axis(a).n;
  }

  // Smallest spacing over the discretized axes (infinite when every axis is affine).
  double h_min() const {
    double h = std::numeric_limits<double>::infinity();
    for (int a = 0; a < dim(); ++a)
      if (is_grid_axis(a)) h = std::min(h, spacing(a));
    return h;
  }

  double coordinate(int a, int j) const {
    const auto& ax = axis(a);
    const auto& ca = M_->axes()[static_cast<std::size_t>(a)];
    switch (ax.kind) {
      case AxisKind::Periodic:
        return ca.lo + j * spacing(a);
      case AxisKind::Pole:
        return ca.lo + (j + 0.5) * spacing(a);
      case AxisKind::Affine:
        break;
    }
    return ax.representative;
  }

  std::vector<int> multi_index(int i) const {
    std::vector<int> idx(static_cast<std::size_t>(dim()));
    for (int a = 0; a < dim(); ++a) {
      idx[static_cast<std::size_t>(a)] = (i / strides_[static_cast<std::size_t>(a)]) % axis(a).n;
    }
    return idx;
  }

  int linear_index(const std::vector<int>& idx) const {
    int i = 0;
    for (int a = 0; a < dim(); ++a) i += idx[static_cast<std::size_t>(a)] * strides_[static_cast<std::size_t>(a)];
    return i;
  }

  // Where an index one step outside the node range lives.
  struct Resolved {
    int node = 0;
    Eigen::Vector2d shift = Eigen::Vector2d::Zero();  // added to the stored f value
    bool reflected = false;                            // apply N's pole reflection afterwards
  };

  Resolved resolve(std::vector<int> idx) const {
    Resolved r;
    for (int a = 0; a < dim(); ++a) {
      const auto& ax = axis(a);
      if (ax.kind != AxisKind::Pole) continue;
      int& j = idx[static_cast<std::size_t>(a)];
      int partner = -1;
      if (j < 0) {
        j = -1 - j;
        partner = ax.partner_lo;
      } else if (j >= ax.n) {
        j = 2 * ax.n - 1 - j;
        partner = ax.partner_hi;
      }
      if (partner < 0) continue;
      const auto& pa = axis(partner);
      if (pa.kind == AxisKind::Affine)
        r.shift += pa.slope * (0.5 * M_->axes()[static_cast<std::size_t>(partner)].period());
      else
        idx[static_cast<std::size_t>(partner)] += pa.n / 2;
      if (ax.reflect_image) r.reflected = !r.reflected;
    }
    for (int a = 0; a < dim(); ++a) {
      const auto& ax = axis(a);
      int& j = idx[static_cast<std::size_t>(a)];
      if (ax.kind == AxisKind::Periodic) {
        j %= ax.n;
        if (j < 0) j += ax.n;
      } else if (ax.kind == AxisKind::Affine) {
        j = 0;
      }
    }
    r.node = linear_index(idx);
    return r;
  }

  // True when the stencil around node i (including corners) stays inside the
  // node range of every pole axis, i.e. uses no mirrored ghosts.
  bool interior(int i, int margin = 1) const {
    const auto idx = multi_index(i);
    for (int a = 0; a < dim(); ++a) {
      if (axis(a).kind != AxisKind::Pole) continue;
      const int j = idx[static_cast<std::size_t>(a)];
      if (j < margin || j >= axis(a).n - margin) return false;
    }
    return true;
  }

  double total_weight() const {
    double s = 0.0;
    for (const auto& nd : nodes_)
      for (const auto& sp : nd.samples) s += sp.weight;
    return s;
  }

 private:
  void build_nodes() {
    const int m = dim();
    // quadrature along the affine axes
    std::vector<std::vector<std::pair<double, double>>> quad(static_cast<std::size_t>(m));
    double cell = 1.0;
    for (int a = 0; a < m; ++a) {
      const auto& ax = axis(a);
      const auto& ca = M_->axes()[static_cast<std::size_t>(a)];
      auto& q = quad[static_cast<std::size_t>(a)];
      if (ax.kind != AxisKind::Affine) {
        cell *= spacing(a);
        q.push_back({0.0, 1.0});
        continue;
      }
      if (ca.periodic) {
        const int n = ax.quad_n > 0 ? ax.quad_n : 4;
        for (int k = 0; k < n; ++k)
          q.push_back({wrap_difference(ca.lo + ca.period() * k / n - ax.representative, ca.period()),
                       ca.period() / n});
      } else {
        const int n = ax.quad_n > 0 ? ax.quad_n : 8;
        auto [xs, ws] = gauss_legendre(n, ca.lo, ca.hi);
        for (int k = 0; k < n; ++k)
          q.push_back({xs[static_cast<std::size_t>(k)] - ax.representative, ws[static_cast<std::size_t>(k)]});
      }
    }
    nodes_.resize(static_cast<std::size_t>(total_));
    for (int i = 0; i < total_; ++i) {
      NodeData& nd = nodes_[static_cast<std::size_t>(i)];
      const auto idx = multi_index(i);
      nd.x = Vec(m);
      for (int a = 0; a < m; ++a) nd.x(a) = coordinate(a, idx[static_cast<std::size_t>(a)]);
      const MetricJet jet = M_->jet(nd.x, 1);
      nd.gM = jet.g;
      nd.gammaM = christoffel_from_jet(jet, checked_inverse(jet.g));
      // tensor product of the per-axis quadrature rules
      std::vector<int> counter(static_cast<std::size_t>(m), 0);
      while (true) {
        SamplePoint sp;
        sp.x = nd.x;
        sp.weight = cell;
        bool shifted = false;
        for (int a = 0; a < m; ++a) {
          const auto& [dx, w] = quad[static_cast<std::size_t>(a)][static_cast<std::size_t>(counter[static_cast<std::size_t>(a)])];
          if (axis(a).kind == AxisKind::Affine) {
            sp.x(a) += dx;
            sp.offset += axis(a).slope * dx;
            sp.weight *= w;
            shifted = shifted || dx != 0.0;
          }
        }
        if (shifted) {
          const MetricJet sj = M_->jet(sp.x, 1);
          sp.gM = sj.g;
          sp.gammaM = christoffel_from_jet(sj, checked_inverse(sj.g));
        } else {
          sp.gM = nd.gM;
          sp.gammaM = nd.gammaM;
        }
        nd.samples.push_back(std::move(sp));
        int a = m - 1;
        while (a >= 0) {
          auto& c = counter[static_cast<std::size_t>(a)];
          if (++c < static_cast<int>(quad[static_cast<std::size_t>(a)].size())) break;
          c = 0;
          --a;
        }
        if (a < 0) break;
      }
    }
  }

  std::shared_ptr<const ChartManifold> M_;
  std::vector<GridAxis> axes_;
  std::vector<int> strides_;
  int total_ = 0;
  std::vector<NodeData> nodes_;
};

// f and its first and second coordinate derivatives at one point.
struct MapJet {
  Vec x;
  Eigen::Vector2d y = Eigen::Vector2d::Zero();
  Mat J;                  // 2 x m
  std::array<Mat, 2> D2;  // D2[a](i, j) = d_i d_j f^a
};

// Discrete map f: M -> N sampled on a grid, values in N-chart coordinates.
class GraphMapField {
 public:
  GraphMapField(std::shared_ptr<const Grid> grid, std::shared_ptr<const ChartManifold> N)
      : grid_(std::move(grid)), N_(std::move(N)), f_(static_cast<std::size_t>(grid_->size()), Eigen::Vector2d::Zero()) {
    if (N_->dim() != 2) throw ConfigurationError("target manifold must be 2-dimensional");
    for (int a = 0; a < grid_->dim(); ++a)
      if (grid_->axis(a).kind == AxisKind::Pole && grid_->axis(a).reflect_image && !N_->pole_reflect)
        throw ConfigurationError("image reflection requested but '" + N_->name() + "' has no pole reflection");
  }

  const Grid& grid() const { return *grid_; }
  std::shared_ptr<const Grid> grid_ptr() const { return grid_; }
  const ChartManifold& M() const { return grid_->M(); }
  const ChartManifold& N() const { return *N_; }
  std::shared_ptr<const ChartManifold> N_ptr() const { return N_; }
  int size() const { return grid_->size(); }

  const std::vector<Eigen::Vector2d>& values() const { return f_; }
  std::vector<Eigen::Vector2d>& values() { return f_; }
  const Eigen::Vector2d& value(int i) const { return f_[static_cast<std::size_t>(i)]; }

  void set(int i, const Eigen::Vector2d& y) { f_[static_cast<std::size_t>(i)] = wrap_target(y); }

  // Wraps periodic N coordinates and checks the bounded ones.
  Eigen::Vector2d wrap_target(const Eigen::Vector2d& y) const {
    Eigen::Vector2d out = y;
    for (int a = 0; a < 2; ++a) {
      const auto& ax = N_->axes()[static_cast<std::size_t>(a)];
      if (!std::isfinite(y(a))) throw DomainError("non-finite map value");
      if (ax.periodic) {
        out(a) = wrap_periodic(y(a), ax.lo, ax.period());
      } else if (y(a) < ax.lo || y(a) > ax.hi) {
        throw DomainError("map value leaves the chart range of '" + N_->name() + "'");
      }
    }
    return out;
  }

  // y - c with periodic N components reduced to the nearest image.
  Eigen::Vector2d difference(const Eigen::Vector2d& y, const Eigen::Vector2d& c) const {
    Eigen::Vector2d d = y - c;
    for (int a = 0; a < 2; ++a) {
      const auto& ax = N_->axes()[static_cast<std::size_t>(a)];
      if (ax.periodic) d(a) = wrap_difference(d(a), ax.period());
    }
    return d;
  }

  // f at a multi-index possibly one step outside the node range, relative to c.
  Eigen::Vector2d offset_at(const std::vector<int>& idx, const Eigen::Vector2d& c) const {
    const auto r = grid_->resolve(idx);
    Vec y = f_[static_cast<std::size_t>(r.node)] + r.shift;
    if (r.reflected) y = N_->pole_reflect(y);
    return difference(Eigen::Vector2d(y(0), y(1)), c);
  }

  // Central differences: first derivatives 3-point (5-point along pole axes,
  // where 1/sin factors at the first node amplify the error by 1/h), second
  // derivatives 3-point along an axis and the 4-corner stencil for mixed pairs.
  MapJet jet(int i) const {
    const Grid& G = *grid_;
    const int m = G.dim();
    MapJet mj;
    mj.x = G.node(i).x;
    mj.y = f_[static_cast<std::size_t>(i)];
    mj.J = Mat::Zero(2, m);
    mj.D2 = {Mat::Zero(m, m), Mat::Zero(m, m)};
    const auto idx = G.multi_index(i);
    auto shifted = [&](int a, int sa, int b = -1, int sb = 0) {
      auto k = idx;
      k[static_cast<std::size_t>(a)] += sa;
      if (b >= 0) k[static_cast<std::size_t>(b)] += sb;
      return offset_at(k, mj.y);
    };
    for (int a = 0; a < m; ++a) {
      if (!G.is_grid_axis(a)) {
        mj.J.col(a) = G.axis(a).slope;
        continue;
      }
      const double h = G.spacing(a);
      const Eigen::Vector2d up = shifted(a, 1);
      const Eigen::Vector2d dn = shifted(a, -1);
      if (G.axis(a).kind == AxisKind::Pole)
        mj.J.col(a) = (8.0 * (up - dn) - (shifted(a, 2) - shifted(a, -2))) / (12.0 * h);
      else
        mj.J.col(a) = (up - dn) / (2.0 * h);
      const Eigen::Vector2d dd = (up + dn) / (h * h);
      mj.D2[0](a, a) = dd(0);
      mj.D2[1](a, a) = dd(1);
      for (int b = a + 1; b < m; ++b) {
        if (!G.is_grid_axis(b)) continue;
        const double hb = G.spacing(b);
        const Eigen::Vector2d mixed =
            (shifted(a, 1, b, 1) - shifted(a, 1, b, -1) - shifted(a, -1, b, 1) + shifted(a, -1, b, -1)) /
            (4.0 * h * hb);
        for (int c = 0; c < 2; ++c) {
          mj.D2[static_cast<std::size_t>(c)](a, b) = mixed(c);
          mj.D2[static_cast<std::size_t>(c)](b, a) = mixed(c);
        }
      }
    }
    return mj;
  }

 private:
  std::shared_ptr<const Grid> grid_;
  std::shared_ptr<const ChartManifold> N_;
  std::vector<Eigen::Vector2d> f_;
};

// Gradient and Hessian of a nodal scalar by the same stencils. Scalars are
// taken constant along affine axes (those are symmetry directions of the field).
struct ScalarJet {
  double value = 0.0;
  Vec grad;
  Mat hess;
};

inline ScalarJet scalar_jet(const Grid& G, const std::vector<double>& u, int i) {
  const int m = G.dim();
  ScalarJet sj;
  sj.value = u[static_cast<std::size_t>(i)];
  sj.grad = Vec::Zero(m);
  sj.hess = Mat::Zero(m, m);
  const auto idx = G.multi_index(i);
  auto at = [&](int a, int sa, int b = -1, int sb = 0) {
    auto k = idx;
    k[static_cast<std::size_t>(a)] += sa;
    if (b >= 0) k[static_cast<std::size_t>(b)] += sb;
    return u[static_cast<std::size_t>(G.resolve(k).node)];
  };
  for (int a = 0; a < m; ++a) {
    if (!G.is_grid_axis(a)) continue;
    const double h = G.spacing(a);
    const double up = at(a, 1), dn = at(a, -1);
    if (G.axis(a).kind == AxisKind::Pole)
      sj.grad(a) = (8.0 * (up - dn) - (at(a, 2) - at(a, -2))) / (12.0 * h);
    else
      sj.grad(a) = (up - dn) / (2.0 * h);
    sj.hess(a, a) = (up - 2.0 * sj.value + dn) / (h * h);
    for (int b = a + 1; b < m; ++b) {
      if (!G.is_grid_axis(b)) continue;
      const double hb = G.spacing(b);
      const double v = (at(a, 1, b, 1) - at(a, 1, b, -1) - at(a, -1, b, 1) + at(a, -1, b, -1)) / (4.0 * h * hb);
      sj.hess(a, b) = v;
      sj.hess(b, a) = v;
    }
  }
  return sj;
}

}  // namespace mcflab
