#include "mcflab/mcflab.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace mcflab;

namespace {

Vec stacked(std::initializer_list<double> v) {
  Vec z(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) z(i++) = x;
  return z;
}

}  // namespace

TEST(Hessian, HalfSquaredNormOnFlatProductHasUnitEigenvalues) {
  const ChartManifold M = flat_torus(2), N = flat_torus(2);
  BarrierFunction bf;
  bf.phi = [](const Vec& z) { return 0.5 * z.squaredNorm(); };
  const Vec z = stacked({0.3, 1.0, 2.0, 0.7});
  const Vec fd = hessian_eigenvalues(covariant_hessian(bf, M, N, z));
  EXPECT_NEAR((fd - Vec::Ones(4)).cwiseAbs().maxCoeff(), 0.0, 1e-6);
  bf.grad = [](const Vec& x) { return x; };
  bf.hess = [](const Vec& x) { return Mat(Mat::Identity(x.size(), x.size())); };
  const Vec exact = hessian_eigenvalues(covariant_hessian(bf, M, N, z));
  EXPECT_NEAR((exact - Vec::Ones(4)).cwiseAbs().maxCoeff(), 0.0, 1e-14);
  EXPECT_NEAR(m_convexity_at(bf, M, N, z, 2), 2.0, 1e-14);
}

TEST(Hessian, SquaredSphericalDistance) {
  // on the unit sphere Hess d^2 has eigenvalues 2 (radial) and 2 d cot d (tangential)
  const ChartManifold M = round_sphere(2), N = round_sphere(2);
  const BarrierFunction bf = squared_distance_to_point(N, Eigen::Vector2d(0.5 * kPi, 0.0), 1.0);
  for (double d : {0.3, 0.5, 1.2}) {
    const Vec ev = hessian_eigenvalues(covariant_hessian(bf, M, N, stacked({1.0, 0.2, 0.5 * kPi, d})));
    EXPECT_NEAR(ev(0), 0.0, 1e-6);
    EXPECT_NEAR(ev(1), 0.0, 1e-6);
    EXPECT_NEAR(ev(2), 2.0 * d / std::tan(d), 1e-5);
    EXPECT_NEAR(ev(3), 2.0, 1e-5);
  }
}

TEST(Hessian, WaistBarrierOnHyperbolicCylinder) {
  // (z - z0)^2 on dz^2 + cosh^2 z ds^2: eigenvalues 2 and 2 (z - z0) tanh z
  auto M = product_s1xs2();
  const ChartManifold N = WarpedSurface(make_warp("cosh"), -3.0, 3.0).chart();
  const BarrierFunction bf = squared_distance_to_waist_geodesic(3, 0.0, 1.0);
  for (double z : {-1.0, -0.2, 0.0, 0.4, 2.0}) {
    const Vec ev = hessian_eigenvalues(covariant_hessian(bf, M, N, stacked({0.1, 1.0, 2.0, 0.5, z})));
    std::vector<double> expected = {0.0, 0.0, 0.0, 2.0 * z * std::tanh(z), 2.0};
    std::sort(expected.begin(), expected.end());
    for (int i = 0; i < 5; ++i) EXPECT_NEAR(ev(i), expected[static_cast<std::size_t>(i)], 1e-12) << "z = " << z;
    EXPECT_GE(m_convexity_at(bf, M, N, stacked({0.1, 1.0, 2.0, 0.5, z}), 3), 0.0);
  }
}

TEST(MConvexity, BruteForceNeverBelowEigenvalueSum) {
  std::mt19937_64 rng(31);
  for (int k = 0; k < 100; ++k) {
    const int n = 4 + k % 4;
    const int m = 1 + k % (n - 1);
    const CovariantHessian ch{app::detail::random_symmetric(n, rng), app::detail::random_spd(n, rng)};
    const double oracle = sum_smallest(hessian_eigenvalues(ch), m);
    const double plain = m_convexity_brute_force(ch, m, 50, rng);
    const double descended = m_convexity_brute_force(ch, m, 20, rng, 2000);
    EXPECT_GE(plain, oracle - 1e-10);
    EXPECT_GE(descended, oracle - 1e-10);
    EXPECT_LE(descended, oracle + 1e-8);
  }
}

TEST(MConvexity, SumSmallestRange) {
  const Vec ev = stacked({-1.0, 0.5, 2.0});
  EXPECT_DOUBLE_EQ(sum_smallest(ev, 2), -0.5);
  EXPECT_THROW(sum_smallest(ev, 0), ConfigurationError);
  EXPECT_THROW(sum_smallest(ev, 4), ConfigurationError);
}

TEST(Certificate, WaistBarrierIsThreeConvexOnItsSublevelSet) {
  const app::Setup s = app::build_setup(app::preset("cylinder_waist"));
  const ConvexityCertificate c = certify_m_convexity(*s.barrier, *s.initial, 3, 5);
  EXPECT_TRUE(c.verdict);
  EXPECT_GT(c.grid_samples + c.random_samples, 10);
  EXPECT_GE(c.worst_value, -1e-12);
}

TEST(Certificate, SphericalDistanceFailsBeyondTheHemisphere) {
  // d^2 on S^2 loses 2-convexity in N once d > pi/2
  auto M = std::make_shared<const ChartManifold>(flat_torus(2));
  auto N = std::make_shared<const ChartManifold>(round_sphere(2));
  auto G = std::make_shared<const Grid>(M, std::vector<GridAxis>{GridAxis::periodic(4), GridAxis::periodic(4)});
  GraphMapField f(G, N);
  for (int i = 0; i < f.size(); ++i) f.set(i, Eigen::Vector2d(0.5 * kPi, 0.0));
  const BarrierFunction inside = squared_distance_to_point(*N, Eigen::Vector2d(0.5 * kPi, 0.0), 1.0);
  EXPECT_TRUE(certify_m_convexity(inside, f, 2, 1).verdict);
  const BarrierFunction outside = squared_distance_to_point(*N, Eigen::Vector2d(0.5 * kPi, 0.0), 7.0);
  EXPECT_FALSE(certify_m_convexity(outside, f, 2, 1).verdict);
}

TEST(Containment, DetectsFirstEscape) {
  const app::Setup s = app::build_setup(app::preset("cylinder_waist"));
  const BarrierFunction bf = squared_distance_to_waist_geodesic(3, 0.0, 0.5);
  auto at = [&](double t, double z) {
    GraphMapField f = *s.initial;
    f.set(0, Eigen::Vector2d(0.0, z));
    return Snapshot{t, f.values()};
  };
  const ContainmentReport ok = containment_monitor({at(0, 0.5), at(1, 0.3), at(2, 0.1)}, *s.initial, bf);
  EXPECT_TRUE(ok.contained);
  EXPECT_NEAR(ok.margins.back().second, 0.5 - 0.01, 1e-12);
  const ContainmentReport esc = containment_monitor({at(0, 0.5), at(1, 0.8), at(2, 0.6)}, *s.initial, bf);
  EXPECT_FALSE(esc.contained);
  EXPECT_EQ(esc.first_escape, 1);
  EXPECT_DOUBLE_EQ(esc.first_escape_t, 1.0);
  EXPECT_THROW(containment_monitor({at(0, 0.9)}, *s.initial, bf), StateError);
}

TEST(Barriers, Validation) {
  EXPECT_THROW(coordinate_height(3, 2, 1.0), ConfigurationError);
  const ChartManifold W = WarpedSurface(make_warp("cosh"), -1.0, 1.0).chart();
  EXPECT_THROW(squared_distance_to_point(W, Eigen::Vector2d::Zero(), 1.0), ConfigurationError);
  EXPECT_THROW(custom_polynomial_in_chart(2, {{1.0, -1, 0}}, 1.0), ConfigurationError);
  const BarrierFunction p = custom_polynomial_in_chart(2, {{2.0, 1, 2}, {-1.0, 0, 1}}, 1.0);
  const Vec z = stacked({0.0, 0.0, 1.5, -0.5});
  EXPECT_DOUBLE_EQ(p.phi(z), 2.0 * 1.5 * 0.25 + 0.5);
  EXPECT_NEAR((p.grad(z) - detail::fd_gradient(p.phi, z)).norm(), 0.0, 1e-8);
  EXPECT_NEAR((p.hess(z) - detail::fd_hessian(p.phi, z)).norm(), 0.0, 1e-5);
}

TEST(Diameter, ConstantAndEquivariantImages) {
  const app::Setup c = app::build_setup(app::preset("constant_map"));
  EXPECT_EQ(image_diameter(*c.initial), 0.0);
  // the image of (eps sin theta, phi) is the polar cap of radius eps
  const GraphMapField f = oracle::equivariant_field(64, 0.5);
  EXPECT_NEAR(image_diameter(f), 1.0, 1e-3);
}

TEST(Diameter, ExponentialFit) {
  std::vector<std::pair<double, double>> s;
  for (int k = 0; k <= 20; ++k) s.push_back({0.5 * k, 3.0 * std::exp(-0.4 * 0.5 * k)});
  const DiameterFit fit = diameter_series(s, 0.5);
  EXPECT_NEAR(fit.slope, -0.4, 1e-12);
  EXPECT_TRUE(fit.applicable);
  EXPECT_DOUBLE_EQ(fit.required, -0.25 + 0.05);
  EXPECT_TRUE(fit.pass);
  EXPECT_FALSE(diameter_series(s, 0.0).applicable);
  EXPECT_FALSE(diameter_series({{0, 1}, {1, 1}}, 0.5).applicable);
}
