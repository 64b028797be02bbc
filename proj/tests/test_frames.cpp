#include "mcflab/mcflab.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace mcflab;

namespace {

DifferentialSample random_sample(int m, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  DifferentialSample s{Mat(2, m), app::detail::random_spd(m, rng), app::detail::random_spd(2, rng)};
  for (int a = 0; a < 2; ++a)
    for (int i = 0; i < m; ++i) s.J(a, i) = nd(rng);
  return s;
}

// Singular values from the generalized eigenproblem J^T gN J v = s^2 gM v.
std::pair<double, double> eigen_singular_values(const DifferentialSample& s) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(s.J.transpose() * s.gN * s.J, s.gM, Eigen::EigenvaluesOnly);
  const Vec ev = es.eigenvalues();
  const int m = static_cast<int>(ev.size());
  return {std::sqrt(std::max(0.0, ev(m - 1))), std::sqrt(std::max(0.0, ev(m - 2)))};
}

}  // namespace

TEST(PValue, KnownValues) {
  EXPECT_DOUBLE_EQ(p_value(0.0, 0.0), 2.0);
  EXPECT_DOUBLE_EQ(p_value(1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(p_value(2.0, 2.0), -1.2);
  EXPECT_DOUBLE_EQ(p_value(0.5, 0.5), 1.2);
  EXPECT_DOUBLE_EQ(p_value(3.0, 0.0), 0.2);
  EXPECT_TRUE(area_decreasing_status(0.9, 1.1).strictly_decreasing);
  EXPECT_FALSE(area_decreasing_status(1.0, 1.0).strictly_decreasing);
  EXPECT_FALSE(area_decreasing_status(2.0, 2.0).strictly_decreasing);
}

TEST(PValue, SignMatchesAreaDecreasing) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  for (int k = 0; k < 10000; ++k) {
    const double l = u(rng), m = u(rng);
    const double p = p_value(l, m);
    EXPECT_EQ(p > 0.0, l * m < 1.0);
    EXPECT_LE(p, 2.0);
    EXPECT_GE(p, -2.0);
  }
}

TEST(SvdFrame, SingularValuesAgreeWithGeneralizedEigenproblem) {
  std::mt19937_64 rng(12);
  for (int k = 0; k < 500; ++k) {
    const DifferentialSample s = random_sample(2 + k % 4, rng);
    const SVDFrame fr = build_svd_frame(s);
    const auto [l, u] = eigen_singular_values(s);
    EXPECT_NEAR(fr.lambda, l, 1e-10 * (1.0 + l));
    EXPECT_NEAR(fr.mu, u, 1e-10 * (1.0 + l));
    EXPECT_GE(fr.lambda, fr.mu);
  }
}

TEST(SvdFrame, FrameIdentitiesHoldOnRandomSamples) {
  std::mt19937_64 rng(13);
  for (int k = 0; k < 1000; ++k) {
    DifferentialSample s = random_sample(2 + k % 4, rng);
    if (k % 3 == 0) s.J.row(1) = 0.3 * s.J.row(0);  // rank one
    const SVDFrame fr = build_svd_frame(s);
    EXPECT_LT(frame_residual(s, fr).max(), 1e-10) << "sample " << k;
  }
}

TEST(SvdFrame, DegenerateDifferentials) {
  std::mt19937_64 rng(14);
  DifferentialSample s = random_sample(3, rng);
  s.J.setZero();
  SVDFrame fr = build_svd_frame(s);
  EXPECT_EQ(fr.lambda, 0.0);
  EXPECT_EQ(fr.p, 2.0);
  EXPECT_LT(frame_residual(s, fr).max(), 1e-12);
  // equal singular values: any orthonormal basis of the top space works
  s = {Mat::Identity(2, 2), Mat::Identity(2, 2), Mat::Identity(2, 2)};
  fr = build_svd_frame(s);
  EXPECT_DOUBLE_EQ(fr.lambda, 1.0);
  EXPECT_DOUBLE_EQ(fr.mu, 1.0);
  EXPECT_LT(frame_residual(s, fr).max(), 1e-14);
}

TEST(SvdFrame, RejectsBadInput) {
  EXPECT_THROW(build_svd_frame({Mat::Zero(2, 1), Mat::Identity(1, 1), Mat::Identity(2, 2)}), ConfigurationError);
  EXPECT_THROW(build_svd_frame({Mat::Zero(2, 2), -Mat::Identity(2, 2), Mat::Identity(2, 2)}), DegenerateMetricError);
  EXPECT_THROW(build_svd_frame({Mat::Zero(2, 3), Mat::Identity(2, 2), Mat::Identity(2, 2)}), ConfigurationError);
}

TEST(SvdFrame, SingularValuesAreChartInvariant) {
  // y = B y', x = A x' changes J to B^{-1} J A, g_M to A^T g_M A, g_N to B^T g_N B
  std::mt19937_64 rng(15);
  std::normal_distribution<double> nd;
  for (int k = 0; k < 200; ++k) {
    const int m = 2 + k % 3;
    const DifferentialSample s = random_sample(m, rng);
    Mat A = Mat::Identity(m, m), B = Mat::Identity(2, 2);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) A(i, j) += 0.3 * nd(rng);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) B(i, j) += 0.3 * nd(rng);
    if (std::abs(A.determinant()) < 0.1 || std::abs(B.determinant()) < 0.1) continue;
    const DifferentialSample t{B.inverse() * s.J * A, A.transpose() * s.gM * A, B.transpose() * s.gN * B};
    const auto [l0, u0] = singular_values(s);
    const auto [l1, u1] = singular_values(t);
    EXPECT_NEAR(l0, l1, 1e-9 * (1.0 + l0));
    EXPECT_NEAR(u0, u1, 1e-9 * (1.0 + l0));
  }
}

TEST(Identities, RandomizedSuitePasses) {
  const app::IdentityReport r = app::run_identities(2000, 99);
  for (const auto& [name, e] : r.errors) EXPECT_LE(e, 1e-10) << name;
  EXPECT_TRUE(r.pass);
  EXPECT_GT(r.area_decreasing_samples, 900);
}

TEST(Identities, RequiresSamples) { EXPECT_THROW(app::run_identities(0, 1), ConfigurationError); }

TEST(Hopf, SingularValuesAreTwoAndTwo) {
  const ChartManifold S3 = hopf_s3();
  const ChartManifold S2 = round_sphere(2);
  const app::HopfReport r = app::hopf_singular_values(S3, S2, 300, 3);
  EXPECT_TRUE(r.pass);
  EXPECT_LT(r.max_deviation, 1e-10);
  EXPECT_NEAR(r.p, -1.2, 1e-12);
}

TEST(Hopf, ChartMapIsARiemannianSubmersionUpToScale) {
  // (1/2) dH is a Riemannian submersion onto the unit sphere: J g_M^{-1} J^T = 4 g_N^{-1}
  std::mt19937_64 rng(16);
  const ChartManifold S3 = hopf_s3();
  const ChartManifold S2 = round_sphere(2);
  const Mat J = app::hopf_jacobian();
  for (int k = 0; k < 50; ++k) {
    Vec x(3);
    x << std::uniform_real_distribution<double>(0.05, 1.5)(rng), 1.0, 2.0;
    Vec y(2);
    y << 2.0 * x(0), x(1) - x(2);
    const Mat lhs = J * S3.metric_at(x).inverse() * J.transpose();
    EXPECT_NEAR((lhs - 4.0 * S2.metric_at(y).inverse()).cwiseAbs().maxCoeff(), 0.0, 1e-12);
  }
}
