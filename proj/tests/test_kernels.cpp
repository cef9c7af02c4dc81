#include <gtest/gtest.h>

#include <cmath>

#include "crowdflow/kernels.hpp"

using namespace crowdflow;

namespace {

// Composite Simpson rule on the support box, independent of the 400x400
// midpoint rule used for the normalization.
double simpson_mass(const Kernel& k, int n = 600) {
  Box s = k.support();
  auto w = [n](int i) { return (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0); };
  double hx = s.width() / n, hy = s.height() / n, sum = 0.0;
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j) sum += w(i) * w(j) * k({s.xmin + i * hx, s.ymin + j * hy});
  return sum * hx * hy / 9.0;
}

}  // namespace

TEST(Kernels, UnitMass) {
  EXPECT_NEAR(simpson_mass(Kernel::gauss_bump(0.5)), 1.0, 1e-6);
  EXPECT_NEAR(simpson_mass(Kernel::gauss_bump(0.05)), 1.0, 1e-6);
  EXPECT_NEAR(simpson_mass(Kernel::poly_bump(0.4)), 1.0, 1e-6);
  EXPECT_NEAR(simpson_mass(Kernel::poly_bump(0.1)), 1.0, 1e-6);
  EXPECT_NEAR(simpson_mass(Kernel::asymmetric_car(0.045, 0.0045)), 1.0, 1e-5);
}

TEST(Kernels, PolyBumpClosedFormMass) {
  // int_{-r}^{r} (1 - s^2/r^2)^3 ds = 32 r / 35
  const double r = 0.4;
  EXPECT_NEAR(Kernel::poly_bump(r).normalization(), std::pow(32.0 * r / 35.0, 2), 1e-9);
}

TEST(Kernels, VanishOutsideSupport) {
  Kernel g = Kernel::gauss_bump(0.5);
  EXPECT_EQ(g({0.5, 0.0}), 0.0);
  EXPECT_EQ(g({0.1, -0.6}), 0.0);
  EXPECT_GT(g({0.49, 0.0}), 0.0);
  Kernel car = Kernel::asymmetric_car(0.045, 0.0045);
  EXPECT_GT(car({0.03, 0.0}), 0.0);
  EXPECT_EQ(car({-0.01, 0.0}), 0.0);
  EXPECT_GT(car({-0.004, 0.0}), 0.0);
  EXPECT_EQ(car.support().xmin, -0.0045);
}

TEST(Kernels, GradientMatchesFiniteDifferences) {
  const double h = 1e-6;
  for (const Kernel& k : {Kernel::gauss_bump(0.5), Kernel::poly_bump(0.4), Kernel::asymmetric_car(0.045, 0.0045)}) {
    const double r = k.radius();
    for (Vec2 x : {Vec2{0.3 * r, 0.2 * r}, Vec2{-0.05 * r, 0.6 * r}, Vec2{0.7 * r, -0.4 * r}}) {
      Vec2 g = k.gradient(x);
      double fx = (k({x.x + h * r, x.y}) - k({x.x - h * r, x.y})) / (2.0 * h * r);
      double fy = (k({x.x, x.y + h * r}) - k({x.x, x.y - h * r})) / (2.0 * h * r);
      double scale = std::max(1.0, std::abs(fx) + std::abs(fy));
      EXPECT_NEAR(g.x, fx, 1e-5 * scale);
      EXPECT_NEAR(g.y, fy, 1e-5 * scale);
    }
  }
}

TEST(Kernels, SymmetricFamiliesAreEven) {
  Kernel g = Kernel::gauss_bump(0.3);
  EXPECT_DOUBLE_EQ(g({0.1, 0.2}), g({-0.1, -0.2}));
  EXPECT_DOUBLE_EQ(g({0.1, 0.2}), g({0.2, 0.1}));
  EXPECT_NEAR(g.gradient({0.0, 0.0}).x, 0.0, 1e-15);
}

TEST(Kernels, FamilyStrings) {
  for (auto f : {KernelFamily::gauss_bump, KernelFamily::poly_bump, KernelFamily::asymmetric_car})
    EXPECT_EQ(kernel_family_from_string(to_string(f)), f);
  EXPECT_THROW(kernel_family_from_string("boxcar"), ConfigError);
  EXPECT_THROW(Kernel::gauss_bump(0.0), ConfigError);
  EXPECT_THROW(Kernel::gauss_bump(-1.0), ConfigError);
}

TEST(CutoffBeta, Shape) {
  CutoffBeta b(0.1, 0.8);
  EXPECT_EQ(b(0.0), 1.0);
  EXPECT_EQ(b(0.1), 1.0);
  EXPECT_EQ(b(0.8), 0.0);
  EXPECT_EQ(b(2.0), 0.0);
  // midpoint: u = 1/2, exp(1 - 1/(3/4)) = exp(-1/3)
  EXPECT_NEAR(b(0.45), std::exp(-1.0 / 3.0), 1e-15);
  double prev = 1.0;
  for (int k = 0; k <= 100; ++k) {
    double v = b(0.1 + 0.7 * k / 100.0);
    EXPECT_LE(v, prev);
    EXPECT_GE(v, 0.0);
    prev = v;
  }
  EXPECT_THROW(CutoffBeta(0.5, 0.5), ConfigError);
  EXPECT_THROW(CutoffBeta(0.6, 0.5), ConfigError);
}

TEST(CutoffBeta, FollowTheLeaderU) {
  // u = 1 - beta_{H,10H}^K vanishes below H and reaches 1 at 10H
  CutoffBeta h(0.167, 1.67);
  auto u = [&](double xi) { return 1.0 - std::pow(h(xi), 50.0); };
  EXPECT_EQ(u(-1.0), 0.0);
  EXPECT_EQ(u(0.1), 0.0);
  EXPECT_EQ(u(1.7), 1.0);
  EXPECT_GT(u(0.5), 0.9);
}

TEST(Eta3, Profile) {
  EXPECT_EQ(eval_eta3(0.0, 0.15), 1.0);
  EXPECT_EQ(eval_eta3(0.15, 0.15), 0.0);
  EXPECT_EQ(eval_eta3(-0.2, 0.15), 0.0);
  EXPECT_NEAR(eval_eta3(0.1, 0.15), std::exp(-0.01 / (0.0225 - 0.01)), 1e-15);
}
