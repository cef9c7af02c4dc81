#pragma once

#include <cmath>
#include <string>

#include "crowdflow/common.hpp"
#include "crowdflow/mesh.hpp"

namespace crowdflow {

enum class KernelFamily { gauss_bump, poly_bump, asymmetric_car };

inline const char* to_string(KernelFamily f) {
  switch (f) {
    case KernelFamily::gauss_bump: return "gauss_bump";
    case KernelFamily::poly_bump: return "poly_bump";
    case KernelFamily::asymmetric_car: return "asymmetric_car";
  }
  return "?";
}

inline KernelFamily kernel_family_from_string(const std::string& s) {
  if (s == "gauss_bump") return KernelFamily::gauss_bump;
  if (s == "poly_bump") return KernelFamily::poly_bump;
  if (s == "asymmetric_car") return KernelFamily::asymmetric_car;
  throw ConfigError("unknown kernel family '" + s + "'");
}

/// One-dimensional compactly supported bump on (-radius, radius).
struct BumpProfile {
  enum class Shape { gauss, poly };
  Shape shape = Shape::gauss;
  double radius = 1.0;
  double sharpness = 5.0;

  double value(double s) const {
    const double r2 = radius * radius;
    const double s2 = s * s;
    if (shape == Shape::poly) {
      if (s2 >= r2) return 0.0;
      double u = 1.0 - s2 / r2;
      return u * u * u;
    }
    if (s2 >= r2 * (1.0 - 1e-12)) return 0.0;
    return std::exp(-sharpness * s2 / (r2 - s2));
  }

  double derivative(double s) const {
    const double r2 = radius * radius;
    const double s2 = s * s;
    if (shape == Shape::poly) {
      if (s2 >= r2) return 0.0;
      double u = 1.0 - s2 / r2;
      return -6.0 * s / r2 * u * u;
    }
    if (s2 >= r2 * (1.0 - 1e-12)) return 0.0;
    double den = r2 - s2;
    return std::exp(-sharpness * s2 / den) * (-2.0 * sharpness * s * r2 / (den * den));
  }
};

/// Separable mollifier eta(x) = a(x1) b(x2) / Z with unit mass. The car
/// family uses a shorter backward reach in x1.
class Kernel {
 public:
  static Kernel gauss_bump(double radius, double sharpness = 5.0) {
    check_radius(radius, "gauss_bump radius");
    if (!(sharpness > 0.0)) throw ConfigError("gauss_bump sharpness must be positive");
    BumpProfile p{BumpProfile::Shape::gauss, radius, sharpness};
    return Kernel(KernelFamily::gauss_bump, p, p, p);
  }

  static Kernel poly_bump(double radius) {
    check_radius(radius, "poly_bump radius");
    BumpProfile p{BumpProfile::Shape::poly, radius, 0.0};
    return Kernel(KernelFamily::poly_bump, p, p, p);
  }

  static Kernel asymmetric_car(double radius, double radius_back, double sharpness = 5.0) {
    check_radius(radius, "asymmetric_car radius");
    check_radius(radius_back, "asymmetric_car radius_back");
    BumpProfile fwd{BumpProfile::Shape::gauss, radius, sharpness};
    BumpProfile back{BumpProfile::Shape::gauss, radius_back, sharpness};
    return Kernel(KernelFamily::asymmetric_car, fwd, back, fwd);
  }

  static Kernel make(KernelFamily family, double radius, double radius_back, double sharpness) {
    switch (family) {
      case KernelFamily::gauss_bump: return gauss_bump(radius, sharpness);
      case KernelFamily::poly_bump: return poly_bump(radius);
      case KernelFamily::asymmetric_car: return asymmetric_car(radius, radius_back, sharpness);
    }
    throw ConfigError("bad kernel family");
  }

  KernelFamily family() const { return family_; }
  double radius() const { return fwd_.radius; }
  double radius_back() const { return back_.radius; }
  double sharpness() const { return fwd_.sharpness; }
  double normalization() const { return norm_; }

  /// Offsets x with eta(x) possibly nonzero lie in this box.
  Box support() const { return {-back_.radius, fwd_.radius, -y_.radius, y_.radius}; }

  double factor_x(double s) const { return s > 0.0 ? fwd_.value(s) : back_.value(s); }
  double factor_x_derivative(double s) const {
    return s > 0.0 ? fwd_.derivative(s) : back_.derivative(s);
  }
  double factor_y(double s) const { return y_.value(s); }
  double factor_y_derivative(double s) const { return y_.derivative(s); }

  /// Unnormalized product a(x1) b(x2).
  double raw(Vec2 x) const { return factor_x(x.x) * factor_y(x.y); }
  double operator()(Vec2 x) const { return raw(x) / norm_; }
  Vec2 gradient(Vec2 x) const {
    return {factor_x_derivative(x.x) * factor_y(x.y) / norm_,
            factor_x(x.x) * factor_y_derivative(x.y) / norm_};
  }

 private:
  Kernel(KernelFamily f, BumpProfile fwd, BumpProfile back, BumpProfile y)
      : family_(f), fwd_(fwd), back_(back), y_(y) {
    // Midpoint rule on a 400 x 400 grid over the support box.
    constexpr int n = 400;
    Box s = support();
    double hx = s.width() / n, hy = s.height() / n;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      double x = s.xmin + (i + 0.5) * hx;
      double row = 0.0;
      double ax = factor_x(x);
      for (int j = 0; j < n; ++j) row += ax * factor_y(s.ymin + (j + 0.5) * hy);
      sum += row;
    }
    norm_ = sum * hx * hy;
  }

  static void check_radius(double r, const char* what) {
    if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError(std::string(what) + " must be positive");
  }

  KernelFamily family_;
  BumpProfile fwd_, back_, y_;
  double norm_ = 1.0;
};

inline double eval_kernel(const Kernel& k, Vec2 x) { return k(x); }
inline Vec2 eval_kernel_grad(const Kernel& k, Vec2 x) { return k.gradient(x); }

/// Smooth cutoff: 1 below a1, 0 above a2, exp(1 - 1/(1 - u^2)) in between.
class CutoffBeta {
 public:
  CutoffBeta() = default;
  CutoffBeta(double a1, double a2) : a1_(a1), a2_(a2) {
    if (!(a1 < a2)) throw ConfigError("cutoff requires a1 < a2");
  }
  double a1() const { return a1_; }
  double a2() const { return a2_; }

  double operator()(double z) const {
    if (z <= a1_) return 1.0;
    if (z >= a2_) return 0.0;
    double u = (z - a1_) / (a2_ - a1_);
    double d = 1.0 - u * u;
    if (d <= 0.0) return 0.0;
    return std::exp(1.0 - 1.0 / d);
  }

 private:
  double a1_ = 0.0;
  double a2_ = 1.0;
};

inline double eval_beta(const CutoffBeta& b, double z) { return b(z); }

/// exp(-z^2 / (r^2 - z^2)) on |z| < r, zero elsewhere.
inline double eval_eta3(double z, double r) {
  const double r2 = r * r, z2 = z * z;
  if (z2 >= r2 * (1.0 - 1e-12)) return 0.0;
  return std::exp(-z2 / (r2 - z2));
}

}  // namespace crowdflow
