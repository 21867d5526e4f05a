#pragma once

#include <functional>
#include <vector>

namespace grd::interp {

enum class CurveKind { pchip, linear };

/// A one-dimensional interpolant over strictly increasing knots. For the
/// pchip kind, knot derivatives are fixed at construction by the
/// Fritsch-Carlson rule, so a monotone knot sequence yields a monotone
/// interpolant. Evaluation outside [front, back] is an error everywhere in
/// this module; callers clamp or refuse.
struct Curve1D {
  std::vector<double> knots_x;
  std::vector<double> knots_y;
  std::vector<double> derivatives;  // per knot; empty for the linear kind
  CurveKind kind = CurveKind::linear;
};

/// Monotone piecewise-cubic Hermite interpolant. Derivatives follow the
/// Fritsch-Carlson rule: the weighted harmonic mean of adjacent secant
/// slopes when they share a sign, zero otherwise, with the one-sided
/// three-point formula (clamped) at the ends. Affine data reproduces the
/// affine function exactly.
Curve1D pchip_fit(const std::vector<double>& xs, const std::vector<double>& ys);

/// Piecewise-linear interpolant through the knots.
Curve1D linear_curve(const std::vector<double>& xs,
                     const std::vector<double>& ys);

double eval(const Curve1D& curve, double x);

/// Inverse of a non-decreasing piecewise-linear curve. Flat spans are tilted
/// by 1e-9 of the value range before inversion so the inverse is a function;
/// exact for strictly increasing curves.
double invert_monotone(const Curve1D& curve, double y);

/// Exact closed-form integral over [lo, hi] (trapezoids for linear pieces,
/// quartic antiderivatives for cubic pieces).
double integrate(const Curve1D& curve, double lo, double hi);

/// Adaptive Simpson quadrature to an absolute tolerance; shared by the
/// codec-comparison integrals whose integrands are not piecewise
/// polynomial.
double adaptive_quadrature(const std::function<double(double)>& f, double lo,
                           double hi, double tolerance = 1e-10);

}  // namespace grd::interp
