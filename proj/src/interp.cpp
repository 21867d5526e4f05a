#include "grd/interp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "grd/errors.hpp"

namespace grd::interp {

namespace {

void check_knots(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() < 2) {
    fail(ErrorKind::invalid_argument, "a curve needs at least 2 knots");
  }
  if (xs.size() != ys.size()) {
    fail(ErrorKind::invalid_argument, "knot coordinate lists differ in length");
  }
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) {
      fail(ErrorKind::invalid_argument, "knots must be finite");
    }
    if (i > 0 && xs[i] <= xs[i - 1]) {
      fail(ErrorKind::invalid_argument,
           "knot abscissae must be strictly increasing");
    }
  }
}

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

/// Segment index i such that x lies in [x_i, x_{i+1}]; x must be in domain.
std::size_t segment_of(const Curve1D& curve, double x) {
  if (x < curve.knots_x.front() || x > curve.knots_x.back()) {
    fail(ErrorKind::domain,
         "x = " + std::to_string(x) + " outside the curve domain [" +
             std::to_string(curve.knots_x.front()) + ", " +
             std::to_string(curve.knots_x.back()) + "]");
  }
  auto it = std::upper_bound(curve.knots_x.begin(), curve.knots_x.end(), x);
  std::size_t i = static_cast<std::size_t>(it - curve.knots_x.begin());
  if (i > 0) --i;
  if (i + 1 >= curve.knots_x.size()) i = curve.knots_x.size() - 2;
  return i;
}

/// Cubic coefficients of segment i in local coordinates s = x - x_i:
/// p(s) = c0 + c1 s + c2 s^2 + c3 s^3.
struct SegmentPoly {
  double c0, c1, c2, c3;
};

SegmentPoly segment_poly(const Curve1D& curve, std::size_t i) {
  const double h = curve.knots_x[i + 1] - curve.knots_x[i];
  const double y0 = curve.knots_y[i];
  const double y1 = curve.knots_y[i + 1];
  const double slope = (y1 - y0) / h;
  if (curve.kind == CurveKind::linear) {
    return {y0, slope, 0.0, 0.0};
  }
  const double d0 = curve.derivatives[i];
  const double d1 = curve.derivatives[i + 1];
  const double c2 = (3.0 * slope - 2.0 * d0 - d1) / h;
  const double c3 = (d0 + d1 - 2.0 * slope) / (h * h);
  return {y0, d0, c2, c3};
}

}  // namespace

Curve1D pchip_fit(const std::vector<double>& xs,
                  const std::vector<double>& ys) {
  check_knots(xs, ys);
  const std::size_t n = xs.size();
  std::vector<double> h(n - 1), delta(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = xs[i + 1] - xs[i];
    delta[i] = (ys[i + 1] - ys[i]) / h[i];
  }

  std::vector<double> d(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (sign_of(delta[i - 1]) * sign_of(delta[i]) > 0) {
      const double w1 = 2.0 * h[i] + h[i - 1];
      const double w2 = h[i] + 2.0 * h[i - 1];
      d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
    }
  }

  auto endpoint = [](double h0, double h1, double d0, double d1) {
    double der = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (sign_of(der) != sign_of(d0)) {
      der = 0.0;
    } else if (sign_of(d0) != sign_of(d1) && std::abs(der) > 3.0 * std::abs(d0)) {
      der = 3.0 * d0;
    }
    return der;
  };
  if (n == 2) {
    d[0] = d[1] = delta[0];
  } else {
    d[0] = endpoint(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = endpoint(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
  }

  return Curve1D{xs, ys, std::move(d), CurveKind::pchip};
}

Curve1D linear_curve(const std::vector<double>& xs,
                     const std::vector<double>& ys) {
  check_knots(xs, ys);
  return Curve1D{xs, ys, {}, CurveKind::linear};
}

double eval(const Curve1D& curve, double x) {
  // Knot queries return the stored ordinate exactly.
  auto it = std::lower_bound(curve.knots_x.begin(), curve.knots_x.end(), x);
  if (it != curve.knots_x.end() && *it == x) {
    return curve.knots_y[static_cast<std::size_t>(it - curve.knots_x.begin())];
  }
  const std::size_t i = segment_of(curve, x);
  const SegmentPoly p = segment_poly(curve, i);
  const double s = x - curve.knots_x[i];
  return p.c0 + s * (p.c1 + s * (p.c2 + s * p.c3));
}

double invert_monotone(const Curve1D& curve, double y) {
  if (curve.kind != CurveKind::linear) {
    fail(ErrorKind::invalid_argument,
         "inversion is defined for piecewise-linear curves only");
  }
  const std::size_t n = curve.knots_y.size();
  double lo = curve.knots_y.front(), hi = curve.knots_y.front();
  for (double v : curve.knots_y) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (curve.knots_y[i] < curve.knots_y[i - 1]) {
      fail(ErrorKind::invalid_argument,
           "inversion needs non-decreasing knot values");
    }
  }
  if (y < curve.knots_y.front() || y > curve.knots_y.back()) {
    fail(ErrorKind::domain,
         "y = " + std::to_string(y) + " outside the curve range");
  }

  // Tilt flat spans so every segment has positive slope.
  const double eps = 1e-9 * std::max(hi - lo, 1.0);
  std::vector<double> tilted = curve.knots_y;
  for (std::size_t i = 1; i < n; ++i) {
    if (tilted[i] <= tilted[i - 1]) tilted[i] = tilted[i - 1] + eps;
  }

  const double yq = std::min(y, tilted.back());
  auto it = std::upper_bound(tilted.begin(), tilted.end(), yq);
  std::size_t i = static_cast<std::size_t>(it - tilted.begin());
  if (i > 0) --i;
  if (i + 1 >= n) i = n - 2;
  const double y0 = tilted[i], y1 = tilted[i + 1];
  const double x0 = curve.knots_x[i], x1 = curve.knots_x[i + 1];
  const double t = (yq - y0) / (y1 - y0);
  return x0 + t * (x1 - x0);
}

double integrate(const Curve1D& curve, double lo, double hi) {
  if (lo > hi) {
    fail(ErrorKind::invalid_argument, "integration bounds are reversed");
  }
  if (lo < curve.knots_x.front() || hi > curve.knots_x.back()) {
    fail(ErrorKind::domain, "integration bounds outside the curve domain");
  }
  if (lo == hi) return 0.0;

  double total = 0.0;
  std::size_t i = segment_of(curve, lo);
  double a = lo;
  while (a < hi) {
    const double seg_end = curve.knots_x[i + 1];
    const double b = std::min(hi, seg_end);
    const SegmentPoly p = segment_poly(curve, i);
    auto anti = [&](double x) {
      const double s = x - curve.knots_x[i];
      return s * (p.c0 + s * (p.c1 / 2.0 + s * (p.c2 / 3.0 + s * p.c3 / 4.0)));
    };
    total += anti(b) - anti(a);
    a = b;
    ++i;
  }
  return total;
}

namespace {

double simpson(double a, double fa, double b, double fb, double fm) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_step(const std::function<double(double)>& f, double a,
                     double fa, double b, double fb, double m, double fm,
                     double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(a, fa, m, fm, flm);
  const double right = simpson(m, fm, b, fb, frm);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return adaptive_step(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1) +
         adaptive_step(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1);
}

}  // namespace

double adaptive_quadrature(const std::function<double(double)>& f, double lo,
                           double hi, double tolerance) {
  if (lo > hi) {
    fail(ErrorKind::invalid_argument, "integration bounds are reversed");
  }
  if (lo == hi) return 0.0;
  const double m = 0.5 * (lo + hi);
  const double flo = f(lo), fhi = f(hi), fm = f(m);
  const double whole = simpson(lo, flo, hi, fhi, fm);
  return adaptive_step(f, lo, flo, hi, fhi, m, fm, whole, tolerance, 48);
}

}  // namespace grd::interp
