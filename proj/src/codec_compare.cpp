#include "grd/codec_compare.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "grd/errors.hpp"

namespace grd::codec {

std::string to_string(Fitter fitter) {
  switch (fitter) {
    case Fitter::bd: return "bd";
    case Fitter::pchip: return "pchip";
    case Fitter::logistic: return "logistic";
    case Fitter::egrd: return "egrd";
  }
  return "bd";
}

std::string to_string(DrMode mode) {
  return mode == DrMode::exact ? "exact" : "log";
}

Fitter fitter_from_string(const std::string& name) {
  if (name == "bd") return Fitter::bd;
  if (name == "pchip") return Fitter::pchip;
  if (name == "logistic") return Fitter::logistic;
  if (name == "egrd") return Fitter::egrd;
  fail(ErrorKind::parse, "unknown fitter '" + name + "'");
}

DrMode dr_mode_from_string(const std::string& name) {
  if (name == "log") return DrMode::log_approx;
  if (name == "exact") return DrMode::exact;
  fail(ErrorKind::parse, "unknown bitrate-saving mode '" + name + "'");
}

namespace {

constexpr double kLn10 = 2.302585092994046;

double softplus(double t) {
  return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t)));
}

double sigmoid(double t) {
  if (t >= 0.0) {
    const double e = std::exp(-t);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double logistic_eval(const LogisticParams& p, double x) {
  return p.a + p.b * sigmoid(p.c * (x - p.d));
}

/// x such that logistic(x) = z; b and c must be nonzero and z inside (a, a+b).
double logistic_invert(const LogisticParams& p, double z) {
  if (p.b == 0.0 || p.c == 0.0) {
    fail(ErrorKind::domain, "logistic curve with b = 0 or c = 0 is not invertible");
  }
  const double ratio = p.b / (z - p.a) - 1.0;
  if (!(ratio > 0.0)) {
    fail(ErrorKind::domain,
         "quality " + std::to_string(z) + " outside the logistic range");
  }
  return p.d - std::log(ratio) / p.c;
}

double poly_eval(const std::array<double, 4>& c, double x) {
  return c[0] + x * (c[1] + x * (c[2] + x * c[3]));
}

double poly_integral(const std::array<double, 4>& c, double lo, double hi) {
  auto anti = [&](double x) {
    return x * (c[0] + x * (c[1] / 2.0 + x * (c[2] / 3.0 + x * c[3] / 4.0)));
  };
  return anti(hi) - anti(lo);
}

/// Cubic coefficients of Hermite segment i in absolute coordinates is
/// avoided; this evaluates segment i of `curve` at plain x (possibly
/// outside the segment, for end extension).
double hermite_segment_eval(const interp::Curve1D& curve, std::size_t i,
                            double x) {
  const double h = curve.knots_x[i + 1] - curve.knots_x[i];
  const double y0 = curve.knots_y[i], y1 = curve.knots_y[i + 1];
  const double slope = (y1 - y0) / h;
  double d0 = slope, c2 = 0.0, c3 = 0.0;
  if (curve.kind == interp::CurveKind::pchip) {
    d0 = curve.derivatives[i];
    const double d1 = curve.derivatives[i + 1];
    c2 = (3.0 * slope - 2.0 * d0 - d1) / h;
    c3 = (d0 + d1 - 2.0 * slope) / (h * h);
  }
  const double s = x - curve.knots_x[i];
  return y0 + s * (d0 + s * (c2 + s * c3));
}

double hermite_segment_integral(const interp::Curve1D& curve, std::size_t i,
                                double lo, double hi) {
  const double h = curve.knots_x[i + 1] - curve.knots_x[i];
  const double y0 = curve.knots_y[i], y1 = curve.knots_y[i + 1];
  const double slope = (y1 - y0) / h;
  double d0 = slope, c2 = 0.0, c3 = 0.0;
  if (curve.kind == interp::CurveKind::pchip) {
    d0 = curve.derivatives[i];
    const double d1 = curve.derivatives[i + 1];
    c2 = (3.0 * slope - 2.0 * d0 - d1) / h;
    c3 = (d0 + d1 - 2.0 * slope) / (h * h);
  }
  auto anti = [&](double x) {
    const double s = x - curve.knots_x[i];
    return s * (y0 + s * (d0 / 2.0 + s * (c2 / 3.0 + s * c3 / 4.0)));
  };
  return anti(hi) - anti(lo);
}

double piecewise_eval_extrapolated(const interp::Curve1D& curve, double x) {
  if (x < curve.knots_x.front()) {
    return hermite_segment_eval(curve, 0, x);
  }
  if (x > curve.knots_x.back()) {
    return hermite_segment_eval(curve, curve.knots_x.size() - 2, x);
  }
  return interp::eval(curve, x);
}

double piecewise_integral_extrapolated(const interp::Curve1D& curve,
                                       double lo, double hi) {
  const double front = curve.knots_x.front(), back = curve.knots_x.back();
  double total = 0.0;
  if (lo < front) {
    const double upper = std::min(hi, front);
    total += hermite_segment_integral(curve, 0, lo, upper);
  }
  const double mid_lo = std::max(lo, front), mid_hi = std::min(hi, back);
  if (mid_lo < mid_hi) total += interp::integrate(curve, mid_lo, mid_hi);
  if (hi > back) {
    const double lower = std::max(lo, back);
    total += hermite_segment_integral(curve, curve.knots_x.size() - 2, lower,
                                      hi);
  }
  return total;
}

}  // namespace

double FittedCurve::eval(double x, bool allow_extrapolation) const {
  const bool outside = x < domain_lo || x > domain_hi;
  if (outside && !allow_extrapolation) {
    fail(ErrorKind::domain,
         "query " + std::to_string(x) + " outside the fitted range [" +
             std::to_string(domain_lo) + ", " + std::to_string(domain_hi) +
             "]");
  }
  switch (form) {
    case Form::cubic:
      return poly_eval(poly, x);
    case Form::logistic:
      return logistic_eval(logistic, x);
    case Form::logistic_inverse:
      return logistic_invert(logistic, x);
    case Form::piecewise:
      if (curve.kind == interp::CurveKind::linear && outside) {
        fail(ErrorKind::domain,
             "the piecewise-linear eigen-model curve does not extrapolate");
      }
      return outside ? piecewise_eval_extrapolated(curve, x)
                     : interp::eval(curve, x);
  }
  fail(ErrorKind::structural, "unreachable curve form");
}

double FittedCurve::integrate(double lo, double hi,
                              bool allow_extrapolation) const {
  if (lo > hi) {
    fail(ErrorKind::invalid_argument, "integration bounds are reversed");
  }
  const bool outside = lo < domain_lo || hi > domain_hi;
  if (outside && !allow_extrapolation) {
    fail(ErrorKind::domain, "integration bounds outside the fitted range");
  }
  switch (form) {
    case Form::cubic:
      return poly_integral(poly, lo, hi);
    case Form::logistic: {
      const auto& p = logistic;
      if (p.c == 0.0) return (p.a + 0.5 * p.b) * (hi - lo);
      auto anti = [&](double x) {
        return p.a * x + p.b / p.c * softplus(p.c * (x - p.d));
      };
      return anti(hi) - anti(lo);
    }
    case Form::logistic_inverse:
      return interp::adaptive_quadrature(
          [&](double z) { return logistic_invert(logistic, z); }, lo, hi,
          1e-10);
    case Form::piecewise:
      if (curve.kind == interp::CurveKind::linear && outside) {
        fail(ErrorKind::domain,
             "the piecewise-linear eigen-model curve does not extrapolate");
      }
      return outside ? piecewise_integral_extrapolated(curve, lo, hi)
                     : interp::integrate(curve, lo, hi);
  }
  fail(ErrorKind::structural, "unreachable curve form");
}

namespace {

struct PreparedSamples {
  std::vector<double> x;  // in the fitter's bitrate space, increasing
  std::vector<double> z;
};

int min_sample_count(Fitter fitter) {
  return (fitter == Fitter::bd || fitter == Fitter::logistic) ? 4 : 2;
}

BitrateSpace space_of(Fitter fitter) {
  return fitter == Fitter::egrd ? BitrateSpace::linear_kbps
                                : BitrateSpace::log10_kbps;
}

PreparedSamples prepare(Fitter fitter, std::vector<RatePoint> samples) {
  if (static_cast<int>(samples.size()) < min_sample_count(fitter)) {
    fail(ErrorKind::invalid_argument,
         to_string(fitter) + " fitting needs at least " +
             std::to_string(min_sample_count(fitter)) + " points");
  }
  std::sort(samples.begin(), samples.end(),
            [](const RatePoint& a, const RatePoint& b) {
              return a.bitrate_kbps < b.bitrate_kbps;
            });
  PreparedSamples out;
  for (const auto& p : samples) {
    if (!(p.bitrate_kbps > 0.0) || !std::isfinite(p.bitrate_kbps) ||
        !std::isfinite(p.quality)) {
      fail(ErrorKind::invalid_argument,
           "rate-quality points must have positive finite bitrates");
    }
    const double x = space_of(fitter) == BitrateSpace::log10_kbps
                         ? std::log10(p.bitrate_kbps)
                         : p.bitrate_kbps;
    if (!out.x.empty() && x <= out.x.back()) {
      fail(ErrorKind::invalid_argument,
           "duplicate bitrate " + std::to_string(p.bitrate_kbps) +
               "; bitrates must be distinct");
    }
    out.x.push_back(x);
    out.z.push_back(p.quality);
  }
  return out;
}

bool knots_monotone(const std::vector<double>& ys) {
  bool up = true, down = true;
  for (std::size_t i = 1; i < ys.size(); ++i) {
    if (ys[i] < ys[i - 1]) up = false;
    if (ys[i] > ys[i - 1]) down = false;
  }
  return up || down;
}

/// Whether the cubic's derivative keeps one sign on [lo, hi].
bool cubic_monotone_on(const std::array<double, 4>& c, double lo, double hi) {
  auto deriv = [&](double x) {
    return c[1] + x * (2.0 * c[2] + x * 3.0 * c[3]);
  };
  double dmin = std::min(deriv(lo), deriv(hi));
  double dmax = std::max(deriv(lo), deriv(hi));
  if (c[3] != 0.0) {
    const double vertex = -c[2] / (3.0 * c[3]);
    if (vertex > lo && vertex < hi) {
      dmin = std::min(dmin, deriv(vertex));
      dmax = std::max(dmax, deriv(vertex));
    }
  }
  const double scale = std::max({std::abs(dmin), std::abs(dmax), 1.0});
  return !(dmin < -1e-9 * scale && dmax > 1e-9 * scale);
}

FittedCurve fit_cubic(const PreparedSamples& s, bool is_dr) {
  const auto n = static_cast<Eigen::Index>(s.x.size());
  Eigen::MatrixXd vander(n, 4);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = s.x[static_cast<std::size_t>(i)];
    vander(i, 0) = 1.0;
    vander(i, 1) = x;
    vander(i, 2) = x * x;
    vander(i, 3) = x * x * x;
    rhs(i) = s.z[static_cast<std::size_t>(i)];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(vander);
  if (qr.rank() < 4) {
    fail(ErrorKind::invalid_argument,
         "degenerate cubic fit: abscissae do not span four degrees");
  }
  const Eigen::VectorXd coeff = qr.solve(rhs);

  FittedCurve fit;
  fit.form = FittedCurve::Form::cubic;
  fit.is_dr = is_dr;
  fit.domain_lo = s.x.front();
  fit.domain_hi = s.x.back();
  fit.poly = {coeff(0), coeff(1), coeff(2), coeff(3)};
  fit.diagnostics.monotone =
      cubic_monotone_on(fit.poly, fit.domain_lo, fit.domain_hi);
  double worst = 0.0;
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    worst = std::max(worst, std::abs(poly_eval(fit.poly, s.x[i]) - s.z[i]));
  }
  fit.diagnostics.max_abs_residual = worst;
  return fit;
}

FittedCurve fit_pchip(const PreparedSamples& s, bool is_dr) {
  FittedCurve fit;
  fit.form = FittedCurve::Form::piecewise;
  fit.is_dr = is_dr;
  fit.domain_lo = s.x.front();
  fit.domain_hi = s.x.back();
  fit.curve = interp::pchip_fit(s.x, s.z);
  fit.diagnostics.monotone = knots_monotone(s.z);
  fit.diagnostics.max_abs_residual = 0.0;  // interpolating
  return fit;
}

struct GaussNewtonResult {
  LogisticParams params;
  double sse = std::numeric_limits<double>::infinity();
  bool converged = false;
};

GaussNewtonResult logistic_gauss_newton(const PreparedSamples& s,
                                        LogisticParams p) {
  const std::size_t n = s.x.size();
  auto sse_of = [&](const LogisticParams& q) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = logistic_eval(q, s.x[i]) - s.z[i];
      sum += r * r;
    }
    return sum;
  };

  double mu = 1e-3;
  double sse = sse_of(p);
  bool converged = false;
  for (int iter = 0; iter < 500; ++iter) {
    Eigen::MatrixXd jac(n, 4);
    Eigen::VectorXd res(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = p.c * (s.x[i] - p.d);
      const double sig = sigmoid(t);
      const double dsig = sig * (1.0 - sig);
      const auto row = static_cast<Eigen::Index>(i);
      jac(row, 0) = 1.0;
      jac(row, 1) = sig;
      jac(row, 2) = p.b * dsig * (s.x[i] - p.d);
      jac(row, 3) = -p.b * p.c * dsig;
      res(row) = logistic_eval(p, s.x[i]) - s.z[i];
    }
    const Eigen::VectorXd gradient = jac.transpose() * res;
    if (gradient.cwiseAbs().maxCoeff() < 1e-10) {
      converged = true;
      break;
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd step =
        (jtj + mu * Eigen::MatrixXd::Identity(4, 4))
            .ldlt()
            .solve(-gradient);
    LogisticParams trial{p.a + step(0), p.b + step(1), p.c + step(2),
                         p.d + step(3)};
    const double trial_sse = sse_of(trial);
    if (std::isfinite(trial_sse) && trial_sse < sse) {
      p = trial;
      sse = trial_sse;
      mu = std::max(mu * 0.3, 1e-12);
      if (step.cwiseAbs().maxCoeff() < 1e-14) {
        converged = true;
        break;
      }
    } else {
      mu *= 2.0;
      if (mu > 1e12) break;
    }
  }
  return {p, sse, converged};
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double t = pos - std::floor(pos);
  return (1.0 - t) * sorted[lo] + t * sorted[hi];
}

FittedCurve fit_logistic(const PreparedSamples& s) {
  const double zmin = *std::min_element(s.z.begin(), s.z.end());
  const double zmax = *std::max_element(s.z.begin(), s.z.end());
  const double span = std::max(zmax - zmin, 1.0);
  const double width = std::max(s.x.back() - s.x.front(), 1e-9);
  const double q25 = quantile_sorted(s.x, 0.25);
  const double q50 = quantile_sorted(s.x, 0.5);
  const double q75 = quantile_sorted(s.x, 0.75);
  // Rising data gets a positive slope seed; falling data a negative one.
  const double direction = s.z.back() >= s.z.front() ? 1.0 : -1.0;

  const LogisticParams inits[5] = {
      {zmin - 0.05 * span, 1.1 * span, direction * 4.0 / width, q50},
      {zmin, span, direction * 2.0 / width, q25},
      {zmin, span, direction * 8.0 / width, q75},
      {zmin - 0.5 * span, 2.0 * span, direction * 1.0 / width, q50},
      {zmin, span, direction * 16.0 / width, q50},
  };

  GaussNewtonResult best;
  for (const auto& init : inits) {
    const GaussNewtonResult run = logistic_gauss_newton(s, init);
    if (run.sse < best.sse) best = run;
  }

  FittedCurve fit;
  fit.form = FittedCurve::Form::logistic;
  fit.domain_lo = s.x.front();
  fit.domain_hi = s.x.back();
  fit.logistic = best.params;
  fit.diagnostics.converged = best.converged;
  fit.diagnostics.monotone = best.params.b * best.params.c >= 0.0 ||
                             best.params.b == 0.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    worst = std::max(worst,
                     std::abs(logistic_eval(best.params, s.x[i]) - s.z[i]));
  }
  fit.diagnostics.max_abs_residual = worst;
  return fit;
}

/// Piecewise-linear interpolation weights of x on a knot grid.
struct LinearWeights {
  std::size_t left = 0;
  double t = 0.0;  // value = (1 - t) knot[left] + t knot[left + 1]
};

LinearWeights weights_on(const std::vector<double>& knots, double x) {
  if (x < knots.front() || x > knots.back()) {
    fail(ErrorKind::domain,
         "bitrate " + std::to_string(x) + " outside the model grid [" +
             std::to_string(knots.front()) + ", " +
             std::to_string(knots.back()) + "]");
  }
  auto it = std::upper_bound(knots.begin(), knots.end(), x);
  std::size_t i = static_cast<std::size_t>(it - knots.begin());
  if (i > 0) --i;
  if (i + 1 >= knots.size()) i = knots.size() - 2;
  const double t = (x - knots[i]) / (knots[i + 1] - knots[i]);
  return {i, t};
}

FittedCurve fit_egrd(const PreparedSamples& s, const FitContext& ctx) {
  if (ctx.rd_basis == nullptr) {
    fail(ErrorKind::invalid_argument,
         "the egrd fitter needs a trained 1-D rate-quality basis");
  }
  const RdBasis1D& rb = *ctx.rd_basis;
  const auto nb = static_cast<Eigen::Index>(rb.bitrates_kbps.size());
  const int n = std::min(static_cast<int>(s.x.size()), rb.max_components());

  const auto sc = static_cast<Eigen::Index>(s.x.size());
  Eigen::MatrixXd design(sc, n);
  Eigen::VectorXd rhs(sc);
  for (Eigen::Index i = 0; i < sc; ++i) {
    const LinearWeights w =
        weights_on(rb.bitrates_kbps, s.x[static_cast<std::size_t>(i)]);
    const auto j = static_cast<Eigen::Index>(w.left);
    design.row(i) = (1.0 - w.t) * rb.components.row(j).head(n) +
                    w.t * rb.components.row(j + 1).head(n);
    const double mean_at =
        (1.0 - w.t) * rb.mean(j) + w.t * rb.mean(j + 1);
    rhs(i) = s.z[static_cast<std::size_t>(i)] - mean_at;
  }

  qp::QpProblem problem;
  problem.hessian = design.transpose() * design;
  if (sc < n) {
    problem.hessian += 1e-10 * Eigen::MatrixXd::Identity(n, n);
  }
  problem.linear = -design.transpose() * rhs;
  problem.objective_constant = 0.5 * rhs.squaredNorm();

  // Monotone non-decreasing values, first point >= 0, last point <= 100.
  Eigen::MatrixXd g(nb - 1 + 2, n);
  Eigen::VectorXd h(nb - 1 + 2);
  for (Eigen::Index i = 0; i + 1 < nb; ++i) {
    g.row(i) = rb.components.row(i).head(n) -
               rb.components.row(i + 1).head(n);
    h(i) = rb.mean(i + 1) - rb.mean(i);
  }
  g.row(nb - 1) = -rb.components.row(0).head(n);
  h(nb - 1) = rb.mean(0);
  g.row(nb) = rb.components.row(nb - 1).head(n);
  h(nb) = 100.0 - rb.mean(nb - 1);
  problem.ineq_matrix = std::move(g);
  problem.ineq_bound = std::move(h);

  const qp::QpSolution solution = qp::solve_qp(problem, ctx.solver);
  Eigen::VectorXd values =
      rb.mean + rb.components.leftCols(n) * solution.coefficients;

  // Tilt so the curve is strictly increasing; the inverse is then exact.
  // The tilt must dominate the cancellation noise of quality-sized values
  // or the round trip through a near-flat segment amplifies rounding.
  const double range =
      std::max(values.maxCoeff() - values.minCoeff(), 1.0);
  const double eps = 1e-6 * range;
  std::vector<double> ys(static_cast<std::size_t>(nb));
  ys[0] = values(0);
  for (Eigen::Index i = 1; i < nb; ++i) {
    ys[static_cast<std::size_t>(i)] =
        std::max(values(i), ys[static_cast<std::size_t>(i - 1)] + eps);
  }

  FittedCurve fit;
  fit.form = FittedCurve::Form::piecewise;
  fit.bitrate_space = BitrateSpace::linear_kbps;
  fit.domain_lo = rb.bitrates_kbps.front();
  fit.domain_hi = rb.bitrates_kbps.back();
  fit.curve = interp::linear_curve(rb.bitrates_kbps, ys);
  fit.diagnostics.monotone = true;
  double worst = 0.0;
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    worst = std::max(worst,
                     std::abs(interp::eval(fit.curve, s.x[i]) - s.z[i]));
  }
  fit.diagnostics.max_abs_residual = worst;
  return fit;
}

}  // namespace

RdBasis1D train_rd_basis(const std::vector<GrdGrid>& corpus,
                         int n_components) {
  if (corpus.empty()) {
    fail(ErrorKind::invalid_argument, "training corpus is empty");
  }
  const AxisSpec& axes = corpus.front().axes;
  std::vector<Eigen::VectorXd> curves;
  curves.reserve(corpus.size() * axes.resolution_count());
  for (const auto& grid : corpus) {
    if (!grid.axes.same_labels(axes)) {
      fail(ErrorKind::axis_mismatch, "corpus grids live on differing axes");
    }
    for (Eigen::Index r = 0; r < grid.values.cols(); ++r) {
      curves.push_back(grid.values.col(r));
    }
  }
  basis::PcaResult core =
      basis::pca_train_vectors(curves, n_components);

  RdBasis1D rb;
  rb.bitrates_kbps = axes.bitrates_kbps;
  rb.mean = std::move(core.mean);
  rb.components = std::move(core.components);
  rb.eigenvalues = std::move(core.eigenvalues);
  rb.total_variance = core.total_variance;
  rb.training_count = static_cast<int>(curves.size());
  rb.truncated = core.truncated;
  return rb;
}

FittedCurve fit_rd(Fitter fitter, const std::vector<RatePoint>& samples,
                   const FitContext& ctx) {
  const PreparedSamples s = prepare(fitter, samples);
  switch (fitter) {
    case Fitter::bd: return fit_cubic(s, false);
    case Fitter::pchip: return fit_pchip(s, false);
    case Fitter::logistic: return fit_logistic(s);
    case Fitter::egrd: return fit_egrd(s, ctx);
  }
  fail(ErrorKind::structural, "unreachable fitter");
}

FittedCurve fit_dr(Fitter fitter, const std::vector<RatePoint>& samples,
                   const FittedCurve* rd, const FitContext& /*ctx*/) {
  const PreparedSamples s = prepare(fitter, samples);

  if (fitter == Fitter::bd || fitter == Fitter::pchip) {
    // Independent fit on the swapped data; this is the classical behaviour
    // and is deliberately not forced to invert fit_rd.
    std::vector<std::pair<double, double>> swapped(s.x.size());
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      swapped[i] = {s.z[i], s.x[i]};
    }
    std::sort(swapped.begin(), swapped.end());
    PreparedSamples t;
    for (const auto& [z, x] : swapped) {
      if (!t.x.empty() && z <= t.x.back()) {
        fail(ErrorKind::invalid_argument,
             "duplicate quality value " + std::to_string(z) +
                 "; the swapped fit needs distinct qualities");
      }
      t.x.push_back(z);
      t.z.push_back(x);
    }
    FittedCurve fit = fitter == Fitter::bd ? fit_cubic(t, true)
                                           : fit_pchip(t, true);
    fit.bitrate_space = BitrateSpace::log10_kbps;
    return fit;
  }

  if (rd == nullptr) {
    fail(ErrorKind::invalid_argument,
         to_string(fitter) +
             " derives the quality-rate curve by inverting the rate-quality "
             "fit; pass the fitted curve");
  }

  if (fitter == Fitter::logistic) {
    if (rd->form != FittedCurve::Form::logistic) {
      fail(ErrorKind::invalid_argument, "expected a logistic rate-quality fit");
    }
    if (rd->logistic.b == 0.0) {
      fail(ErrorKind::domain, "logistic curve with b = 0 is not invertible");
    }
    FittedCurve fit;
    fit.form = FittedCurve::Form::logistic_inverse;
    fit.bitrate_space = BitrateSpace::log10_kbps;
    fit.is_dr = true;
    fit.logistic = rd->logistic;
    const double zmin = *std::min_element(s.z.begin(), s.z.end());
    const double zmax = *std::max_element(s.z.begin(), s.z.end());
    fit.domain_lo = zmin;
    fit.domain_hi = zmax;
    fit.diagnostics = rd->diagnostics;
    return fit;
  }

  // egrd: the inverse of the strictly increasing piecewise-linear curve.
  if (rd->form != FittedCurve::Form::piecewise ||
      rd->curve.kind != interp::CurveKind::linear) {
    fail(ErrorKind::invalid_argument,
         "expected a piecewise-linear eigen-model rate-quality fit");
  }
  FittedCurve fit;
  fit.form = FittedCurve::Form::piecewise;
  fit.bitrate_space = BitrateSpace::linear_kbps;
  fit.is_dr = true;
  fit.curve = interp::linear_curve(rd->curve.knots_y, rd->curve.knots_x);
  fit.domain_lo = rd->curve.knots_y.front();
  fit.domain_hi = rd->curve.knots_y.back();
  fit.diagnostics = rd->diagnostics;
  return fit;
}

double delta_q(const FittedCurve& rd_a, const FittedCurve& rd_b, double lo,
               double hi, bool allow_extrapolation) {
  if (rd_a.bitrate_space != rd_b.bitrate_space) {
    fail(ErrorKind::invalid_argument,
         "quality-gain curves live in different bitrate spaces");
  }
  if (!(lo < hi)) {
    fail(ErrorKind::invalid_argument, "empty bitrate overlap");
  }
  const double ia = rd_a.integrate(lo, hi, allow_extrapolation);
  const double ib = rd_b.integrate(lo, hi, allow_extrapolation);
  return (ib - ia) / (hi - lo);
}

namespace {

/// Absolute line coefficients (intercept, slope) of segment i of a
/// piecewise-linear curve.
std::pair<double, double> line_of(const interp::Curve1D& curve,
                                  std::size_t i) {
  const double slope = (curve.knots_y[i + 1] - curve.knots_y[i]) /
                       (curve.knots_x[i + 1] - curve.knots_x[i]);
  return {curve.knots_y[i] - slope * curve.knots_x[i], slope};
}

/// Breakpoints of both curves inside [lo, hi], plus the bounds.
std::vector<double> merged_breakpoints(const interp::Curve1D& a,
                                       const interp::Curve1D& b, double lo,
                                       double hi) {
  std::vector<double> pts{lo, hi};
  for (double x : a.knots_x) {
    if (x > lo && x < hi) pts.push_back(x);
  }
  for (double x : b.knots_x) {
    if (x > lo && x < hi) pts.push_back(x);
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

std::size_t segment_index(const interp::Curve1D& curve, double x) {
  auto it = std::upper_bound(curve.knots_x.begin(), curve.knots_x.end(), x);
  std::size_t i = static_cast<std::size_t>(it - curve.knots_x.begin());
  if (i > 0) --i;
  if (i + 1 >= curve.knots_x.size()) i = curve.knots_x.size() - 2;
  return i;
}

/// Exact integral of (g_b - g_a) / g_a over [lo, hi] for piecewise-linear
/// g_a, g_b in linear bitrate.
double relative_gap_integral(const interp::Curve1D& ga,
                             const interp::Curve1D& gb, double lo,
                             double hi) {
  const std::vector<double> pts = merged_breakpoints(ga, gb, lo, hi);
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    const double u = pts[k], v = pts[k + 1];
    const double mid = 0.5 * (u + v);
    const auto [p0, p1] = line_of(ga, segment_index(ga, mid));
    const auto [q0, q1] = line_of(gb, segment_index(gb, mid));
    const double wa_u = p0 + p1 * u, wa_v = p0 + p1 * v;
    if (wa_u <= 0.0 || wa_v <= 0.0) {
      fail(ErrorKind::domain,
           "reference bitrate reaches zero inside the quality overlap");
    }
    const double d0 = q0 - p0, d1 = q1 - p1;
    if (p1 == 0.0) {
      total += (d0 * (v - u) + 0.5 * d1 * (v * v - u * u)) / p0;
    } else {
      total += d1 / p1 * (v - u) +
               (d0 * p1 - d1 * p0) / (p1 * p1) * std::log(wa_v / wa_u);
    }
  }
  return total;
}

/// Exact integral of log10(g) over [lo, hi] for piecewise-linear g.
double log10_integral(const interp::Curve1D& g, double lo, double hi) {
  std::vector<double> pts{lo, hi};
  for (double x : g.knots_x) {
    if (x > lo && x < hi) pts.push_back(x);
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  double total = 0.0;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    const double u = pts[k], v = pts[k + 1];
    const auto [p0, p1] = line_of(g, segment_index(g, 0.5 * (u + v)));
    const double wu = p0 + p1 * u, wv = p0 + p1 * v;
    if (wu <= 0.0 || wv <= 0.0) {
      fail(ErrorKind::domain, "bitrate reaches zero inside the overlap");
    }
    if (p1 == 0.0) {
      total += (v - u) * std::log(wu);
    } else {
      total += (wv * (std::log(wv) - 1.0) - wu * (std::log(wu) - 1.0)) / p1;
    }
  }
  return total / kLn10;
}

}  // namespace

double delta_r(const FittedCurve& dr_a, const FittedCurve& dr_b, double z_lo,
               double z_hi, DrMode mode, bool allow_extrapolation) {
  if (dr_a.bitrate_space != dr_b.bitrate_space) {
    fail(ErrorKind::invalid_argument,
         "bitrate-saving curves live in different bitrate spaces");
  }
  if (!(z_lo < z_hi)) {
    fail(ErrorKind::invalid_argument, "empty quality overlap");
  }
  const bool linear_space =
      dr_a.bitrate_space == BitrateSpace::linear_kbps;
  const double width = z_hi - z_lo;

  if (mode == DrMode::log_approx) {
    double gap;  // integral of log10 g_b - log10 g_a
    if (linear_space) {
      if (dr_a.form != FittedCurve::Form::piecewise ||
          dr_b.form != FittedCurve::Form::piecewise) {
        fail(ErrorKind::invalid_argument,
             "linear-space saving needs piecewise-linear curves");
      }
      gap = log10_integral(dr_b.curve, z_lo, z_hi) -
            log10_integral(dr_a.curve, z_lo, z_hi);
    } else {
      gap = dr_b.integrate(z_lo, z_hi, allow_extrapolation) -
            dr_a.integrate(z_lo, z_hi, allow_extrapolation);
    }
    return std::pow(10.0, gap / width) - 1.0;
  }

  // Exact mode: mean of (g_b - g_a) / g_a in linear bitrate.
  if (linear_space) {
    if (dr_a.form != FittedCurve::Form::piecewise ||
        dr_b.form != FittedCurve::Form::piecewise) {
      fail(ErrorKind::invalid_argument,
           "linear-space saving needs piecewise-linear curves");
    }
    return relative_gap_integral(dr_a.curve, dr_b.curve, z_lo, z_hi) / width;
  }
  // Log-space curves: (10^gb - 10^ga) / 10^ga = 10^(gb - ga) - 1.
  const double integral = interp::adaptive_quadrature(
      [&](double z) {
        const double ga = dr_a.eval(z, allow_extrapolation);
        const double gb = dr_b.eval(z, allow_extrapolation);
        return std::pow(10.0, gb - ga) - 1.0;
      },
      z_lo, z_hi, 1e-12 * std::max(width, 1.0));
  return integral / width;
}

namespace {

/// Quality window over which a fitted DR curve can actually be read:
/// piecewise curves stop at their knots, a logistic inverse needs its
/// argument strictly inside the sigmoid range. Outside global mode the
/// fitting window binds as well.
std::pair<double, double> usable_z_window(const FittedCurve& dr,
                                          bool global) {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  if (dr.form == FittedCurve::Form::piecewise) {
    lo = dr.curve.knots_x.front();
    hi = dr.curve.knots_x.back();
  } else if (dr.form == FittedCurve::Form::logistic_inverse) {
    const double margin = 1e-9 * std::abs(dr.logistic.b);
    lo = std::min(dr.logistic.a, dr.logistic.a + dr.logistic.b) + margin;
    hi = std::max(dr.logistic.a, dr.logistic.a + dr.logistic.b) - margin;
  }
  if (!global) {
    lo = std::max(lo, dr.domain_lo);
    hi = std::min(hi, dr.domain_hi);
  }
  return {lo, hi};
}

}  // namespace

CodecComparisonReport compare(const std::vector<RdSamplePair>& contents,
                              const CompareOptions& options) {
  if (contents.empty()) {
    fail(ErrorKind::invalid_argument, "no contents to compare");
  }
  if (options.global_range &&
      !(options.global_range->first > 0.0 &&
        options.global_range->first < options.global_range->second)) {
    fail(ErrorKind::invalid_argument,
         "global range must satisfy 0 < lo < hi");
  }

  CodecComparisonReport report;
  report.fitter = options.fitter;
  report.dr_mode = options.dr_mode;

  const bool log_space = space_of(options.fitter) == BitrateSpace::log10_kbps;
  double sum_q = 0.0, sum_r = 0.0;
  int used = 0;

  for (const auto& content : contents) {
    ContentResult result;
    result.content_id = content.content_id;

    const FittedCurve rd_a = fit_rd(options.fitter, content.codec_a,
                                    options.fit);
    const FittedCurve rd_b = fit_rd(options.fitter, content.codec_b,
                                    options.fit);
    const FittedCurve dr_a =
        fit_dr(options.fitter, content.codec_a, &rd_a, options.fit);
    const FittedCurve dr_b =
        fit_dr(options.fitter, content.codec_b, &rd_b, options.fit);
    result.rd_a = rd_a.diagnostics;
    result.rd_b = rd_b.diagnostics;
    result.dr_a = dr_a.diagnostics;
    result.dr_b = dr_b.diagnostics;

    // Overlap windows from sample extremes (not fitted-curve domains).
    const PreparedSamples sa = prepare(options.fitter, content.codec_a);
    const PreparedSamples sb = prepare(options.fitter, content.codec_b);
    double x_lo = std::max(sa.x.front(), sb.x.front());
    double x_hi = std::min(sa.x.back(), sb.x.back());
    double z_lo = std::max(*std::min_element(sa.z.begin(), sa.z.end()),
                           *std::min_element(sb.z.begin(), sb.z.end()));
    double z_hi = std::min(*std::max_element(sa.z.begin(), sa.z.end()),
                           *std::max_element(sb.z.begin(), sb.z.end()));

    const bool global = options.global_range.has_value();
    if (global) {
      x_lo = log_space ? std::log10(options.global_range->first)
                       : options.global_range->first;
      x_hi = log_space ? std::log10(options.global_range->second)
                       : options.global_range->second;
      // Flag contents whose fits must be read beyond their own domain;
      // the eigen-model curves span the whole grid and are never flagged
      // there.
      result.extrapolated =
          x_lo < std::max(rd_a.domain_lo, rd_b.domain_lo) - 1e-12 ||
          x_hi > std::min(rd_a.domain_hi, rd_b.domain_hi) + 1e-12;
      // The quality window follows the fitted curves at the range ends.
      z_lo = std::max(rd_a.eval(x_lo, true), rd_b.eval(x_lo, true));
      z_hi = std::min(rd_a.eval(x_hi, true), rd_b.eval(x_hi, true));
    }
    // Clip the quality window to what both DR curves can evaluate (the
    // eigen-model fit need not reach the extreme sample qualities).
    const auto [za_lo, za_hi] = usable_z_window(dr_a, global);
    const auto [zb_lo, zb_hi] = usable_z_window(dr_b, global);
    z_lo = std::max({z_lo, za_lo, zb_lo});
    z_hi = std::min({z_hi, za_hi, zb_hi});

    result.x_lo = x_lo;
    result.x_hi = x_hi;
    result.z_lo = z_lo;
    result.z_hi = z_hi;

    if (!(x_lo < x_hi) || !(z_lo < z_hi)) {
      result.no_overlap = true;
      report.contents.push_back(result);
      continue;
    }

    result.delta_q = delta_q(rd_a, rd_b, x_lo, x_hi, global);
    result.delta_r =
        delta_r(dr_a, dr_b, z_lo, z_hi, options.dr_mode, global);
    sum_q += result.delta_q;
    sum_r += result.delta_r;
    ++used;
    report.contents.push_back(result);
  }

  if (used == 0) {
    fail(ErrorKind::invalid_argument,
         "no content pair has overlapping sample ranges");
  }
  report.mean_delta_q = sum_q / static_cast<double>(used);
  report.mean_delta_r = sum_r / static_cast<double>(used);
  report.aggregated_count = used;
  return report;
}

}  // namespace grd::codec
