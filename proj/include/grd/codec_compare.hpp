#pragma once

#include <Eigen/Core>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "grd/basis.hpp"
#include "grd/grid.hpp"
#include "grd/ingest.hpp"
#include "grd/interp.hpp"
#include "grd/qp.hpp"

namespace grd::codec {

enum class Fitter { bd, pchip, logistic, egrd };
enum class DrMode { log_approx, exact };

std::string to_string(Fitter fitter);
std::string to_string(DrMode mode);
Fitter fitter_from_string(const std::string& name);
DrMode dr_mode_from_string(const std::string& name);

/// Per-fitter bitrate representation: the BD, Hermite and logistic fitters
/// work in log10 kbps, the eigen-model fitter in plain kbps.
enum class BitrateSpace { log10_kbps, linear_kbps };

/// z = a + b / (1 + exp(-c (x - d))).
struct LogisticParams {
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
};

struct FitDiagnostics {
  bool monotone = true;       // derivative keeps one sign on the fit range
  bool converged = true;      // nonlinear fits only; false => flagged fallback
  double max_abs_residual = 0.0;  // worst |fit - sample| at the inputs
};

/// An evaluable fitted curve. Rate-quality (RD) curves map bitrate (in
/// `bitrate_space`) to quality; quality-rate (DR) curves map quality to
/// bitrate (in `bitrate_space`). Evaluation and integration outside
/// [domain_lo, domain_hi] require allow_extrapolation and follow each
/// form's natural extension (polynomials and logistics by formula,
/// Hermite pieces by extending the end segments); the piecewise-linear
/// eigen-model curves never extrapolate.
struct FittedCurve {
  enum class Form { cubic, piecewise, logistic, logistic_inverse };

  Form form = Form::piecewise;
  BitrateSpace bitrate_space = BitrateSpace::log10_kbps;
  bool is_dr = false;
  double domain_lo = 0.0;
  double domain_hi = 0.0;

  std::array<double, 4> poly{};    // Form::cubic, c0 + c1 x + c2 x^2 + c3 x^3
  interp::Curve1D curve;           // Form::piecewise
  LogisticParams logistic;         // logistic forms

  FitDiagnostics diagnostics;

  double eval(double x, bool allow_extrapolation = false) const;
  double integrate(double lo, double hi,
                   bool allow_extrapolation = false) const;
};

/// The 1-D rate-quality model for the eigen fitter: mean curve and
/// orthonormal components over a bitrate grid, learned from the
/// per-resolution curves of a surface corpus.
struct RdBasis1D {
  std::vector<double> bitrates_kbps;
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;
  Eigen::VectorXd eigenvalues;
  double total_variance = 0.0;
  int training_count = 0;  // curves, not surfaces
  bool truncated = false;

  int max_components() const { return static_cast<int>(components.cols()); }
};

/// Pools every per-resolution bitrate curve of the corpus and runs PCA.
RdBasis1D train_rd_basis(const std::vector<GrdGrid>& corpus, int n_components);

struct FitContext {
  const RdBasis1D* rd_basis = nullptr;  // required by Fitter::egrd
  qp::SolverSettings solver;
};

/// Fits the rate-quality curve of one codec from measured points. The BD
/// fitter is a least-squares cubic (interpolating at exactly four points),
/// PCHIP the monotone Hermite interpolant, logistic a damped Gauss-Newton
/// fit with five deterministic multi-starts, and egrd a
/// monotonicity-constrained reconstruction over the basis grid followed by
/// linear interpolation.
FittedCurve fit_rd(Fitter fitter, const std::vector<RatePoint>& samples,
                   const FitContext& ctx = {});

/// Fits the quality-rate curve. BD and PCHIP fit the swapped data
/// independently (the classical approach, which need not invert fit_rd);
/// logistic and egrd invert the given rate-quality curve analytically /
/// piecewise, so `rd` is required for them.
FittedCurve fit_dr(Fitter fitter, const std::vector<RatePoint>& samples,
                   const FittedCurve* rd = nullptr,
                   const FitContext& ctx = {});

/// Mean quality gain of codec B over codec A on [lo, hi] (in the curves'
/// bitrate space).
double delta_q(const FittedCurve& rd_a, const FittedCurve& rd_b, double lo,
               double hi, bool allow_extrapolation = false);

/// Mean bitrate change of codec B against codec A over the quality interval
/// [z_lo, z_hi]. log_approx exponentiates the mean log10-bitrate gap;
/// exact averages the relative change (g_B - g_A) / g_A, converting
/// log-space curves through 10^g.
double delta_r(const FittedCurve& dr_a, const FittedCurve& dr_b, double z_lo,
               double z_hi, DrMode mode, bool allow_extrapolation = false);

/// Sampled rate-quality points of one source content under two codecs.
struct RdSamplePair {
  std::string content_id;
  std::vector<RatePoint> codec_a;
  std::vector<RatePoint> codec_b;
};

struct ContentResult {
  std::string content_id;
  bool no_overlap = false;
  bool extrapolated = false;
  double delta_q = 0.0;
  double delta_r = 0.0;
  double x_lo = 0.0, x_hi = 0.0;  // bitrate overlap, in the fitter's space
  double z_lo = 0.0, z_hi = 0.0;  // quality overlap
  FitDiagnostics rd_a, rd_b, dr_a, dr_b;
};

struct CodecComparisonReport {
  Fitter fitter = Fitter::bd;
  DrMode dr_mode = DrMode::log_approx;
  std::vector<ContentResult> contents;
  double mean_delta_q = 0.0;  // over contents with overlap
  double mean_delta_r = 0.0;
  int aggregated_count = 0;
};

struct CompareOptions {
  Fitter fitter = Fitter::bd;
  DrMode dr_mode = DrMode::log_approx;
  /// Evaluate over this bitrate range (kbps) instead of the per-content
  /// sample overlap; contents whose samples do not cover it are flagged
  /// extrapolated. Only meaningful for fitters whose curves extend there.
  std::optional<std::pair<double, double>> global_range;
  FitContext fit;
};

/// The full per-content comparison: fit RD/DR for both codecs, compute the
/// overlap window from sample extremes, average the quality gain and
/// bitrate saving, and aggregate arithmetic means over the contents with a
/// usable overlap (NO_OVERLAP contents are listed but excluded).
CodecComparisonReport compare(const std::vector<RdSamplePair>& contents,
                              const CompareOptions& options);

}  // namespace grd::codec
