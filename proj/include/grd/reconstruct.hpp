#pragma once

#include <optional>
#include <vector>

#include "grd/basis.hpp"
#include "grd/grid.hpp"
#include "grd/qp.hpp"
#include "grd/sampling.hpp"

namespace grd::recon {

struct ReconstructionConfig {
  basis::BasisKind basis_kind = basis::BasisKind::eigen;
  /// Fixed component count, or empty for match-samples mode (N follows the
  /// sample count, capped at the basis size).
  std::optional<int> n_components = 8;
  bool constrained = true;
  qp::SolverSettings solver;
};

struct EstimateResult {
  GrdGrid grid;
  Eigen::VectorXd coefficients;
  /// Present for the constrained path only.
  std::optional<qp::QpSolution> qp_diagnostics;
  double sample_rmse = 0.0;  // residual at the sampled cells
  int n_used = 0;
};

/// Fits basis coefficients to the samples. Constrained mode solves the
/// monotonicity-constrained least-squares program (with the range rows
/// keeping values in [0, 100]), so the returned grid passes
/// validate_membership at 1e-6. Unconstrained mode is plain least squares
/// on the same design matrix (minimum-norm when underdetermined) and is
/// reported as-is, without clipping.
EstimateResult estimate(const basis::EigenBasis& basis,
                        const SampleSet& samples,
                        const ReconstructionConfig& config);

struct ErrorRow {
  int s = 0;
  double mean_rmse = 0.0;
  double worst_rmse = 0.0;
  double mean_linf = 0.0;
  double worst_linf = 0.0;
};

/// Sparse-reconstruction error sweep: for each sample budget S, estimate
/// every test grid from the first S cells of the order (quality read off
/// the grid itself) and aggregate full-grid errors. Per-grid estimates are
/// independent and could fan out, but aggregation always reduces in input
/// order so reports stay bit-stable.
std::vector<ErrorRow> evaluate_method(const basis::EigenBasis& basis,
                                      const std::vector<GrdGrid>& test_set,
                                      const sampling::SamplingOrder& order,
                                      const std::vector<int>& s_values,
                                      const ReconstructionConfig& config);

}  // namespace grd::recon
