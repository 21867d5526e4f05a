#pragma once

#include <Eigen/Core>
#include <vector>

#include "grd/grid.hpp"

namespace grd::sampling {

/// A fixed query order over flattened lattice cells, plus the per-step
/// selection score that chose each cell. Independent of any observed
/// values, so one order serves every surface on the axes.
struct SamplingOrder {
  AxisSpec axes;
  std::vector<int> indices;   // distinct, within [0, K)
  std::vector<double> scores;
};

enum class UncertaintyCriterion {
  trace,   // upper bound on the conditional entropy (default)
  logdet,  // exact conditional log-determinant; only for K <= 64
};

/// Greedy minimization of the conditional-covariance criterion: at each
/// step pick the cell whose observation leaves the smallest remaining
/// uncertainty, then replace the covariance with its Schur complement on
/// the remaining cells. Cells whose conditional variance falls below
/// 1e-12 of the current trace are ineligible (the rank-one update would
/// divide by ~0); ties break toward the smallest flattened index.
SamplingOrder uncertainty_order(
    const Eigen::MatrixXd& covariance, const AxisSpec& axes, int count,
    UncertaintyCriterion criterion = UncertaintyCriterion::trace);

/// (1/M) sum of centered outer products over the flattened corpus.
Eigen::MatrixXd empirical_covariance(const std::vector<GrdGrid>& dataset);

/// Baseline: bitrate grid points nearest to `count` geometrically spaced
/// targets between the axis extremes, at one fixed resolution. An occupied
/// nearest point advances to the closest unused neighbor.
SamplingOrder uniform_log_bitrate_order(const AxisSpec& axes,
                                        int resolution_index, int count);

}  // namespace grd::sampling
