#include "grd/sampling.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "grd/errors.hpp"

namespace grd::sampling {

namespace {

constexpr double kDiagonalGuard = 1e-12;

void check_covariance(const Eigen::MatrixXd& covariance) {
  if (covariance.rows() != covariance.cols()) {
    fail(ErrorKind::structural, "covariance is not square");
  }
  if (!covariance.allFinite()) {
    fail(ErrorKind::structural, "covariance holds non-finite entries");
  }
  const double scale = std::max(covariance.cwiseAbs().maxCoeff(), 1.0);
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() >
      1e-8 * scale) {
    fail(ErrorKind::invalid_argument, "covariance is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariance,
                                                    Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-8) {
    fail(ErrorKind::invalid_argument,
         "covariance is not positive semidefinite");
  }
}

double logdet_psd(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    sum += std::log(std::max(es.eigenvalues()(i), 1e-12));
  }
  return sum;
}

/// Conditional covariance after observing local index `pick`, restricted to
/// the remaining local indices.
Eigen::MatrixXd schur_drop(const Eigen::MatrixXd& sigma, Eigen::Index pick,
                           bool subtract_rank_one) {
  const Eigen::Index k = sigma.rows();
  Eigen::MatrixXd out(k - 1, k - 1);
  Eigen::VectorXd col(k - 1);
  Eigen::Index ii = 0;
  for (Eigen::Index i = 0; i < k; ++i) {
    if (i == pick) continue;
    col(ii++) = sigma(i, pick);
  }
  ii = 0;
  for (Eigen::Index i = 0; i < k; ++i) {
    if (i == pick) continue;
    Eigen::Index jj = 0;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (j == pick) continue;
      out(ii, jj) = sigma(i, j);
      ++jj;
    }
    ++ii;
  }
  if (subtract_rank_one) {
    out -= col * col.transpose() / sigma(pick, pick);
  }
  // Symmetrize to stop rounding drift across many updates.
  out = 0.5 * (out + out.transpose());
  return out;
}

}  // namespace

SamplingOrder uncertainty_order(const Eigen::MatrixXd& covariance,
                                const AxisSpec& axes, int count,
                                UncertaintyCriterion criterion) {
  validate_axes(axes);
  const auto k = static_cast<Eigen::Index>(axes.cell_count());
  if (covariance.rows() != k) {
    fail(ErrorKind::structural,
         "covariance size " + std::to_string(covariance.rows()) +
             " does not match the axes cell count " + std::to_string(k));
  }
  if (count < 0 || count > k) {
    fail(ErrorKind::invalid_argument,
         "count " + std::to_string(count) + " outside [0, " +
             std::to_string(k) + "]");
  }
  if (criterion == UncertaintyCriterion::logdet && k > 64) {
    fail(ErrorKind::invalid_argument,
         "the exact log-det criterion is limited to K <= 64 cells");
  }
  check_covariance(covariance);

  Eigen::MatrixXd sigma = 0.5 * (covariance + covariance.transpose());
  std::vector<int> remaining(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) remaining[static_cast<std::size_t>(i)] = static_cast<int>(i);

  SamplingOrder order;
  order.axes = axes;
  order.indices.reserve(static_cast<std::size_t>(count));
  order.scores.reserve(static_cast<std::size_t>(count));

  for (int step = 0; step < count; ++step) {
    const Eigen::Index rem = sigma.rows();
    const double trace = sigma.trace();
    const double guard = kDiagonalGuard * std::max(trace, 0.0);

    Eigen::Index best_local = -1;
    double best_score = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < rem; ++i) {
      const double var = sigma(i, i);
      if (var <= guard) continue;
      double score;
      if (criterion == UncertaintyCriterion::trace) {
        // tr(conditional) = tr - var_i - (|col_i|^2 - var_i^2) / var_i
        const double col_sq = sigma.col(i).squaredNorm() - var * var;
        score = trace - var - col_sq / var;
      } else {
        score = logdet_psd(schur_drop(sigma, i, true));
      }
      if (score < best_score) {
        best_score = score;
        best_local = i;
      }
    }

    bool degenerate = false;
    if (best_local < 0) {
      // Nothing carries usable variance; fall back to index order.
      best_local = 0;
      best_score = trace;
      degenerate = true;
    }

    order.indices.push_back(remaining[static_cast<std::size_t>(best_local)]);
    order.scores.push_back(best_score);
    remaining.erase(remaining.begin() + best_local);
    if (static_cast<int>(order.indices.size()) == count) break;
    sigma = schur_drop(sigma, best_local, !degenerate);
  }
  return order;
}

Eigen::MatrixXd empirical_covariance(const std::vector<GrdGrid>& dataset) {
  if (dataset.size() < 2) {
    fail(ErrorKind::invalid_argument,
         "covariance estimation needs at least 2 grids");
  }
  const AxisSpec& axes = dataset.front().axes;
  const auto k = static_cast<Eigen::Index>(axes.cell_count());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(k);
  std::vector<Eigen::VectorXd> flats;
  flats.reserve(dataset.size());
  for (const auto& grid : dataset) {
    if (!grid.axes.same_labels(axes)) {
      fail(ErrorKind::axis_mismatch, "covariance grids live on differing axes");
    }
    flats.push_back(flatten(grid));
    mean += flats.back();
  }
  mean /= static_cast<double>(dataset.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(k, k);
  for (const auto& f : flats) {
    const Eigen::VectorXd d = f - mean;
    cov.selfadjointView<Eigen::Lower>().rankUpdate(d, 1.0);
  }
  cov = Eigen::MatrixXd(cov.selfadjointView<Eigen::Lower>());
  cov /= static_cast<double>(dataset.size());
  return cov;
}

SamplingOrder uniform_log_bitrate_order(const AxisSpec& axes,
                                        int resolution_index, int count) {
  validate_axes(axes);
  const int nb = static_cast<int>(axes.bitrate_count());
  const int nr = static_cast<int>(axes.resolution_count());
  if (resolution_index < 0 || resolution_index >= nr) {
    fail(ErrorKind::invalid_argument, "resolution index outside the axes");
  }
  if (count < 0 || count > nb) {
    fail(ErrorKind::invalid_argument,
         "count " + std::to_string(count) + " exceeds the bitrate count " +
             std::to_string(nb));
  }

  const double lo = axes.bitrates_kbps.front();
  const double hi = axes.bitrates_kbps.back();
  std::vector<bool> used(static_cast<std::size_t>(nb), false);

  SamplingOrder order;
  order.axes = axes;
  for (int s = 0; s < count; ++s) {
    const double target =
        count == 1 ? lo
                   : lo * std::pow(hi / lo, static_cast<double>(s) /
                                                static_cast<double>(count - 1));
    int best = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    for (int b = 0; b < nb; ++b) {
      const double dist = std::abs(axes.bitrates_kbps[static_cast<std::size_t>(b)] - target);
      if (dist < best_dist) {
        best_dist = dist;
        best = b;
      }
    }
    if (used[static_cast<std::size_t>(best)]) {
      // Advance to the nearest unused grid point (upward first on ties).
      int alt = -1;
      for (int offset = 1; offset < nb; ++offset) {
        if (best + offset < nb && !used[static_cast<std::size_t>(best + offset)]) {
          alt = best + offset;
          break;
        }
        if (best - offset >= 0 && !used[static_cast<std::size_t>(best - offset)]) {
          alt = best - offset;
          break;
        }
      }
      best = alt;
    }
    used[static_cast<std::size_t>(best)] = true;
    order.indices.push_back(best * nr + resolution_index);
    order.scores.push_back(target);
  }
  return order;
}

}  // namespace grd::sampling
