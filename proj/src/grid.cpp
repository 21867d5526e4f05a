#include "grd/grid.hpp"

#include <cmath>
#include <set>
#include <string>
#include <utility>

#include "grd/errors.hpp"

namespace grd {

GrdGrid make_grid(AxisSpec axes, Eigen::MatrixXd values,
                  std::map<std::string, std::string> metadata) {
  validate_axes(axes);
  const auto nb = static_cast<Eigen::Index>(axes.bitrate_count());
  const auto nr = static_cast<Eigen::Index>(axes.resolution_count());
  if (values.rows() != nb || values.cols() != nr) {
    fail(ErrorKind::structural,
         "grid shape " + std::to_string(values.rows()) + "x" +
             std::to_string(values.cols()) + " does not match axes " +
             std::to_string(nb) + "x" + std::to_string(nr));
  }
  if (!values.allFinite()) {
    fail(ErrorKind::structural, "grid holds non-finite quality values");
  }
  return GrdGrid{std::move(axes), std::move(values), std::move(metadata)};
}

SampleSet make_sample_set(AxisSpec axes, std::vector<SampleEntry> entries) {
  validate_axes(axes);
  const int nb = static_cast<int>(axes.bitrate_count());
  const int nr = static_cast<int>(axes.resolution_count());
  std::set<std::pair<int, int>> seen;
  for (const auto& e : entries) {
    if (e.bitrate_index < 0 || e.bitrate_index >= nb ||
        e.resolution_index < 0 || e.resolution_index >= nr) {
      fail(ErrorKind::invalid_argument,
           "sample index (" + std::to_string(e.bitrate_index) + ", " +
               std::to_string(e.resolution_index) + ") outside the axes");
    }
    if (!seen.insert({e.bitrate_index, e.resolution_index}).second) {
      fail(ErrorKind::invalid_argument,
           "duplicate sample at (" + std::to_string(e.bitrate_index) + ", " +
               std::to_string(e.resolution_index) + ")");
    }
    if (!std::isfinite(e.quality) || e.quality < 0.0 || e.quality > 100.0) {
      fail(ErrorKind::invalid_argument,
           "sample quality " + std::to_string(e.quality) +
               " outside [0, 100]");
    }
  }
  return SampleSet{std::move(axes), std::move(entries)};
}

SampleSet samples_from_grid(const GrdGrid& grid,
                            const std::vector<int>& flat_indices) {
  const int nr = static_cast<int>(grid.axes.resolution_count());
  const int k = static_cast<int>(grid.axes.cell_count());
  std::vector<SampleEntry> entries;
  entries.reserve(flat_indices.size());
  for (int idx : flat_indices) {
    if (idx < 0 || idx >= k) {
      fail(ErrorKind::invalid_argument,
           "flat index " + std::to_string(idx) + " outside [0, " +
               std::to_string(k) + ")");
    }
    const int b = idx / nr;
    const int r = idx % nr;
    entries.push_back({b, r, grid.values(b, r)});
  }
  return make_sample_set(grid.axes, std::move(entries));
}

ValidationReport validate_membership(const GrdGrid& grid, double tolerance) {
  if (!(tolerance >= 0.0)) {
    fail(ErrorKind::invalid_argument, "tolerance must be non-negative");
  }
  // Re-verify structure so a hand-assembled grid cannot masquerade as a
  // membership failure.
  const auto nb = static_cast<Eigen::Index>(grid.axes.bitrate_count());
  const auto nr = static_cast<Eigen::Index>(grid.axes.resolution_count());
  validate_axes(grid.axes);
  if (grid.values.rows() != nb || grid.values.cols() != nr) {
    fail(ErrorKind::structural, "grid shape does not match its axes");
  }
  if (!grid.values.allFinite()) {
    fail(ErrorKind::structural, "grid holds non-finite quality values");
  }

  ValidationReport report;
  for (Eigen::Index r = 0; r < nr; ++r) {
    for (Eigen::Index b = 0; b + 1 < nb; ++b) {
      const double step = grid.values(b + 1, r) - grid.values(b, r);
      if (step < -tolerance) {
        report.violations.push_back({Violation::Kind::bitrate_monotonicity,
                                     static_cast<int>(b + 1),
                                     static_cast<int>(r), -step});
      }
    }
  }
  for (Eigen::Index r = 0; r + 1 < nr; ++r) {
    const double step = grid.values(nb - 1, r + 1) - grid.values(nb - 1, r);
    if (step < -tolerance) {
      report.violations.push_back({Violation::Kind::resolution_monotonicity,
                                   static_cast<int>(nb - 1),
                                   static_cast<int>(r + 1), -step});
    }
  }
  for (Eigen::Index b = 0; b < nb; ++b) {
    for (Eigen::Index r = 0; r < nr; ++r) {
      const double v = grid.values(b, r);
      if (v < -tolerance || v > 100.0 + tolerance) {
        const double overshoot = v < -tolerance ? -v : v - 100.0;
        report.violations.push_back({Violation::Kind::range,
                                     static_cast<int>(b),
                                     static_cast<int>(r), overshoot});
      }
    }
  }
  report.passed = report.violations.empty();
  return report;
}

namespace {

void require_same_axes(const GrdGrid& a, const GrdGrid& b) {
  if (!a.axes.same_labels(b.axes)) {
    fail(ErrorKind::axis_mismatch,
         "grids live on different axes; resample explicitly first");
  }
}

}  // namespace

double rmse(const GrdGrid& a, const GrdGrid& b) {
  require_same_axes(a, b);
  const Eigen::MatrixXd diff = a.values - b.values;
  return std::sqrt(diff.squaredNorm() /
                   static_cast<double>(diff.size()));
}

double linf_error(const GrdGrid& a, const GrdGrid& b) {
  require_same_axes(a, b);
  return (a.values - b.values).cwiseAbs().maxCoeff();
}

Eigen::VectorXd flatten(const GrdGrid& grid) {
  const auto nb = static_cast<Eigen::Index>(grid.axes.bitrate_count());
  const auto nr = static_cast<Eigen::Index>(grid.axes.resolution_count());
  Eigen::VectorXd flat(nb * nr);
  for (Eigen::Index b = 0; b < nb; ++b) {
    flat.segment(b * nr, nr) = grid.values.row(b).transpose();
  }
  return flat;
}

GrdGrid unflatten(const Eigen::VectorXd& flat, const AxisSpec& axes) {
  const auto nb = static_cast<Eigen::Index>(axes.bitrate_count());
  const auto nr = static_cast<Eigen::Index>(axes.resolution_count());
  if (flat.size() != nb * nr) {
    fail(ErrorKind::structural,
         "flat vector length " + std::to_string(flat.size()) +
             " does not match axes cell count " + std::to_string(nb * nr));
  }
  Eigen::MatrixXd values(nb, nr);
  for (Eigen::Index b = 0; b < nb; ++b) {
    values.row(b) = flat.segment(b * nr, nr).transpose();
  }
  return make_grid(axes, std::move(values));
}

}  // namespace grd
