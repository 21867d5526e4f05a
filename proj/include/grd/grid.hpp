#pragma once

#include <Eigen/Core>
#include <map>
#include <string>
#include <vector>

#include "grd/axes.hpp"

namespace grd {

/// One discretized rate-quality surface: quality scores on the axes lattice.
/// Rows follow bitrates, columns follow resolutions. Values are expected to
/// live in [0, 100]; range conformance is checked by validate_membership,
/// not at construction, because estimator outputs are allowed to stray and
/// must still be representable.
struct GrdGrid {
  AxisSpec axes;
  Eigen::MatrixXd values;  // bitrate_count() x resolution_count()
  std::map<std::string, std::string> metadata;
};

/// Validates axes, shape and finiteness (ErrorKind::structural on failure).
GrdGrid make_grid(AxisSpec axes, Eigen::MatrixXd values,
                  std::map<std::string, std::string> metadata = {});

/// Sparse observations indexed against a lattice.
struct SampleEntry {
  int bitrate_index = 0;
  int resolution_index = 0;
  double quality = 0.0;
};

struct SampleSet {
  AxisSpec axes;
  std::vector<SampleEntry> entries;
};

/// Validates bounds, uniqueness of (bitrate, resolution) pairs and the
/// quality range.
SampleSet make_sample_set(AxisSpec axes, std::vector<SampleEntry> entries);

/// Reads the grid's own values at the given flattened cells.
SampleSet samples_from_grid(const GrdGrid& grid,
                            const std::vector<int>& flat_indices);

struct Violation {
  enum class Kind { bitrate_monotonicity, resolution_monotonicity, range };
  Kind kind = Kind::bitrate_monotonicity;
  int bitrate_index = 0;
  int resolution_index = 0;
  double magnitude = 0.0;  // how far past the tolerance the constraint is
};

struct ValidationReport {
  bool passed = true;
  std::vector<Violation> violations;
};

/// Discrete membership test for the space of valid surfaces: quality is
/// non-decreasing along bitrate at every resolution, non-decreasing along
/// resolution at the maximum bitrate, and all values lie within
/// [-tolerance, 100 + tolerance]. Boundary equalities are intentionally not
/// checked: lattices start above zero bitrate and padded empirical surfaces
/// need not reach 100.
ValidationReport validate_membership(const GrdGrid& grid,
                                     double tolerance = 1e-6);

/// Root-mean-square difference over all cells. Axes must carry identical
/// labels; grids are never silently resampled.
double rmse(const GrdGrid& a, const GrdGrid& b);

/// Largest absolute per-cell difference. Same axis contract as rmse.
double linf_error(const GrdGrid& a, const GrdGrid& b);

/// Bitrate-major flattening (resolution varies fastest); the inverse
/// operation checks the length against the axes.
Eigen::VectorXd flatten(const GrdGrid& grid);
GrdGrid unflatten(const Eigen::VectorXd& flat, const AxisSpec& axes);

}  // namespace grd
