#pragma once

#include <vector>

#include "grd/grid.hpp"

namespace grd {

/// One measured point of a rate-quality curve at a fixed resolution.
struct RatePoint {
  double bitrate_kbps = 0.0;
  double quality = 0.0;
};

/// Turns raw per-resolution measurements into a lattice surface. Per curve:
/// clamp qualities to a running maximum (rate-control noise repair), hold the
/// final value out to the maximum target bitrate, then resample onto the
/// target bitrates with the monotone Hermite interpolant. One curve per
/// target resolution, in axis order. A curve starting above the lowest
/// target bitrate is refused: this module does not extrapolate downward.
GrdGrid ingest_raw_curves(
    const std::vector<std::vector<RatePoint>>& per_resolution_curves,
    const AxisSpec& target_axes);

}  // namespace grd
