#include "grd/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "grd/errors.hpp"
#include "grd/interp.hpp"

namespace grd {

GrdGrid ingest_raw_curves(
    const std::vector<std::vector<RatePoint>>& per_resolution_curves,
    const AxisSpec& target_axes) {
  validate_axes(target_axes);
  const std::size_t nr = target_axes.resolution_count();
  const std::size_t nb = target_axes.bitrate_count();
  if (per_resolution_curves.size() != nr) {
    fail(ErrorKind::invalid_argument,
         "expected " + std::to_string(nr) + " curves, got " +
             std::to_string(per_resolution_curves.size()));
  }
  const double target_min = target_axes.bitrates_kbps.front();
  const double target_max = target_axes.bitrates_kbps.back();

  Eigen::MatrixXd values(nb, nr);
  for (std::size_t r = 0; r < nr; ++r) {
    const auto& curve = per_resolution_curves[r];
    if (curve.size() < 2) {
      fail(ErrorKind::invalid_argument,
           "curve " + std::to_string(r) + " has fewer than 2 points");
    }
    std::vector<double> xs, ys;
    xs.reserve(curve.size() + 1);
    ys.reserve(curve.size() + 1);
    double running_max = -std::numeric_limits<double>::infinity();
    for (const auto& p : curve) {
      if (!std::isfinite(p.bitrate_kbps) || !std::isfinite(p.quality)) {
        fail(ErrorKind::invalid_argument,
             "curve " + std::to_string(r) + " holds non-finite points");
      }
      if (!xs.empty() && p.bitrate_kbps <= xs.back()) {
        fail(ErrorKind::invalid_argument,
             "curve " + std::to_string(r) +
                 " bitrates must be strictly increasing");
      }
      xs.push_back(p.bitrate_kbps);
      running_max = std::max(running_max, p.quality);
      ys.push_back(running_max);
    }
    if (xs.back() < target_min) {
      fail(ErrorKind::invalid_argument,
           "curve " + std::to_string(r) +
               " ends below the lowest target bitrate");
    }
    if (xs.front() > target_min) {
      fail(ErrorKind::invalid_argument,
           "curve " + std::to_string(r) +
               " starts above the lowest target bitrate; refusing to "
               "extrapolate downward");
    }
    // Hold the highest achieved quality out to the end of the lattice.
    if (xs.back() < target_max) {
      xs.push_back(target_max);
      ys.push_back(ys.back());
    }

    const interp::Curve1D fit = interp::pchip_fit(xs, ys);
    for (std::size_t b = 0; b < nb; ++b) {
      values(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(r)) =
          interp::eval(fit, target_axes.bitrates_kbps[b]);
    }
  }
  return make_grid(target_axes, std::move(values));
}

}  // namespace grd
