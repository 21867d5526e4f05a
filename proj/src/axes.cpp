#include "grd/axes.hpp"

#include <cmath>
#include <string>

#include "grd/errors.hpp"

namespace grd {

namespace {

void check_increasing_positive(const std::vector<double>& labels,
                               const char* name) {
  if (labels.size() < 2) {
    fail(ErrorKind::invalid_argument,
         std::string(name) + " axis needs at least 2 points");
  }
  double prev = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!(labels[i] > 0.0) || !std::isfinite(labels[i])) {
      fail(ErrorKind::invalid_argument,
           std::string(name) + " labels must be finite and positive");
    }
    if (i > 0 && labels[i] <= prev) {
      fail(ErrorKind::invalid_argument,
           std::string(name) + " labels must be strictly increasing");
    }
    prev = labels[i];
  }
}

}  // namespace

bool AxisSpec::same_labels(const AxisSpec& other) const {
  return bitrates_kbps == other.bitrates_kbps &&
         resolutions_diag == other.resolutions_diag;
}

void validate_axes(const AxisSpec& axes) {
  check_increasing_positive(axes.bitrates_kbps, "bitrate");
  check_increasing_positive(axes.resolutions_diag, "resolution");
  if (!axes.resolution_sizes.empty() &&
      axes.resolution_sizes.size() != axes.resolutions_diag.size()) {
    fail(ErrorKind::invalid_argument,
         "resolution size annotations must match the resolution count");
  }
}

double diagonal_of(int width, int height) {
  return std::round(std::hypot(static_cast<double>(width),
                               static_cast<double>(height)));
}

namespace {

AxisSpec six_resolution_axes(double bitrate_lo, double bitrate_hi,
                             double bitrate_step) {
  AxisSpec axes;
  for (double b = bitrate_lo; b <= bitrate_hi + 1e-9; b += bitrate_step) {
    axes.bitrates_kbps.push_back(b);
  }
  const std::array<std::array<int, 2>, 6> sizes = {{{320, 240},
                                                    {384, 288},
                                                    {512, 384},
                                                    {720, 480},
                                                    {1280, 720},
                                                    {1920, 1080}}};
  for (const auto& wh : sizes) {
    axes.resolutions_diag.push_back(diagonal_of(wh[0], wh[1]));
    axes.resolution_sizes.push_back(wh);
  }
  return axes;
}

}  // namespace

AxisSpec full_scale_axes() { return six_resolution_axes(100.0, 9000.0, 100.0); }

AxisSpec desk_axes() { return six_resolution_axes(1000.0, 9000.0, 1000.0); }

}  // namespace grd
