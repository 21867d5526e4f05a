#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace grd {

/// Rectangular sampling lattice of the bitrate-resolution plane.
///
/// Both label lists are strictly increasing and hold at least two entries.
/// Resolutions are diagonal pixel counts; the optional (width, height)
/// annotations, when present, run parallel to `resolutions_diag`.
struct AxisSpec {
  std::vector<double> bitrates_kbps;
  std::vector<double> resolutions_diag;
  std::vector<std::array<int, 2>> resolution_sizes;  // empty or one per resolution

  std::size_t bitrate_count() const { return bitrates_kbps.size(); }
  std::size_t resolution_count() const { return resolutions_diag.size(); }

  /// Cells per surface: K = |bitrates| * |resolutions|.
  std::size_t cell_count() const {
    return bitrates_kbps.size() * resolutions_diag.size();
  }

  /// Flattening is bitrate-major: the resolution index varies fastest.
  /// This order is part of the on-disk format contract.
  std::size_t flat_index(std::size_t bitrate_index,
                         std::size_t resolution_index) const {
    return bitrate_index * resolutions_diag.size() + resolution_index;
  }

  /// Label-wise equality; annotations do not participate.
  bool same_labels(const AxisSpec& other) const;
};

/// Throws ErrorKind::invalid_argument unless both label lists are strictly
/// increasing, positive, and of length >= 2 (with annotations, if any,
/// matching the resolution count).
void validate_axes(const AxisSpec& axes);

/// Diagonal pixel length of a (width, height) frame, rounded to the nearest
/// integer value.
double diagonal_of(int width, int height);

/// The production lattice: bitrates 100..9000 kbps in steps of 100 and the
/// six delivery resolutions from 320x240 up to 1920x1080 (diagonals
/// 400, 480, 640, 865, 1469, 2203).
AxisSpec full_scale_axes();

/// A small lattice for fast experiments: bitrates 1000..9000 kbps in steps
/// of 1000 over the same six resolutions (K = 54).
AxisSpec desk_axes();

}  // namespace grd
