#pragma once

#include <cstdint>
#include <vector>

#include "grd/grid.hpp"

namespace grd::synth {

/// Knobs of the saturating-exponential surface family
///   z(x, y) = amplitude_y * (1 - exp(-rate_y * x))^sharpness.
/// Saturation targets are drawn per resolution and sorted ascending, which
/// pins the value at the maximum bitrate to be non-decreasing in
/// resolution; rates are sorted descending so low resolutions rise faster
/// and the quality order flips at low bitrate.
struct SynthParams {
  std::uint64_t seed = 0;
  AxisSpec axes;
  int count = 1;
  double saturation_lo = 55.0;   // in (0, 100]
  double saturation_hi = 100.0;  // in (0, 100], >= saturation_lo
  double rate_lo = 4e-4;         // per kbps, > 0
  double rate_hi = 4e-3;         // >= rate_lo
  double sharpness_lo = 0.8;     // > 0
  double sharpness_hi = 2.5;     // >= sharpness_lo
};

/// Deterministic corpus of valid surfaces: every output passes
/// validate_membership at tolerance 0 and an identical seed reproduces the
/// corpus bit for bit (each surface draws from its own counter-derived
/// stream, so the corpus is stable under count changes).
std::vector<GrdGrid> generate(const SynthParams& params);

}  // namespace grd::synth
