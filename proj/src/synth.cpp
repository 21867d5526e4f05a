#include "grd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "grd/errors.hpp"

namespace grd::synth {

namespace {

/// splitmix64: the stream is fully determined by the 64-bit state, which
/// makes per-surface sub-streams cheap and platform-independent.
struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) from the top 53 bits.
  double uniform() {
    return static_cast<double>(next() >> 11) * 0x1p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
};

std::uint64_t surface_stream(std::uint64_t seed, int index) {
  SplitMix64 mix(seed ^ (0xD1B54A32D192ED03ULL *
                         static_cast<std::uint64_t>(index + 1)));
  return mix.next();
}

void check_params(const SynthParams& p) {
  validate_axes(p.axes);
  if (p.count < 1) {
    fail(ErrorKind::invalid_argument, "surface count must be positive");
  }
  if (!(p.saturation_lo > 0.0) || p.saturation_hi > 100.0 ||
      p.saturation_hi < p.saturation_lo) {
    fail(ErrorKind::invalid_argument,
         "saturation range must satisfy 0 < lo <= hi <= 100");
  }
  if (!(p.rate_lo > 0.0) || p.rate_hi < p.rate_lo) {
    fail(ErrorKind::invalid_argument,
         "rate range must satisfy 0 < lo <= hi");
  }
  if (!(p.sharpness_lo > 0.0) || p.sharpness_hi < p.sharpness_lo) {
    fail(ErrorKind::invalid_argument,
         "sharpness range must satisfy 0 < lo <= hi");
  }
}

}  // namespace

std::vector<GrdGrid> generate(const SynthParams& params) {
  check_params(params);
  const std::size_t nb = params.axes.bitrate_count();
  const std::size_t nr = params.axes.resolution_count();
  const double x_max = params.axes.bitrates_kbps.back();

  std::vector<GrdGrid> corpus;
  corpus.reserve(static_cast<std::size_t>(params.count));

  for (int m = 0; m < params.count; ++m) {
    SplitMix64 rng(surface_stream(params.seed, m));

    std::vector<double> saturation(nr), rate(nr);
    for (std::size_t r = 0; r < nr; ++r) {
      saturation[r] = rng.uniform(params.saturation_lo, params.saturation_hi);
    }
    for (std::size_t r = 0; r < nr; ++r) {
      rate[r] = rng.uniform(params.rate_lo, params.rate_hi);
    }
    const double sharpness =
        rng.uniform(params.sharpness_lo, params.sharpness_hi);

    // Top-bitrate quality non-decreasing in resolution; rise speed
    // decreasing, so curves cross at low bitrate.
    std::sort(saturation.begin(), saturation.end());
    std::sort(rate.begin(), rate.end(), std::greater<>());

    Eigen::MatrixXd values(nb, nr);
    for (std::size_t r = 0; r < nr; ++r) {
      const double shape_max =
          std::pow(1.0 - std::exp(-rate[r] * x_max), sharpness);
      const double amplitude = saturation[r] / shape_max;
      for (std::size_t b = 0; b < nb; ++b) {
        const double x = params.axes.bitrates_kbps[b];
        const double shape = std::pow(1.0 - std::exp(-rate[r] * x), sharpness);
        values(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(r)) =
            amplitude * shape;
      }
    }

    std::map<std::string, std::string> metadata;
    metadata["content_id"] =
        "synth-" + std::to_string(params.seed) + "-" + std::to_string(m);
    metadata["generator"] = "saturating-exponential";
    corpus.push_back(make_grid(params.axes, std::move(values),
                               std::move(metadata)));
  }
  return corpus;
}

}  // namespace grd::synth
