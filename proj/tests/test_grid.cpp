#include <doctest.h>

#include <random>

#include "grd/errors.hpp"
#include "grd/grid.hpp"
#include "grd/ingest.hpp"
#include "grd/synth.hpp"
#include "oracles.hpp"

using namespace grd;

namespace {

AxisSpec small_axes() {
  AxisSpec axes;
  axes.bitrates_kbps = {100, 200, 300};
  axes.resolutions_diag = {400, 800};
  return axes;
}

GrdGrid ramp_grid(const AxisSpec& axes) {
  const auto nb = static_cast<Eigen::Index>(axes.bitrate_count());
  const auto nr = static_cast<Eigen::Index>(axes.resolution_count());
  Eigen::MatrixXd values(nb, nr);
  for (Eigen::Index b = 0; b < nb; ++b) {
    for (Eigen::Index r = 0; r < nr; ++r) {
      values(b, r) = 100.0 * static_cast<double>(b) /
                     static_cast<double>(nb - 1);
    }
  }
  return make_grid(axes, values);
}

}  // namespace

TEST_SUITE("grid") {

TEST_CASE("default axes match the production lattice") {
  const AxisSpec axes = full_scale_axes();
  CHECK(axes.bitrate_count() == 90);
  CHECK(axes.bitrates_kbps.front() == 100.0);
  CHECK(axes.bitrates_kbps.back() == 9000.0);
  CHECK(axes.resolutions_diag ==
        std::vector<double>{400, 480, 640, 865, 1469, 2203});
  CHECK(axes.cell_count() == 540);
}

TEST_CASE("membership passes on a bitrate ramp") {
  const auto report = validate_membership(ramp_grid(full_scale_axes()), 0.0);
  CHECK(report.passed);
  CHECK(report.violations.empty());
}

TEST_CASE("membership pinpoints a single bitrate dip") {
  GrdGrid grid = ramp_grid(full_scale_axes());
  grid.values(3, 0) = grid.values(2, 0) - 1.0;
  const auto report = validate_membership(grid, 0.0);
  REQUIRE_FALSE(report.passed);
  // One monotonicity break, at (3, 0); values climb right back afterwards,
  // which flags (4, 0) relative to the lowered cell only if it dips, so
  // exactly one bitrate violation is expected.
  int bitrate_violations = 0;
  for (const auto& v : report.violations) {
    if (v.kind == Violation::Kind::bitrate_monotonicity) {
      ++bitrate_violations;
      CHECK(v.bitrate_index == 3);
      CHECK(v.resolution_index == 0);
    }
  }
  CHECK(bitrate_violations == 1);
}

TEST_CASE("generated surfaces re-check cleanly cell by cell") {
  synth::SynthParams params;
  params.seed = 42;
  params.axes = desk_axes();
  params.count = 5;
  const auto corpus = synth::generate(params);
  for (const auto& grid : corpus) {
    // Direct pairwise re-check, independent of validate_membership.
    const auto nb = grid.values.rows();
    const auto nr = grid.values.cols();
    for (Eigen::Index r = 0; r < nr; ++r) {
      for (Eigen::Index b = 0; b + 1 < nb; ++b) {
        CHECK(grid.values(b + 1, r) >= grid.values(b, r));
      }
    }
    for (Eigen::Index r = 0; r + 1 < nr; ++r) {
      CHECK(grid.values(nb - 1, r + 1) >= grid.values(nb - 1, r));
    }
    CHECK(grid.values.minCoeff() >= 0.0);
    CHECK(grid.values.maxCoeff() <= 100.0);
    CHECK(validate_membership(grid, 0.0).passed);
  }
}

TEST_CASE("membership depends only on value order, not bitrate labels") {
  synth::SynthParams params;
  params.seed = 7;
  params.axes = desk_axes();
  params.count = 1;
  GrdGrid grid = synth::generate(params).front();
  grid.values(2, 1) = grid.values(1, 1) - 5.0;  // plant a violation

  AxisSpec scaled = grid.axes;
  for (auto& b : scaled.bitrates_kbps) b *= 7.5;
  const GrdGrid scaled_grid = make_grid(scaled, grid.values);

  const auto original = validate_membership(grid, 0.0);
  const auto rescaled = validate_membership(scaled_grid, 0.0);
  CHECK(original.passed == rescaled.passed);
  CHECK(original.violations.size() == rescaled.violations.size());
}

TEST_CASE("malformed grids raise structural errors, not failures") {
  GrdGrid grid = ramp_grid(small_axes());
  grid.values(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(validate_membership(grid, 0.0), Error);

  GrdGrid reshaped = ramp_grid(small_axes());
  reshaped.values.resize(2, 2);
  CHECK_THROWS_AS(validate_membership(reshaped, 0.0), Error);
}

TEST_CASE("rmse and linf examples") {
  const GrdGrid a = ramp_grid(small_axes());
  GrdGrid b = a;
  CHECK(rmse(a, b) == 0.0);
  CHECK(linf_error(a, b) == 0.0);

  b.values.array() += 2.0;
  CHECK(rmse(a, b) == doctest::Approx(2.0).epsilon(1e-12));

  GrdGrid c = a;
  c.values(1, 1) += 7.0;
  CHECK(linf_error(a, c) == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("rmse matches hand summation on a random 3x2 grid") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uniform(0.0, 100.0);
  const AxisSpec axes = small_axes();
  Eigen::MatrixXd va(3, 2), vb(3, 2);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 2; ++j) {
      va(i, j) = uniform(rng);
      vb(i, j) = uniform(rng);
    }
  }
  const GrdGrid a = make_grid(axes, va);
  const GrdGrid b = make_grid(axes, vb);

  double sum_sq = 0.0, max_abs = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double d = va(i, j) - vb(i, j);
      sum_sq += d * d;
      max_abs = std::max(max_abs, std::abs(d));
    }
  }
  CHECK(rmse(a, b) == doctest::Approx(std::sqrt(sum_sq / 6.0)).epsilon(1e-14));
  CHECK(linf_error(a, b) == doctest::Approx(max_abs).epsilon(1e-14));
}

TEST_CASE("error metrics demand identical axes") {
  const GrdGrid a = ramp_grid(small_axes());
  AxisSpec other = small_axes();
  other.bitrates_kbps[2] = 350;
  const GrdGrid b = ramp_grid(other);
  CHECK_THROWS_AS(rmse(a, b), Error);
  CHECK_THROWS_AS(linf_error(a, b), Error);
}

TEST_CASE("metric inequality holds on random grids") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> uniform(0.0, 100.0);
  const AxisSpec axes = small_axes();
  const double k = static_cast<double>(axes.cell_count());
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd va(3, 2), vb(3, 2);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 2; ++j) {
        va(i, j) = uniform(rng);
        vb(i, j) = uniform(rng);
      }
    }
    const GrdGrid a = make_grid(axes, va);
    const GrdGrid b = make_grid(axes, vb);
    const double r = rmse(a, b);
    const double li = linf_error(a, b);
    CHECK(r <= li + 1e-12);
    CHECK(li <= std::sqrt(k) * r + 1e-12);
  }
}

TEST_CASE("flatten order is bitrate-major") {
  AxisSpec axes;
  axes.bitrates_kbps = {100, 200};
  axes.resolutions_diag = {400, 800};
  Eigen::MatrixXd values(2, 2);
  values << 1, 2, 3, 4;
  const Eigen::VectorXd flat = flatten(make_grid(axes, values));
  CHECK(flat(0) == 1);
  CHECK(flat(1) == 2);
  CHECK(flat(2) == 3);
  CHECK(flat(3) == 4);
}

TEST_CASE("flatten round-trips random grids") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uniform(0.0, 100.0);
  const AxisSpec axes = small_axes();
  Eigen::MatrixXd values(3, 2);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 2; ++j) values(i, j) = uniform(rng);
  }
  const GrdGrid grid = make_grid(axes, values);
  const GrdGrid back = unflatten(flatten(grid), axes);
  CHECK((back.values - grid.values).cwiseAbs().maxCoeff() == 0.0);

  Eigen::VectorXd wrong(5);
  wrong.setZero();
  CHECK_THROWS_AS(unflatten(wrong, axes), Error);
}

TEST_CASE("sample sets reject bad entries") {
  const AxisSpec axes = small_axes();
  CHECK_THROWS_AS(make_sample_set(axes, {{3, 0, 50.0}}), Error);
  CHECK_THROWS_AS(make_sample_set(axes, {{0, 0, 50.0}, {0, 0, 60.0}}), Error);
  CHECK_THROWS_AS(make_sample_set(axes, {{0, 0, 130.0}}), Error);
  CHECK_NOTHROW(make_sample_set(axes, {{0, 0, 50.0}, {2, 1, 60.0}}));
}

TEST_CASE("ingestion copies curves already on the lattice") {
  const AxisSpec axes = small_axes();
  const std::vector<std::vector<RatePoint>> curves = {
      {{100, 10}, {200, 20}, {300, 30}},
      {{100, 15}, {200, 25}, {300, 35}},
  };
  const GrdGrid grid = ingest_raw_curves(curves, axes);
  CHECK(grid.values(0, 0) == 10.0);
  CHECK(grid.values(1, 0) == 20.0);
  CHECK(grid.values(2, 0) == 30.0);
  CHECK(grid.values(0, 1) == 15.0);
  CHECK(grid.values(2, 1) == 35.0);
}

TEST_CASE("ingestion pads the final quality to the top bitrate") {
  AxisSpec axes = full_scale_axes();
  std::vector<std::vector<RatePoint>> curves;
  for (std::size_t r = 0; r < axes.resolution_count(); ++r) {
    curves.push_back({{100, 20}, {2500, 80}, {5000, 93}});
  }
  const GrdGrid grid = ingest_raw_curves(curves, axes);
  for (std::size_t b = 0; b < axes.bitrate_count(); ++b) {
    if (axes.bitrates_kbps[b] > 5000.0) {
      CHECK(grid.values(static_cast<Eigen::Index>(b), 0) ==
            doctest::Approx(93.0).epsilon(1e-12));
    }
  }
  CHECK(validate_membership(grid, 1e-9).passed);
}

TEST_CASE("ingestion resampling matches an independent interpolation") {
  AxisSpec axes = full_scale_axes();
  // A logistic-shaped 5-point curve per resolution.
  const std::vector<double> knot_x = {100, 1200, 3000, 6000, 9000};
  std::vector<std::vector<RatePoint>> curves;
  for (std::size_t r = 0; r < axes.resolution_count(); ++r) {
    std::vector<RatePoint> curve;
    for (double x : knot_x) {
      const double z =
          95.0 / (1.0 + std::exp(-(x - 2000.0) / 900.0)) + 2.0 * (r + 1);
      curve.push_back({x, std::min(z, 100.0)});
    }
    curves.push_back(curve);
  }
  const GrdGrid grid = ingest_raw_curves(curves, axes);

  for (std::size_t r = 0; r < axes.resolution_count(); ++r) {
    std::vector<double> xs, ys;
    for (const auto& p : curves[r]) {
      xs.push_back(p.bitrate_kbps);
      ys.push_back(p.quality);
    }
    const oracles::ReferencePchip reference(xs, ys);
    for (std::size_t b = 0; b < axes.bitrate_count(); ++b) {
      CHECK(grid.values(static_cast<Eigen::Index>(b),
                        static_cast<Eigen::Index>(r)) ==
            doctest::Approx(reference(axes.bitrates_kbps[b])).epsilon(1e-12));
    }
  }
}

TEST_CASE("ingestion clamps rate-control dips and keeps knot values") {
  const AxisSpec axes = small_axes();
  const std::vector<std::vector<RatePoint>> curves = {
      {{100, 30}, {200, 28}, {300, 50}},  // dip at 200 repaired to 30
      {{100, 10}, {200, 40}, {300, 45}},
  };
  const GrdGrid grid = ingest_raw_curves(curves, axes);
  CHECK(grid.values(0, 0) == 30.0);
  CHECK(grid.values(1, 0) == 30.0);
  CHECK(grid.values(2, 0) == 50.0);
}

TEST_CASE("ingestion error paths") {
  const AxisSpec axes = small_axes();
  // Too few points.
  CHECK_THROWS_AS(
      ingest_raw_curves({{{100, 10}}, {{100, 10}, {300, 20}}}, axes), Error);
  // Curve entirely below the lattice.
  CHECK_THROWS_AS(ingest_raw_curves({{{10, 1}, {50, 2}},
                                     {{100, 10}, {300, 20}}},
                                    axes),
                  Error);
  // Curve starting above the lowest target bitrate (no downward
  // extrapolation).
  CHECK_THROWS_AS(ingest_raw_curves({{{150, 10}, {300, 20}},
                                     {{100, 10}, {300, 20}}},
                                    axes),
                  Error);
  // Wrong curve count.
  CHECK_THROWS_AS(ingest_raw_curves({{{100, 10}, {300, 20}}}, axes), Error);
}

}  // TEST_SUITE
