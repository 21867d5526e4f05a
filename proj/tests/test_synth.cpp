#include <doctest.h>

#include <Eigen/Dense>

#include "grd/errors.hpp"
#include "grd/io.hpp"
#include "grd/sampling.hpp"
#include "grd/synth.hpp"

using namespace grd;

TEST_SUITE("synth") {

TEST_CASE("every generated surface is a valid member") {
  synth::SynthParams params;
  params.seed = 424242;
  params.axes = desk_axes();
  params.count = 40;
  const auto corpus = synth::generate(params);
  REQUIRE(corpus.size() == 40);
  for (const auto& grid : corpus) {
    CHECK(validate_membership(grid, 0.0).passed);
  }
}

TEST_CASE("identical seeds give byte-identical serializations") {
  synth::SynthParams params;
  params.seed = 99;
  params.axes = desk_axes();
  params.count = 6;
  const auto a = synth::generate(params);
  const auto b = synth::generate(params);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(io::grid_to_json(a[i]) == io::grid_to_json(b[i]));
  }

  params.seed = 100;
  const auto c = synth::generate(params);
  CHECK(io::grid_to_json(a[0]) != io::grid_to_json(c[0]));
}

TEST_CASE("surfaces are stable under count growth") {
  synth::SynthParams params;
  params.seed = 7;
  params.axes = desk_axes();
  params.count = 3;
  const auto small = synth::generate(params);
  params.count = 10;
  const auto large = synth::generate(params);
  for (std::size_t i = 0; i < small.size(); ++i) {
    CHECK((small[i].values - large[i].values).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("an extreme rise rate steps straight to saturation") {
  synth::SynthParams params;
  params.seed = 5;
  params.axes = desk_axes();
  params.count = 3;
  params.rate_lo = 1e9;
  params.rate_hi = 1e9;
  const auto corpus = synth::generate(params);
  for (const auto& grid : corpus) {
    for (Eigen::Index r = 0; r < grid.values.cols(); ++r) {
      const double saturation = grid.values(grid.values.rows() - 1, r);
      for (Eigen::Index b = 0; b < grid.values.rows(); ++b) {
        CHECK(grid.values(b, r) == doctest::Approx(saturation).epsilon(1e-15));
      }
    }
  }
}

TEST_CASE("a ten-surface corpus spans at least three directions") {
  synth::SynthParams params;
  params.seed = 31;
  params.axes = desk_axes();
  params.count = 10;
  const auto corpus = synth::generate(params);
  const Eigen::MatrixXd cov = sampling::empirical_covariance(corpus);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov,
                                                    Eigen::EigenvaluesOnly);
  const double lead = es.eigenvalues().maxCoeff();
  int rank = 0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    if (es.eigenvalues()(i) > 1e-10 * lead) ++rank;
  }
  CHECK(rank >= 3);
}

TEST_CASE("parameter ranges are validated") {
  synth::SynthParams params;
  params.axes = desk_axes();
  params.count = 0;
  CHECK_THROWS_AS(synth::generate(params), Error);
  params.count = 1;
  params.saturation_hi = 130.0;
  CHECK_THROWS_AS(synth::generate(params), Error);
  params.saturation_hi = 90.0;
  params.rate_lo = -1.0;
  CHECK_THROWS_AS(synth::generate(params), Error);
  params.rate_lo = 1e-3;
  params.sharpness_lo = 0.0;
  CHECK_THROWS_AS(synth::generate(params), Error);
}

}  // TEST_SUITE
