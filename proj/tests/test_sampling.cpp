#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "grd/errors.hpp"
#include "grd/sampling.hpp"
#include "grd/synth.hpp"
#include "oracles.hpp"

using namespace grd;

namespace {

AxisSpec axes_for_cells(int nb, int nr) {
  AxisSpec axes;
  for (int b = 0; b < nb; ++b) axes.bitrates_kbps.push_back(100.0 * (b + 1));
  for (int r = 0; r < nr; ++r) {
    axes.resolutions_diag.push_back(400.0 * (r + 1));
  }
  return axes;
}

Eigen::MatrixXd random_psd(std::mt19937_64& rng, int k) {
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  Eigen::MatrixXd b(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) b(i, j) = uniform(rng);
  }
  return b * b.transpose();
}

}  // namespace

TEST_SUITE("sampling") {

TEST_CASE("diagonal covariance picks the largest variance first") {
  const AxisSpec axes = axes_for_cells(2, 2);
  Eigen::VectorXd diag(4);
  diag << 0.5, 3.0, 1.0, 2.0;
  const Eigen::MatrixXd sigma = diag.asDiagonal();
  const auto order = sampling::uncertainty_order(sigma, axes, 4);
  REQUIRE(order.indices.size() == 4);
  CHECK(order.indices[0] == 1);  // variance 3.0
  CHECK(order.indices[1] == 3);
  CHECK(order.indices[2] == 2);
  CHECK(order.indices[3] == 0);
}

TEST_CASE("rank-one covariance is fully explained by one pick") {
  // Observing any cell of a rank-one field determines the rest: the Schur
  // complement is exactly zero, so every candidate ties at score 0 and the
  // tie-break settles the pick.
  const AxisSpec axes = axes_for_cells(2, 2);
  Eigen::VectorXd v(4);
  v << 1.0, -3.0, 2.0, 0.5;
  const Eigen::MatrixXd sigma = v * v.transpose();
  const auto order = sampling::uncertainty_order(sigma, axes, 2);
  CHECK(order.scores[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
  CHECK(order.scores[1] == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
}

TEST_CASE("greedy picks match the exhaustive trace oracle") {
  std::mt19937_64 rng(321);
  const AxisSpec axes = axes_for_cells(4, 2);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::MatrixXd sigma = random_psd(rng, 8);
    const auto order = sampling::uncertainty_order(sigma, axes, 5);
    const auto expected = oracles::greedy_trace_order(sigma, 5);
    REQUIRE(order.indices.size() == 5);
    for (int i = 0; i < 5; ++i) CHECK(order.indices[i] == expected[i]);
  }
}

TEST_CASE("logdet criterion agrees with its own brute force on tiny cases") {
  std::mt19937_64 rng(55);
  const AxisSpec axes = axes_for_cells(2, 2);
  const Eigen::MatrixXd sigma =
      random_psd(rng, 4) + 0.5 * Eigen::MatrixXd::Identity(4, 4);
  const auto order = sampling::uncertainty_order(
      sigma, axes, 3, sampling::UncertaintyCriterion::logdet);
  CHECK(order.indices.size() == 3);
  // The flag is restricted to small lattices.
  AxisSpec big = axes_for_cells(90, 6);
  CHECK_THROWS_AS(
      sampling::uncertainty_order(Eigen::MatrixXd::Identity(540, 540), big,
                                  2, sampling::UncertaintyCriterion::logdet),
      Error);
}

TEST_CASE("conditional trace is non-increasing and stays symmetric psd") {
  std::mt19937_64 rng(3);
  const AxisSpec axes = axes_for_cells(3, 3);
  const Eigen::MatrixXd sigma = random_psd(rng, 9);
  const auto order = sampling::uncertainty_order(sigma, axes, 9);

  // Recompute the conditional chain and check the invariants per step.
  Eigen::MatrixXd cur = sigma;
  std::vector<int> remaining(9);
  for (int i = 0; i < 9; ++i) remaining[static_cast<std::size_t>(i)] = i;
  double prev_trace = cur.trace();
  for (std::size_t step = 0; step < order.indices.size(); ++step) {
    CHECK((cur - cur.transpose()).cwiseAbs().maxCoeff() < 1e-6);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cur,
                                                      Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() > -1e-6);

    const auto local = static_cast<Eigen::Index>(
        std::find(remaining.begin(), remaining.end(), order.indices[step]) -
        remaining.begin());
    const Eigen::Index rem = cur.rows();
    Eigen::MatrixXd sub(rem - 1, rem - 1);
    Eigen::VectorXd cross(rem - 1);
    Eigen::Index ii = 0;
    for (Eigen::Index r = 0; r < rem; ++r) {
      if (r == local) continue;
      cross(ii) = cur(r, local);
      Eigen::Index jj = 0;
      for (Eigen::Index c = 0; c < rem; ++c) {
        if (c == local) continue;
        sub(ii, jj++) = cur(r, c);
      }
      ++ii;
    }
    cur = sub - cross * cross.transpose() / cur(local, local);
    remaining.erase(remaining.begin() + local);
    CHECK(cur.trace() <= prev_trace + 1e-9);
    prev_trace = cur.trace();
    if (cur.rows() == 0) break;
  }
}

TEST_CASE("orders are deterministic and prefix-consistent") {
  std::mt19937_64 rng(1001);
  const AxisSpec axes = axes_for_cells(4, 3);
  const Eigen::MatrixXd sigma = random_psd(rng, 12);
  const auto full = sampling::uncertainty_order(sigma, axes, 10);
  const auto again = sampling::uncertainty_order(sigma, axes, 10);
  CHECK(full.indices == again.indices);
  for (int count : {1, 4, 7}) {
    const auto prefix = sampling::uncertainty_order(sigma, axes, count);
    for (int i = 0; i < count; ++i) {
      CHECK(prefix.indices[static_cast<std::size_t>(i)] ==
            full.indices[static_cast<std::size_t>(i)]);
    }
  }
}

TEST_CASE("covariance validation") {
  const AxisSpec axes = axes_for_cells(2, 2);
  Eigen::MatrixXd asym = Eigen::MatrixXd::Zero(4, 4);
  asym(0, 1) = 1.0;
  CHECK_THROWS_AS(sampling::uncertainty_order(asym, axes, 2), Error);

  Eigen::MatrixXd indefinite = Eigen::MatrixXd::Identity(4, 4);
  indefinite(0, 0) = -1.0;
  CHECK_THROWS_AS(sampling::uncertainty_order(indefinite, axes, 2), Error);

  CHECK_THROWS_AS(sampling::uncertainty_order(
                      Eigen::MatrixXd::Identity(4, 4), axes, 5),
                  Error);
}

TEST_CASE("empirical covariance basics") {
  const AxisSpec axes = axes_for_cells(3, 2);
  Eigen::MatrixXd base(3, 2);
  base << 10, 20, 30, 40, 50, 60;
  const GrdGrid g = make_grid(axes, base);
  const Eigen::MatrixXd zero = sampling::empirical_covariance({g, g, g});
  CHECK(zero.cwiseAbs().maxCoeff() == 0.0);

  Eigen::MatrixXd bump(3, 2);
  bump << 1, -1, 2, 0.5, -2, 1;
  const GrdGrid lo = make_grid(axes, base - bump);
  const GrdGrid hi = make_grid(axes, base + bump);
  const Eigen::MatrixXd rank1 = sampling::empirical_covariance({lo, hi});
  Eigen::VectorXd v(6);
  v << 1, -1, 2, 0.5, -2, 1;
  CHECK((rank1 - v * v.transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("empirical covariance matches hand accumulation") {
  const AxisSpec axes = axes_for_cells(3, 2);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> uniform(0.0, 100.0);
  std::vector<GrdGrid> grids;
  for (int m = 0; m < 5; ++m) {
    Eigen::MatrixXd values(3, 2);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 2; ++j) values(i, j) = uniform(rng);
    }
    grids.push_back(make_grid(axes, values));
  }
  const Eigen::MatrixXd cov = sampling::empirical_covariance(grids);

  // Plain-loop accumulation.
  double mean[6] = {0, 0, 0, 0, 0, 0};
  for (const auto& g : grids) {
    const Eigen::VectorXd f = flatten(g);
    for (int i = 0; i < 6; ++i) mean[i] += f(i) / 5.0;
  }
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) {
      double acc = 0.0;
      for (const auto& g : grids) {
        const Eigen::VectorXd f = flatten(g);
        acc += (f(i) - mean[i]) * (f(j) - mean[j]);
      }
      CHECK(cov(i, j) == doctest::Approx(acc / 5.0).epsilon(1e-10));
    }
  }

  // Permutation invariance.
  std::vector<GrdGrid> shuffled = {grids[3], grids[0], grids[4], grids[1],
                                   grids[2]};
  CHECK((sampling::empirical_covariance(shuffled) - cov)
            .cwiseAbs()
            .maxCoeff() < 1e-10);
}

TEST_CASE("uniform log-bitrate order endpoints and dense case") {
  const AxisSpec axes = full_scale_axes();
  const auto two = sampling::uniform_log_bitrate_order(axes, 5, 2);
  REQUIRE(two.indices.size() == 2);
  const auto nr = static_cast<int>(axes.resolution_count());
  CHECK(two.indices[0] == 0 * nr + 5);
  CHECK(two.indices[1] == 89 * nr + 5);

  const auto all = sampling::uniform_log_bitrate_order(axes, 0, 90);
  REQUIRE(all.indices.size() == 90);
  for (int b = 0; b < 90; ++b) CHECK(all.indices[static_cast<std::size_t>(b)] == b * nr);
}

TEST_CASE("uniform log-bitrate order hits the geometric targets") {
  // Targets 100 * 90^(k/3): {100, 448.14, 2008.3, 9000}; the nearest grid
  // bitrates on the 100-step lattice are {100, 400, 2000, 9000}.
  const AxisSpec axes = full_scale_axes();
  const auto order = sampling::uniform_log_bitrate_order(axes, 2, 4);
  const auto nr = static_cast<int>(axes.resolution_count());
  std::vector<double> bitrates;
  for (int idx : order.indices) {
    bitrates.push_back(axes.bitrates_kbps[static_cast<std::size_t>(idx / nr)]);
  }
  CHECK(bitrates == std::vector<double>{100, 400, 2000, 9000});
}

TEST_CASE("uniform order reproduces the classical 4-point query set") {
  // On a 100..2800 kbps lattice the geometric targets land on the familiar
  // {100, 300, 900, 2800} querying bitrates.
  AxisSpec axes;
  for (double b = 100; b <= 2800; b += 100) axes.bitrates_kbps.push_back(b);
  axes.resolutions_diag = {400, 2203};
  const auto order = sampling::uniform_log_bitrate_order(axes, 1, 4);
  std::vector<double> bitrates;
  for (int idx : order.indices) {
    bitrates.push_back(axes.bitrates_kbps[static_cast<std::size_t>(idx / 2)]);
  }
  CHECK(bitrates == std::vector<double>{100, 300, 900, 2800});
}

TEST_CASE("uniform order advances on collisions") {
  AxisSpec axes;
  // Both of the first two geometric targets (100, ~949) are nearest to the
  // 100 kbps point, so the second pick must advance to an unused one.
  axes.bitrates_kbps = {100, 5000, 9000};
  axes.resolutions_diag = {400, 800};
  const auto order = sampling::uniform_log_bitrate_order(axes, 0, 3);
  std::vector<int> sorted = order.indices;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 2, 4});  // all three bitrates used
  CHECK_THROWS_AS(sampling::uniform_log_bitrate_order(axes, 0, 4), Error);
}

}  // TEST_SUITE
