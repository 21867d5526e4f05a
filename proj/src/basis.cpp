#include "grd/basis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "grd/errors.hpp"

namespace grd::basis {

std::string to_string(BasisKind kind) {
  switch (kind) {
    case BasisKind::eigen: return "eigen";
    case BasisKind::polynomial: return "polynomial";
    case BasisKind::trigonometric: return "trigonometric";
  }
  return "eigen";
}

BasisKind basis_kind_from_string(const std::string& name) {
  if (name == "eigen") return BasisKind::eigen;
  if (name == "polynomial") return BasisKind::polynomial;
  if (name == "trigonometric") return BasisKind::trigonometric;
  fail(ErrorKind::parse, "unknown basis kind '" + name + "'");
}

namespace {

constexpr double kRankRelTol = 1e-12;

void fix_component_signs(Eigen::MatrixXd& components) {
  for (Eigen::Index c = 0; c < components.cols(); ++c) {
    Eigen::Index imax = 0;
    components.col(c).cwiseAbs().maxCoeff(&imax);
    if (components(imax, c) < 0.0) components.col(c) = -components.col(c);
  }
}

/// Symmetric orthonormalization U (U^T U)^{-1/2}: the closest orthonormal
/// set to U, so well-conditioned columns move by at most rounding noise.
void reorthonormalize(Eigen::MatrixXd& u) {
  if (u.cols() == 0) return;
  const Eigen::MatrixXd gram = u.transpose() * u;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  const Eigen::VectorXd inv_sqrt =
      es.eigenvalues().cwiseMax(1e-30).cwiseSqrt().cwiseInverse();
  u = u * es.eigenvectors() * inv_sqrt.asDiagonal() *
      es.eigenvectors().transpose();
}

}  // namespace

PcaResult pca_train_vectors(const std::vector<Eigen::VectorXd>& samples,
                            int n_components, PcaRoute route) {
  const int m = static_cast<int>(samples.size());
  if (m < 2) {
    fail(ErrorKind::invalid_argument, "PCA needs at least 2 samples");
  }
  if (n_components < 1) {
    fail(ErrorKind::invalid_argument, "n_components must be positive");
  }
  const Eigen::Index k = samples.front().size();
  for (const auto& s : samples) {
    if (s.size() != k) {
      fail(ErrorKind::axis_mismatch, "PCA samples differ in length");
    }
  }

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(k);
  for (const auto& s : samples) mean += s;
  mean /= static_cast<double>(m);

  Eigen::MatrixXd centered(k, m);
  for (int j = 0; j < m; ++j) centered.col(j) = samples[j] - mean;
  const double total_variance =
      centered.squaredNorm() / static_cast<double>(m);

  const bool use_gram = route == PcaRoute::gram ||
                        (route == PcaRoute::automatic && m < k);

  Eigen::VectorXd evals;       // descending
  Eigen::MatrixXd components;  // matching columns
  if (use_gram) {
    const Eigen::MatrixXd gram =
        centered.transpose() * centered / static_cast<double>(m);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    if (es.info() != Eigen::Success) {
      fail(ErrorKind::solver, "Gram eigendecomposition failed");
    }
    evals = es.eigenvalues().reverse();
    Eigen::MatrixXd gvecs(m, m);
    for (int j = 0; j < m; ++j) gvecs.col(j) = es.eigenvectors().col(m - 1 - j);
    // Map Gram eigenvectors back to data space: u = X v / sqrt(M lambda).
    components.resize(k, m);
    for (int j = 0; j < m; ++j) {
      components.col(j) = centered * gvecs.col(j);
      const double norm = components.col(j).norm();
      if (norm > 0.0) components.col(j) /= norm;
    }
  } else {
    const Eigen::MatrixXd cov =
        centered * centered.transpose() / static_cast<double>(m);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) {
      fail(ErrorKind::solver, "covariance eigendecomposition failed");
    }
    evals = es.eigenvalues().reverse();
    components.resize(k, k);
    for (Eigen::Index j = 0; j < k; ++j) {
      components.col(j) = es.eigenvectors().col(k - 1 - j);
    }
  }

  const double lead = std::max(evals.size() > 0 ? evals(0) : 0.0, 0.0);
  const double cutoff = kRankRelTol * std::max(lead, 1e-300);
  int rank = 0;
  while (rank < evals.size() && evals(rank) > cutoff) ++rank;

  PcaResult result;
  result.mean = std::move(mean);
  result.total_variance = total_variance;
  const int keep = std::min(n_components, rank);
  result.truncated = keep < n_components;
  result.components = components.leftCols(keep);
  result.eigenvalues = evals.head(keep).cwiseMax(0.0);
  reorthonormalize(result.components);
  fix_component_signs(result.components);
  return result;
}

EigenBasis pca_train(const std::vector<GrdGrid>& dataset, int n_components,
                     PcaRoute route) {
  if (dataset.size() < 2) {
    fail(ErrorKind::invalid_argument, "training needs at least 2 grids");
  }
  const AxisSpec& axes = dataset.front().axes;
  std::vector<Eigen::VectorXd> vectors;
  vectors.reserve(dataset.size());
  for (const auto& grid : dataset) {
    if (!grid.axes.same_labels(axes)) {
      fail(ErrorKind::axis_mismatch, "training grids live on differing axes");
    }
    vectors.push_back(flatten(grid));
  }
  PcaResult core = pca_train_vectors(vectors, n_components, route);

  EigenBasis basis;
  basis.axes = axes;
  basis.mean = std::move(core.mean);
  basis.components = std::move(core.components);
  basis.eigenvalues = std::move(core.eigenvalues);
  basis.total_variance = core.total_variance;
  basis.training_count = static_cast<int>(dataset.size());
  basis.kind = BasisKind::eigen;
  basis.truncated = core.truncated;
  return basis;
}

double explained_energy(const EigenBasis& basis, int n) {
  if (n < 1 || n > basis.max_components()) {
    fail(ErrorKind::invalid_argument,
         "component count " + std::to_string(n) + " outside [1, " +
             std::to_string(basis.max_components()) + "]");
  }
  if (basis.total_variance <= 0.0) return 1.0;
  return basis.eigenvalues.head(n).sum() / basis.total_variance;
}

CoefficientVector project(const EigenBasis& basis, const GrdGrid& grid,
                          int n) {
  if (!grid.axes.same_labels(basis.axes)) {
    fail(ErrorKind::axis_mismatch, "grid axes do not match the basis axes");
  }
  if (n < 0 || n > basis.max_components()) {
    fail(ErrorKind::invalid_argument,
         "component count outside [0, " +
             std::to_string(basis.max_components()) + "]");
  }
  const Eigen::VectorXd centered = flatten(grid) - basis.mean;
  CoefficientVector cv;
  cv.coefficients = basis.components.leftCols(n).transpose() * centered;
  cv.basis_kind = basis.kind;
  return cv;
}

GrdGrid synthesize(const EigenBasis& basis, const CoefficientVector& coeffs) {
  const Eigen::Index n = coeffs.coefficients.size();
  if (n > basis.max_components()) {
    fail(ErrorKind::invalid_argument,
         "coefficient vector longer than the component count");
  }
  const Eigen::VectorXd flat =
      basis.mean + basis.components.leftCols(n) * coeffs.coefficients;
  return unflatten(flat, basis.axes);
}

namespace {

/// Exponent pairs (p, q) in total-degree order, ties by ascending p.
std::vector<std::pair<int, int>> degree_ordered_pairs(int count,
                                                      bool from_one) {
  std::vector<std::pair<int, int>> pairs;
  const int base = from_one ? 1 : 0;
  for (int degree = 2 * base; static_cast<int>(pairs.size()) < count;
       ++degree) {
    for (int p = base; p <= degree - base; ++p) {
      pairs.emplace_back(p, degree - p);
      if (static_cast<int>(pairs.size()) == count) break;
    }
  }
  return pairs;
}

std::vector<double> normalized_coordinates(const std::vector<double>& labels) {
  const double lo = labels.front(), hi = labels.back();
  std::vector<double> u(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    u[i] = (labels[i] - lo) / (hi - lo);
  }
  return u;
}

EigenBasis fixed_basis(const AxisSpec& axes, int n, BasisKind kind,
                       std::optional<Eigen::VectorXd> mean) {
  validate_axes(axes);
  const int k = static_cast<int>(axes.cell_count());
  if (n < 1 || n > k) {
    fail(ErrorKind::invalid_argument,
         "basis size " + std::to_string(n) + " outside [1, " +
             std::to_string(k) + "]");
  }
  if (mean && mean->size() != k) {
    fail(ErrorKind::invalid_argument, "mean length does not match the axes");
  }

  const std::vector<double> u = normalized_coordinates(axes.bitrates_kbps);
  const std::vector<double> v = normalized_coordinates(axes.resolutions_diag);
  const std::size_t nb = axes.bitrate_count();
  const std::size_t nr = axes.resolution_count();

  const bool trig = kind == BasisKind::trigonometric;
  const auto pairs = degree_ordered_pairs(n, trig);

  Eigen::MatrixXd h(k, n);
  for (int c = 0; c < n; ++c) {
    const auto [p, q] = pairs[static_cast<std::size_t>(c)];
    for (std::size_t b = 0; b < nb; ++b) {
      for (std::size_t r = 0; r < nr; ++r) {
        const auto row = static_cast<Eigen::Index>(axes.flat_index(b, r));
        h(row, c) = trig ? std::sin(p * std::numbers::pi * u[b]) *
                               std::sin(q * std::numbers::pi * v[r])
                         : std::pow(u[b], p) * std::pow(v[r], q);
      }
    }
  }

  // Modified Gram-Schmidt, two passes.
  for (int c = 0; c < n; ++c) {
    for (int pass = 0; pass < 2; ++pass) {
      for (int j = 0; j < c; ++j) {
        h.col(c) -= h.col(j).dot(h.col(c)) * h.col(j);
      }
    }
    const double norm = h.col(c).norm();
    if (norm < 1e-10) {
      fail(ErrorKind::invalid_argument,
           to_string(kind) + " basis is rank deficient at index " +
               std::to_string(c) + " on these axes");
    }
    h.col(c) /= norm;
  }
  fix_component_signs(h);

  EigenBasis basis;
  basis.axes = axes;
  basis.mean = mean ? std::move(*mean) : Eigen::VectorXd::Zero(k);
  basis.components = std::move(h);
  basis.eigenvalues = Eigen::VectorXd::Zero(n);
  basis.total_variance = 0.0;
  basis.training_count = 0;
  basis.kind = kind;
  return basis;
}

}  // namespace

EigenBasis polynomial_basis(const AxisSpec& axes, int n,
                            std::optional<Eigen::VectorXd> mean) {
  return fixed_basis(axes, n, BasisKind::polynomial, std::move(mean));
}

EigenBasis trigonometric_basis(const AxisSpec& axes, int n,
                               std::optional<Eigen::VectorXd> mean) {
  return fixed_basis(axes, n, BasisKind::trigonometric, std::move(mean));
}

}  // namespace grd::basis
