#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "grd/grid.hpp"

namespace grd::basis {

enum class BasisKind { eigen, polynomial, trigonometric };

std::string to_string(BasisKind kind);
BasisKind basis_kind_from_string(const std::string& name);

/// A linear surface model: mean vector plus orthonormal component columns.
/// For the eigen kind the columns are covariance eigenvectors with the
/// eigenvalue spectrum attached; the fixed families carry zero eigenvalues.
struct EigenBasis {
  AxisSpec axes;
  Eigen::VectorXd mean;         // length K
  Eigen::MatrixXd components;   // K x N_max, orthonormal columns
  Eigen::VectorXd eigenvalues;  // length N_max, non-increasing, >= 0
  double total_variance = 0.0;  // trace of the training covariance
  int training_count = 0;
  BasisKind kind = BasisKind::eigen;
  /// Set when fewer components than requested were available (rank limit);
  /// missing directions are never zero-padded.
  bool truncated = false;

  int max_components() const { return static_cast<int>(components.cols()); }
};

/// Coefficients in a basis; shorter than max_components is allowed.
struct CoefficientVector {
  Eigen::VectorXd coefficients;
  BasisKind basis_kind = BasisKind::eigen;
};

/// Which eigendecomposition route pca_train takes. `automatic` picks the
/// M x M Gram matrix when M < K and the K x K covariance otherwise; the
/// explicit values exist so tests can check that both routes agree.
enum class PcaRoute { automatic, gram, covariance };

/// Principal component analysis over flattened grids: mean of the corpus,
/// top eigenvectors of the (1/M)-normalized empirical covariance, and their
/// eigenvalues. Component signs are fixed by making each column's largest
/// absolute entry positive.
EigenBasis pca_train(const std::vector<GrdGrid>& dataset, int n_components,
                     PcaRoute route = PcaRoute::automatic);

/// Fraction of the training variance captured by the first n components.
double explained_energy(const EigenBasis& basis, int n);

/// c_k = <f - mean, h_k> for k = 1..n.
CoefficientVector project(const EigenBasis& basis, const GrdGrid& grid, int n);

/// mean + H c, reshaped onto the axes. No clipping: the result may leave
/// [0, 100] or violate monotonicity; callers validate.
GrdGrid synthesize(const EigenBasis& basis, const CoefficientVector& coeffs);

/// 2-D monomials u^p v^q on unit-normalized axis coordinates, ordered by
/// total degree then by the bitrate exponent, orthonormalized on the lattice
/// by modified Gram-Schmidt. The mean defaults to zero unless a dataset mean
/// is supplied.
EigenBasis polynomial_basis(const AxisSpec& axes, int n,
                            std::optional<Eigen::VectorXd> mean = {});

/// Half-sine tensor products sin(p pi u) sin(q pi v) on the same normalized
/// coordinates, same ordering and orthonormalization as polynomial_basis.
EigenBasis trigonometric_basis(const AxisSpec& axes, int n,
                               std::optional<Eigen::VectorXd> mean = {});

/// PCA over plain vectors; shared by the 2-D surface model and the 1-D
/// rate-quality model used in codec comparison.
struct PcaResult {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;
  Eigen::VectorXd eigenvalues;
  double total_variance = 0.0;
  bool truncated = false;
};

PcaResult pca_train_vectors(const std::vector<Eigen::VectorXd>& samples,
                            int n_components,
                            PcaRoute route = PcaRoute::automatic);

}  // namespace grd::basis
