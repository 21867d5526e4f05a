#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "grd/basis.hpp"
#include "grd/grid.hpp"

namespace grd::qp {

/// Forward-difference operators in the flattened (bitrate-major) layout:
/// d_x differences along bitrate for every resolution column, d_y
/// differences along resolution restricted to the maximum-bitrate row.
/// A surface is monotone in the membership sense iff [d_x; d_y] f >= 0.
struct DifferenceOperators {
  Eigen::SparseMatrix<double> d_x;  // (|bitrates|-1)*|resolutions| rows
  Eigen::SparseMatrix<double> d_y;  // |resolutions|-1 rows

  Eigen::SparseMatrix<double> stacked() const;
};

DifferenceOperators build_difference_operators(const AxisSpec& axes);

/// minimize 0.5 c'Pc + q'c + constant  subject to  G c <= h.
/// For the surface-fit problem, P = A'A and q = -A'r where row i of A holds
/// the first n component values at sample i's cell and r_i is the sample
/// quality minus the mean there; the reported objective therefore equals
/// half the sum of squared sample residuals.
struct QpProblem {
  Eigen::MatrixXd hessian;      // N x N, symmetric PSD
  Eigen::VectorXd linear;       // N
  Eigen::MatrixXd ineq_matrix;  // rows x N (may have zero rows)
  Eigen::VectorXd ineq_bound;   // rows
  double objective_constant = 0.0;
};

/// Throws unless the hessian is symmetric within 1e-10 and all dimensions
/// are consistent.
void validate_problem(const QpProblem& problem);

QpProblem assemble_qp(const basis::EigenBasis& basis,
                      const SampleSet& samples, int n,
                      const DifferenceOperators& ops);

/// Extra inequality rows pinning the surface range: the lowest-bitrate row
/// stays >= 0 and the top-right cell stays <= 100. Combined with the
/// difference rows these bound every cell to [0, 100], since the minimum of
/// a monotone surface sits in the first row and its maximum in the last
/// cell. Returned as (matrix, bound) to append to a QpProblem.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> assemble_range_rows(
    const basis::EigenBasis& basis, int n);

struct SolverSettings {
  double abs_tol = 1e-8;
  double rel_tol = 1e-8;
  // Degenerate full-lattice problems (long saturated runs activate many
  // dependent rows) converge slowly in the dual; the cap is sized for them.
  // Well-conditioned problems exit in a few hundred iterations regardless.
  int max_iter = 400000;
  // Operator-splitting internals; the defaults solve desk-scale problems
  // (N <= 50) in milliseconds. Constraint rows are equilibrated to unit
  // norm internally, so one rho fits all rows.
  double rho = 1.0;
  double sigma = 1e-6;
  double alpha = 1.6;
  bool polish = true;
  int check_interval = 25;
};

enum class SolveStatus { solved, max_iterations, infeasible };

std::string to_string(SolveStatus status);

struct QpSolution {
  Eigen::VectorXd coefficients;
  double objective = 0.0;  // includes the problem's constant term
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  SolveStatus status = SolveStatus::solved;
  int iterations = 0;
};

/// Deterministic ADMM with fixed step size and an active-set polish pass.
/// status == solved guarantees max(Gc - h) <= the feasibility tolerance and
/// stationarity within the requested residuals.
QpSolution solve_qp(const QpProblem& problem,
                    const SolverSettings& settings = {});

}  // namespace grd::qp
