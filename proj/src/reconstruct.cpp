#include "grd/reconstruct.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "grd/errors.hpp"

namespace grd::recon {

namespace {

double sample_rmse_of(const basis::EigenBasis& basis, const SampleSet& samples,
                      const Eigen::VectorXd& coeffs) {
  double sq = 0.0;
  for (const auto& e : samples.entries) {
    const auto cell = static_cast<Eigen::Index>(basis.axes.flat_index(
        static_cast<std::size_t>(e.bitrate_index),
        static_cast<std::size_t>(e.resolution_index)));
    const double fitted =
        basis.mean(cell) +
        basis.components.row(cell).head(coeffs.size()) * coeffs;
    const double r = e.quality - fitted;
    sq += r * r;
  }
  return std::sqrt(sq / static_cast<double>(samples.entries.size()));
}

}  // namespace

EstimateResult estimate(const basis::EigenBasis& basis,
                        const SampleSet& samples,
                        const ReconstructionConfig& config) {
  if (samples.entries.empty()) {
    fail(ErrorKind::invalid_argument, "sample set is empty");
  }
  if (!samples.axes.same_labels(basis.axes)) {
    fail(ErrorKind::axis_mismatch,
         "samples live on different axes than the basis");
  }
  if (config.basis_kind != basis.kind) {
    fail(ErrorKind::invalid_argument,
         "config expects a " + basis::to_string(config.basis_kind) +
             " basis but got " + basis::to_string(basis.kind));
  }
  const int s = static_cast<int>(samples.entries.size());
  int n;
  if (config.n_components) {
    n = *config.n_components;
    if (n < 1 || n > basis.max_components()) {
      fail(ErrorKind::invalid_argument,
           "component count " + std::to_string(n) + " outside [1, " +
               std::to_string(basis.max_components()) + "]");
    }
  } else {
    n = std::min(s, basis.max_components());
  }

  EstimateResult result{unflatten(basis.mean, basis.axes), {}, {}, 0.0, n};

  if (config.constrained) {
    const qp::DifferenceOperators ops =
        qp::build_difference_operators(basis.axes);
    qp::QpProblem problem = qp::assemble_qp(basis, samples, n, ops);
    auto [range_g, range_h] = qp::assemble_range_rows(basis, n);
    const Eigen::Index mono_rows = problem.ineq_matrix.rows();
    problem.ineq_matrix.conservativeResize(mono_rows + range_g.rows(),
                                           Eigen::NoChange);
    problem.ineq_matrix.bottomRows(range_g.rows()) = range_g;
    problem.ineq_bound.conservativeResize(mono_rows + range_h.size());
    problem.ineq_bound.tail(range_h.size()) = range_h;

    qp::QpSolution solution = qp::solve_qp(problem, config.solver);
    if (solution.status == qp::SolveStatus::infeasible) {
      fail(ErrorKind::solver,
           "constraint system is infeasible; the basis file is corrupt "
           "(the mean surface itself must be feasible)");
    }
    result.coefficients = solution.coefficients;
    result.qp_diagnostics = std::move(solution);
  } else {
    // Plain least squares; the SVD route returns the minimum-norm solution
    // for underdetermined designs.
    Eigen::MatrixXd design(s, n);
    Eigen::VectorXd rhs(s);
    for (int i = 0; i < s; ++i) {
      const auto& e = samples.entries[static_cast<std::size_t>(i)];
      const auto cell = static_cast<Eigen::Index>(basis.axes.flat_index(
          static_cast<std::size_t>(e.bitrate_index),
          static_cast<std::size_t>(e.resolution_index)));
      design.row(i) = basis.components.row(cell).head(n);
      rhs(i) = e.quality - basis.mean(cell);
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(
        design, Eigen::ComputeThinU | Eigen::ComputeThinV);
    result.coefficients = svd.solve(rhs);
  }

  basis::CoefficientVector cv{result.coefficients, basis.kind};
  result.grid = basis::synthesize(basis, cv);
  result.sample_rmse = sample_rmse_of(basis, samples, result.coefficients);
  return result;
}

std::vector<ErrorRow> evaluate_method(const basis::EigenBasis& basis,
                                      const std::vector<GrdGrid>& test_set,
                                      const sampling::SamplingOrder& order,
                                      const std::vector<int>& s_values,
                                      const ReconstructionConfig& config) {
  if (test_set.empty()) {
    fail(ErrorKind::invalid_argument, "test set is empty");
  }
  if (!order.axes.same_labels(basis.axes)) {
    fail(ErrorKind::axis_mismatch,
         "sampling order lives on different axes than the basis");
  }
  for (const auto& grid : test_set) {
    if (!grid.axes.same_labels(basis.axes)) {
      fail(ErrorKind::axis_mismatch,
           "test grid lives on different axes than the basis");
    }
  }

  std::vector<ErrorRow> table;
  table.reserve(s_values.size());
  for (int s : s_values) {
    if (s < 1 || s > static_cast<int>(order.indices.size())) {
      fail(ErrorKind::invalid_argument,
           "sample budget " + std::to_string(s) +
               " exceeds the order length " +
               std::to_string(order.indices.size()));
    }
    const std::vector<int> cells(order.indices.begin(),
                                 order.indices.begin() + s);
    ErrorRow row;
    row.s = s;
    for (const auto& grid : test_set) {
      const SampleSet samples = samples_from_grid(grid, cells);
      const EstimateResult est = estimate(basis, samples, config);
      // Errors are measured on the full lattice, never just the samples.
      const double e_rmse = rmse(est.grid, grid);
      const double e_linf = linf_error(est.grid, grid);
      row.mean_rmse += e_rmse;
      row.mean_linf += e_linf;
      row.worst_rmse = std::max(row.worst_rmse, e_rmse);
      row.worst_linf = std::max(row.worst_linf, e_linf);
    }
    row.mean_rmse /= static_cast<double>(test_set.size());
    row.mean_linf /= static_cast<double>(test_set.size());
    table.push_back(row);
  }
  return table;
}

}  // namespace grd::recon
