#include "grd/qp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "grd/errors.hpp"

namespace grd::qp {

Eigen::SparseMatrix<double> DifferenceOperators::stacked() const {
  Eigen::SparseMatrix<double> out(d_x.rows() + d_y.rows(), d_x.cols());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(d_x.nonZeros() + d_y.nonZeros()));
  for (int k = 0; k < d_x.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(d_x, k); it; ++it) {
      trip.emplace_back(it.row(), it.col(), it.value());
    }
  }
  for (int k = 0; k < d_y.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(d_y, k); it; ++it) {
      trip.emplace_back(d_x.rows() + it.row(), it.col(), it.value());
    }
  }
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

DifferenceOperators build_difference_operators(const AxisSpec& axes) {
  validate_axes(axes);
  const auto nb = static_cast<Eigen::Index>(axes.bitrate_count());
  const auto nr = static_cast<Eigen::Index>(axes.resolution_count());
  const Eigen::Index k = nb * nr;

  DifferenceOperators ops;
  ops.d_x.resize((nb - 1) * nr, k);
  {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(2 * (nb - 1) * nr));
    for (Eigen::Index b = 0; b + 1 < nb; ++b) {
      for (Eigen::Index r = 0; r < nr; ++r) {
        const Eigen::Index row = b * nr + r;
        trip.emplace_back(row, b * nr + r, -1.0);
        trip.emplace_back(row, (b + 1) * nr + r, 1.0);
      }
    }
    ops.d_x.setFromTriplets(trip.begin(), trip.end());
  }
  ops.d_y.resize(nr - 1, k);
  {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(2 * (nr - 1)));
    for (Eigen::Index r = 0; r + 1 < nr; ++r) {
      trip.emplace_back(r, (nb - 1) * nr + r, -1.0);
      trip.emplace_back(r, (nb - 1) * nr + r + 1, 1.0);
    }
    ops.d_y.setFromTriplets(trip.begin(), trip.end());
  }
  return ops;
}

void validate_problem(const QpProblem& problem) {
  const Eigen::Index n = problem.hessian.rows();
  if (problem.hessian.cols() != n) {
    fail(ErrorKind::structural, "hessian is not square");
  }
  if ((problem.hessian - problem.hessian.transpose())
          .cwiseAbs()
          .maxCoeff() > 1e-10) {
    fail(ErrorKind::structural, "hessian is not symmetric within 1e-10");
  }
  if (problem.linear.size() != n) {
    fail(ErrorKind::structural, "linear term length does not match");
  }
  if (problem.ineq_matrix.rows() != problem.ineq_bound.size() ||
      (problem.ineq_matrix.rows() > 0 && problem.ineq_matrix.cols() != n)) {
    fail(ErrorKind::structural, "constraint dimensions are inconsistent");
  }
  if (!problem.hessian.allFinite() || !problem.linear.allFinite() ||
      !problem.ineq_matrix.allFinite() || !problem.ineq_bound.allFinite()) {
    fail(ErrorKind::structural, "problem holds non-finite entries");
  }
}

QpProblem assemble_qp(const basis::EigenBasis& basis, const SampleSet& samples,
                      int n, const DifferenceOperators& ops) {
  if (!samples.axes.same_labels(basis.axes)) {
    fail(ErrorKind::axis_mismatch, "samples live on different axes than the basis");
  }
  if (samples.entries.empty()) {
    fail(ErrorKind::invalid_argument, "sample set is empty");
  }
  if (n < 1 || n > basis.max_components()) {
    fail(ErrorKind::invalid_argument,
         "component count " + std::to_string(n) + " outside [1, " +
             std::to_string(basis.max_components()) + "]");
  }
  if (ops.d_x.cols() != static_cast<Eigen::Index>(basis.axes.cell_count())) {
    fail(ErrorKind::structural, "difference operators built for other axes");
  }

  const auto s = static_cast<Eigen::Index>(samples.entries.size());
  Eigen::MatrixXd design(s, n);
  Eigen::VectorXd residual(s);
  for (Eigen::Index i = 0; i < s; ++i) {
    const auto& e = samples.entries[static_cast<std::size_t>(i)];
    const auto cell = static_cast<Eigen::Index>(basis.axes.flat_index(
        static_cast<std::size_t>(e.bitrate_index),
        static_cast<std::size_t>(e.resolution_index)));
    design.row(i) = basis.components.row(cell).head(n);
    residual(i) = e.quality - basis.mean(cell);
  }

  QpProblem problem;
  problem.hessian = design.transpose() * design;
  if (s < n) {
    // Rank-deficient data term (variable-N mode sets N = S at the boundary).
    problem.hessian += 1e-10 * Eigen::MatrixXd::Identity(n, n);
  }
  problem.linear = -design.transpose() * residual;
  problem.objective_constant = 0.5 * residual.squaredNorm();

  const Eigen::SparseMatrix<double> d = ops.stacked();
  problem.ineq_matrix = -(d * basis.components.leftCols(n));
  problem.ineq_bound = d * basis.mean;
  return problem;
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> assemble_range_rows(
    const basis::EigenBasis& basis, int n) {
  const auto nb = basis.axes.bitrate_count();
  const auto nr = basis.axes.resolution_count();
  Eigen::MatrixXd g(nr + 1, n);
  Eigen::VectorXd h(nr + 1);
  for (std::size_t r = 0; r < nr; ++r) {
    const auto cell = static_cast<Eigen::Index>(basis.axes.flat_index(0, r));
    g.row(static_cast<Eigen::Index>(r)) =
        -basis.components.row(cell).head(n);
    h(static_cast<Eigen::Index>(r)) = basis.mean(cell);
  }
  const auto top =
      static_cast<Eigen::Index>(basis.axes.flat_index(nb - 1, nr - 1));
  g.row(static_cast<Eigen::Index>(nr)) = basis.components.row(top).head(n);
  h(static_cast<Eigen::Index>(nr)) = 100.0 - basis.mean(top);
  return {std::move(g), std::move(h)};
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::solved: return "solved";
    case SolveStatus::max_iterations: return "max_iterations";
    case SolveStatus::infeasible: return "infeasible";
  }
  return "solved";
}

namespace {

double objective_of(const QpProblem& p, const Eigen::VectorXd& x) {
  return 0.5 * x.dot(p.hessian * x) + p.linear.dot(x) + p.objective_constant;
}

/// Worst KKT residual of a primal-dual pair: constraint violation and
/// stationarity gap.
double kkt_error(const QpProblem& p, const Eigen::VectorXd& x,
                 const Eigen::VectorXd& y) {
  const double stationarity =
      (p.hessian * x + p.linear + p.ineq_matrix.transpose() * y)
          .cwiseAbs()
          .maxCoeff();
  const double violation =
      p.ineq_matrix.rows() > 0
          ? std::max((p.ineq_matrix * x - p.ineq_bound).maxCoeff(), 0.0)
          : 0.0;
  return std::max(stationarity, violation);
}

/// Equality-constrained solve on one active set; returns false on a
/// numerically unusable system.
bool solve_active_set(const QpProblem& p,
                      const std::vector<Eigen::Index>& active,
                      Eigen::VectorXd& x_out, Eigen::VectorXd& lambda_out) {
  const Eigen::Index n = p.hessian.rows();
  const auto na = static_cast<Eigen::Index>(active.size());

  Eigen::MatrixXd ga(na, n);
  Eigen::VectorXd ha(na);
  for (Eigen::Index i = 0; i < na; ++i) {
    ga.row(i) = p.ineq_matrix.row(active[static_cast<std::size_t>(i)]);
    ha(i) = p.ineq_bound(active[static_cast<std::size_t>(i)]);
  }

  const double delta = 1e-9;
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + na, n + na);
  kkt.topLeftCorner(n, n) =
      p.hessian + delta * Eigen::MatrixXd::Identity(n, n);
  kkt.topRightCorner(n, na) = ga.transpose();
  kkt.bottomLeftCorner(na, n) = ga;
  kkt.bottomRightCorner(na, na) = -delta * Eigen::MatrixXd::Identity(na, na);

  Eigen::VectorXd rhs(n + na);
  rhs.head(n) = -p.linear;
  rhs.tail(na) = ha;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(kkt);
  if (ldlt.info() != Eigen::Success) return false;

  // Iterative refinement against the unregularized KKT system.
  Eigen::VectorXd t = ldlt.solve(rhs);
  for (int round = 0; round < 4; ++round) {
    Eigen::VectorXd residual = rhs;
    residual.head(n) -= p.hessian * t.head(n) + ga.transpose() * t.tail(na);
    residual.tail(na) -= ga * t.head(n);
    t += ldlt.solve(residual);
  }
  if (!t.allFinite()) return false;
  x_out = t.head(n);
  lambda_out = t.tail(na);
  return true;
}

/// Active-set refinement seeded from a splitting iterate: solve the
/// equality-constrained problem, add violated rows, drop rows with negative
/// multipliers, repeat a few rounds. Degenerate problems (dependent active
/// rows, as on surfaces with long flat runs) may never settle on a clean
/// sign pattern, so every round's clamped candidate competes on KKT error
/// and the best one wins. Returns true when the input pair improved.
bool polish(const QpProblem& p, Eigen::VectorXd& x, Eigen::VectorXd& y) {
  const Eigen::Index m = p.ineq_matrix.rows();

  double best_err = kkt_error(p, x, y);
  bool improved = false;

  // Candidate seeds. Degenerate problems (long flat runs) leave dozens of
  // tight rows whose span has rank n at most, so forcing them all into the
  // equality system over-determines it. The first seed therefore walks the
  // tight rows in order of multiplier strength and keeps only rows that
  // grow the rank; the permissive slack-or-multiplier seed covers the
  // plain well-conditioned case.
  const Eigen::Index n = p.hessian.rows();
  const Eigen::VectorXd slack = p.ineq_bound - p.ineq_matrix * x;
  std::vector<std::vector<Eigen::Index>> seeds(2);
  {
    std::vector<Eigen::Index> tight;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (slack(i) < 1e-6 || y(i) > 1e-9) tight.push_back(i);
    }
    std::sort(tight.begin(), tight.end(),
              [&](Eigen::Index a, Eigen::Index b) {
                if (y(a) != y(b)) return y(a) > y(b);
                return a < b;
              });
    Eigen::MatrixXd rows(std::min<Eigen::Index>(
                             static_cast<Eigen::Index>(tight.size()), n),
                         n);
    Eigen::Index rank = 0;
    for (Eigen::Index i : tight) {
      if (rank == rows.rows()) break;
      rows.row(rank) = p.ineq_matrix.row(i);
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(
          rows.topRows(rank + 1).transpose());
      if (qr.rank() == rank + 1) {
        seeds[0].push_back(i);
        ++rank;
      }
    }
    std::sort(seeds[0].begin(), seeds[0].end());
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (slack(i) < 1e-7 || y(i) > 1e-9) seeds[1].push_back(i);
  }

  for (auto& active : seeds) {
    for (int round = 0; round < 8; ++round) {
      Eigen::VectorXd x_new, lambda;
      if (!solve_active_set(p, active, x_new, lambda)) break;

      Eigen::VectorXd y_new = Eigen::VectorXd::Zero(m);
      for (std::size_t a = 0; a < active.size(); ++a) {
        y_new(active[a]) =
            std::max(lambda(static_cast<Eigen::Index>(a)), 0.0);
      }
      const double err = kkt_error(p, x_new, y_new);
      if (err < best_err &&
          (m == 0 || (p.ineq_matrix * x_new - p.ineq_bound).maxCoeff() <=
                         1e-8)) {
        best_err = err;
        x = x_new;
        y = y_new;
        improved = true;
      }

      std::vector<Eigen::Index> next;
      bool changed = false;
      for (std::size_t a = 0; a < active.size(); ++a) {
        if (lambda(static_cast<Eigen::Index>(a)) < -1e-9) {
          changed = true;  // wrongly included; drop it
        } else {
          next.push_back(active[a]);
        }
      }
      const Eigen::VectorXd violation = p.ineq_matrix * x_new - p.ineq_bound;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (violation(i) > 1e-9 &&
            std::find(next.begin(), next.end(), i) == next.end()) {
          next.push_back(i);
          changed = true;
        }
      }
      if (!changed) break;
      if (static_cast<Eigen::Index>(next.size()) > std::max<Eigen::Index>(
              4 * n, 64)) {
        break;  // seed was hopeless; a huge set cannot be the binding one
      }
      std::sort(next.begin(), next.end());
      active = std::move(next);
    }
  }
  return improved;
}

}  // namespace

QpSolution solve_qp(const QpProblem& problem, const SolverSettings& settings) {
  validate_problem(problem);
  const Eigen::Index n = problem.hessian.rows();
  const Eigen::Index m = problem.ineq_matrix.rows();
  const Eigen::MatrixXd& g = problem.ineq_matrix;
  const Eigen::VectorXd& h = problem.ineq_bound;

  QpSolution sol;
  sol.coefficients = Eigen::VectorXd::Zero(n);

  if (m == 0) {
    // Unconstrained: direct solve with refinement.
    Eigen::LDLT<Eigen::MatrixXd> ldlt(
        problem.hessian +
        settings.sigma * Eigen::MatrixXd::Identity(n, n));
    Eigen::VectorXd x = ldlt.solve(-problem.linear);
    for (int round = 0; round < 8; ++round) {
      x += ldlt.solve(-problem.linear - problem.hessian * x);
    }
    sol.coefficients = x;
    sol.objective = objective_of(problem, x);
    sol.primal_residual = 0.0;
    sol.dual_residual =
        (problem.hessian * x + problem.linear).cwiseAbs().maxCoeff();
    sol.status = SolveStatus::solved;
    return sol;
  }

  // Deterministic row equilibration: every constraint row gets unit
  // infinity norm, so one step size serves rows of very different scales.
  Eigen::VectorXd row_scale(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    row_scale(i) = std::max(g.row(i).cwiseAbs().maxCoeff(), 1e-12);
  }
  const Eigen::MatrixXd gs = row_scale.cwiseInverse().asDiagonal() * g;
  const Eigen::VectorXd hs = h.cwiseQuotient(row_scale);

  const double rho = settings.rho;
  Eigen::MatrixXd reduced = problem.hessian +
                            settings.sigma * Eigen::MatrixXd::Identity(n, n) +
                            rho * gs.transpose() * gs;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(reduced);
  if (ldlt.info() != Eigen::Success) {
    fail(ErrorKind::solver, "KKT factorization failed");
  }

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd z = (gs * x).cwiseMin(hs);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m);  // scaled-space multiplier
  Eigen::VectorXd y_prev = y;

  double r_prim = 0.0, r_dual = 0.0;
  SolveStatus status = SolveStatus::max_iterations;
  int used = settings.max_iter;

  // The polish works on the original (unscaled) rows; multipliers convert
  // via y_original = y_scaled / row_scale.
  auto unscaled_multiplier = [&]() -> Eigen::VectorXd {
    return y.cwiseQuotient(row_scale);
  };

  // Snap the iterate onto the KKT point of its active set; commits and
  // reports success when the polished pair meets the tolerances.
  auto polish_converges = [&](int iter) {
    Eigen::VectorXd x_pol = x;
    Eigen::VectorXd y_pol = unscaled_multiplier();
    if (!polish(problem, x_pol, y_pol)) return false;
    const Eigen::VectorXd gx = g * x_pol;
    const double violation = std::max((gx - h).maxCoeff(), 0.0);
    const double dual = (problem.hessian * x_pol + problem.linear +
                         g.transpose() * y_pol)
                            .cwiseAbs()
                            .maxCoeff();
    const double prim_scale =
        std::max(gx.cwiseAbs().maxCoeff(), h.cwiseAbs().maxCoeff());
    const double dual_scale =
        std::max({(problem.hessian * x_pol).cwiseAbs().maxCoeff(),
                  (g.transpose() * y_pol).cwiseAbs().maxCoeff(),
                  problem.linear.cwiseAbs().maxCoeff()});
    if (violation > settings.abs_tol + settings.rel_tol * prim_scale ||
        dual > settings.abs_tol + settings.rel_tol * dual_scale) {
      return false;
    }
    x = x_pol;
    y = y_pol.cwiseProduct(row_scale);
    z = (gs * x).cwiseMin(hs);
    r_prim = violation;
    r_dual = dual;
    status = SolveStatus::solved;
    used = iter;
    return true;
  };

  for (int iter = 1; iter <= settings.max_iter; ++iter) {
    const Eigen::VectorXd rhs = settings.sigma * x - problem.linear +
                                gs.transpose() * (rho * z - y);
    const Eigen::VectorXd x_tilde = ldlt.solve(rhs);
    const Eigen::VectorXd z_tilde = gs * x_tilde;

    x = settings.alpha * x_tilde + (1.0 - settings.alpha) * x;
    const Eigen::VectorXd z_pre =
        settings.alpha * z_tilde + (1.0 - settings.alpha) * z;
    const Eigen::VectorXd z_new = (z_pre + y / rho).cwiseMin(hs);
    y_prev = y;
    y = y + rho * (z_pre - z_new);
    z = z_new;

    if (iter % settings.check_interval == 0 || iter == settings.max_iter) {
      const Eigen::VectorXd gx = gs * x;
      const Eigen::VectorXd dual_vec = problem.hessian * x + problem.linear +
                                       gs.transpose() * y;
      r_prim = (gx - z).cwiseAbs().maxCoeff();
      r_dual = dual_vec.cwiseAbs().maxCoeff();

      const double prim_scale =
          std::max(gx.cwiseAbs().maxCoeff(), z.cwiseAbs().maxCoeff());
      const double dual_scale = std::max(
          {(problem.hessian * x).cwiseAbs().maxCoeff(),
           (gs.transpose() * y).cwiseAbs().maxCoeff(),
           problem.linear.size() > 0 ? problem.linear.cwiseAbs().maxCoeff()
                                     : 0.0});
      if (r_prim <= settings.abs_tol + settings.rel_tol * prim_scale &&
          r_dual <= settings.abs_tol + settings.rel_tol * dual_scale) {
        status = SolveStatus::solved;
        used = iter;
        break;
      }

      // Primal infeasibility certificate: a dual ray with G'dy ~ 0,
      // dy >= 0 and h'dy < 0.
      const Eigen::VectorXd dy = y - y_prev;
      const double dy_norm = dy.cwiseAbs().maxCoeff();
      if (dy_norm > 1e-12) {
        const double eps_pinf = 1e-6 * dy_norm;
        const bool nonneg = dy.minCoeff() >= -eps_pinf;
        const bool in_nullspace =
            (gs.transpose() * dy).cwiseAbs().maxCoeff() <= eps_pinf;
        if (nonneg && in_nullspace && hs.dot(dy) < -eps_pinf) {
          status = SolveStatus::infeasible;
          used = iter;
          break;
        }
      }

      // Splitting iterations approach the active set long before the
      // residuals tighten; a periodic polish finishes the job early.
      if (settings.polish && iter % (settings.check_interval * 20) == 0 &&
          polish_converges(iter)) {
        break;
      }
    }
  }

  if (settings.polish && status != SolveStatus::infeasible) {
    if (status == SolveStatus::solved) {
      // Final snap to the exact KKT point of the identified active set.
      Eigen::VectorXd x_pol = x;
      Eigen::VectorXd y_pol = unscaled_multiplier();
      if (polish(problem, x_pol, y_pol)) {
        x = x_pol;
        y = y_pol.cwiseProduct(row_scale);
      }
    } else {
      polish_converges(used);
    }
  }

  // Report the violation and stationarity of the original system.
  const Eigen::VectorXd y_final = unscaled_multiplier();
  sol.coefficients = x;
  sol.objective = objective_of(problem, x);
  sol.primal_residual = std::max((g * x - h).maxCoeff(), 0.0);
  sol.dual_residual = (problem.hessian * x + problem.linear +
                       g.transpose() * y_final)
                          .cwiseAbs()
                          .maxCoeff();
  sol.status = status;
  sol.iterations = used;
  return sol;
}

}  // namespace grd::qp
