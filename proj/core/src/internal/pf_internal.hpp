#pragma once

// Newton power-flow internals, split out so tests can difference the
// analytic Jacobian against the mismatch function directly.

#include <Eigen/Dense>

#include "gridstudy/model.hpp"
#include "internal/network.hpp"

namespace gridstudy::pf::detail {

using gridstudy::detail::BusIndex;

/// Fixed problem data for one Newton solve.
struct NrProblem {
  Eigen::MatrixXcd ybus;
  Eigen::VectorXd p_spec;  // pu net injection
  Eigen::VectorXd q_spec;  // pu net injection (pq buses)
  std::vector<BusKind> kind;
  std::vector<double> v_set;
  int slack = -1;
  std::vector<int> ang_vars;  // bus index per angle unknown (non-slack)
  std::vector<int> mag_vars;  // bus index per magnitude unknown (pq)
};

NrProblem make_problem(const GridCase& grid);

/// Stacked mismatch [dP for non-slack; dQ for pq] at (v, theta), pu.
Eigen::VectorXd mismatch(const NrProblem& prob, const Eigen::VectorXd& v,
                         const Eigen::VectorXd& theta);

/// d(mismatch)/d(state) with state = [theta at ang_vars; v at mag_vars].
Eigen::MatrixXd mismatch_jacobian(const NrProblem& prob, const Eigen::VectorXd& v,
                                  const Eigen::VectorXd& theta);

struct NrState {
  Eigen::VectorXd v;
  Eigen::VectorXd theta;
  bool converged = false;
  int iterations = 0;
  double max_mismatch = 0.0;
};

/// Newton iteration from the given start. Throws only for a singular
/// Jacobian; non-convergence is reported through the returned state.
NrState nr_iterate(const GridCase& grid, const NrProblem& prob,
                   Eigen::VectorXd v0, Eigen::VectorXd theta0,
                   const SolveOptions& options);

}  // namespace gridstudy::pf::detail
