#pragma once

#include <string>
#include <vector>

#include "gridstudy/model.hpp"

namespace gridstudy::pf {

enum class Method { ac_newton, dc_linear };

/// Network operating point. Bus/branch vectors are aligned with the case's
/// bus and branch order; angles are referenced to the slack bus (0 rad).
struct PowerFlowSolution {
  Method method = Method::ac_newton;
  bool converged = false;
  int iterations = 0;
  double max_mismatch_pu = 0.0;

  std::vector<std::string> bus_ids;
  std::vector<double> v_mag;    // pu
  std::vector<double> v_angle;  // rad

  std::vector<std::string> branch_ids;
  std::vector<double> p_from_mw;
  std::vector<double> q_from_mvar;
  std::vector<double> p_to_mw;
  std::vector<double> q_to_mvar;

  // Net power entering the network at the slack bus.
  double slack_p_mw = 0.0;
  double slack_q_mvar = 0.0;
};

struct LimitReport {
  struct ThermalViolation {
    std::string branch;
    double loading;  // fraction of rating, > 1
  };
  struct VoltageViolation {
    std::string bus;
    double v_mag;
    double bound;  // the violated bound (v_min or v_max)
  };

  std::vector<ThermalViolation> thermal_violations;
  std::vector<VoltageViolation> voltage_violations;
  double worst_loading = 0.0;      // max loading fraction over all branches
  double worst_voltage_dev = 0.0;  // max excursion beyond a bound, pu

  bool feasible() const {
    return thermal_violations.empty() && voltage_violations.empty();
  }
};

struct SolveOptions {
  double tolerance_pu = 1e-6;
  int max_iterations = 20;
};

/// ac_newton: full Newton-Raphson from flat start, mismatch <= tolerance on
/// convergence. dc_linear: lossless linear angles/flows, always converged.
/// Throws ConvergenceError on iteration cap (message carries last mismatch)
/// or on a singular Jacobian (message names the pivot bus).
PowerFlowSolution solve_power_flow(const GridCase& grid, Method method,
                                   const SolveOptions& options = {});

/// Screens a converged solution against branch ratings and voltage bounds.
/// Loading is apparent power at the more-loaded end over the rating.
LimitReport check_limits(const GridCase& grid, const PowerFlowSolution& sol);

struct LoadabilityOptions {
  double lambda_cap = 64.0;  // search ceiling on the load multiplier
  double lambda_tol = 1e-3;
  double growth = 1.5;
  SolveOptions solve;
};

struct LoadabilityResult {
  double lambda_star = 1.0;  // largest multiplier that still converges
  double margin = 0.0;       // lambda_star - 1; >= cap-1 when capped
  bool capped = false;
};

/// Distance to the loadability nose along a per-bus scaling direction
/// (empty = scale every load uniformly). Loads scale as
/// load * (1 + (lambda-1) * direction[bus]); generation is held, the slack
/// absorbs the increase. Newton divergence is the nose proxy; the bracket
/// is found by geometric stepping and refined by bisection.
LoadabilityResult loadability_margin(const GridCase& grid,
                                     const std::vector<double>& direction = {},
                                     const LoadabilityOptions& options = {});

}  // namespace gridstudy::pf
