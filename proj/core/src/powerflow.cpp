#include "gridstudy/powerflow.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "internal/network.hpp"
#include "internal/pf_internal.hpp"

namespace gridstudy::pf {

using gridstudy::detail::BusIndex;
using gridstudy::detail::Complex;

namespace detail {

NrProblem make_problem(const GridCase& grid) {
  BusIndex idx(grid);
  NrProblem prob;
  prob.ybus = gridstudy::detail::build_ybus(grid, idx);
  prob.p_spec = gridstudy::detail::scheduled_p_pu(grid, idx);
  prob.q_spec = gridstudy::detail::scheduled_q_pu(grid, idx);
  prob.kind.reserve(grid.buses.size());
  prob.v_set.reserve(grid.buses.size());
  for (size_t i = 0; i < grid.buses.size(); ++i) {
    const Bus& b = grid.buses[i];
    prob.kind.push_back(b.kind);
    prob.v_set.push_back(b.v_set);
    if (b.kind == BusKind::slack) prob.slack = static_cast<int>(i);
    if (b.kind != BusKind::slack) prob.ang_vars.push_back(static_cast<int>(i));
    if (b.kind == BusKind::pq) prob.mag_vars.push_back(static_cast<int>(i));
  }
  if (prob.slack < 0) throw DomainError("power flow requires a slack bus");
  return prob;
}

namespace {

// P_i and Q_i calculated from the voltage state.
void calc_injections(const NrProblem& prob, const Eigen::VectorXd& v,
                     const Eigen::VectorXd& theta, Eigen::VectorXd& p,
                     Eigen::VectorXd& q) {
  const auto n = v.size();
  p.setZero(n);
  q.setZero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const Complex y = prob.ybus(i, j);
      if (y == Complex(0.0, 0.0) && i != j) continue;
      const double g = y.real();
      const double b = y.imag();
      const double th = theta(i) - theta(j);
      p(i) += v(i) * v(j) * (g * std::cos(th) + b * std::sin(th));
      q(i) += v(i) * v(j) * (g * std::sin(th) - b * std::cos(th));
    }
  }
}

}  // namespace

Eigen::VectorXd mismatch(const NrProblem& prob, const Eigen::VectorXd& v,
                         const Eigen::VectorXd& theta) {
  Eigen::VectorXd p, q;
  calc_injections(prob, v, theta, p, q);
  const auto na = static_cast<Eigen::Index>(prob.ang_vars.size());
  const auto nm = static_cast<Eigen::Index>(prob.mag_vars.size());
  Eigen::VectorXd f(na + nm);
  for (Eigen::Index k = 0; k < na; ++k) {
    int i = prob.ang_vars[static_cast<size_t>(k)];
    f(k) = prob.p_spec(i) - p(i);
  }
  for (Eigen::Index k = 0; k < nm; ++k) {
    int i = prob.mag_vars[static_cast<size_t>(k)];
    f(na + k) = prob.q_spec(i) - q(i);
  }
  return f;
}

Eigen::MatrixXd mismatch_jacobian(const NrProblem& prob, const Eigen::VectorXd& v,
                                  const Eigen::VectorXd& theta) {
  Eigen::VectorXd p, q;
  calc_injections(prob, v, theta, p, q);
  const auto na = static_cast<Eigen::Index>(prob.ang_vars.size());
  const auto nm = static_cast<Eigen::Index>(prob.mag_vars.size());
  Eigen::MatrixXd jac(na + nm, na + nm);

  auto dp_dtheta = [&](int i, int j) {
    if (i == j) return -q(i) - prob.ybus(i, i).imag() * v(i) * v(i);
    const Complex y = prob.ybus(i, j);
    const double th = theta(i) - theta(j);
    return v(i) * v(j) * (y.real() * std::sin(th) - y.imag() * std::cos(th));
  };
  auto dp_dv = [&](int i, int j) {
    if (i == j) return p(i) / v(i) + prob.ybus(i, i).real() * v(i);
    const Complex y = prob.ybus(i, j);
    const double th = theta(i) - theta(j);
    return v(i) * (y.real() * std::cos(th) + y.imag() * std::sin(th));
  };
  auto dq_dtheta = [&](int i, int j) {
    if (i == j) return p(i) - prob.ybus(i, i).real() * v(i) * v(i);
    const Complex y = prob.ybus(i, j);
    const double th = theta(i) - theta(j);
    return -v(i) * v(j) * (y.real() * std::cos(th) + y.imag() * std::sin(th));
  };
  auto dq_dv = [&](int i, int j) {
    if (i == j) return q(i) / v(i) - prob.ybus(i, i).imag() * v(i);
    const Complex y = prob.ybus(i, j);
    const double th = theta(i) - theta(j);
    return v(i) * (y.real() * std::sin(th) - y.imag() * std::cos(th));
  };

  // Rows/cols follow the mismatch state ordering; the sign flips because the
  // rows are spec - calc.
  for (Eigen::Index r = 0; r < na; ++r) {
    int i = prob.ang_vars[static_cast<size_t>(r)];
    for (Eigen::Index c = 0; c < na; ++c)
      jac(r, c) = -dp_dtheta(i, prob.ang_vars[static_cast<size_t>(c)]);
    for (Eigen::Index c = 0; c < nm; ++c)
      jac(r, na + c) = -dp_dv(i, prob.mag_vars[static_cast<size_t>(c)]);
  }
  for (Eigen::Index r = 0; r < nm; ++r) {
    int i = prob.mag_vars[static_cast<size_t>(r)];
    for (Eigen::Index c = 0; c < na; ++c)
      jac(na + r, c) = -dq_dtheta(i, prob.ang_vars[static_cast<size_t>(c)]);
    for (Eigen::Index c = 0; c < nm; ++c)
      jac(na + r, na + c) = -dq_dv(i, prob.mag_vars[static_cast<size_t>(c)]);
  }
  return jac;
}

NrState nr_iterate(const GridCase& grid, const NrProblem& prob,
                   Eigen::VectorXd v0, Eigen::VectorXd theta0,
                   const SolveOptions& options) {
  NrState st;
  st.v = std::move(v0);
  st.theta = std::move(theta0);
  const auto na = static_cast<Eigen::Index>(prob.ang_vars.size());

  for (int it = 0; it <= options.max_iterations; ++it) {
    Eigen::VectorXd f = mismatch(prob, st.v, st.theta);
    st.max_mismatch = f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
    st.iterations = it;
    if (st.max_mismatch <= options.tolerance_pu) {
      st.converged = true;
      return st;
    }
    if (it == options.max_iterations) break;

    Eigen::MatrixXd jac = mismatch_jacobian(prob, st.v, st.theta);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (!lu.isInvertible()) {
      // Name the bus behind the first deficient pivot column.
      Eigen::Index bad = lu.rank();
      Eigen::Index state = lu.permutationQ().indices()(bad);
      int bus = state < na ? prob.ang_vars[static_cast<size_t>(state)]
                           : prob.mag_vars[static_cast<size_t>(state - na)];
      throw ConvergenceError("singular power-flow Jacobian at bus " +
                             grid.buses[static_cast<size_t>(bus)].id);
    }
    Eigen::VectorXd dx = lu.solve(-f);
    for (Eigen::Index k = 0; k < na; ++k)
      st.theta(prob.ang_vars[static_cast<size_t>(k)]) -= dx(k);
    for (size_t k = 0; k < prob.mag_vars.size(); ++k)
      st.v(prob.mag_vars[k]) -= dx(na + static_cast<Eigen::Index>(k));
    // A magnitude driven non-positive means the iterate left the physical
    // region; report as non-convergence instead of evaluating nonsense.
    for (size_t k = 0; k < prob.mag_vars.size(); ++k) {
      if (st.v(prob.mag_vars[k]) <= 0.0) {
        st.converged = false;
        st.iterations = it + 1;
        return st;
      }
    }
  }
  st.converged = false;
  return st;
}

}  // namespace detail

namespace {

void fill_branch_flows(const GridCase& grid, const BusIndex& idx,
                       PowerFlowSolution& sol) {
  const double base = grid.base_mva;
  sol.branch_ids.clear();
  sol.p_from_mw.clear();
  sol.q_from_mvar.clear();
  sol.p_to_mw.clear();
  sol.q_to_mvar.clear();
  for (const auto& br : grid.branches) {
    int f = idx.at(br.from_bus);
    int t = idx.at(br.to_bus);
    Complex vf = std::polar(sol.v_mag[static_cast<size_t>(f)], sol.v_angle[static_cast<size_t>(f)]);
    Complex vt = std::polar(sol.v_mag[static_cast<size_t>(t)], sol.v_angle[static_cast<size_t>(t)]);
    Complex ys = 1.0 / Complex(br.r, br.x);
    Complex ysh(0.0, br.b_shunt / 2.0);
    Complex sf = vf * std::conj(ys * (vf - vt) + ysh * vf);
    Complex st = vt * std::conj(ys * (vt - vf) + ysh * vt);
    sol.branch_ids.push_back(br.id);
    sol.p_from_mw.push_back(sf.real() * base);
    sol.q_from_mvar.push_back(sf.imag() * base);
    sol.p_to_mw.push_back(st.real() * base);
    sol.q_to_mvar.push_back(st.imag() * base);
  }
}

PowerFlowSolution solve_dc(const GridCase& grid) {
  BusIndex idx(grid);
  const auto n = static_cast<Eigen::Index>(grid.buses.size());
  int slack = -1;
  for (size_t i = 0; i < grid.buses.size(); ++i)
    if (grid.buses[i].kind == BusKind::slack) slack = static_cast<int>(i);
  if (slack < 0) throw DomainError("power flow requires a slack bus");

  Eigen::MatrixXd bmat = Eigen::MatrixXd::Zero(n, n);
  for (const auto& br : grid.branches) {
    int f = idx.at(br.from_bus);
    int t = idx.at(br.to_bus);
    double w = 1.0 / br.x;
    bmat(f, f) += w;
    bmat(t, t) += w;
    bmat(f, t) -= w;
    bmat(t, f) -= w;
  }
  Eigen::VectorXd p = gridstudy::detail::scheduled_p_pu(grid, idx);

  // Reduce out the slack row/column and solve for the remaining angles.
  std::vector<int> keep;
  for (int i = 0; i < n; ++i)
    if (i != slack) keep.push_back(i);
  const auto m = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXd bred(m, m);
  Eigen::VectorXd pred(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    pred(r) = p(keep[static_cast<size_t>(r)]);
    for (Eigen::Index c = 0; c < m; ++c)
      bred(r, c) = bmat(keep[static_cast<size_t>(r)], keep[static_cast<size_t>(c)]);
  }
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(n);
  if (m > 0) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(bred);
    if (!lu.isInvertible()) {
      Eigen::Index bad = lu.permutationQ().indices()(lu.rank());
      throw ConvergenceError(
          "singular dc susceptance matrix at bus " +
          grid.buses[static_cast<size_t>(keep[static_cast<size_t>(bad)])].id);
    }
    Eigen::VectorXd th = lu.solve(pred);
    for (Eigen::Index r = 0; r < m; ++r) theta(keep[static_cast<size_t>(r)]) = th(r);
  }

  PowerFlowSolution sol;
  sol.method = Method::dc_linear;
  sol.converged = true;
  sol.iterations = 0;
  sol.max_mismatch_pu = 0.0;
  for (const auto& b : grid.buses) sol.bus_ids.push_back(b.id);
  sol.v_mag.assign(grid.buses.size(), 1.0);
  sol.v_angle.resize(grid.buses.size());
  for (Eigen::Index i = 0; i < n; ++i) sol.v_angle[static_cast<size_t>(i)] = theta(i);

  const double base = grid.base_mva;
  for (const auto& br : grid.branches) {
    int f = idx.at(br.from_bus);
    int t = idx.at(br.to_bus);
    double flow = (theta(f) - theta(t)) / br.x * base;
    sol.branch_ids.push_back(br.id);
    sol.p_from_mw.push_back(flow);
    sol.q_from_mvar.push_back(0.0);
    sol.p_to_mw.push_back(-flow);
    sol.q_to_mvar.push_back(0.0);
  }
  // Lossless balance: the slack picks up the residual of scheduled injections.
  sol.slack_p_mw = -(p.sum() - p(slack)) * base;
  sol.slack_q_mvar = 0.0;
  return sol;
}

PowerFlowSolution solve_ac(const GridCase& grid, const SolveOptions& options) {
  BusIndex idx(grid);
  detail::NrProblem prob = detail::make_problem(grid);
  const auto n = static_cast<Eigen::Index>(grid.buses.size());

  Eigen::VectorXd v(n), theta = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Bus& b = grid.buses[static_cast<size_t>(i)];
    v(i) = (b.kind == BusKind::pq) ? 1.0 : b.v_set;  // flat start
  }

  detail::NrState st = detail::nr_iterate(grid, prob, v, theta, options);
  if (!st.converged) {
    std::ostringstream os;
    os << "ac power flow did not converge after " << st.iterations
       << " iterations (last mismatch " << st.max_mismatch << " pu)";
    throw ConvergenceError(os.str());
  }

  PowerFlowSolution sol;
  sol.method = Method::ac_newton;
  sol.converged = true;
  sol.iterations = st.iterations;
  sol.max_mismatch_pu = st.max_mismatch;
  for (const auto& b : grid.buses) sol.bus_ids.push_back(b.id);
  sol.v_mag.resize(grid.buses.size());
  sol.v_angle.resize(grid.buses.size());
  double slack_angle = st.theta(prob.slack);
  for (Eigen::Index i = 0; i < n; ++i) {
    sol.v_mag[static_cast<size_t>(i)] = st.v(i);
    sol.v_angle[static_cast<size_t>(i)] = st.theta(i) - slack_angle;
  }
  fill_branch_flows(grid, idx, sol);

  // Slack net injection from the solved state.
  Eigen::VectorXd p, q;
  {
    Eigen::VectorXd vv = st.v, tt = st.theta;
    detail::calc_injections(prob, vv, tt, p, q);
  }
  sol.slack_p_mw = p(prob.slack) * grid.base_mva;
  sol.slack_q_mvar = q(prob.slack) * grid.base_mva;
  return sol;
}

}  // namespace

PowerFlowSolution solve_power_flow(const GridCase& grid, Method method,
                                   const SolveOptions& options) {
  if (method == Method::dc_linear) return solve_dc(grid);
  return solve_ac(grid, options);
}

LimitReport check_limits(const GridCase& grid, const PowerFlowSolution& sol) {
  if (!sol.converged)
    throw DomainError("check_limits: refusing a non-converged solution");
  LimitReport rep;
  for (size_t k = 0; k < grid.branches.size(); ++k) {
    const Branch& br = grid.branches[k];
    double s_from = std::hypot(sol.p_from_mw[k], sol.q_from_mvar[k]);
    double s_to = std::hypot(sol.p_to_mw[k], sol.q_to_mvar[k]);
    double loading = std::max(s_from, s_to) / br.thermal_rating;
    rep.worst_loading = std::max(rep.worst_loading, loading);
    if (loading > 1.0) rep.thermal_violations.push_back({br.id, loading});
  }
  for (size_t k = 0; k < grid.buses.size(); ++k) {
    const Bus& b = grid.buses[k];
    double v = sol.v_mag[k];
    double dev = std::max(b.v_min - v, v - b.v_max);
    rep.worst_voltage_dev = std::max(rep.worst_voltage_dev, std::max(0.0, dev));
    if (v < b.v_min) rep.voltage_violations.push_back({b.id, v, b.v_min});
    else if (v > b.v_max) rep.voltage_violations.push_back({b.id, v, b.v_max});
  }
  return rep;
}

namespace {

GridCase scale_loads(const GridCase& grid, double lambda,
                     const std::vector<double>& direction) {
  GridCase scaled = grid;
  for (size_t i = 0; i < scaled.buses.size(); ++i) {
    double d = direction.empty() ? 1.0 : direction[i];
    double f = 1.0 + (lambda - 1.0) * d;
    scaled.buses[i].load_p *= f;
    scaled.buses[i].load_q *= f;
  }
  return scaled;
}

}  // namespace

LoadabilityResult loadability_margin(const GridCase& grid,
                                     const std::vector<double>& direction,
                                     const LoadabilityOptions& options) {
  if (!direction.empty() && direction.size() != grid.buses.size())
    throw DomainError("loadability_margin: direction size must match bus count");

  // Warm-started continuation: each trial starts from the last converged
  // state, so feasible points near the nose are not lost to a poor start.
  detail::NrProblem base_prob = detail::make_problem(grid);
  const auto n = static_cast<Eigen::Index>(grid.buses.size());
  Eigen::VectorXd v(n), theta = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Bus& b = grid.buses[static_cast<size_t>(i)];
    v(i) = (b.kind == BusKind::pq) ? 1.0 : b.v_set;
  }

  Eigen::VectorXd v_good = v, theta_good = theta;
  auto try_lambda = [&](double lambda) -> bool {
    GridCase scaled = scale_loads(grid, lambda, direction);
    detail::NrProblem prob = detail::make_problem(scaled);
    detail::NrState st =
        detail::nr_iterate(scaled, prob, v_good, theta_good, options.solve);
    if (st.converged) {
      v_good = st.v;
      theta_good = st.theta;
    }
    return st.converged;
  };

  if (!try_lambda(1.0))
    throw ConvergenceError("loadability_margin: base case does not converge");

  double lo = 1.0;
  double hi = 1.0;
  bool bracketed = false;
  while (hi < options.lambda_cap) {
    double next = std::min(hi * options.growth, options.lambda_cap);
    if (try_lambda(next)) {
      lo = next;
      hi = next;
    } else {
      hi = next;
      bracketed = true;
      break;
    }
  }
  if (!bracketed) return {options.lambda_cap, options.lambda_cap - 1.0, true};

  while (hi - lo > options.lambda_tol) {
    double mid = 0.5 * (lo + hi);
    if (try_lambda(mid)) lo = mid;
    else hi = mid;
  }
  return {lo, lo - 1.0, false};
}

}  // namespace gridstudy::pf
