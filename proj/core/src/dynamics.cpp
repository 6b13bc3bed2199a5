#include "gridstudy/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <Eigen/Dense>

#include "gridstudy/powerflow.hpp"
#include "internal/eigen_compat.hpp"
#include "internal/network.hpp"

namespace gridstudy::dyn {

using gridstudy::detail::BusIndex;
using gridstudy::detail::from_eigen;
using Complex = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;

Equilibrium init_equilibrium(const GridCase& grid) {
  // The reduced model inherits whatever mismatch the power flow leaves, so
  // solve tighter than the screening default.
  pf::SolveOptions pf_opts;
  pf_opts.tolerance_pu = 1e-10;
  pf_opts.max_iterations = 40;
  pf::PowerFlowSolution sol = pf::solve_power_flow(grid, pf::Method::ac_newton, pf_opts);

  BusIndex idx(grid);
  const int n = static_cast<int>(grid.buses.size());
  const int m = static_cast<int>(grid.machines.size());
  const double base = grid.base_mva;

  VectorXcd v(n);
  for (int i = 0; i < n; ++i)
    v(i) = std::polar(sol.v_mag[static_cast<size_t>(i)], sol.v_angle[static_cast<size_t>(i)]);

  // Bus net injections recomputed from the solved voltages.
  Eigen::VectorXd p_bus(n), q_bus(n);
  {
    MatrixXcd y = gridstudy::detail::build_ybus(grid, idx);
    VectorXcd s = v.array() * (y * v).conjugate().array();
    for (int i = 0; i < n; ++i) {
      p_bus(i) = s(i).real();
      q_bus(i) = s(i).imag();
    }
  }

  // Renewable injection per bus (pu), needed to see the machine share.
  Eigen::VectorXd ren_p = Eigen::VectorXd::Zero(n);
  for (const auto& plant : grid.renewables) ren_p(idx.at(plant.bus)) += plant.output_mw() / base;

  // Machine terminal powers. Non-slack machines run at dispatch; the slack
  // bus residual (and the reactive output of pv/slack buses) is shared
  // among that bus's machines in proportion to rating.
  std::vector<double> mach_s_at_bus(static_cast<size_t>(n), 0.0);
  for (const auto& mach : grid.machines)
    mach_s_at_bus[static_cast<size_t>(idx.at(mach.bus))] += mach.s_rated;

  std::vector<Complex> s_mach(static_cast<size_t>(m));
  for (int k = 0; k < m; ++k) {
    const auto& mach = grid.machines[static_cast<size_t>(k)];
    int b = idx.at(mach.bus);
    const Bus& bus = grid.buses[static_cast<size_t>(b)];
    double share = mach.s_rated / mach_s_at_bus[static_cast<size_t>(b)];
    double p;
    if (bus.kind == BusKind::slack) {
      double p_total = p_bus(b) + bus.load_p / base - ren_p(b);
      p = p_total * share;
    } else {
      p = mach.p_set / base;
    }
    double q;
    if (bus.kind == BusKind::pq) {
      q = mach.q_set / base;
    } else {
      double q_total = q_bus(b) + bus.load_q / base;
      q = q_total * share;
    }
    s_mach[static_cast<size_t>(k)] = Complex(p, q);
  }

  Equilibrium eq;
  NetworkModel& net = eq.net;
  net.base_mva = base;
  net.f_s = grid.system_frequency;
  net.omega_s = grid.omega_s();
  for (const auto& b : grid.buses) net.bus_ids.push_back(b.id);

  net.y_load.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Bus& bus = grid.buses[static_cast<size_t>(i)];
    Complex s_load(bus.load_p / base, bus.load_q / base);
    double vm2 = std::norm(v(i));
    net.y_load[static_cast<size_t>(i)] = vm2 > 0.0 ? std::conj(s_load) / vm2 : Complex(0.0, 0.0);
  }

  MatrixXcd y_nn = gridstudy::detail::build_ybus(grid, idx);
  for (int i = 0; i < n; ++i) y_nn(i, i) += net.y_load[static_cast<size_t>(i)];

  MatrixXcd y_ng = MatrixXcd::Zero(n, m);
  MatrixXcd y_gn = MatrixXcd::Zero(m, n);
  MatrixXcd y_gg = MatrixXcd::Zero(m, m);

  eq.states.resize(static_cast<size_t>(m));
  for (int k = 0; k < m; ++k) {
    const auto& mach = grid.machines[static_cast<size_t>(k)];
    int b = idx.at(mach.bus);
    double x_sys = mach.xd_t * base / mach.s_rated;
    Complex y_m = 1.0 / Complex(0.0, x_sys);
    net.machine_ids.push_back(mach.id);
    net.machine_bus.push_back(b);
    net.y_machine.push_back(y_m);

    Complex i_term = std::conj(s_mach[static_cast<size_t>(k)] / v(b));
    Complex e = v(b) + Complex(0.0, x_sys) * i_term;
    eq.states[static_cast<size_t>(k)].delta = std::arg(e);
    eq.states[static_cast<size_t>(k)].omega = 0.0;
    eq.states[static_cast<size_t>(k)].e_internal = std::abs(e);

    y_nn(b, b) += y_m;
    y_ng(b, k) -= y_m;
    y_gn(k, b) -= y_m;
    y_gg(k, k) += y_m;

    net.e_mag.push_back(std::abs(e));
    net.h_sys.push_back(mach.h * mach.s_rated / base);
    net.d_sys.push_back(mach.damping * mach.s_rated / base);
    net.p_min_pu.push_back(mach.p_min / base);
    net.p_max_pu.push_back(mach.p_max / base);
    net.s_rated_pu.push_back(mach.s_rated / base);
    net.governors.push_back(mach.governor);
    net.agc_participation.push_back(mach.agc_participation);
  }

  net.y_nn = from_eigen(y_nn);
  net.y_ng = from_eigen(y_ng);
  net.y_gn = from_eigen(y_gn);
  net.y_gg = from_eigen(y_gg);
  net.v_eq.assign(v.data(), v.data() + n);

  for (const auto& plant : grid.renewables) {
    NetworkModel::PlantInjection pi;
    pi.id = plant.id;
    pi.bus = idx.at(plant.bus);
    pi.p_eq_pu = plant.output_mw() / base;
    pi.nameplate_pu = plant.nameplate / base;
    pi.syn_gain_mw_per_hzps = plant.synthetic_inertia_gain;
    net.plants.push_back(std::move(pi));
  }

  // Mechanical power balancing the reduced-network electrical power at the
  // equilibrium angles; kills residual accelerations exactly.
  {
    VectorXcd e_vec(m);
    for (int k = 0; k < m; ++k)
      e_vec(k) = std::polar(net.e_mag[static_cast<size_t>(k)],
                            eq.states[static_cast<size_t>(k)].delta);
    VectorXcd i_g = y_gn * v + y_gg * e_vec;
    for (int k = 0; k < m; ++k)
      net.p_mech.push_back((e_vec(k) * std::conj(i_g(k))).real());
  }

  return eq;
}

// ---------------------------------------------------------------------------
// Simulation runtime
// ---------------------------------------------------------------------------

namespace {

struct Ramp {
  double t0 = 0.0, t1 = 0.0;
  double full = 0.0;  // pu contribution once complete

  double at(double t) const {
    if (t < t0) return 0.0;
    if (t >= t1 || t1 <= t0) return full;
    return full * (t - t0) / (t1 - t0);
  }
};

struct StructuralAction {
  enum Kind { fault_on, fault_off, trip_branch, trip_machine } kind;
  int bus = -1;
  Complex admittance;
  std::string branch;
  int machine = -1;
};

struct Runtime {
  const GridCase* grid = nullptr;
  const NetworkModel* net = nullptr;
  SimOptions opts;
  int n = 0, m = 0;
  double step = 0.0;

  std::vector<char> machine_active;
  std::set<std::string> tripped_branches;
  std::map<int, Complex> fault_shunts;  // bus -> admittance

  MatrixXcd y_ng, y_gn, y_gg;
  Eigen::PartialPivLU<MatrixXcd> lu;
  VectorXcd v_cache;

  std::vector<std::vector<Ramp>> plant_ramps;  // per plant
  std::vector<std::vector<Ramp>> pm_ramps;     // per machine, pu
  struct BusInjection {
    int bus;
    Ramp ramp;
  };
  std::vector<BusInjection> bus_injections;

  std::map<long long, std::vector<StructuralAction>> boundaries;  // step index

  std::vector<double> syn_add_pu;  // per plant, frozen during a step
  double rocof_filtered = 0.0;

  bool has_cp_injections = false;

  void rebuild() {
    BusIndex idx(*grid);
    MatrixXcd y_nn = MatrixXcd::Zero(n, n);
    for (const auto& br : grid->branches) {
      if (tripped_branches.count(br.id)) continue;
      int f = idx.at(br.from_bus);
      int t = idx.at(br.to_bus);
      Complex ys = 1.0 / Complex(br.r, br.x);
      Complex ysh(0.0, br.b_shunt / 2.0);
      y_nn(f, f) += ys + ysh;
      y_nn(t, t) += ys + ysh;
      y_nn(f, t) -= ys;
      y_nn(t, f) -= ys;
    }
    for (int i = 0; i < n; ++i) y_nn(i, i) += net->y_load[static_cast<size_t>(i)];
    for (const auto& [bus, y] : fault_shunts) y_nn(bus, bus) += y;

    y_ng = MatrixXcd::Zero(n, m);
    y_gn = MatrixXcd::Zero(m, n);
    y_gg = MatrixXcd::Zero(m, m);
    for (int k = 0; k < m; ++k) {
      if (!machine_active[static_cast<size_t>(k)]) continue;
      int b = net->machine_bus[static_cast<size_t>(k)];
      Complex y_m = net->y_machine[static_cast<size_t>(k)];
      y_nn(b, b) += y_m;
      y_ng(b, k) -= y_m;
      y_gn(k, b) -= y_m;
      y_gg(k, k) += y_m;
    }
    lu.compute(y_nn);
  }

  double plant_power(size_t p, double t) const {
    double value = net->plants[p].p_eq_pu;
    for (const auto& r : plant_ramps[p]) value += r.at(t);
    value += syn_add_pu[p];
    return std::max(value, 0.0);
  }

  /// Network voltages for the given internal EMFs at time t. Constant-power
  /// injections (plants, bus power events) are resolved by fixed-point
  /// iteration on the injection currents; current magnitude is limited
  /// below cp_voltage_floor so faults stay well-posed.
  VectorXcd solve_network(const VectorXcd& e_vec, double t) {
    VectorXcd rhs_fixed = -(y_ng * e_vec);
    if (!has_cp_injections) {
      VectorXcd v = lu.solve(rhs_fixed);
      return v;
    }
    VectorXcd v = v_cache;
    for (int iter = 0; iter < 50; ++iter) {
      VectorXcd inj = VectorXcd::Zero(n);
      auto add_power = [&](int bus, double p_pu) {
        if (p_pu == 0.0) return;
        Complex vb = v(bus);
        double vm = std::abs(vb);
        if (vm < 1e-12) return;  // no phase reference; inject nothing
        double vm_eff = std::max(vm, opts.cp_voltage_floor);
        inj(bus) += p_pu * vb / (vm * vm_eff);
      };
      for (size_t p = 0; p < plant_ramps.size(); ++p)
        add_power(net->plants[p].bus, plant_power(p, t));
      for (const auto& bi : bus_injections) add_power(bi.bus, bi.ramp.at(t));
      VectorXcd v_next = lu.solve(inj + rhs_fixed);
      double delta = (v_next - v).cwiseAbs().maxCoeff();
      v = v_next;
      if (delta < 1e-12) break;
    }
    return v;
  }
};

struct Deriv {
  Eigen::VectorXd d;  // same packing as the state vector
};

/// State packing: [delta_0, omega_0, ..., delta_{m-1}, omega_{m-1},
///                 gov_0..gov_{m-1} (if governors), p_agc (if agc)].
struct Packing {
  int m = 0;
  bool governors = false;
  bool agc = false;
  int size() const { return 2 * m + (governors ? m : 0) + (agc ? 1 : 0); }
  int delta(int k) const { return 2 * k; }
  int omega(int k) const { return 2 * k + 1; }
  int gov(int k) const { return 2 * m + k; }
  int pagc() const { return 2 * m + (governors ? m : 0); }
};

Eigen::VectorXd compute_rhs(Runtime& rt, const Packing& pk,
                            const Eigen::VectorXd& y, double t) {
  const NetworkModel& net = *rt.net;
  const int m = pk.m;
  Eigen::VectorXd dy = Eigen::VectorXd::Zero(y.size());

  VectorXcd e_vec(m);
  for (int k = 0; k < m; ++k)
    e_vec(k) = rt.machine_active[static_cast<size_t>(k)]
                   ? std::polar(net.e_mag[static_cast<size_t>(k)], y(pk.delta(k)))
                   : Complex(0.0, 0.0);

  VectorXcd v = rt.solve_network(e_vec, t);
  VectorXcd i_g = rt.y_gn * v + rt.y_gg * e_vec;

  // COI deviation for the AGC loop.
  double h_sum = 0.0, h_omega = 0.0;
  for (int k = 0; k < m; ++k) {
    if (!rt.machine_active[static_cast<size_t>(k)]) continue;
    h_sum += net.h_sys[static_cast<size_t>(k)];
    h_omega += net.h_sys[static_cast<size_t>(k)] * y(pk.omega(k));
  }
  double coi_df_hz = h_sum > 0.0 ? h_omega / h_sum / (2.0 * std::numbers::pi) : 0.0;

  double agc_total = 0.0;
  if (pk.agc) {
    for (int k = 0; k < m; ++k)
      if (rt.machine_active[static_cast<size_t>(k)])
        agc_total += net.agc_participation[static_cast<size_t>(k)];
  }

  for (int k = 0; k < m; ++k) {
    if (!rt.machine_active[static_cast<size_t>(k)]) continue;
    const auto ks = static_cast<size_t>(k);
    double p_e = (e_vec(k) * std::conj(i_g(k))).real();

    double p_m = net.p_mech[ks];
    for (const auto& r : rt.pm_ramps[ks]) p_m += r.at(t);
    if (pk.governors) p_m += y(pk.gov(k));
    if (pk.agc && agc_total > 0.0)
      p_m += y(pk.pagc()) * net.agc_participation[ks] / agc_total;
    p_m = std::clamp(p_m, net.p_min_pu[ks], net.p_max_pu[ks]);

    double omega = y(pk.omega(k));
    double two_h = 2.0 * net.h_sys[ks];
    dy(pk.delta(k)) = omega;
    dy(pk.omega(k)) =
        net.omega_s / two_h * (p_m - p_e) - net.d_sys[ks] / two_h * omega;

    if (pk.governors) {
      const auto& gov = net.governors[ks];
      if (gov) {
        double df_hz = omega / (2.0 * std::numbers::pi);
        double eff = 0.0;
        if (std::abs(df_hz) > gov->deadband)
          eff = df_hz - std::copysign(gov->deadband, df_hz);
        double target =
            -(eff / net.f_s) / gov->droop_r * net.s_rated_pu[ks];
        dy(pk.gov(k)) = (target - y(pk.gov(k))) / gov->time_const;
      }
    }
  }

  if (pk.agc) dy(pk.pagc()) = -rt.opts.agc_gain_pu_per_hz_s * coi_df_hz;
  return dy;
}

long long snap_step(double t, double step) {
  return std::llround(t / step);
}

}  // namespace

DynamicTrace simulate(const GridCase& grid, const Equilibrium& equilibrium,
                      std::vector<DisturbanceEvent> events, double horizon_s,
                      double step_s, const SimOptions& options) {
  if (step_s <= 0.0) throw DomainError("simulate: step must be positive");
  if (step_s > 0.010 + 1e-12)
    throw DomainError("simulate: step must be <= 10 ms for the classical model");
  if (horizon_s <= 0.0) throw DomainError("simulate: horizon must be positive");

  const NetworkModel& net = equilibrium.net;
  const int n = static_cast<int>(net.bus_ids.size());
  const int m = static_cast<int>(net.machine_ids.size());

  Runtime rt;
  rt.grid = &grid;
  rt.net = &net;
  rt.opts = options;
  rt.n = n;
  rt.m = m;
  rt.step = step_s;
  rt.machine_active.assign(static_cast<size_t>(m), 1);
  rt.plant_ramps.resize(net.plants.size());
  rt.pm_ramps.resize(static_cast<size_t>(m));
  rt.syn_add_pu.assign(net.plants.size(), 0.0);
  rt.v_cache = Eigen::Map<const VectorXcd>(net.v_eq.data(), n);

  BusIndex idx(grid);
  const double base = net.base_mva;

  auto plant_index = [&](const std::string& id) -> int {
    for (size_t p = 0; p < net.plants.size(); ++p)
      if (net.plants[p].id == id) return static_cast<int>(p);
    return -1;
  };
  auto machine_index = [&](const std::string& id) -> int {
    for (int k = 0; k < m; ++k)
      if (net.machine_ids[static_cast<size_t>(k)] == id) return k;
    return -1;
  };

  const long long nsteps = [&] {
    long long s = std::llround(horizon_s / step_s);
    if (s * step_s < horizon_s - 1e-9) ++s;
    return std::max<long long>(s, 1);
  }();

  // Snap event times to the grid and register their effects.
  for (auto& ev : events) {
    long long k0 = std::clamp<long long>(snap_step(ev.t_start, step_s), 0, nsteps);
    long long kd = std::max<long long>(0, snap_step(ev.duration_s, step_s));
    ev.t_start = static_cast<double>(k0) * step_s;
    ev.duration_s = static_cast<double>(kd) * step_s;
    const double t0 = ev.t_start;
    const double t1 = ev.t_start + ev.duration_s;

    switch (ev.kind) {
      case EventKind::power_step:
      case EventKind::power_ramp: {
        int mi = machine_index(ev.element);
        if (mi >= 0) {
          rt.pm_ramps[static_cast<size_t>(mi)].push_back({t0, t1, ev.magnitude_mw / base});
        } else if (idx.by_id.count(ev.element)) {
          rt.bus_injections.push_back({idx.at(ev.element), {t0, t1, ev.magnitude_mw / base}});
        } else {
          throw DomainError("simulate: event references missing element " + ev.element);
        }
        break;
      }
      case EventKind::bus_fault: {
        if (!idx.by_id.count(ev.element))
          throw DomainError("simulate: fault references missing bus " + ev.element);
        int b = idx.at(ev.element);
        rt.boundaries[k0].push_back(
            {StructuralAction::fault_on, b, Complex(ev.fault_admittance_pu, 0.0), "", -1});
        long long k1 = k0 + kd;
        if (k1 <= nsteps)
          rt.boundaries[k1].push_back(
              {StructuralAction::fault_off, b, Complex(ev.fault_admittance_pu, 0.0), "", -1});
        break;
      }
      case EventKind::element_trip: {
        int mi = machine_index(ev.element);
        if (mi >= 0) {
          rt.boundaries[k0].push_back({StructuralAction::trip_machine, -1, {}, "", mi});
        } else if (grid.find_branch(ev.element)) {
          rt.boundaries[k0].push_back({StructuralAction::trip_branch, -1, {}, ev.element, -1});
        } else {
          throw DomainError("simulate: trip references missing element " + ev.element);
        }
        break;
      }
      case EventKind::renewable_drop:
      case EventKind::renewable_rise: {
        int p = plant_index(ev.element);
        if (p < 0)
          throw DomainError("simulate: event references missing plant " + ev.element);
        double sign = ev.kind == EventKind::renewable_drop ? -1.0 : 1.0;
        rt.plant_ramps[static_cast<size_t>(p)].push_back(
            {t0, t1, sign * ev.magnitude_mw / base});
        break;
      }
    }
  }
  rt.has_cp_injections = !net.plants.empty() || !rt.bus_injections.empty();
  rt.rebuild();

  Packing pk;
  pk.m = m;
  pk.governors = options.governors;
  pk.agc = options.agc;

  Eigen::VectorXd y = Eigen::VectorXd::Zero(pk.size());
  for (int k = 0; k < m; ++k) {
    y(pk.delta(k)) = equilibrium.states[static_cast<size_t>(k)].delta;
    y(pk.omega(k)) = equilibrium.states[static_cast<size_t>(k)].omega;
  }

  DynamicTrace trace;
  trace.machine_ids = net.machine_ids;
  trace.bus_ids = net.bus_ids;
  trace.delta.assign(static_cast<size_t>(m), {});
  trace.omega.assign(static_cast<size_t>(m), {});
  trace.bus_v.assign(static_cast<size_t>(n), {});
  trace.meta.step_s = step_s;
  trace.meta.record_every = std::max(options.record_every, 1);
  trace.meta.f_s = net.f_s;
  trace.meta.events = events;
  trace.meta.first_event_s = 0.0;
  if (!events.empty()) {
    double first = events.front().t_start;
    for (const auto& ev : events) first = std::min(first, ev.t_start);
    trace.meta.first_event_s = first;
  }

  const double h_total = net.total_inertia();
  auto coi_hz = [&](const Eigen::VectorXd& state) {
    double h_sum = 0.0, h_omega = 0.0;
    for (int k = 0; k < m; ++k) {
      if (!rt.machine_active[static_cast<size_t>(k)]) continue;
      h_sum += net.h_sys[static_cast<size_t>(k)];
      h_omega += net.h_sys[static_cast<size_t>(k)] * state(pk.omega(k));
    }
    if (h_sum <= 0.0) return net.f_s;
    return net.f_s + h_omega / h_sum / (2.0 * std::numbers::pi);
  };
  (void)h_total;

  auto record = [&](double t, const Eigen::VectorXd& state) {
    VectorXcd e_vec(m);
    for (int k = 0; k < m; ++k)
      e_vec(k) = rt.machine_active[static_cast<size_t>(k)]
                     ? std::polar(net.e_mag[static_cast<size_t>(k)], state(pk.delta(k)))
                     : Complex(0.0, 0.0);
    VectorXcd v = rt.solve_network(e_vec, t);
    rt.v_cache = v;
    trace.time.push_back(t);
    for (int k = 0; k < m; ++k) {
      trace.delta[static_cast<size_t>(k)].push_back(state(pk.delta(k)));
      trace.omega[static_cast<size_t>(k)].push_back(state(pk.omega(k)));
    }
    for (int i = 0; i < n; ++i)
      trace.bus_v[static_cast<size_t>(i)].push_back(std::abs(v(i)));
    trace.coi_frequency.push_back(coi_hz(state));
  };

  const int rec_every = std::max(options.record_every, 1);
  double prev_coi = coi_hz(y);

  for (long long k = 0; k <= nsteps; ++k) {
    const double t = static_cast<double>(k) * step_s;

    auto boundary = rt.boundaries.find(k);
    if (boundary != rt.boundaries.end()) {
      for (const auto& action : boundary->second) {
        switch (action.kind) {
          case StructuralAction::fault_on:
            rt.fault_shunts[action.bus] += action.admittance;
            break;
          case StructuralAction::fault_off: {
            auto it = rt.fault_shunts.find(action.bus);
            if (it != rt.fault_shunts.end()) {
              it->second -= action.admittance;
              if (std::abs(it->second) < 1e-15) rt.fault_shunts.erase(it);
            }
            break;
          }
          case StructuralAction::trip_branch:
            rt.tripped_branches.insert(action.branch);
            break;
          case StructuralAction::trip_machine:
            rt.machine_active[static_cast<size_t>(action.machine)] = 0;
            break;
        }
      }
      rt.rebuild();
    }

    if (k % rec_every == 0 || k == nsteps) record(t, y);
    if (k == nsteps) break;

    // Classic RK4 over [t, t+h].
    const double h = step_s;
    Eigen::VectorXd k1 = compute_rhs(rt, pk, y, t);
    Eigen::VectorXd k2 = compute_rhs(rt, pk, y + 0.5 * h * k1, t + 0.5 * h);
    Eigen::VectorXd k3 = compute_rhs(rt, pk, y + 0.5 * h * k2, t + 0.5 * h);
    Eigen::VectorXd k4 = compute_rhs(rt, pk, y + h * k3, t + h);
    y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

    if (!y.allFinite() || y.cwiseAbs().maxCoeff() > 1e9) {
      std::ostringstream os;
      os << "simulate: numeric blow-up; last valid time " << t << " s";
      throw ConvergenceError(os.str());
    }

    // Measured COI ROCOF feeds the converter fast-frequency support with a
    // one-step delay through a first-order filter.
    if (options.synthetic_inertia) {
      double coi_now = coi_hz(y);
      double df = (coi_now - prev_coi) / h;
      prev_coi = coi_now;
      double alpha = std::min(1.0, h / std::max(options.rocof_filter_tau_s, h));
      rt.rocof_filtered += (df - rt.rocof_filtered) * alpha;
      for (size_t p = 0; p < net.plants.size(); ++p) {
        const auto& plant = net.plants[p];
        if (plant.syn_gain_mw_per_hzps <= 0.0) {
          rt.syn_add_pu[p] = 0.0;
          continue;
        }
        double scheduled = plant.p_eq_pu;
        for (const auto& r : rt.plant_ramps[p]) scheduled += r.at(t + h);
        double headroom_pu = std::max(0.0, plant.nameplate_pu - scheduled);
        double want_pu = -plant.syn_gain_mw_per_hzps * rt.rocof_filtered / base;
        rt.syn_add_pu[p] = std::clamp(want_pu, 0.0, headroom_pu);
      }
    } else {
      prev_coi = coi_hz(y);
    }
  }

  return trace;
}

double eq2_deviation(const std::vector<std::pair<double, double>>& machines,
                     double f_s_hz, double delta_p_mw) {
  double hs = 0.0;
  for (const auto& [h, s] : machines) hs += h * s;
  if (hs <= 0.0)
    throw DomainError("eq2_deviation: aggregate inertia must be positive");
  return f_s_hz / hs * delta_p_mw;
}

double eq2_deviation(const GridCase& grid, double delta_p_mw) {
  std::vector<std::pair<double, double>> machines;
  machines.reserve(grid.machines.size());
  for (const auto& m : grid.machines) machines.emplace_back(m.h, m.s_rated);
  return eq2_deviation(machines, grid.system_frequency, delta_p_mw);
}

FrequencyMetrics frequency_metrics(const DynamicTrace& trace,
                                   double ufls_threshold_hz,
                                   double ufls_dwell_s) {
  if (trace.time.empty() || trace.coi_frequency.empty())
    throw DomainError("frequency_metrics: empty trace");

  FrequencyMetrics metrics;
  const auto& f = trace.coi_frequency;
  const auto& t = trace.time;

  size_t nadir_idx = 0;
  for (size_t i = 1; i < f.size(); ++i)
    if (f[i] < f[nadir_idx]) nadir_idx = i;
  metrics.nadir_hz = f[nadir_idx];
  metrics.nadir_time_s = t[nadir_idx];

  // Secant slope over the first 0.5 s after the event.
  const double t_event = trace.meta.first_event_s;
  size_t i0 = 0;
  while (i0 + 1 < t.size() && t[i0] < t_event - 1e-12) ++i0;
  size_t i1 = i0;
  const double t_end = t_event + 0.5;
  while (i1 + 1 < t.size() && t[i1 + 1] <= t_end + 1e-12) ++i1;
  if (i1 > i0)
    metrics.initial_rocof_hz_per_s = (f[i1] - f[i0]) / (t[i1] - t[i0]);

  // Settling: flat over the last tenth of the horizon (at least 1 s).
  const double window = std::max(1.0, 0.1 * (t.back() - t.front()));
  size_t w0 = t.size() - 1;
  while (w0 > 0 && t.back() - t[w0 - 1] <= window) --w0;
  if (w0 < t.size() - 1) {
    double lo = f[w0], hi = f[w0], sum = 0.0;
    for (size_t i = w0; i < f.size(); ++i) {
      lo = std::min(lo, f[i]);
      hi = std::max(hi, f[i]);
      sum += f[i];
    }
    if (hi - lo <= 0.02)
      metrics.settling_frequency_hz = sum / static_cast<double>(f.size() - w0);
  }

  // UFLS: continuously below threshold for at least the dwell time.
  double run_start = -1.0;
  for (size_t i = 0; i < f.size(); ++i) {
    if (f[i] < ufls_threshold_hz) {
      if (run_start < 0.0) run_start = t[i];
      if (t[i] - run_start >= ufls_dwell_s - 1e-12) {
        metrics.ufls_tripped = true;
        break;
      }
    } else {
      run_start = -1.0;
    }
  }
  return metrics;
}

RideThroughEnvelope default_ride_through_envelope() {
  RideThroughEnvelope env;
  env.voltage = {{0.0, 0.0, 1.2}, {0.15, 0.0, 1.2}, {3.0, 0.9, 1.2}};
  env.frequency = {{0.0, 57.0, 61.8}};
  return env;
}

namespace {

std::pair<double, double> envelope_bounds(
    const std::vector<RideThroughEnvelope::Point>& points, double tau) {
  if (points.empty()) return {-1e300, 1e300};
  if (tau <= points.front().t) return {points.front().lo, points.front().hi};
  if (tau >= points.back().t) return {points.back().lo, points.back().hi};
  for (size_t i = 1; i < points.size(); ++i) {
    if (tau <= points[i].t) {
      const auto& a = points[i - 1];
      const auto& b = points[i];
      double w = (tau - a.t) / (b.t - a.t);
      return {a.lo + w * (b.lo - a.lo), a.hi + w * (b.hi - a.hi)};
    }
  }
  return {points.back().lo, points.back().hi};
}

void validate_envelope(const RideThroughEnvelope& env) {
  auto check = [](const std::vector<RideThroughEnvelope::Point>& pts,
                  const char* what) {
    for (size_t i = 0; i < pts.size(); ++i) {
      if (!(pts[i].lo < pts[i].hi))
        throw DomainError(std::string("ride-through envelope: ") + what +
                          " min must stay below max");
      if (i > 0 && !(pts[i].t > pts[i - 1].t))
        throw DomainError(std::string("ride-through envelope: ") + what +
                          " times must be strictly increasing");
    }
  };
  check(env.voltage, "voltage");
  check(env.frequency, "frequency");
}

}  // namespace

std::vector<RideThroughResult> check_ride_through(
    const DynamicTrace& trace, const RideThroughEnvelope& envelope,
    const std::vector<std::pair<std::string, std::string>>& monitors) {
  validate_envelope(envelope);
  const double t_event = trace.meta.first_event_s;

  std::vector<RideThroughResult> results;
  for (const auto& [label, bus_id] : monitors) {
    RideThroughResult res;
    res.label = label;
    int bus = -1;
    for (size_t i = 0; i < trace.bus_ids.size(); ++i)
      if (trace.bus_ids[i] == bus_id) bus = static_cast<int>(i);
    if (bus < 0)
      throw DomainError("check_ride_through: trace has no bus " + bus_id);

    for (size_t k = 0; k < trace.time.size(); ++k) {
      double tau = trace.time[k] - t_event;
      if (tau < -1e-12) continue;
      auto [vlo, vhi] = envelope_bounds(envelope.voltage, tau);
      double v = trace.bus_v[static_cast<size_t>(bus)][k];
      if (v < vlo || v > vhi) {
        res.pass = false;
        res.first_violation = {trace.time[k], "voltage", v, v < vlo ? vlo : vhi};
        break;
      }
      auto [flo, fhi] = envelope_bounds(envelope.frequency, tau);
      double fr = trace.coi_frequency[k];
      if (fr < flo || fr > fhi) {
        res.pass = false;
        res.first_violation = {trace.time[k], "frequency", fr, fr < flo ? flo : fhi};
        break;
      }
    }
    results.push_back(std::move(res));
  }
  return results;
}

std::vector<RideThroughResult> check_ride_through(
    const GridCase& grid, const DynamicTrace& trace,
    const RideThroughEnvelope& envelope,
    const std::vector<std::string>& plant_ids) {
  std::vector<std::pair<std::string, std::string>> monitors;
  for (const auto& id : plant_ids) {
    const RenewablePlant* plant = grid.find_renewable(id);
    if (!plant) throw DomainError("check_ride_through: no plant " + id);
    monitors.emplace_back(id, plant->bus);
  }
  return check_ride_through(trace, envelope, monitors);
}

DisturbanceEvent renewable_event(const GridCase& grid, const std::string& plant_id,
                                 RenewableEventKind kind, double magnitude_mw,
                                 double ramp_duration_s) {
  const RenewablePlant* plant = grid.find_renewable(plant_id);
  if (!plant) throw DomainError("renewable_event: no plant " + plant_id);
  if (magnitude_mw < 0.0)
    throw DomainError("renewable_event: magnitude must be >= 0");
  const double output = plant->output_mw();
  if (kind == RenewableEventKind::drop && magnitude_mw > output + 1e-9)
    throw DomainError("renewable_event: drop of " + std::to_string(magnitude_mw) +
                      " MW exceeds " + plant_id + " output " +
                      std::to_string(output) + " MW");
  if (kind == RenewableEventKind::rise &&
      magnitude_mw > plant->nameplate - output + 1e-9)
    throw DomainError("renewable_event: rise of " + std::to_string(magnitude_mw) +
                      " MW exceeds " + plant_id + " headroom " +
                      std::to_string(plant->nameplate - output) + " MW");

  DisturbanceEvent ev;
  ev.kind = kind == RenewableEventKind::drop ? EventKind::renewable_drop
                                             : EventKind::renewable_rise;
  ev.element = plant_id;
  ev.magnitude_mw = magnitude_mw;
  ev.duration_s = ramp_duration_s;
  return ev;
}

double synthetic_inertia(const RenewablePlant& plant, double coi_rocof_hz_per_s) {
  double headroom = std::max(0.0, plant.nameplate - plant.output_mw());
  double want = -plant.synthetic_inertia_gain * coi_rocof_hz_per_s;
  return std::clamp(want, 0.0, headroom);
}

ResponseResult primary_secondary_response(const GridCase& grid,
                                          const DisturbanceEvent& event,
                                          double horizon_s,
                                          const ResponseOptions& options) {
  bool any_governor = false;
  double agc_sum = 0.0;
  for (const auto& m : grid.machines) {
    if (m.governor) any_governor = true;
    agc_sum += m.agc_participation;
  }
  if (!any_governor)
    throw DomainError(
        "primary_secondary_response: no governor-equipped machine in case");
  if (options.with_agc && agc_sum <= 0.0)
    throw DomainError(
        "primary_secondary_response: AGC needs agc_participation sum > 0");

  Equilibrium eq = init_equilibrium(grid);
  SimOptions sim;
  sim.governors = true;
  sim.agc = options.with_agc;
  sim.agc_gain_pu_per_hz_s = options.agc_gain_pu_per_hz_s;
  sim.record_every = options.record_every;

  ResponseResult result;
  result.trace = simulate(grid, eq, {event}, horizon_s, options.step_s, sim);
  result.metrics = frequency_metrics(result.trace);
  return result;
}

}  // namespace gridstudy::dyn
