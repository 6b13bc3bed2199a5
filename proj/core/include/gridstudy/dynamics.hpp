#pragma once

#include <complex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gridstudy/model.hpp"

namespace gridstudy::dyn {

/// Classical-model rotor state. omega is the speed deviation from
/// synchronous in rad/s; e_internal is the constant EMF magnitude behind
/// the transient reactance.
struct MachineState {
  double delta = 0.0;       // rad
  double omega = 0.0;       // rad/s deviation
  double e_internal = 1.0;  // pu
};

enum class EventKind {
  power_step,      // element: machine (mechanical power) or bus (injection)
  power_ramp,      // same targets, linear over duration
  bus_fault,       // element: bus; shunt admittance applied for duration
  element_trip,    // element: branch or machine id
  renewable_drop,  // element: plant; output reduced by magnitude
  renewable_rise,  // element: plant; output raised by magnitude
};

struct DisturbanceEvent {
  EventKind kind = EventKind::power_step;
  std::string element;
  double t_start = 0.0;       // s
  double magnitude_mw = 0.0;  // unused for faults/trips
  double duration_s = 0.0;    // ramp length or fault clearing time
  double fault_admittance_pu = 1e4;  // bolted three-phase default
};

/// Dense complex matrix in plain storage (row-major).
struct ComplexMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<std::complex<double>> data;

  ComplexMatrix() = default;
  ComplexMatrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c) {}
  std::complex<double>& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  const std::complex<double>& at(int r, int c) const {
    return data[static_cast<size_t>(r) * cols + c];
  }
};

/// Network reduced to machine internal nodes: loads became constant
/// impedances folded into y_nn, renewable plants are power injections at
/// their buses, machines couple through their transient reactances.
struct NetworkModel {
  double base_mva = 100.0;
  double f_s = 60.0;
  double omega_s = 0.0;

  std::vector<std::string> bus_ids;
  std::vector<std::string> machine_ids;
  std::vector<int> machine_bus;  // bus index per machine

  ComplexMatrix y_nn;  // N x N, branch network + load admittances + machine shunts
  ComplexMatrix y_ng;  // N x M
  ComplexMatrix y_gn;  // M x N
  ComplexMatrix y_gg;  // M x M
  std::vector<std::complex<double>> y_load;     // per-bus load admittance
  std::vector<std::complex<double>> v_eq;       // equilibrium bus voltages
  std::vector<std::complex<double>> y_machine;  // 1/(j xd_sys) per machine

  std::vector<double> e_mag;   // pu internal EMF per machine
  std::vector<double> p_mech;  // pu on base_mva, set so accelerations vanish
  std::vector<double> h_sys;   // H_i * S_n,i / base_mva, seconds
  std::vector<double> d_sys;   // D_i * S_n,i / base_mva
  std::vector<double> p_min_pu, p_max_pu;
  std::vector<double> s_rated_pu;
  std::vector<std::optional<GovernorParams>> governors;
  std::vector<double> agc_participation;

  struct PlantInjection {
    std::string id;
    int bus = -1;
    double p_eq_pu = 0.0;      // scheduled output
    double nameplate_pu = 0.0;
    double syn_gain_mw_per_hzps = 0.0;
  };
  std::vector<PlantInjection> plants;

  double total_inertia() const {
    double s = 0.0;
    for (double h : h_sys) s += h;
    return s;
  }
};

struct Equilibrium {
  std::vector<MachineState> states;
  NetworkModel net;
};

/// Solves the operating point (ac, tightened tolerance), computes internal
/// EMFs behind xd_t, folds loads as constant impedance, and sets mechanical
/// power so the initial accelerations vanish.
Equilibrium init_equilibrium(const GridCase& grid);

struct SimOptions {
  bool governors = false;
  bool agc = false;
  double agc_gain_pu_per_hz_s = 0.1;  // integral gain on COI deviation
  bool synthetic_inertia = false;
  double rocof_filter_tau_s = 0.1;
  int record_every = 1;
  double cp_voltage_floor = 0.2;  // pu, current limit for power injections
};

struct TraceMeta {
  double step_s = 0.0;
  int record_every = 1;
  std::string integrator = "rk4";
  double f_s = 60.0;
  double first_event_s = 0.0;
  std::vector<DisturbanceEvent> events;  // times snapped to the step grid
};

struct DynamicTrace {
  std::vector<double> time;  // uniform grid
  std::vector<std::string> machine_ids;
  std::vector<std::vector<double>> delta;  // [machine][sample], rad
  std::vector<std::vector<double>> omega;  // [machine][sample], rad/s deviation
  std::vector<std::string> bus_ids;
  std::vector<std::vector<double>> bus_v;  // [bus][sample], pu
  std::vector<double> coi_frequency;       // Hz
  TraceMeta meta;
};

/// Fixed-step RK4 integration of the swing equations over [0, horizon].
/// Event times are snapped to the step grid; network topology changes
/// refactorize at their boundaries. Throws ConvergenceError on numeric
/// blow-up (message carries the last valid time) and DomainError for an
/// event referencing a missing element or step > 10 ms.
DynamicTrace simulate(const GridCase& grid, const Equilibrium& equilibrium,
                      std::vector<DisturbanceEvent> events, double horizon_s,
                      double step_s, const SimOptions& options = {});

/// Printed-formula inertial deviation: f_s / (sum H_i S_n,i) * delta_P.
/// machines are (H seconds, S_n MVA) pairs; result in Hz.
double eq2_deviation(const std::vector<std::pair<double, double>>& machines,
                     double f_s_hz, double delta_p_mw);
double eq2_deviation(const GridCase& grid, double delta_p_mw);

struct FrequencyMetrics {
  double nadir_hz = 0.0;
  double nadir_time_s = 0.0;
  double initial_rocof_hz_per_s = 0.0;  // secant over 0.5 s post-event
  std::optional<double> settling_frequency_hz;  // set once quasi-steady
  bool ufls_tripped = false;
};

FrequencyMetrics frequency_metrics(const DynamicTrace& trace,
                                   double ufls_threshold_hz = 59.3,
                                   double ufls_dwell_s = 0.1);

/// Piecewise-linear admissible bands versus time since the event.
struct RideThroughEnvelope {
  struct Point {
    double t = 0.0;  // s since event
    double lo = 0.0;
    double hi = 0.0;
  };
  std::vector<Point> voltage;    // pu
  std::vector<Point> frequency;  // Hz
};

/// Shipping default: 0.0 pu tolerated for 0.15 s, linear recovery to
/// 0.9 pu at 3 s; frequency band 57.0-61.8 Hz. Study defaults, not grid-code
/// values; envelopes are expected to come from the study config.
RideThroughEnvelope default_ride_through_envelope();

struct RideThroughResult {
  std::string label;
  bool pass = true;
  struct Breach {
    double t = 0.0;  // absolute trace time
    std::string quantity;  // "voltage" | "frequency"
    double value = 0.0;
    double bound = 0.0;
  };
  std::optional<Breach> first_violation;
};

/// Compares post-event bus-voltage and COI-frequency trajectories against
/// the envelope. Bounds are inclusive: grazing the curve passes.
std::vector<RideThroughResult> check_ride_through(
    const DynamicTrace& trace, const RideThroughEnvelope& envelope,
    const std::vector<std::pair<std::string, std::string>>& monitors);

/// Convenience overload monitoring the named plants at their buses.
std::vector<RideThroughResult> check_ride_through(
    const GridCase& grid, const DynamicTrace& trace,
    const RideThroughEnvelope& envelope, const std::vector<std::string>& plant_ids);

enum class RenewableEventKind { drop, rise };

/// Builds the plant-output disturbance; ramp_duration 0 makes it a step.
/// Magnitude must not exceed current output (drop) or headroom (rise).
DisturbanceEvent renewable_event(const GridCase& grid, const std::string& plant_id,
                                 RenewableEventKind kind, double magnitude_mw,
                                 double ramp_duration_s = 0.0);

/// Converter fast-frequency support: -gain * rocof, clipped to
/// [0, headroom] MW.
double synthetic_inertia(const RenewablePlant& plant, double coi_rocof_hz_per_s);

struct ResponseResult {
  DynamicTrace trace;
  FrequencyMetrics metrics;
};

struct ResponseOptions {
  bool with_agc = false;
  double step_s = 0.005;
  double agc_gain_pu_per_hz_s = 0.1;
  int record_every = 1;
};

/// Governor (droop) response to the event, optionally closing the AGC loop.
/// Requires at least one governor-equipped machine; AGC additionally needs
/// a positive participation sum.
ResponseResult primary_secondary_response(const GridCase& grid,
                                          const DisturbanceEvent& event,
                                          double horizon_s,
                                          const ResponseOptions& options = {});

}  // namespace gridstudy::dyn
