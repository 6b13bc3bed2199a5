#pragma once

#include <complex>
#include <string>
#include <vector>

#include "gridstudy/dynamics.hpp"
#include "gridstudy/model.hpp"

namespace gridstudy::ssa {

/// Dense real matrix in plain row-major storage.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}
  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  const double& at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
};

/// Electromechanical state matrix about an operating point. States are
/// ordered [delta_1..delta_m, omega_1..omega_m]; dimension 2m. The angle
/// reference is not pinned, so one structural zero mode is always present.
struct LinearModel {
  Matrix a;
  std::vector<std::string> machine_ids;
  std::vector<dyn::MachineState> operating_point;
};

/// Analytic linearization of the reduced-network swing dynamics, including
/// the voltage response of constant-power injections.
LinearModel linearize(const GridCase& grid, const dyn::Equilibrium& equilibrium);

enum class ModeBand { inter_area, interplant, local_plant, out_of_band };

struct ModeDescriptor {
  std::complex<double> eigenvalue;  // sigma + j*omega, omega >= 0
  double frequency_hz = 0.0;        // |omega| / 2pi
  double damping_ratio = 0.0;       // -sigma / sqrt(sigma^2 + omega^2)
  ModeBand band = ModeBand::out_of_band;
};

/// Conjugate pairs merged (reported once, omega >= 0), sorted by frequency.
/// The structural zero mode is reported separately from oscillatory and
/// non-oscillatory (real) eigenvalues.
struct ModeSet {
  std::vector<ModeDescriptor> oscillatory;
  std::vector<ModeDescriptor> real_modes;
  std::vector<ModeDescriptor> zero_modes;
};

ModeSet modes(const LinearModel& model);

/// Electromechanical band lookup: [0.1, 1.0) inter-area, [1.0, 2.0)
/// interplant, [2.0, 3.0] local plant, out_of_band otherwise. Boundary
/// membership is half-open except the closed top of the local-plant band.
ModeBand classify_band(double frequency_hz);

const char* band_name(ModeBand band);

struct IntermittencyOptions {
  double horizon_s = 20.0;  // hard floor 20 s
  double step_s = 0.005;
  double event_time_s = 1.0;
  double ramp_s = 0.0;           // 0 = step change
  double damping_floor = 0.03;   // flag combinations below this ratio
};

struct IntermittencyRecord {
  double operating_point = 0.0;
  dyn::RenewableEventKind direction = dyn::RenewableEventKind::drop;
  double size_mw = 0.0;
  bool feasible = true;
  std::string skip_reason;

  double f_min_hz = 0.0, f_max_hz = 0.0;
  double v_min_pu = 0.0, v_max_pu = 0.0;
  double min_damping_ratio = 1.0;  // over post-event oscillatory modes
  ModeDescriptor worst_mode;
  bool flagged = false;
};

struct IntermittencyReport {
  std::string plant_id;
  double horizon_s = 0.0;
  double damping_floor = 0.0;
  std::vector<IntermittencyRecord> records;
};

/// Drop/rise events of each size at each pre-disturbance operating point:
/// a 20 s (or longer) nonlinear trace, frequency/voltage extrema, and the
/// post-event mode set. Requesting a horizon under 20 s is rejected.
IntermittencyReport intermittency_study(
    const GridCase& grid, const std::string& plant_id,
    const std::vector<double>& event_sizes_mw,
    const std::vector<dyn::RenewableEventKind>& directions,
    const std::vector<double>& operating_points,
    const IntermittencyOptions& options = {});

}  // namespace gridstudy::ssa
