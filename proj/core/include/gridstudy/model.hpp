#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gridstudy/errors.hpp"

namespace gridstudy {

enum class BusKind { slack, pv, pq };

struct Bus {
  std::string id;
  double base_kv = 0.0;
  BusKind kind = BusKind::pq;
  double v_min = 0.95;  // pu; defaults are not grid-code values, only study defaults
  double v_max = 1.05;
  double v_set = 1.0;  // pu magnitude held at slack/pv buses
  double load_p = 0.0;  // MW
  double load_q = 0.0;  // MVAr

  bool operator==(const Bus&) const = default;
};

struct Branch {
  std::string id;
  std::string from_bus;
  std::string to_bus;
  double r = 0.0;        // pu series resistance
  double x = 0.0;        // pu series reactance
  double b_shunt = 0.0;  // pu total line charging
  double thermal_rating = 0.0;  // MVA

  bool operator==(const Branch&) const = default;
};

struct GovernorParams {
  double droop_r = 0.05;    // pu frequency deviation per pu power (machine base)
  double time_const = 0.5;  // s, first-order servo lag
  double deadband = 0.0;    // Hz, no response inside the band

  bool operator==(const GovernorParams&) const = default;
};

struct ConventionalMachine {
  std::string id;
  std::string bus;
  double s_rated = 0.0;  // MVA
  double h = 0.0;        // s, inertia constant on s_rated
  double p_set = 0.0;    // MW dispatch
  double q_set = 0.0;    // MVAr dispatch (fixed injection at pq buses)
  double p_max = 0.0;    // MW
  double p_min = 0.0;    // MW
  double xd_t = 0.0;     // pu transient reactance on s_rated
  double damping = 0.0;  // pu damping coefficient on s_rated
  double forced_outage_rate = 0.0;  // probability in [0,1]
  std::optional<GovernorParams> governor;
  double agc_participation = 0.0;  // fraction in [0,1]

  bool operator==(const ConventionalMachine&) const = default;
};

enum class RenewableKind { wind_type3, wind_type4, solar_pv };

/// One point of a multi-state output distribution used by adequacy studies.
struct OutputState {
  double fraction = 0.0;     // of nameplate
  double probability = 0.0;

  bool operator==(const OutputState&) const = default;
};

struct RenewablePlant {
  std::string id;
  std::string bus;
  double nameplate = 0.0;  // MW
  RenewableKind kind = RenewableKind::solar_pv;
  double output_fraction = 0.0;  // current fraction of nameplate, [0,1]
  // 0 = converter-decoupled from system inertia. Type 4 and solar must be 0;
  // type 3 accepts (0,1] as an experimental knob.
  double inertia_coupling = 0.0;
  double synthetic_inertia_gain = 0.0;  // MW per Hz/s of measured ROCOF
  std::optional<std::vector<OutputState>> output_states;

  double output_mw() const { return nameplate * output_fraction; }

  bool operator==(const RenewablePlant&) const = default;
};

struct LoadProfile {
  std::string bus;
  std::vector<double> daily_peaks;            // 365 entries, MW
  std::optional<std::vector<double>> hourly;  // 8760 entries, MW

  bool operator==(const LoadProfile&) const = default;
};

struct GridCase {
  double system_frequency = 60.0;  // Hz
  double base_mva = 100.0;
  // Escape hatch for degenerate fixtures: permits a case without
  // conventional machines (zero aggregate inertia).
  bool allow_zero_inertia = false;

  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<ConventionalMachine> machines;
  std::vector<RenewablePlant> renewables;
  std::vector<LoadProfile> profiles;

  bool operator==(const GridCase&) const = default;

  double omega_s() const;  // rad/s

  /// Index into buses, or -1.
  int bus_index(std::string_view id) const;
  const Bus* find_bus(std::string_view id) const;
  const Branch* find_branch(std::string_view id) const;
  const ConventionalMachine* find_machine(std::string_view id) const;
  const RenewablePlant* find_renewable(std::string_view id) const;
};

/// One broken rule. Violations are data, not exceptions.
struct Violation {
  std::string entity;  // offending element id ("B9", "G1", "case")
  std::string rule;    // the rule, e.g. "h > 0"
  std::string detail;

  bool operator==(const Violation&) const = default;
};

/// Thrown by load_case when the parsed document breaks invariants.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<Violation> violations);
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  std::vector<Violation> violations_;
};

/// Reads and validates a case file. Rejects rather than repairs: any
/// violation raises ValidationError naming the offending entity.
GridCase load_case(const std::filesystem::path& path);

/// Serializes a case to the versioned document format (format_version 1).
std::string case_to_json(const GridCase& grid);
void save_case(const GridCase& grid, const std::filesystem::path& path);

/// Parses case text; origin appears in error messages.
GridCase case_from_json(const std::string& text,
                        const std::string& origin = "<string>");

/// Checks every type invariant plus cross-references and connectivity.
/// Empty result iff the case is usable by every analysis module.
std::vector<Violation> validate(const GridCase& grid);

/// Returns a copy with every renewable plant's output_fraction set.
GridCase set_penetration(const GridCase& grid, double fraction);

/// Sum of H_i * S_n,i over conventional machines, MVA*s.
double aggregate_inertia_mva_s(const GridCase& grid);
double total_conventional_capacity_mw(const GridCase& grid);
double total_renewable_nameplate_mw(const GridCase& grid);

/// System-level daily-peak profile: per-day sum of all bus profiles.
/// A case without profiles falls back to a flat series of the total bus
/// load, so adequacy studies always have 365 daily peaks to work with.
LoadProfile system_load_profile(const GridCase& grid);

}  // namespace gridstudy
