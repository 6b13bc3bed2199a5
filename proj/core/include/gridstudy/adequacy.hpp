#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gridstudy/model.hpp"

namespace gridstudy::adequacy {

/// Capacity-outage probability table: discrete distribution of the total
/// capacity on forced outage, built by exact convolution of unit models.
struct OutageTable {
  struct Entry {
    double capacity_mw;  // capacity on outage
    double probability;
  };
  std::vector<Entry> entries;  // capacities strictly increasing
  double total_capacity_mw = 0.0;

  /// P(available capacity < load) = P(outage > total - load).
  double shortfall_probability(double load_mw) const;
  double probability_sum() const;
};

/// How renewable plants enter the outage model.
///   firm_fraction: nameplate * penetration as firm capacity.
///   multi_state:   the plant's output_states distribution; plants without
///                  one fall back to firm_fraction.
enum class RenewableTreatment { firm_fraction, multi_state };

enum class Method { analytic, monte_carlo };

/// penetration overrides every plant's output fraction; nullopt keeps each
/// plant's own output_fraction.
OutageTable build_outage_table(
    const std::vector<ConventionalMachine>& machines,
    const std::vector<RenewablePlant>& renewables,
    std::optional<double> penetration,
    RenewableTreatment treatment = RenewableTreatment::firm_fraction,
    double rounding_mw = 0.0);

/// Expected shortage days per year: sum over 365 days of
/// P(available < that day's peak).
double compute_lole(const OutageTable& table, const LoadProfile& profile);

/// P(available < annual peak), annual peak = max daily peak.
double compute_lolp(const OutageTable& table, const LoadProfile& profile);

struct AdequacyResult {
  double lole = 0.0;  // days/year
  double lolp = 0.0;
  double penetration = 0.0;
  Method method = Method::analytic;
  std::optional<double> mc_std_err;  // days/year, monte_carlo only
  std::optional<std::uint64_t> seed;
};

/// Samples whole years of daily unit availabilities. Deterministic per seed.
AdequacyResult monte_carlo_lole(
    const GridCase& grid, double penetration, std::uint64_t samples,
    std::uint64_t seed,
    RenewableTreatment treatment = RenewableTreatment::firm_fraction);

/// Candidate unit for capacity-credit evaluation: two-state by default, or
/// multi-state when output_states is set.
struct Candidate {
  std::string id;
  double capacity_mw = 0.0;
  double forced_outage_rate = 0.0;
  std::optional<std::vector<OutputState>> output_states;
};

enum class ElccMetric { lole };

/// Effective load-carrying capability, percent of candidate nameplate:
/// the uniform load increase that returns LOLE to its pre-addition value,
/// found by bisection to load_tol_mw. Throws DomainError when the baseline
/// LOLE is zero or the candidate is degenerate (the index is undefined).
double compute_elcc(const GridCase& grid, const Candidate& candidate,
                    ElccMetric metric = ElccMetric::lole,
                    double load_tol_mw = 0.1);

inline std::vector<double> default_penetration_grid() {
  return {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
}

struct SweepOptions {
  Method method = Method::analytic;
  RenewableTreatment treatment = RenewableTreatment::firm_fraction;
  std::uint64_t mc_samples = 100000;
  std::optional<std::uint64_t> seed;  // required for monte_carlo
  int workers = 0;                    // 0 = sequential
};

/// One AdequacyResult per level, each computed independently. Monte Carlo
/// levels draw from streams split per level off the master seed, so results
/// do not depend on evaluation order.
std::vector<AdequacyResult> penetration_sweep(const GridCase& grid,
                                              const std::vector<double>& levels,
                                              const SweepOptions& options = {});

}  // namespace gridstudy::adequacy
