#include "gridstudy/adequacy.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "internal/parallel.hpp"

namespace gridstudy::adequacy {

double OutageTable::shortfall_probability(double load_mw) const {
  // Available < load  <=>  outage > total - load (strict).
  const double threshold = total_capacity_mw - load_mw;
  double p = 0.0;
  for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
    if (it->capacity_mw > threshold) p += it->probability;
    else break;
  }
  return std::min(p, 1.0);
}

double OutageTable::probability_sum() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.probability;
  return s;
}

namespace {

double round_to(double value, double increment) {
  if (increment <= 0.0) return value;
  return std::round(value / increment) * increment;
}

/// Convolves one unit described by its outage distribution
/// (outage_mw, probability) pairs into the running table.
void convolve_unit(std::map<double, double>& table,
                   const std::vector<std::pair<double, double>>& unit) {
  std::map<double, double> next;
  for (const auto& [outage, p_state] : table) {
    for (const auto& [add, p_add] : unit) {
      if (p_add <= 0.0) continue;
      next[outage + add] += p_state * p_add;
    }
  }
  table.swap(next);
}

}  // namespace

OutageTable build_outage_table(const std::vector<ConventionalMachine>& machines,
                               const std::vector<RenewablePlant>& renewables,
                               std::optional<double> penetration,
                               RenewableTreatment treatment, double rounding_mw) {
  if (penetration && !(*penetration >= 0.0 && *penetration <= 1.0))
    throw DomainError("build_outage_table: penetration outside [0,1]");

  std::map<double, double> table;
  table[0.0] = 1.0;
  double total = 0.0;

  for (const auto& m : machines) {
    if (m.forced_outage_rate < 0.0 || m.forced_outage_rate > 1.0)
      throw DomainError("machine " + m.id + ": forced_outage_rate outside [0,1]");
    double cap = round_to(m.p_max, rounding_mw);
    total += cap;
    if (cap <= 0.0) continue;
    convolve_unit(table, {{0.0, 1.0 - m.forced_outage_rate},
                          {cap, m.forced_outage_rate}});
  }

  for (const auto& plant : renewables) {
    double fraction = penetration.value_or(plant.output_fraction);
    if (treatment == RenewableTreatment::multi_state && plant.output_states) {
      double cap = round_to(plant.nameplate, rounding_mw);
      total += cap;
      std::vector<std::pair<double, double>> unit;
      double psum = 0.0;
      for (const auto& s : *plant.output_states) {
        unit.emplace_back(round_to(plant.nameplate * (1.0 - s.fraction), rounding_mw),
                          s.probability);
        psum += s.probability;
      }
      if (std::abs(psum - 1.0) > 1e-9)
        throw DomainError("renewable " + plant.id +
                          ": output_states probabilities must sum to 1");
      convolve_unit(table, unit);
    } else {
      // Firm capacity: deterministic nameplate * fraction.
      total += round_to(plant.nameplate * fraction, rounding_mw);
    }
  }

  OutageTable out;
  out.total_capacity_mw = total;
  out.entries.reserve(table.size());
  for (const auto& [cap, p] : table)
    if (p > 0.0) out.entries.push_back({cap, p});
  return out;
}

namespace {

void require_profile(const LoadProfile& profile) {
  if (profile.daily_peaks.size() != 365)
    throw DomainError("load profile must carry 365 daily peaks, got " +
                      std::to_string(profile.daily_peaks.size()));
}

}  // namespace

double compute_lole(const OutageTable& table, const LoadProfile& profile) {
  require_profile(profile);
  double lole = 0.0;
  for (double peak : profile.daily_peaks)
    lole += table.shortfall_probability(peak);
  return lole;
}

double compute_lolp(const OutageTable& table, const LoadProfile& profile) {
  require_profile(profile);
  double annual_peak =
      *std::max_element(profile.daily_peaks.begin(), profile.daily_peaks.end());
  return table.shortfall_probability(annual_peak);
}

AdequacyResult monte_carlo_lole(const GridCase& grid, double penetration,
                                std::uint64_t samples, std::uint64_t seed,
                                RenewableTreatment treatment) {
  if (samples < 1) throw DomainError("monte_carlo_lole: samples must be >= 1");
  if (!(penetration >= 0.0 && penetration <= 1.0))
    throw DomainError("monte_carlo_lole: penetration outside [0,1]");

  LoadProfile profile = system_load_profile(grid);
  require_profile(profile);
  auto peak_it =
      std::max_element(profile.daily_peaks.begin(), profile.daily_peaks.end());
  const size_t peak_day =
      static_cast<size_t>(peak_it - profile.daily_peaks.begin());

  struct TwoState {
    double cap;
    double avail;  // 1 - FOR
  };
  std::vector<TwoState> units;
  for (const auto& m : grid.machines)
    if (m.p_max > 0.0) units.push_back({m.p_max, 1.0 - m.forced_outage_rate});

  struct MultiState {
    std::vector<double> cum_prob;
    std::vector<double> avail_mw;
  };
  std::vector<MultiState> multi;
  double firm = 0.0;
  for (const auto& plant : grid.renewables) {
    if (treatment == RenewableTreatment::multi_state && plant.output_states) {
      MultiState ms;
      double c = 0.0;
      for (const auto& s : *plant.output_states) {
        c += s.probability;
        ms.cum_prob.push_back(c);
        ms.avail_mw.push_back(plant.nameplate * s.fraction);
      }
      multi.push_back(std::move(ms));
    } else {
      firm += plant.nameplate * penetration;
    }
  }

  std::mt19937_64 rng(seed);
  auto uniform = [&rng]() {
    return (rng() >> 11) * 0x1.0p-53;  // [0,1) with 53 random bits
  };

  double sum_days = 0.0, sum_days_sq = 0.0;
  std::uint64_t peak_shortage_years = 0;
  for (std::uint64_t s = 0; s < samples; ++s) {
    int shortage_days = 0;
    bool peak_short = false;
    for (size_t d = 0; d < 365; ++d) {
      double avail = firm;
      for (const auto& u : units)
        if (uniform() < u.avail) avail += u.cap;
      for (const auto& ms : multi) {
        double r = uniform();
        size_t k = 0;
        while (k + 1 < ms.cum_prob.size() && r >= ms.cum_prob[k]) ++k;
        avail += ms.avail_mw[k];
      }
      if (avail < profile.daily_peaks[d]) {
        ++shortage_days;
        if (d == peak_day) peak_short = true;
      }
    }
    sum_days += shortage_days;
    sum_days_sq += static_cast<double>(shortage_days) * shortage_days;
    if (peak_short) ++peak_shortage_years;
  }

  const double n = static_cast<double>(samples);
  AdequacyResult result;
  result.lole = sum_days / n;
  result.lolp = static_cast<double>(peak_shortage_years) / n;
  result.penetration = penetration;
  result.method = Method::monte_carlo;
  result.seed = seed;
  if (samples > 1) {
    double var = (sum_days_sq - n * result.lole * result.lole) / (n - 1.0);
    result.mc_std_err = std::sqrt(std::max(var, 0.0) / n);
  } else {
    result.mc_std_err = 0.0;
  }
  return result;
}

double compute_elcc(const GridCase& grid, const Candidate& candidate,
                    ElccMetric metric, double load_tol_mw) {
  (void)metric;  // lole is the only equivalence metric
  if (candidate.capacity_mw <= 0.0)
    throw DomainError("compute_elcc: undefined for a candidate of " +
                      std::to_string(candidate.capacity_mw) + " MW");

  LoadProfile profile = system_load_profile(grid);
  require_profile(profile);

  OutageTable base =
      build_outage_table(grid.machines, grid.renewables, std::nullopt);
  const double lole_base = compute_lole(base, profile);
  if (lole_base <= 0.0)
    throw DomainError("compute_elcc: baseline LOLE is zero, index undefined");

  // Fold the candidate into the outage model without disturbing how the
  // case's own plants were treated in the baseline.
  std::vector<std::pair<double, double>> unit;  // (outage_mw, probability)
  if (candidate.output_states) {
    for (const auto& s : *candidate.output_states)
      unit.emplace_back(candidate.capacity_mw * (1.0 - s.fraction), s.probability);
  } else {
    unit = {{0.0, 1.0 - candidate.forced_outage_rate},
            {candidate.capacity_mw, candidate.forced_outage_rate}};
  }
  std::map<double, double> folded;
  for (const auto& e : base.entries) folded[e.capacity_mw] = e.probability;
  convolve_unit(folded, unit);
  OutageTable with_candidate;
  with_candidate.total_capacity_mw = base.total_capacity_mw + candidate.capacity_mw;
  for (const auto& [c, p] : folded)
    if (p > 0.0) with_candidate.entries.push_back({c, p});

  auto lole_at = [&](double delta_load) {
    LoadProfile shifted = profile;
    for (double& d : shifted.daily_peaks) d += delta_load;
    return compute_lole(with_candidate, shifted);
  };

  const double cap = candidate.capacity_mw;
  if (lole_at(0.0) > lole_base + 1e-12)
    throw ConvergenceError("compute_elcc: adding the candidate raised LOLE; "
                           "no load increase brackets the target");
  // A perfectly reliable unit shifts the whole table: the full nameplate is
  // carried at unchanged risk.
  if (lole_at(cap) <= lole_base + 1e-12) return 100.0;

  double lo = 0.0, hi = cap;  // f(lo) <= 0 < f(hi)
  while (hi - lo > load_tol_mw) {
    double mid = 0.5 * (lo + hi);
    if (lole_at(mid) <= lole_base + 1e-12) lo = mid;
    else hi = mid;
  }
  return lo / cap * 100.0;
}

std::vector<AdequacyResult> penetration_sweep(const GridCase& grid,
                                              const std::vector<double>& levels,
                                              const SweepOptions& options) {
  for (double level : levels)
    if (!(level >= 0.0 && level <= 1.0))
      throw DomainError("penetration_sweep: level " + std::to_string(level) +
                        " outside [0,1]");
  if (options.method == Method::monte_carlo && !options.seed)
    throw DomainError("penetration_sweep: monte_carlo requires a seed");

  LoadProfile profile = system_load_profile(grid);
  std::vector<AdequacyResult> results(levels.size());
  gridstudy::detail::parallel_for(
      levels.size(), options.workers, [&](std::size_t i) {
        const double level = levels[i];
        if (options.method == Method::analytic) {
          OutageTable table = build_outage_table(grid.machines, grid.renewables,
                                                 level, options.treatment);
          AdequacyResult r;
          r.lole = compute_lole(table, profile);
          r.lolp = compute_lolp(table, profile);
          r.penetration = level;
          r.method = Method::analytic;
          results[i] = r;
        } else {
          std::uint64_t seed = gridstudy::detail::split_seed(*options.seed, i);
          results[i] = monte_carlo_lole(grid, level, options.mc_samples, seed,
                                        options.treatment);
        }
      });
  return results;
}

}  // namespace gridstudy::adequacy
