#include "gridstudy/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace gridstudy {

namespace {

std::string join_violations(const std::vector<Violation>& violations) {
  std::ostringstream os;
  os << "case validation failed (" << violations.size() << " violation"
     << (violations.size() == 1 ? "" : "s") << "):";
  for (const auto& v : violations) {
    os << "\n  [" << v.entity << "] " << v.rule;
    if (!v.detail.empty()) os << " — " << v.detail;
  }
  return os.str();
}

}  // namespace

ValidationError::ValidationError(std::vector<Violation> violations)
    : Error(join_violations(violations)), violations_(std::move(violations)) {}

double GridCase::omega_s() const {
  return 2.0 * std::numbers::pi * system_frequency;
}

int GridCase::bus_index(std::string_view id) const {
  for (size_t i = 0; i < buses.size(); ++i)
    if (buses[i].id == id) return static_cast<int>(i);
  return -1;
}

const Bus* GridCase::find_bus(std::string_view id) const {
  int i = bus_index(id);
  return i < 0 ? nullptr : &buses[static_cast<size_t>(i)];
}

const Branch* GridCase::find_branch(std::string_view id) const {
  for (const auto& b : branches)
    if (b.id == id) return &b;
  return nullptr;
}

const ConventionalMachine* GridCase::find_machine(std::string_view id) const {
  for (const auto& m : machines)
    if (m.id == id) return &m;
  return nullptr;
}

const RenewablePlant* GridCase::find_renewable(std::string_view id) const {
  for (const auto& p : renewables)
    if (p.id == id) return &p;
  return nullptr;
}

namespace {

void check_unique_ids(const GridCase& grid, std::vector<Violation>& out) {
  std::unordered_set<std::string> seen;
  auto check = [&](const std::string& id, const char* what) {
    if (id.empty()) {
      out.push_back({std::string(what), "id must be non-empty", ""});
      return;
    }
    if (!seen.insert(id).second)
      out.push_back({id, "ids must be unique", std::string("duplicate ") + what + " id"});
  };
  for (const auto& b : grid.buses) check(b.id, "bus");
  for (const auto& b : grid.branches) check(b.id, "branch");
  for (const auto& m : grid.machines) check(m.id, "machine");
  for (const auto& p : grid.renewables) check(p.id, "renewable");
}

void check_connectivity(const GridCase& grid, std::vector<Violation>& out) {
  if (grid.buses.empty()) {
    out.push_back({"case", "at least one bus required", ""});
    return;
  }
  std::unordered_map<std::string, std::vector<std::string>> adj;
  for (const auto& br : grid.branches) {
    adj[br.from_bus].push_back(br.to_bus);
    adj[br.to_bus].push_back(br.from_bus);
  }
  std::unordered_set<std::string> reached;
  std::queue<std::string> frontier;
  frontier.push(grid.buses.front().id);
  reached.insert(grid.buses.front().id);
  while (!frontier.empty()) {
    auto cur = frontier.front();
    frontier.pop();
    for (const auto& next : adj[cur]) {
      if (reached.insert(next).second) frontier.push(next);
    }
  }
  for (const auto& b : grid.buses) {
    if (!reached.count(b.id))
      out.push_back({b.id, "graph is connected", "bus unreachable from " + grid.buses.front().id});
  }
}

}  // namespace

std::vector<Violation> validate(const GridCase& grid) {
  std::vector<Violation> out;

  if (grid.system_frequency <= 0.0)
    out.push_back({"case", "system_frequency > 0", ""});
  if (grid.base_mva <= 0.0) out.push_back({"case", "base_mva > 0", ""});

  check_unique_ids(grid, out);

  int slack_count = 0;
  for (const auto& b : grid.buses) {
    if (b.kind == BusKind::slack) ++slack_count;
    if (b.base_kv <= 0.0) out.push_back({b.id, "base_kv > 0", ""});
    if (!(b.v_min < b.v_max)) out.push_back({b.id, "v_min < v_max", ""});
  }
  if (slack_count != 1 && !grid.buses.empty())
    out.push_back({"case", "exactly one slack bus",
                   "found " + std::to_string(slack_count)});

  for (const auto& br : grid.branches) {
    if (br.x == 0.0) out.push_back({br.id, "x != 0", ""});
    if (br.thermal_rating <= 0.0) out.push_back({br.id, "thermal_rating > 0", ""});
    if (br.from_bus == br.to_bus)
      out.push_back({br.id, "from_bus != to_bus", ""});
    if (!grid.find_bus(br.from_bus))
      out.push_back({br.id, "from_bus exists", "references missing bus " + br.from_bus});
    if (!grid.find_bus(br.to_bus))
      out.push_back({br.id, "to_bus exists", "references missing bus " + br.to_bus});
  }

  for (const auto& m : grid.machines) {
    if (m.h <= 0.0) out.push_back({m.id, "h > 0", ""});
    if (m.s_rated <= 0.0) out.push_back({m.id, "s_rated > 0", ""});
    if (m.forced_outage_rate < 0.0 || m.forced_outage_rate > 1.0)
      out.push_back({m.id, "0 <= forced_outage_rate <= 1", ""});
    if (!(m.p_min <= m.p_set && m.p_set <= m.p_max))
      out.push_back({m.id, "p_min <= p_set <= p_max", ""});
    if (m.xd_t <= 0.0) out.push_back({m.id, "xd_t > 0", ""});
    if (m.damping < 0.0) out.push_back({m.id, "damping >= 0", ""});
    if (m.agc_participation < 0.0 || m.agc_participation > 1.0)
      out.push_back({m.id, "0 <= agc_participation <= 1", ""});
    if (m.governor) {
      if (m.governor->droop_r <= 0.0)
        out.push_back({m.id, "governor droop_r > 0", ""});
      if (m.governor->time_const <= 0.0)
        out.push_back({m.id, "governor time_const > 0", ""});
      if (m.governor->deadband < 0.0)
        out.push_back({m.id, "governor deadband >= 0", ""});
    }
    if (!grid.find_bus(m.bus))
      out.push_back({m.id, "bus exists", "references missing bus " + m.bus});
  }

  for (const auto& p : grid.renewables) {
    if (p.nameplate <= 0.0) out.push_back({p.id, "nameplate > 0", ""});
    if (p.output_fraction < 0.0 || p.output_fraction > 1.0)
      out.push_back({p.id, "0 <= output_fraction <= 1", ""});
    if (p.inertia_coupling < 0.0 || p.inertia_coupling > 1.0)
      out.push_back({p.id, "0 <= inertia_coupling <= 1", ""});
    if (p.kind != RenewableKind::wind_type3 && p.inertia_coupling != 0.0)
      out.push_back({p.id, "converter-decoupled kinds require inertia_coupling = 0",
                     "only wind_type3 may couple to system inertia"});
    if (p.synthetic_inertia_gain < 0.0)
      out.push_back({p.id, "synthetic_inertia_gain >= 0", ""});
    if (p.output_states) {
      double sum = 0.0;
      for (const auto& s : *p.output_states) {
        sum += s.probability;
        if (s.probability < 0.0)
          out.push_back({p.id, "output_states probabilities >= 0", ""});
        if (s.fraction < 0.0 || s.fraction > 1.0)
          out.push_back({p.id, "output_states fractions in [0,1]", ""});
      }
      if (std::abs(sum - 1.0) > 1e-9)
        out.push_back({p.id, "output_states probabilities sum to 1",
                       "sum = " + std::to_string(sum)});
    }
    if (!grid.find_bus(p.bus))
      out.push_back({p.id, "bus exists", "references missing bus " + p.bus});
  }

  for (const auto& lp : grid.profiles) {
    std::string entity = "profile(" + lp.bus + ")";
    if (lp.daily_peaks.size() != 365)
      out.push_back({entity, "daily_peaks length = 365",
                     "got " + std::to_string(lp.daily_peaks.size())});
    for (double v : lp.daily_peaks)
      if (v < 0.0) {
        out.push_back({entity, "daily peaks >= 0", ""});
        break;
      }
    if (lp.hourly) {
      if (lp.hourly->size() != 8760)
        out.push_back({entity, "hourly length = 8760",
                       "got " + std::to_string(lp.hourly->size())});
      else if (lp.daily_peaks.size() == 365) {
        for (int d = 0; d < 365; ++d) {
          double mx = 0.0;
          for (int h = 0; h < 24; ++h)
            mx = std::max(mx, (*lp.hourly)[static_cast<size_t>(d) * 24 + h]);
          if (std::abs(mx - lp.daily_peaks[d]) > 1e-9) {
            out.push_back({entity, "daily_peaks[d] = max of hours of day d",
                           "first mismatch at day " + std::to_string(d)});
            break;
          }
        }
      }
      for (double v : *lp.hourly)
        if (v < 0.0) {
          out.push_back({entity, "hourly values >= 0", ""});
          break;
        }
    }
    if (!grid.find_bus(lp.bus))
      out.push_back({entity, "bus exists", "references missing bus " + lp.bus});
  }

  if (grid.machines.empty() && !grid.allow_zero_inertia)
    out.push_back({"case", "at least one conventional machine",
                   "set allow_zero_inertia for degenerate fixtures"});

  check_connectivity(grid, out);
  return out;
}

GridCase set_penetration(const GridCase& grid, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw DomainError("set_penetration: fraction " + std::to_string(fraction) +
                      " outside [0,1]");
  GridCase copy = grid;
  for (auto& p : copy.renewables) p.output_fraction = fraction;
  return copy;
}

double aggregate_inertia_mva_s(const GridCase& grid) {
  double sum = 0.0;
  for (const auto& m : grid.machines) sum += m.h * m.s_rated;
  return sum;
}

double total_conventional_capacity_mw(const GridCase& grid) {
  double sum = 0.0;
  for (const auto& m : grid.machines) sum += m.p_max;
  return sum;
}

double total_renewable_nameplate_mw(const GridCase& grid) {
  double sum = 0.0;
  for (const auto& p : grid.renewables) sum += p.nameplate;
  return sum;
}

LoadProfile system_load_profile(const GridCase& grid) {
  LoadProfile total;
  total.bus = "system";
  total.daily_peaks.assign(365, 0.0);
  if (grid.profiles.empty()) {
    double flat = 0.0;
    for (const auto& b : grid.buses) flat += b.load_p;
    std::fill(total.daily_peaks.begin(), total.daily_peaks.end(), flat);
    return total;
  }
  for (const auto& lp : grid.profiles) {
    size_t n = std::min<size_t>(lp.daily_peaks.size(), 365);
    for (size_t d = 0; d < n; ++d) total.daily_peaks[d] += lp.daily_peaks[d];
  }
  return total;
}

}  // namespace gridstudy
