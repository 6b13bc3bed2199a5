#include "gridstudy/security.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <unordered_map>
#include <unordered_set>

#include "internal/parallel.hpp"

namespace gridstudy::security {

std::vector<Contingency> enumerate_n1(const GridCase& grid) {
  std::vector<std::string> branch_ids, machine_ids;
  for (const auto& b : grid.branches) branch_ids.push_back(b.id);
  for (const auto& m : grid.machines) machine_ids.push_back(m.id);
  std::sort(branch_ids.begin(), branch_ids.end());
  std::sort(machine_ids.begin(), machine_ids.end());

  std::vector<Contingency> out;
  out.reserve(branch_ids.size() + machine_ids.size());
  for (const auto& id : branch_ids)
    out.push_back({"branch:" + id, ContingencyKind::branch_outage, id});
  for (const auto& id : machine_ids)
    out.push_back({"machine:" + id, ContingencyKind::machine_outage, id});
  return out;
}

namespace {

/// True when every bus is still reachable from the slack.
bool connected_to_slack(const GridCase& grid, std::string* islanded) {
  if (grid.buses.empty()) return true;
  std::string slack;
  for (const auto& b : grid.buses)
    if (b.kind == BusKind::slack) slack = b.id;
  std::unordered_map<std::string, std::vector<std::string>> adj;
  for (const auto& br : grid.branches) {
    adj[br.from_bus].push_back(br.to_bus);
    adj[br.to_bus].push_back(br.from_bus);
  }
  std::unordered_set<std::string> reached{slack};
  std::queue<std::string> frontier;
  frontier.push(slack);
  while (!frontier.empty()) {
    auto cur = frontier.front();
    frontier.pop();
    for (const auto& next : adj[cur])
      if (reached.insert(next).second) frontier.push(next);
  }
  for (const auto& b : grid.buses) {
    if (!reached.count(b.id)) {
      if (islanded) *islanded = b.id;
      return false;
    }
  }
  return true;
}

}  // namespace

AppliedContingency apply_contingency(const GridCase& grid, const Contingency& c) {
  AppliedContingency out{grid, true, ""};

  if (c.kind == ContingencyKind::branch_outage) {
    auto& branches = out.grid.branches;
    auto it = std::find_if(branches.begin(), branches.end(),
                           [&](const Branch& b) { return b.id == c.element; });
    if (it == branches.end())
      throw DomainError("apply_contingency: no branch " + c.element);
    branches.erase(it);
    std::string islanded;
    if (!connected_to_slack(out.grid, &islanded)) {
      out.feasible = false;
      out.reason = "outage of " + c.element + " islands bus " + islanded;
    }
    return out;
  }

  auto& machines = out.grid.machines;
  auto it = std::find_if(machines.begin(), machines.end(),
                         [&](const ConventionalMachine& m) { return m.id == c.element; });
  if (it == machines.end())
    throw DomainError("apply_contingency: no machine " + c.element);
  const double lost = it->p_set;
  machines.erase(it);

  if (lost != 0.0) {
    double headroom_sum = 0.0;
    for (const auto& m : machines) {
      double head = lost > 0.0 ? m.p_max - m.p_set : m.p_set - m.p_min;
      headroom_sum += std::max(head, 0.0);
    }
    if (headroom_sum + 1e-9 < std::abs(lost)) {
      out.feasible = false;
      out.reason = "redispatch of " + std::to_string(lost) + " MW after losing " +
                   c.element + " exceeds remaining headroom " +
                   std::to_string(headroom_sum) + " MW";
      return out;
    }
    for (auto& m : machines) {
      double head = lost > 0.0 ? m.p_max - m.p_set : m.p_set - m.p_min;
      head = std::max(head, 0.0);
      m.p_set += lost * head / headroom_sum;
    }
  }
  return out;
}

SeverityScore severity_index(const GridCase& grid,
                             const pf::PowerFlowSolution& post_solution,
                             const pf::LimitReport& limits,
                             double loadability_margin,
                             const SeverityWeights& weights) {
  (void)grid;
  if (!post_solution.converged) return diverged_score(weights);

  SeverityScore score;
  for (const auto& v : limits.voltage_violations)
    score.voltage_term += std::abs(v.v_mag - v.bound) / 0.05;
  for (const auto& t : limits.thermal_violations)
    score.thermal_term += t.loading - 1.0;
  if (weights.margin_ref > 0.0)
    score.margin_term = std::max(0.0, 1.0 - loadability_margin / weights.margin_ref);

  score.voltage_term *= weights.w_v;
  score.thermal_term *= weights.w_t;
  score.margin_term *= weights.w_m;
  score.total = score.voltage_term + score.thermal_term + score.margin_term;
  return score;
}

SeverityScore diverged_score(const SeverityWeights& weights) {
  SeverityScore score;
  score.diverged = true;
  score.total = weights.divergence_penalty;
  return score;
}

namespace {

constexpr double kAmpleMargin = 1e9;  // keeps the margin term at zero

struct Scored {
  SeverityScore score;
  bool ac_detailed = false;
};

Scored screen_dc(const GridCase& post, const Contingency& c,
                 const SeverityWeights& weights) {
  (void)c;
  try {
    pf::PowerFlowSolution sol = pf::solve_power_flow(post, pf::Method::dc_linear);
    pf::LimitReport limits = pf::check_limits(post, sol);
    return {severity_index(post, sol, limits, kAmpleMargin, weights), false};
  } catch (const Error&) {
    return {diverged_score(weights), false};
  }
}

Scored score_ac(const GridCase& post, const SeverityWeights& weights,
                bool with_margin) {
  try {
    pf::PowerFlowSolution sol = pf::solve_power_flow(post, pf::Method::ac_newton);
    pf::LimitReport limits = pf::check_limits(post, sol);
    double margin = kAmpleMargin;
    if (with_margin) margin = pf::loadability_margin(post).margin;
    return {severity_index(post, sol, limits, margin, weights), true};
  } catch (const Error&) {
    return {diverged_score(weights), true};
  }
}

}  // namespace

RankedReport rank_contingencies(const GridCase& grid,
                                const std::vector<Contingency>& contingencies,
                                const std::vector<double>& levels,
                                const RankOptions& options) {
  RankedReport report;
  report.weights = options.weights;

  for (double level : levels) {
    GridCase leveled = set_penetration(grid, level);

    // Post-contingency cases are built once; infeasible ones score the
    // divergence penalty without a solve.
    std::vector<AppliedContingency> applied;
    applied.reserve(contingencies.size());
    for (const auto& c : contingencies) applied.push_back(apply_contingency(leveled, c));

    std::vector<Scored> scored(contingencies.size());
    gridstudy::detail::parallel_for(
        contingencies.size(), options.workers, [&](std::size_t i) {
          if (!applied[i].feasible) {
            scored[i] = {diverged_score(options.weights), false};
            return;
          }
          scored[i] = screen_dc(applied[i].grid, contingencies[i], options.weights);
        });

    // Detailed ac pass for the worst screening results.
    std::vector<std::size_t> order(contingencies.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (scored[a].score.total != scored[b].score.total)
        return scored[a].score.total > scored[b].score.total;
      return contingencies[a].id < contingencies[b].id;
    });
    std::size_t detail_count =
        std::min<std::size_t>(order.size(), static_cast<std::size_t>(std::max(options.top_k, 0)));
    std::vector<std::size_t> detail(order.begin(),
                                    order.begin() + static_cast<long>(detail_count));
    gridstudy::detail::parallel_for(detail.size(), options.workers, [&](std::size_t j) {
      std::size_t i = detail[j];
      if (!applied[i].feasible) return;  // keeps the infeasible marker score
      scored[i] = score_ac(applied[i].grid, options.weights, options.weights.w_m > 0.0);
    });

    LevelRanking ranking;
    ranking.penetration = level;
    std::vector<std::size_t> final_order(contingencies.size());
    for (std::size_t i = 0; i < final_order.size(); ++i) final_order[i] = i;
    std::sort(final_order.begin(), final_order.end(), [&](std::size_t a, std::size_t b) {
      if (scored[a].score.total != scored[b].score.total)
        return scored[a].score.total > scored[b].score.total;
      return contingencies[a].id < contingencies[b].id;
    });
    bool secure = true;
    for (std::size_t r = 0; r < final_order.size(); ++r) {
      std::size_t i = final_order[r];
      RankedEntry entry;
      entry.rank = static_cast<int>(r + 1);
      entry.contingency = contingencies[i];
      entry.score = scored[i].score;
      entry.ac_detailed = scored[i].ac_detailed;
      if (entry.score.total != 0.0 || entry.score.diverged) secure = false;
      ranking.entries.push_back(std::move(entry));
    }
    ranking.secure = secure;
    if (!ranking.entries.empty()) ranking.worst_id = ranking.entries.front().contingency.id;
    report.levels.push_back(std::move(ranking));
  }
  return report;
}

}  // namespace gridstudy::security
