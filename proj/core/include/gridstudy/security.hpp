#pragma once

#include <string>
#include <vector>

#include "gridstudy/model.hpp"
#include "gridstudy/powerflow.hpp"

namespace gridstudy::security {

enum class ContingencyKind { branch_outage, machine_outage };

struct Contingency {
  std::string id;
  ContingencyKind kind = ContingencyKind::branch_outage;
  std::string element;

  bool operator==(const Contingency&) const = default;
};

/// Exactly one contingency per branch plus one per conventional machine,
/// branches first, each group ordered by element id.
std::vector<Contingency> enumerate_n1(const GridCase& grid);

/// Post-contingency case. Islanding and redispatch shortfall come back as
/// infeasible markers rather than exceptions.
struct AppliedContingency {
  GridCase grid;
  bool feasible = true;
  std::string reason;
};

/// Copy of the case with the element removed. A machine outage redispatches
/// the lost MW across the remaining machines in proportion to their
/// p_max - p_set headroom.
AppliedContingency apply_contingency(const GridCase& grid, const Contingency& c);

struct SeverityWeights {
  double w_v = 1.0;
  double w_t = 1.0;
  double w_m = 1.0;
  double margin_ref = 0.2;          // loadability margin considered adequate
  double divergence_penalty = 1e6;  // score assigned to unsolvable cases
};

struct SeverityScore {
  double voltage_term = 0.0;
  double thermal_term = 0.0;
  double margin_term = 0.0;
  double total = 0.0;
  bool diverged = false;
};

/// total = w_v * sum(voltage excursions)/0.05 + w_t * sum(overloads)
///       + w_m * max(0, 1 - margin/margin_ref); diverged solves score the
/// divergence penalty.
SeverityScore severity_index(const GridCase& grid,
                             const pf::PowerFlowSolution& post_solution,
                             const pf::LimitReport& limits,
                             double loadability_margin,
                             const SeverityWeights& weights = {});

SeverityScore diverged_score(const SeverityWeights& weights = {});

struct RankOptions {
  SeverityWeights weights;
  // Contingencies are screened with the dc solve first; only the top_k by
  // screening score get the full ac solve plus loadability margin.
  int top_k = 20;
  int workers = 0;  // 0 = sequential
};

struct RankedEntry {
  int rank = 0;
  Contingency contingency;
  SeverityScore score;
  bool ac_detailed = false;  // scored by the full ac stage
};

struct LevelRanking {
  double penetration = 0.0;
  std::vector<RankedEntry> entries;  // descending total, ties by id
  std::string worst_id;
  bool secure = false;  // all finite totals are zero
};

struct RankedReport {
  SeverityWeights weights;
  std::vector<LevelRanking> levels;
};

/// Solves and scores every contingency at every penetration level.
/// Deterministic for identical inputs regardless of worker count.
RankedReport rank_contingencies(const GridCase& grid,
                                const std::vector<Contingency>& contingencies,
                                const std::vector<double>& levels,
                                const RankOptions& options = {});

}  // namespace gridstudy::security
