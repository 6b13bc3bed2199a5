#pragma once

#include <string>
#include <vector>

#include "gridstudy/adequacy.hpp"
#include "gridstudy/dynamics.hpp"
#include "gridstudy/powerflow.hpp"
#include "gridstudy/security.hpp"
#include "gridstudy/smallsignal.hpp"

namespace gridstudy::report {

/// Shortest round-trip decimal text; identical inputs give identical bytes.
std::string format_double(double value);

std::string powerflow_bus_csv(const pf::PowerFlowSolution& sol);
std::string powerflow_branch_csv(const pf::PowerFlowSolution& sol);
std::string powerflow_json(const pf::PowerFlowSolution& sol);
std::string limits_json(const pf::LimitReport& report);

std::string adequacy_csv(const std::vector<adequacy::AdequacyResult>& results);
std::string adequacy_json(const std::vector<adequacy::AdequacyResult>& results,
                          double lole_flag_threshold);

std::string security_csv(const security::RankedReport& report);
std::string security_json(const security::RankedReport& report);

std::string trace_csv(const dyn::DynamicTrace& trace);
std::string metrics_json(const dyn::FrequencyMetrics& metrics);
std::string ride_through_json(const std::vector<dyn::RideThroughResult>& results);

std::string modes_csv(const ssa::ModeSet& modes);
std::string intermittency_json(const ssa::IntermittencyReport& report);

}  // namespace gridstudy::report
