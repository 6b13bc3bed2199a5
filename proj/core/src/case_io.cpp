#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gridstudy/model.hpp"

namespace gridstudy {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

const char* to_string(BusKind k) {
  switch (k) {
    case BusKind::slack: return "slack";
    case BusKind::pv: return "pv";
    case BusKind::pq: return "pq";
  }
  return "pq";
}

const char* to_string(RenewableKind k) {
  switch (k) {
    case RenewableKind::wind_type3: return "wind_type3";
    case RenewableKind::wind_type4: return "wind_type4";
    case RenewableKind::solar_pv: return "solar_pv";
  }
  return "solar_pv";
}

BusKind bus_kind_from(const std::string& s, const std::string& entity) {
  if (s == "slack") return BusKind::slack;
  if (s == "pv") return BusKind::pv;
  if (s == "pq") return BusKind::pq;
  throw ParseError("bus " + entity + ": unknown kind '" + s + "'");
}

RenewableKind renewable_kind_from(const std::string& s, const std::string& entity) {
  if (s == "wind_type3") return RenewableKind::wind_type3;
  if (s == "wind_type4") return RenewableKind::wind_type4;
  if (s == "solar_pv") return RenewableKind::solar_pv;
  throw ParseError("renewable " + entity + ": unknown kind '" + s + "'");
}

double get_num(const json& j, const char* key, const std::string& entity,
               std::optional<double> fallback = std::nullopt) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw ParseError(entity + ": missing required field '" + key + "'");
  }
  if (!j[key].is_number())
    throw ParseError(entity + ": field '" + key + "' must be a number");
  return j[key].get<double>();
}

std::string get_str(const json& j, const char* key, const std::string& entity) {
  if (!j.contains(key) || !j[key].is_string())
    throw ParseError(entity + ": missing or non-string field '" + key + "'");
  return j[key].get<std::string>();
}

Bus parse_bus(const json& j) {
  Bus b;
  b.id = get_str(j, "id", "bus");
  b.base_kv = get_num(j, "base_kv", b.id);
  b.kind = bus_kind_from(get_str(j, "kind", b.id), b.id);
  b.v_min = get_num(j, "v_min", b.id, 0.95);
  b.v_max = get_num(j, "v_max", b.id, 1.05);
  b.v_set = get_num(j, "v_set", b.id, 1.0);
  b.load_p = get_num(j, "load_p", b.id, 0.0);
  b.load_q = get_num(j, "load_q", b.id, 0.0);
  return b;
}

Branch parse_branch(const json& j) {
  Branch b;
  b.id = get_str(j, "id", "branch");
  b.from_bus = get_str(j, "from_bus", b.id);
  b.to_bus = get_str(j, "to_bus", b.id);
  b.r = get_num(j, "r", b.id, 0.0);
  b.x = get_num(j, "x", b.id);
  b.b_shunt = get_num(j, "b_shunt", b.id, 0.0);
  b.thermal_rating = get_num(j, "thermal_rating", b.id);
  return b;
}

ConventionalMachine parse_machine(const json& j) {
  ConventionalMachine m;
  m.id = get_str(j, "id", "machine");
  m.bus = get_str(j, "bus", m.id);
  m.s_rated = get_num(j, "s_rated", m.id);
  m.h = get_num(j, "h", m.id);
  m.p_set = get_num(j, "p_set", m.id, 0.0);
  m.q_set = get_num(j, "q_set", m.id, 0.0);
  m.p_max = get_num(j, "p_max", m.id);
  m.p_min = get_num(j, "p_min", m.id, 0.0);
  m.xd_t = get_num(j, "xd_t", m.id);
  m.damping = get_num(j, "damping", m.id, 0.0);
  m.forced_outage_rate = get_num(j, "forced_outage_rate", m.id, 0.0);
  m.agc_participation = get_num(j, "agc_participation", m.id, 0.0);
  if (j.contains("governor") && !j["governor"].is_null()) {
    const json& g = j["governor"];
    GovernorParams gp;
    gp.droop_r = get_num(g, "droop_r", m.id + ".governor");
    gp.time_const = get_num(g, "time_const", m.id + ".governor");
    gp.deadband = get_num(g, "deadband", m.id + ".governor", 0.0);
    m.governor = gp;
  }
  return m;
}

RenewablePlant parse_renewable(const json& j) {
  RenewablePlant p;
  p.id = get_str(j, "id", "renewable");
  p.bus = get_str(j, "bus", p.id);
  p.nameplate = get_num(j, "nameplate", p.id);
  p.kind = renewable_kind_from(get_str(j, "kind", p.id), p.id);
  p.output_fraction = get_num(j, "output_fraction", p.id, 0.0);
  p.inertia_coupling = get_num(j, "inertia_coupling", p.id, 0.0);
  p.synthetic_inertia_gain = get_num(j, "synthetic_inertia_gain", p.id, 0.0);
  if (j.contains("output_states") && !j["output_states"].is_null()) {
    std::vector<OutputState> states;
    for (const auto& s : j["output_states"]) {
      if (!s.is_array() || s.size() != 2)
        throw ParseError(p.id + ": output_states entries must be [fraction, probability]");
      states.push_back({s[0].get<double>(), s[1].get<double>()});
    }
    p.output_states = std::move(states);
  }
  return p;
}

LoadProfile parse_profile(const json& j) {
  LoadProfile lp;
  lp.bus = get_str(j, "bus", "profile");
  if (!j.contains("daily_peaks") || !j["daily_peaks"].is_array())
    throw ParseError("profile(" + lp.bus + "): missing daily_peaks array");
  lp.daily_peaks = j["daily_peaks"].get<std::vector<double>>();
  if (j.contains("hourly") && !j["hourly"].is_null())
    lp.hourly = j["hourly"].get<std::vector<double>>();
  return lp;
}

}  // namespace

GridCase case_from_json(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(origin + ": " + e.what());
  }
  if (!doc.is_object()) throw ParseError(origin + ": document root must be an object");

  static const std::set<std::string> known_keys = {
      "format_version", "system_frequency", "base_mva", "allow_zero_inertia",
      "buses", "branches", "machines", "renewables", "profiles"};
  for (const auto& [key, _] : doc.items()) {
    if (!known_keys.count(key))
      throw ParseError(origin + ": unknown top-level field '" + key + "'");
  }

  if (!doc.contains("format_version") || !doc["format_version"].is_number_integer())
    throw ParseError(origin + ": missing integer 'format_version'");
  int version = doc["format_version"].get<int>();
  if (version != kFormatVersion)
    throw ParseError(origin + ": unsupported format_version " +
                     std::to_string(version) + " (expected " +
                     std::to_string(kFormatVersion) + ")");

  GridCase grid;
  grid.system_frequency = doc.value("system_frequency", 60.0);
  grid.base_mva = doc.value("base_mva", 100.0);
  grid.allow_zero_inertia = doc.value("allow_zero_inertia", false);

  try {
    if (doc.contains("buses"))
      for (const auto& j : doc["buses"]) grid.buses.push_back(parse_bus(j));
    if (doc.contains("branches"))
      for (const auto& j : doc["branches"]) grid.branches.push_back(parse_branch(j));
    if (doc.contains("machines"))
      for (const auto& j : doc["machines"]) grid.machines.push_back(parse_machine(j));
    if (doc.contains("renewables"))
      for (const auto& j : doc["renewables"]) grid.renewables.push_back(parse_renewable(j));
    if (doc.contains("profiles"))
      for (const auto& j : doc["profiles"]) grid.profiles.push_back(parse_profile(j));
  } catch (const json::exception& e) {
    throw ParseError(origin + ": " + e.what());
  }

  auto violations = validate(grid);
  if (!violations.empty()) throw ValidationError(std::move(violations));
  return grid;
}

GridCase load_case(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open case file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return case_from_json(buf.str(), path.string());
}

std::string case_to_json(const GridCase& grid) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["system_frequency"] = grid.system_frequency;
  doc["base_mva"] = grid.base_mva;
  if (grid.allow_zero_inertia) doc["allow_zero_inertia"] = true;

  doc["buses"] = json::array();
  for (const auto& b : grid.buses) {
    doc["buses"].push_back({{"id", b.id},
                            {"base_kv", b.base_kv},
                            {"kind", to_string(b.kind)},
                            {"v_min", b.v_min},
                            {"v_max", b.v_max},
                            {"v_set", b.v_set},
                            {"load_p", b.load_p},
                            {"load_q", b.load_q}});
  }
  doc["branches"] = json::array();
  for (const auto& b : grid.branches) {
    doc["branches"].push_back({{"id", b.id},
                               {"from_bus", b.from_bus},
                               {"to_bus", b.to_bus},
                               {"r", b.r},
                               {"x", b.x},
                               {"b_shunt", b.b_shunt},
                               {"thermal_rating", b.thermal_rating}});
  }
  doc["machines"] = json::array();
  for (const auto& m : grid.machines) {
    json jm = {{"id", m.id},
               {"bus", m.bus},
               {"s_rated", m.s_rated},
               {"h", m.h},
               {"p_set", m.p_set},
               {"q_set", m.q_set},
               {"p_max", m.p_max},
               {"p_min", m.p_min},
               {"xd_t", m.xd_t},
               {"damping", m.damping},
               {"forced_outage_rate", m.forced_outage_rate},
               {"agc_participation", m.agc_participation}};
    if (m.governor)
      jm["governor"] = {{"droop_r", m.governor->droop_r},
                        {"time_const", m.governor->time_const},
                        {"deadband", m.governor->deadband}};
    doc["machines"].push_back(std::move(jm));
  }
  doc["renewables"] = json::array();
  for (const auto& p : grid.renewables) {
    json jp = {{"id", p.id},
               {"bus", p.bus},
               {"nameplate", p.nameplate},
               {"kind", to_string(p.kind)},
               {"output_fraction", p.output_fraction},
               {"inertia_coupling", p.inertia_coupling},
               {"synthetic_inertia_gain", p.synthetic_inertia_gain}};
    if (p.output_states) {
      json states = json::array();
      for (const auto& s : *p.output_states)
        states.push_back({s.fraction, s.probability});
      jp["output_states"] = std::move(states);
    }
    doc["renewables"].push_back(std::move(jp));
  }
  doc["profiles"] = json::array();
  for (const auto& lp : grid.profiles) {
    json jl = {{"bus", lp.bus}, {"daily_peaks", lp.daily_peaks}};
    if (lp.hourly) jl["hourly"] = *lp.hourly;
    doc["profiles"].push_back(std::move(jl));
  }
  return doc.dump(2) + "\n";
}

void save_case(const GridCase& grid, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write case file " + path.string());
  out << case_to_json(grid);
}

}  // namespace gridstudy
