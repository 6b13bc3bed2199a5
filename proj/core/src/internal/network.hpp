#pragma once

// Shared network assembly used by the power-flow solver and the dynamic
// model reduction. Internal: not installed, tests may include it directly.

#include <complex>
#include <unordered_map>

#include <Eigen/Dense>

#include "gridstudy/model.hpp"

namespace gridstudy::detail {

using Complex = std::complex<double>;

struct BusIndex {
  std::unordered_map<std::string, int> by_id;
  explicit BusIndex(const GridCase& grid) {
    for (size_t i = 0; i < grid.buses.size(); ++i)
      by_id.emplace(grid.buses[i].id, static_cast<int>(i));
  }
  int at(const std::string& id) const { return by_id.at(id); }
};

/// Dense bus admittance matrix from the pi-equivalent branch model.
inline Eigen::MatrixXcd build_ybus(const GridCase& grid, const BusIndex& idx) {
  const auto n = static_cast<Eigen::Index>(grid.buses.size());
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
  for (const auto& br : grid.branches) {
    int f = idx.at(br.from_bus);
    int t = idx.at(br.to_bus);
    Complex ys = 1.0 / Complex(br.r, br.x);
    Complex ysh(0.0, br.b_shunt / 2.0);
    y(f, f) += ys + ysh;
    y(t, t) += ys + ysh;
    y(f, t) -= ys;
    y(t, f) -= ys;
  }
  return y;
}

/// Net scheduled active injection per bus in pu: machines + renewables - load.
inline Eigen::VectorXd scheduled_p_pu(const GridCase& grid, const BusIndex& idx) {
  const auto n = static_cast<Eigen::Index>(grid.buses.size());
  Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
  for (size_t i = 0; i < grid.buses.size(); ++i) p(static_cast<Eigen::Index>(i)) -= grid.buses[i].load_p;
  for (const auto& m : grid.machines) p(idx.at(m.bus)) += m.p_set;
  for (const auto& r : grid.renewables) p(idx.at(r.bus)) += r.output_mw();
  return p / grid.base_mva;
}

/// Net scheduled reactive injection per bus in pu (machine q_set - load).
inline Eigen::VectorXd scheduled_q_pu(const GridCase& grid, const BusIndex& idx) {
  const auto n = static_cast<Eigen::Index>(grid.buses.size());
  Eigen::VectorXd q = Eigen::VectorXd::Zero(n);
  for (size_t i = 0; i < grid.buses.size(); ++i) q(static_cast<Eigen::Index>(i)) -= grid.buses[i].load_q;
  for (const auto& m : grid.machines) q(idx.at(m.bus)) += m.q_set;
  return q / grid.base_mva;
}

}  // namespace gridstudy::detail
