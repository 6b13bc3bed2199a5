#include "gridstudy/smallsignal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "internal/eigen_compat.hpp"

namespace gridstudy::ssa {

using Complex = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

LinearModel linearize(const GridCase& grid, const dyn::Equilibrium& equilibrium) {
  (void)grid;
  const dyn::NetworkModel& net = equilibrium.net;
  const int n = static_cast<int>(net.bus_ids.size());
  const int m = static_cast<int>(net.machine_ids.size());
  if (m == 0) throw DomainError("linearize: no machines in equilibrium");

  MatrixXcd y_nn = gridstudy::detail::to_eigen(net.y_nn);
  MatrixXcd y_ng = gridstudy::detail::to_eigen(net.y_ng);
  MatrixXcd y_gn = gridstudy::detail::to_eigen(net.y_gn);
  MatrixXcd y_gg = gridstudy::detail::to_eigen(net.y_gg);
  VectorXcd v_eq = Eigen::Map<const VectorXcd>(net.v_eq.data(), n);

  VectorXcd e_vec(m);
  for (int k = 0; k < m; ++k)
    e_vec(k) = std::polar(net.e_mag[static_cast<size_t>(k)],
                          equilibrium.states[static_cast<size_t>(k)].delta);
  VectorXcd i_g = y_gn * v_eq + y_gg * e_vec;

  // Constant-power injections respond to bus voltage: I_b = P_b / conj(V_b),
  // so dI_b = (P_b / conj(V_b)^2) * conj(dV_b). The conjugate coupling makes
  // the sensitivity non-holomorphic; solve the real 2n-split system
  //   [G+diag(al), -B+diag(be); B+diag(be), G-diag(al)] [da; db] = rhs
  // with c_b = al_b + j be_b = P_b / conj(V_b)^2.
  VectorXd alpha = VectorXd::Zero(n), beta = VectorXd::Zero(n);
  for (const auto& plant : net.plants) {
    Complex c = plant.p_eq_pu / std::pow(std::conj(v_eq(plant.bus)), 2);
    alpha(plant.bus) += c.real();
    beta(plant.bus) += c.imag();
  }

  MatrixXd big(2 * n, 2 * n);
  big.topLeftCorner(n, n) = y_nn.real();
  big.topRightCorner(n, n) = -y_nn.imag();
  big.bottomLeftCorner(n, n) = y_nn.imag();
  big.bottomRightCorner(n, n) = y_nn.real();
  for (int b = 0; b < n; ++b) {
    big(b, b) += alpha(b);
    big(b, n + b) += beta(b);
    big(n + b, b) += beta(b);
    big(n + b, n + b) -= alpha(b);
  }
  Eigen::PartialPivLU<MatrixXd> lu(big);

  // dP_e,i / d delta_k, assembled column by column.
  MatrixXd k_mat(m, m);
  for (int k = 0; k < m; ++k) {
    Complex de_k = Complex(0.0, 1.0) * e_vec(k);
    VectorXcd rhs_c = -(y_ng.col(k) * de_k);
    VectorXd rhs(2 * n);
    rhs.head(n) = rhs_c.real();
    rhs.tail(n) = rhs_c.imag();
    VectorXd sol = lu.solve(rhs);
    VectorXcd dv(n);
    for (int b = 0; b < n; ++b) dv(b) = Complex(sol(b), sol(n + b));

    VectorXcd di_g = y_gn * dv;
    di_g(k) += y_gg(k, k) * de_k;
    for (int i = 0; i < m; ++i) {
      double dp = (e_vec(i) * std::conj(di_g(i))).real();
      if (i == k) dp += (de_k * std::conj(i_g(i))).real();
      k_mat(i, k) = dp;
    }
  }

  LinearModel model;
  model.machine_ids = net.machine_ids;
  model.operating_point = equilibrium.states;
  model.a = Matrix(2 * m, 2 * m);
  for (int i = 0; i < m; ++i) {
    model.a.at(i, m + i) = 1.0;
    const auto is = static_cast<size_t>(i);
    double two_h = 2.0 * net.h_sys[is];
    for (int k = 0; k < m; ++k)
      model.a.at(m + i, k) = -net.omega_s / two_h * k_mat(i, k);
    model.a.at(m + i, m + i) = -net.d_sys[is] / two_h;
  }
  return model;
}

ModeSet modes(const LinearModel& model) {
  const int dim = model.a.rows;
  MatrixXd a(dim, dim);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) a(r, c) = model.a.at(r, c);

  Eigen::EigenSolver<MatrixXd> solver(a, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success)
    throw ConvergenceError("modes: eigen-solver hit its iteration cap");

  VectorXcd lambda = solver.eigenvalues();
  double scale = 0.0;
  for (int i = 0; i < lambda.size(); ++i) scale = std::max(scale, std::abs(lambda(i)));
  const double zero_tol = 1e-7 * (1.0 + scale);

  ModeSet out;
  for (int i = 0; i < lambda.size(); ++i) {
    Complex ev = lambda(i);
    double sigma = ev.real();
    double omega = ev.imag();
    if (std::abs(ev) <= zero_tol) {
      out.zero_modes.push_back({ev, 0.0, 0.0, ModeBand::out_of_band});
      continue;
    }
    if (omega < -zero_tol) continue;  // conjugate partner reports the pair
    ModeDescriptor mode;
    if (std::abs(omega) <= zero_tol) {
      mode.eigenvalue = Complex(sigma, 0.0);
      mode.frequency_hz = 0.0;
      mode.damping_ratio = sigma < 0.0 ? 1.0 : -1.0;
      mode.band = classify_band(0.0);
      out.real_modes.push_back(mode);
      continue;
    }
    mode.eigenvalue = Complex(sigma, std::abs(omega));
    mode.frequency_hz = std::abs(omega) / (2.0 * std::numbers::pi);
    mode.damping_ratio = -sigma / std::hypot(sigma, omega);
    mode.band = classify_band(mode.frequency_hz);
    out.oscillatory.push_back(mode);
  }

  auto by_freq = [](const ModeDescriptor& a, const ModeDescriptor& b) {
    if (a.frequency_hz != b.frequency_hz) return a.frequency_hz < b.frequency_hz;
    return a.eigenvalue.real() < b.eigenvalue.real();
  };
  std::sort(out.oscillatory.begin(), out.oscillatory.end(), by_freq);
  std::sort(out.real_modes.begin(), out.real_modes.end(), by_freq);
  return out;
}

ModeBand classify_band(double frequency_hz) {
  if (!(frequency_hz >= 0.0))
    throw DomainError("classify_band: frequency must be >= 0");
  if (frequency_hz >= 0.1 && frequency_hz < 1.0) return ModeBand::inter_area;
  if (frequency_hz >= 1.0 && frequency_hz < 2.0) return ModeBand::interplant;
  if (frequency_hz >= 2.0 && frequency_hz <= 3.0) return ModeBand::local_plant;
  return ModeBand::out_of_band;
}

const char* band_name(ModeBand band) {
  switch (band) {
    case ModeBand::inter_area: return "inter_area";
    case ModeBand::interplant: return "interplant";
    case ModeBand::local_plant: return "local_plant";
    case ModeBand::out_of_band: return "out_of_band";
  }
  return "out_of_band";
}

IntermittencyReport intermittency_study(
    const GridCase& grid, const std::string& plant_id,
    const std::vector<double>& event_sizes_mw,
    const std::vector<dyn::RenewableEventKind>& directions,
    const std::vector<double>& operating_points,
    const IntermittencyOptions& options) {
  if (options.horizon_s < 20.0)
    throw DomainError("intermittency_study: horizon " +
                      std::to_string(options.horizon_s) +
                      " s is below the 20 s floor for oscillation capture");
  const RenewablePlant* plant = grid.find_renewable(plant_id);
  if (!plant) throw DomainError("intermittency_study: no plant " + plant_id);
  for (double p : operating_points)
    if (!(p >= 0.0 && p <= 1.0))
      throw DomainError("intermittency_study: operating point outside [0,1]");

  IntermittencyReport report;
  report.plant_id = plant_id;
  report.horizon_s = options.horizon_s;
  report.damping_floor = options.damping_floor;

  for (double point : operating_points) {
    GridCase leveled = set_penetration(grid, point);
    const RenewablePlant* p_leveled = leveled.find_renewable(plant_id);
    const double output = p_leveled->output_mw();

    for (auto direction : directions) {
      for (double size : event_sizes_mw) {
        IntermittencyRecord rec;
        rec.operating_point = point;
        rec.direction = direction;
        rec.size_mw = size;

        const double headroom = p_leveled->nameplate - output;
        if (direction == dyn::RenewableEventKind::drop && size > output + 1e-9) {
          rec.feasible = false;
          rec.skip_reason = "drop exceeds scheduled output " + std::to_string(output) + " MW";
          report.records.push_back(std::move(rec));
          continue;
        }
        if (direction == dyn::RenewableEventKind::rise && size > headroom + 1e-9) {
          rec.feasible = false;
          rec.skip_reason = "rise exceeds headroom " + std::to_string(headroom) + " MW";
          report.records.push_back(std::move(rec));
          continue;
        }

        try {
          dyn::DisturbanceEvent event = dyn::renewable_event(
              leveled, plant_id, direction, size, options.ramp_s);
          event.t_start = options.event_time_s;

          dyn::Equilibrium eq = dyn::init_equilibrium(leveled);
          dyn::DynamicTrace trace =
              dyn::simulate(leveled, eq, {event},
                            options.event_time_s + options.horizon_s,
                            options.step_s);

          rec.f_min_hz = *std::min_element(trace.coi_frequency.begin(),
                                           trace.coi_frequency.end());
          rec.f_max_hz = *std::max_element(trace.coi_frequency.begin(),
                                           trace.coi_frequency.end());
          rec.v_min_pu = 1e300;
          rec.v_max_pu = -1e300;
          for (const auto& series : trace.bus_v) {
            for (double v : series) {
              rec.v_min_pu = std::min(rec.v_min_pu, v);
              rec.v_max_pu = std::max(rec.v_max_pu, v);
            }
          }

          // Post-event operating point: the plant holds its new output.
          GridCase post = leveled;
          for (auto& pl : post.renewables) {
            if (pl.id != plant_id) continue;
            double delta = direction == dyn::RenewableEventKind::drop ? -size : size;
            pl.output_fraction =
                std::clamp((output + delta) / pl.nameplate, 0.0, 1.0);
          }
          dyn::Equilibrium post_eq = dyn::init_equilibrium(post);
          ModeSet post_modes = modes(linearize(post, post_eq));
          rec.min_damping_ratio = 1.0;
          for (const auto& mode : post_modes.oscillatory) {
            if (mode.damping_ratio < rec.min_damping_ratio) {
              rec.min_damping_ratio = mode.damping_ratio;
              rec.worst_mode = mode;
            }
          }
          rec.flagged = rec.min_damping_ratio < options.damping_floor;
        } catch (const Error& e) {
          rec.feasible = false;
          rec.skip_reason = e.what();
        }
        report.records.push_back(std::move(rec));
      }
    }
  }
  return report;
}

}  // namespace gridstudy::ssa
