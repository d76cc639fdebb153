#include "v2g/mpc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "v2g/network.hpp"

namespace v2g {

namespace {

// Objective weights: maximizing sum_m weight[m] * u[m] is equivalent to
// minimizing the accumulated distance-to-go. The last step carries weight
// zero; it only matters through the terminal constraint.
double step_weight(int m, int n) { return static_cast<double>(n - 1 - m); }

std::vector<double> clamped_linear(double a, double b, double cap, int n) {
  std::vector<double> u(n);
  for (int m = 0; m < n; ++m)
    u[m] = std::clamp(a * step_weight(m, n) + b, 0.0, cap);
  return u;
}

double sum(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s;
}

double sum_sq(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return s;
}

// Offset b such that the clamped-linear profile meets the required total
// speed; the total is nondecreasing in b.
double solve_offset(double a, double cap, int n, double required_total) {
  double lo = -a * step_weight(0, n) - cap - 1.0;
  double hi = cap + 1.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (sum(clamped_linear(a, mid, cap, n)) < required_total)
      lo = mid;
    else
      hi = mid;
  }
  return hi;
}

SpeedProfile build_profile(const MpcProblem& pb, std::vector<double> speeds) {
  SpeedProfile prof;
  const int n = pb.horizon_steps;
  prof.speeds_kmh = std::move(speeds);
  prof.predicted_progress.resize(n + 1);
  prof.predicted_energy.resize(n + 1);
  prof.predicted_progress[0] = pb.p0;
  prof.predicted_energy[0] = pb.e0_kwh;
  for (int h = 0; h < n; ++h) {
    prof.predicted_progress[h + 1] =
        prof.predicted_progress[h] + prof.speeds_kmh[h] * pb.dt_h / pb.path_length_km;
    prof.predicted_energy[h + 1] =
        discharge_step(prof.predicted_energy[h], prof.speeds_kmh[h], pb.dt_h, pb.coeffs);
  }
  for (int h = 0; h < n; ++h) prof.cost += 1.0 - prof.predicted_progress[h];
  return prof;
}

}  // namespace

MpcResult solve_mpc(const MpcProblem& pb) {
  if (pb.horizon_steps < 1) throw ValidationError("MPC horizon must be at least one step");
  if (!(pb.dt_h > 0)) throw ValidationError("MPC sampling time must be positive");
  if (pb.speed_cap_kmh < 0) throw ValidationError("speed cap must be non-negative");
  if (pb.p0 < 0 || pb.p0 > 1) throw ValidationError("progress outside [0,1]");

  MpcResult result;
  const int n = pb.horizon_steps;

  // Already at the target: stand still.
  if (pb.p0 >= 1.0 || pb.path_length_km <= 0.0) {
    MpcProblem done = pb;
    done.p0 = 1.0;
    done.path_length_km = std::max(pb.path_length_km, 1e-12);
    result.profile = build_profile(done, std::vector<double>(n, 0.0));
    return result;
  }

  const double required_total = pb.path_length_km * (1.0 - pb.p0) / pb.dt_h;  // sum of speeds
  const double e_avail = pb.e0_kwh - pb.energy_floor_kwh;
  // Uniform speeds minimize consumption for a fixed total.
  const double min_energy =
      (pb.coeffs.eta1 * required_total + pb.coeffs.eta2 * required_total * required_total / n) *
      pb.dt_h;

  InfeasibleCertificate cert;
  cert.required_avg_speed_kmh = required_total / n;
  cert.min_energy_needed_kwh = min_energy;
  cert.deadline = required_total > n * pb.speed_cap_kmh * (1.0 + 1e-12);
  cert.energy = min_energy > e_avail * (1.0 + 1e-12) + 1e-15;
  if (cert.deadline || cert.energy) {
    result.infeasible = cert;
    return result;
  }

  // Front-loaded bang-bang: optimal whenever the energy constraint stays
  // slack, since the objective weights decrease strictly along the horizon.
  std::vector<double> greedy(n, 0.0);
  for (int m = 0; m < n; ++m)
    greedy[m] = std::clamp(required_total - m * pb.speed_cap_kmh, 0.0, pb.speed_cap_kmh);

  const double q2_budget =
      (e_avail / pb.dt_h - pb.coeffs.eta1 * required_total) / pb.coeffs.eta2;
  if (sum_sq(greedy) <= q2_budget * (1.0 + 1e-12) + 1e-12) {
    result.profile = build_profile(pb, std::move(greedy));
    return result;
  }

  // Energy constraint active: the optimum lies in the clamped-linear KKT
  // family u_m = clamp(a*w_m + b, 0, cap). The squared total grows with a
  // (a = 0 is the uniform minimum-energy profile), so bisect a to land on
  // the energy budget from the feasible side.
  double a_lo = 0.0;
  double a_hi = 1.0;
  for (int grow = 0; grow < 200; ++grow) {
    double b = solve_offset(a_hi, pb.speed_cap_kmh, n, required_total);
    if (sum_sq(clamped_linear(a_hi, b, pb.speed_cap_kmh, n)) > q2_budget) break;
    a_hi *= 2.0;
  }
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (a_lo + a_hi);
    double b = solve_offset(mid, pb.speed_cap_kmh, n, required_total);
    if (sum_sq(clamped_linear(mid, b, pb.speed_cap_kmh, n)) <= q2_budget)
      a_lo = mid;
    else
      a_hi = mid;
  }
  double b = solve_offset(a_lo, pb.speed_cap_kmh, n, required_total);
  result.profile = build_profile(pb, clamped_linear(a_lo, b, pb.speed_cap_kmh, n));
  return result;
}

AppliedSpeed receding_step(double p_hat, double e_mob_kwh, double route_km,
                           double speed_cap_kmh, double t_j_h, const MpcTiming& timing,
                           const EnergyCoefficients& coeffs, double energy_floor_kwh) {
  const auto t0 = std::chrono::steady_clock::now();

  MpcProblem pb;
  pb.dt_h = timing.dt_h;
  pb.horizon_steps =
      std::max<int>(1, static_cast<int>(std::llround((timing.t_pr_h - t_j_h) / timing.dt_h)));
  pb.path_length_km = route_km;
  pb.speed_cap_kmh = speed_cap_kmh;
  pb.p0 = std::clamp(p_hat, 0.0, 1.0);
  pb.e0_kwh = e_mob_kwh;
  pb.coeffs = coeffs;
  pb.energy_floor_kwh = energy_floor_kwh;

  MpcResult res = solve_mpc(pb);
  AppliedSpeed applied;
  applied.solved = res.ok();
  // Infeasible horizons fall back to the cap: progress cannot be beaten.
  applied.speed_kmh = res.ok() ? res.profile->speeds_kmh.front() : speed_cap_kmh;
  applied.solve_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return applied;
}

}  // namespace v2g
