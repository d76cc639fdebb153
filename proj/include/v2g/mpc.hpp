#pragma once
// Receding-horizon speed control: minimize accumulated distance-to-go along
// the planned path subject to progress dynamics, discharge dynamics, the
// terminal arrival constraint, an energy floor and the planning-time speed
// cap. The problem is convex; it is solved exactly by a front-loaded
// bang-bang profile, falling back to a clamped-linear KKT profile found by
// nested bisection when the energy constraint is active.

#include <optional>
#include <vector>

#include "v2g/fleet.hpp"

namespace v2g {

struct MpcProblem {
  int horizon_steps = 1;       // N
  double dt_h = 0.005;         // control sampling time
  double path_length_km = 0;   // total route length the progress is normalized by
  double speed_cap_kmh = 0;    // planning-time cap, held over the horizon
  double p0 = 0;               // measured progress
  double e0_kwh = 0;           // measured mobility energy
  EnergyCoefficients coeffs;
  double energy_floor_kwh = 0; // surrogate for the strict terminal inequality
};

struct SpeedProfile {
  std::vector<double> speeds_kmh;         // N entries
  std::vector<double> predicted_progress; // N+1 entries, p0 first
  std::vector<double> predicted_energy;   // N+1 entries, e0 first
  double cost = 0;                        // sum of (1 - p(h)) over the horizon
};

struct InfeasibleCertificate {
  bool deadline = false;  // N*dt*cap cannot cover the remaining distance
  bool energy = false;    // the leanest traversal still drains below the floor
  double required_avg_speed_kmh = 0;
  double min_energy_needed_kwh = 0;
};

struct MpcResult {
  std::optional<SpeedProfile> profile;
  std::optional<InfeasibleCertificate> infeasible;
  bool ok() const { return profile.has_value(); }
};

MpcResult solve_mpc(const MpcProblem& problem);

struct MpcTiming {
  double t_pr_h = 0;
  double dt_h = 0.005;  // T_MPC
};

struct AppliedSpeed {
  double speed_kmh = 0;
  bool solved = false;   // false => infeasible fallback (drive at the cap)
  double solve_seconds = 0;
};

// Build the horizon from live measurements, solve, and return the first
// input. Horizons shorter than one sampling time clamp to a single step; on
// infeasibility the vehicle drives at the cap and the dispatcher is left to
// rule at the next tick.
AppliedSpeed receding_step(double p_hat, double e_mob_kwh, double route_km,
                           double speed_cap_kmh, double t_j_h, const MpcTiming& timing,
                           const EnergyCoefficients& coeffs, double energy_floor_kwh = 0);

}  // namespace v2g
