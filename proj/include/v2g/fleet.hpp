#pragma once
// CAEV fleet: virtually partitioned batteries, the speed-dependent discharge
// step and the cost-ordered minimal-prefix fleet filter.

#include <cstdint>
#include <string>
#include <vector>

#include "v2g/network.hpp"

namespace v2g {

struct EnergyCoefficients {
  double eta1 = 0.076;     // kW per km/h, rolling resistance
  double eta2 = 1.35e-4;   // kW per (km/h)^2, aerodynamic drag
};

struct VirtualBattery {
  double total_capacity_kwh = 0;
  double gss_fraction = 0;  // share of the pack reserved for grid support
  double e_mob_kwh = 0;
  double e_gss_kwh = 0;
  // Set by make_partition; the two capacities recompose the pack exactly.
  double gss_capacity_kwh = 0;
  double mob_capacity_kwh = 0;

  double cap_gss_kwh() const { return gss_capacity_kwh; }
  double cap_mob_kwh() const { return mob_capacity_kwh; }
};

// Split a pack into mobility and GSS partitions, charges at zero.
VirtualBattery make_partition(double total_kwh, double gss_fraction);

// One sampling interval of the mobility discharge dynamics. The result may
// be negative; feasibility consequences are the caller's.
double discharge_step(double e_mob_kwh, double speed_kmh, double dt_h,
                      const EnergyCoefficients& coeffs);

struct Caev {
  std::uint32_t id = 0;
  NodeId current_node = 0;
  VirtualBattery battery;
  double progress = 0;      // normalized position along the assigned route
  double traveled_km = 0;
  bool available = true;    // free of mobility tasks over the dispatch window
};

struct FleetCandidate {
  std::size_t fleet_index = 0;
  std::uint32_t id = 0;
  double e_gss_kwh = 0;
  double free_flow_cost_h = 0;
};

struct FleetSelection {
  std::vector<FleetCandidate> selected;  // ascending free-flow cost
  bool request_met = false;
  double shortfall_kwh = 0;
};

// Smallest prefix of the cost-ordered candidates whose GSS charge covers the
// request; ties on cost break by ascending vehicle id. An insufficient fleet
// is returned whole with the shortfall flagged.
FleetSelection select_fleet(std::vector<FleetCandidate> candidates, double request_kwh);

std::vector<Caev> load_fleet(const std::string& path);
std::vector<Caev> parse_fleet(const std::string& json_text);
void write_fleet(const std::vector<Caev>& fleet, const std::string& path);

}  // namespace v2g
