#pragma once
// Scenario runner: configuration ingestion, seeded fleet initialization, a
// synthetic city generator, the three-rate simulation loop (traffic step,
// control tick, planning tick) and output emission.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "v2g/dispatch.hpp"
#include "v2g/mpc.hpp"
#include "v2g/traffic.hpp"

namespace v2g {

struct FleetInitConfig {
  int n_vehicles = 20;
  double total_capacity_kwh = 82.0;
  double gss_fraction = 20.0 / 82.0;  // 20 kWh GSS / 62 kWh mobility
  std::array<double, 2> e_mob_range_fraction{0.15, 0.60};
  std::array<double, 2> e_gss_range_fraction{0.25, 0.95};
  std::uint64_t rng_seed = 1;
};

// Scripted occupancy override applied at the first traffic step at or after
// its time; used to stage congestion between planning ticks.
struct CongestionPulse {
  double t_h = 0;
  NodeId from = 0;
  NodeId to = 0;
  double occupancy_ratio = 0.999;
};

struct ScenarioConfig {
  double sim_horizon_h = 1.0;
  double traffic_dt_h = 0.00027;
  double plan_period_h = 180.0 / 3600.0;
  double mpc_dt_h = 18.0 / 3600.0;
  DispatchConfig dispatch;  // plan_period_h mirrored from above on load
  double boundary_inflow_vph = 1500.0;
  double initial_occupancy_fraction = 0.5;
  double spacing_km = 0.007;
  double energy_rate_kwh_per_km = 0.12;
  double sat_flow_vph = 1500.0;
  EnergyCoefficients coeffs;
  FleetInitConfig fleet_init;
  std::vector<CongestionPulse> pulses;
  double turn_delta0_km = 0.1;
  double mpc_energy_floor_kwh = 0.0;
  bool dump_flows = false;
  bool mpc_trace = false;

  GraphDefaults graph_defaults() const {
    return {spacing_km, energy_rate_kwh_per_km, sat_flow_vph};
  }
  void validate() const;
};

ScenarioConfig load_config(const std::string& path);
ScenarioConfig parse_config(const std::string& json_text);

struct VehicleMetrics {
  std::uint32_t id = 0;
  bool selected = false;
  std::optional<double> arrival_time_h;
  int path_changes = 0;
  double final_e_mob_kwh = 0;
};

struct RunMetrics {
  double request_kwh = 0;
  double delivered_kwh = 0;
  bool request_met = false;
  double shortfall_kwh = 0;
  std::optional<double> max_arrival_time_h;
  bool filter_met_request = false;  // the offline filter could cover the request
  int clamp_events = 0;             // traffic non-negativity clamps (should stay 0)
  std::vector<VehicleMetrics> vehicles;

  std::string to_json() const;
};

// Seeded random fleet placement on non-terminal nodes with uniform charge
// fractions; reproducible per seed.
std::vector<Caev> init_fleet(const ScenarioConfig& config, const UrbanGraph& graph);

// Jittered grid city: boundary terminals, two south-side sink attractors,
// boundary sources, a central V2G cluster in one district, and a sprinkling
// of two-stage signalized junctions.
UrbanGraph gen_city(int n_nodes, int n_v2g, std::uint64_t seed, int district = 1);

struct RunTraces {
  std::vector<double> sample_times_h;              // control tick grid
  std::vector<std::vector<double>> speed_kmh;      // per vehicle, per tick
  std::vector<std::vector<double>> distance_km;    // per vehicle, per tick
  struct Snapshot {
    int tick = 0;
    double t_h = 0;
    std::vector<double> x;
  };
  std::vector<Snapshot> occupancy;                 // one per planning tick
  struct MpcRow {
    double t_h;
    std::uint32_t vehicle;
    double p_hat, e_mob_kwh, applied_u_kmh;
    bool solved;
    double solve_seconds;
  };
  std::vector<MpcRow> mpc_rows;
  struct FlowRow {
    std::size_t k;
    std::size_t link;
    double x, q, s, l;
  };
  std::vector<FlowRow> flow_rows;
};

struct RunResult {
  RunMetrics metrics;
  DispatchLog log;
  RunTraces traces;
};

// Full simulation; output files are written under out_dir when given.
RunResult run(const ScenarioConfig& config, const UrbanGraph& graph,
              std::optional<std::vector<Caev>> fleet = std::nullopt,
              const std::string& out_dir = "",
              const std::string& frontier_dump_path = "");

void emit_outputs(const RunMetrics& metrics, const DispatchLog& log, const RunTraces& traces,
                  const UrbanGraph& graph, const std::vector<Caev>& fleet,
                  const std::string& out_dir, bool mpc_trace, bool dump_flows);

}  // namespace v2g
