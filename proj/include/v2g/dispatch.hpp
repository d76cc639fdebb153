#pragma once
// Periodic traffic-aware dispatch: every plan period the live traffic state
// is turned into edge weights, each active vehicle is re-routed to its best
// district V2G node under shrinking time and energy budgets, and vehicles
// follow their plans between ticks.

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "v2g/fleet.hpp"
#include "v2g/rcsp.hpp"

namespace v2g {

struct DispatchConfig {
  double t_disp_h = 0.0;
  double t_pr_h = 10.0 / 60.0;
  double t_pr_horizon_h = 0.25;  // delivery window length after t_pr
  double plan_period_h = 180.0 / 3600.0;
  double request_kwh = 200.0;
  int district = 1;
  bool replan_on_node_arrival = false;  // extra per-vehicle replans at node arrivals

  double dispatch_window_h() const { return t_pr_h - t_disp_h; }
  void validate() const;
};

enum class PlanStatus { EnRoute, Arrived, Infeasible };
const char* to_string(PlanStatus status);

struct DispatchPlan {
  std::uint32_t vehicle = 0;
  std::optional<std::size_t> target;  // node index
  PathSolution path;                  // from the vehicle's planning node
  double planned_at_h = 0;
  double speed_cap_kmh = 0;
  PlanStatus status = PlanStatus::EnRoute;
};

struct DispatchEvent {
  double t_h = 0;
  std::uint32_t vehicle = 0;
  std::string kind;  // planned | node_reached | path_changed | arrived | infeasible
  nlohmann::json payload;
};

struct DispatchLog {
  std::vector<DispatchEvent> events;
  std::vector<double> plan_times_h;
  double request_kwh = 0;
  double delivered_kwh = 0;
  bool request_met = false;
  double shortfall_kwh = 0;
  std::optional<double> max_arrival_time_h;
  bool projection_warning = false;  // projected delivery dipped below the request

  std::string to_jsonl() const;
  void write_jsonl(const std::string& path) const;
};

// Snapshot of one vehicle's route-following state.
struct RouteView {
  std::uint32_t vehicle_id = 0;
  std::size_t fleet_index = 0;
  PlanStatus status = PlanStatus::EnRoute;
  double progress = 1.0;       // over stub + planned path
  double route_total_km = 0;
  double remaining_km = 0;
  double speed_cap_kmh = 0;
};

using SpeedFn = std::function<double(const Caev&, const RouteView&, double t0, double dt_h)>;

class Dispatcher {
 public:
  Dispatcher(const UrbanGraph& graph, const DispatchConfig& config, std::vector<Caev>& fleet,
             std::vector<std::size_t> selected, EnergyCoefficients coeffs = {});

  // One planning tick over all active vehicles; the OpenMP variant fans the
  // (vehicle x candidate) solves out, the serial variant is the reference.
  std::map<std::uint32_t, DispatchPlan> plan_tick(double t_k, std::span<const double> x);
  std::map<std::uint32_t, DispatchPlan> plan_tick_serial(double t_k, std::span<const double> x);
  // Replan only the given fleet indices (per-node-arrival trigger).
  std::map<std::uint32_t, DispatchPlan> plan_vehicles(double t_k, std::span<const double> x,
                                                      std::span<const std::size_t> fleet_indices,
                                                      bool parallel = true);

  // Integrate vehicle motion over [t0, t1); speeds are per selected vehicle,
  // aligned with route_views(). Ignored for vehicles not en route.
  void advance(double t0, double t1, std::span<const double> speeds_kmh);
  void advance_with(double t0, double t1, const SpeedFn& speed);

  std::vector<RouteView> route_views() const;
  const std::vector<std::size_t>& selected() const { return order_; }
  // Fleet indices that crossed a node since the flag was last cleared.
  std::vector<std::size_t> take_node_crossings();

  bool all_done() const;
  double projected_delivery_kwh() const;
  double delivered_kwh() const { return delivered_; }
  PlanStatus status_of(std::size_t fleet_index) const;
  int path_changes_of(std::size_t fleet_index) const;
  std::optional<double> arrival_of(std::size_t fleet_index) const;

  // Dump target for the first solve of the first tick (debug CLI hook).
  void set_frontier_dump(std::vector<ParetoEntry>* dump) { frontier_dump_ = dump; }

  DispatchLog finalize();

 private:
  struct VehicleState {
    std::size_t fleet_index = 0;
    PlanStatus status = PlanStatus::EnRoute;
    bool has_plan = false;
    std::optional<std::size_t> stub_link;  // link being finished at plan time
    double stub_km = 0;
    std::vector<std::size_t> edges;        // planned path from the anchor node
    std::size_t anchor_node = 0;
    std::optional<std::size_t> target;
    double total_km = 0;                   // stub + path length
    double s_km = 0;                       // traveled along stub + path
    double speed_cap_kmh = 0;
    double planned_at_h = 0;
    int path_changes = 0;
    std::optional<double> arrival_t_h;
    double last_u_kmh = 0;
    double coast_until_km = 0;             // infeasible vehicles stop at the next node
    bool crossed_node = false;
  };

  struct Anchor {
    std::size_t node = 0;
    double residual_km = 0;
    std::optional<std::size_t> link;           // link being finished, if mid-link
    std::vector<std::size_t> remaining_edges;  // rest of the current plan
  };

  Anchor planning_anchor(const VehicleState& vs) const;
  void install_plan(VehicleState& vs, double t_k, const Anchor& anchor,
                    const TargetChoice& choice, std::span<const double> x,
                    std::map<std::uint32_t, DispatchPlan>& out);
  void mark_infeasible(VehicleState& vs, double t_k, const TargetChoice& choice,
                       std::map<std::uint32_t, DispatchPlan>& out);
  void move_vehicle(VehicleState& vs, double t0, double t1, double u);
  void record_arrival(VehicleState& vs, double exact_t, double stamp_t);
  double segment_end(const VehicleState& vs, double s, std::size_t* node_out) const;

  const UrbanGraph* graph_;
  DispatchConfig config_;
  EnergyCoefficients coeffs_;
  std::vector<Caev>* fleet_;
  std::vector<std::size_t> order_;  // selected fleet indices, dispatch order
  std::vector<VehicleState> states_;
  std::vector<std::size_t> candidates_;  // district V2G node indices
  DispatchLog log_;
  double delivered_ = 0;
  std::vector<ParetoEntry>* frontier_dump_ = nullptr;
  bool frontier_dumped_ = false;
};

// Offline filter input: free-flow feasibility and cost for every
// available vehicle.
std::vector<FleetCandidate> free_flow_candidates(const UrbanGraph& graph,
                                                 const std::vector<Caev>& fleet,
                                                 const DispatchConfig& config);

// Standalone dispatch loop: planning ticks every plan period, motion windows
// every mpc_dt, speeds supplied by the caller.
DispatchLog run_dispatch(const UrbanGraph& graph, const DispatchConfig& config,
                         std::vector<Caev>& fleet, std::vector<std::size_t> selected,
                         const std::function<std::span<const double>(double)>& traffic_at,
                         const SpeedFn& speed, double mpc_dt_h,
                         EnergyCoefficients coeffs = {});

}  // namespace v2g
