#include "v2g/dispatch.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "v2g/traffic.hpp"

namespace v2g {

namespace {
constexpr double kPosEps = 1e-9;   // km; node-boundary snap
constexpr double kTimeEps = 1e-12; // h
}  // namespace

void DispatchConfig::validate() const {
  if (!(t_disp_h < t_pr_h)) throw ValidationError("t_disp must precede t_pr");
  if (!(plan_period_h > 0) || !(plan_period_h < dispatch_window_h()))
    throw ValidationError("plan period must lie in (0, dispatch window)");
  if (t_pr_horizon_h < 0) throw ValidationError("delivery horizon must be non-negative");
  if (request_kwh < 0) throw ValidationError("energy request must be non-negative");
}

const char* to_string(PlanStatus status) {
  switch (status) {
    case PlanStatus::EnRoute: return "en_route";
    case PlanStatus::Arrived: return "arrived";
    case PlanStatus::Infeasible: return "infeasible";
  }
  return "?";
}

std::string DispatchLog::to_jsonl() const {
  std::string out;
  for (const DispatchEvent& ev : events) {
    nlohmann::json j;
    j["t"] = ev.t_h;
    j["vehicle"] = ev.vehicle;
    j["event"] = ev.kind;
    j["payload"] = ev.payload;
    out += j.dump();
    out += "\n";
  }
  return out;
}

void DispatchLog::write_jsonl(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write dispatch log: " + path);
  out << to_jsonl();
}

Dispatcher::Dispatcher(const UrbanGraph& graph, const DispatchConfig& config,
                       std::vector<Caev>& fleet, std::vector<std::size_t> selected,
                       EnergyCoefficients coeffs)
    : graph_(&graph), config_(config), coeffs_(coeffs), fleet_(&fleet),
      order_(std::move(selected)) {
  config_.validate();
  candidates_ = graph.v2g_nodes(config_.district);
  if (candidates_.empty())
    throw ValidationError("district " + std::to_string(config_.district) + " has no V2G node");
  log_.request_kwh = config_.request_kwh;
  states_.resize(order_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) {
    const Caev& caev = fleet.at(order_[i]);
    if (!caev.available)
      throw ValidationError("vehicle " + std::to_string(caev.id) + " is not available");
    states_[i].fleet_index = order_[i];
    graph.index_of(caev.current_node);  // existence check
  }
}

Dispatcher::Anchor Dispatcher::planning_anchor(const VehicleState& vs) const {
  const Caev& caev = (*fleet_)[vs.fleet_index];
  if (!vs.has_plan) return {graph_->index_of(caev.current_node), 0.0, std::nullopt, {}};

  double cum = vs.stub_km;
  if (vs.stub_km > 0) {
    if (vs.s_km < cum - kPosEps)
      return {vs.anchor_node, cum - vs.s_km, vs.stub_link, vs.edges};
    if (vs.s_km <= cum + kPosEps) return {vs.anchor_node, 0.0, std::nullopt, vs.edges};
  }
  for (std::size_t i = 0; i < vs.edges.size(); ++i) {
    const double end = cum + graph_->link(vs.edges[i]).length_km;
    std::vector<std::size_t> rest(vs.edges.begin() + static_cast<std::ptrdiff_t>(i) + 1,
                                  vs.edges.end());
    if (vs.s_km < end - kPosEps)
      return {graph_->link_to(vs.edges[i]), end - vs.s_km, vs.edges[i], std::move(rest)};
    if (vs.s_km <= end + kPosEps)
      return {graph_->link_to(vs.edges[i]), 0.0, std::nullopt, std::move(rest)};
    cum = end;
  }
  // At the end of the route.
  std::size_t node = vs.edges.empty() ? vs.anchor_node : graph_->link_to(vs.edges.back());
  return {node, 0.0, std::nullopt, {}};
}

void Dispatcher::record_arrival(VehicleState& vs, double exact_t, double stamp_t) {
  Caev& caev = (*fleet_)[vs.fleet_index];
  vs.status = PlanStatus::Arrived;
  vs.arrival_t_h = exact_t;
  vs.s_km = vs.total_km;
  caev.progress = 1.0;
  caev.traveled_km = vs.total_km;
  if (vs.target) caev.current_node = graph_->node(*vs.target).id;
  delivered_ += caev.battery.e_gss_kwh;
  if (!log_.max_arrival_time_h || exact_t > *log_.max_arrival_time_h)
    log_.max_arrival_time_h = exact_t;
  log_.events.push_back({stamp_t, caev.id, "arrived",
                         {{"node", vs.target ? graph_->node(*vs.target).id : caev.current_node},
                          {"exact_t_h", exact_t},
                          {"e_gss_kwh", caev.battery.e_gss_kwh}}});
}

void Dispatcher::install_plan(VehicleState& vs, double t_k, const Anchor& anchor,
                              const TargetChoice& choice, std::span<const double> x,
                              std::map<std::uint32_t, DispatchPlan>& out) {
  Caev& caev = (*fleet_)[vs.fleet_index];
  const auto& [target, path] = *choice.best;

  const bool changed =
      vs.has_plan && (vs.target != std::optional<std::size_t>(target) ||
                      anchor.remaining_edges != path.edges);
  const double distance_before = vs.has_plan ? vs.total_km - vs.s_km : 0.0;

  vs.has_plan = true;
  vs.stub_link = anchor.residual_km > 0 ? anchor.link : std::nullopt;
  vs.stub_km = anchor.residual_km;
  vs.edges = path.edges;
  vs.anchor_node = anchor.node;
  vs.target = target;
  vs.total_km = anchor.residual_km + path.length_km;
  vs.s_km = 0.0;
  vs.planned_at_h = t_k;
  vs.crossed_node = false;  // a fresh plan absorbs the pending arrival trigger
  // position restarts with the route: progress and the traveled distance
  // are measured along stub + planned path
  caev.progress = vs.total_km > 0 ? 0.0 : 1.0;
  caev.traveled_km = 0.0;

  // Cap from the link the vehicle is on; a vehicle sitting at a node takes
  // the first planned link.
  std::optional<std::size_t> cap_link = vs.stub_link;
  if (!cap_link && !vs.edges.empty()) cap_link = vs.edges.front();
  vs.speed_cap_kmh = cap_link ? max_speed(graph_->link(*cap_link), x[*cap_link]) : 0.0;

  nlohmann::json edges_json = nlohmann::json::array();
  for (std::size_t e : path.edges)
    edges_json.push_back({graph_->link(e).from, graph_->link(e).to});
  log_.events.push_back({t_k, caev.id, "planned",
                         {{"target", graph_->node(target).id},
                          {"cost_h", path.cost_h},
                          {"length_km", path.length_km},
                          {"energy_kwh", path.energy_kwh},
                          {"speed_cap_kmh", vs.speed_cap_kmh},
                          {"time_budget_h", config_.t_pr_h - t_k},
                          {"edges", edges_json}}});
  if (changed) {
    ++vs.path_changes;
    log_.events.push_back({t_k, caev.id, "path_changed",
                           {{"new_target", graph_->node(target).id},
                            {"distance_before_km", distance_before},
                            {"distance_after_km", vs.total_km}}});
  }

  DispatchPlan plan;
  plan.vehicle = caev.id;
  plan.target = target;
  plan.path = path;
  plan.planned_at_h = t_k;
  plan.speed_cap_kmh = vs.speed_cap_kmh;
  if (vs.total_km <= kPosEps) {
    record_arrival(vs, t_k, t_k);
    plan.status = PlanStatus::Arrived;
  } else {
    vs.status = PlanStatus::EnRoute;
    plan.status = PlanStatus::EnRoute;
  }
  out.emplace(caev.id, std::move(plan));
}

void Dispatcher::mark_infeasible(VehicleState& vs, double t_k, const TargetChoice& choice,
                                 std::map<std::uint32_t, DispatchPlan>& out) {
  Caev& caev = (*fleet_)[vs.fleet_index];
  vs.status = PlanStatus::Infeasible;
  vs.crossed_node = false;
  // The vehicle finishes the link it is on, then stops for good.
  Anchor a = planning_anchor(vs);
  vs.coast_until_km = vs.s_km + a.residual_km;

  nlohmann::json reasons = nlohmann::json::object();
  for (const auto& [node, reason] : choice.failures)
    reasons[std::to_string(graph_->node(node).id)] = to_string(reason);
  const double projected = projected_delivery_kwh();
  log_.events.push_back({t_k, caev.id, "infeasible",
                         {{"reasons", reasons}, {"projected_delivery_kwh", projected}}});
  if (projected < config_.request_kwh - 1e-9) log_.projection_warning = true;

  DispatchPlan plan;
  plan.vehicle = caev.id;
  plan.planned_at_h = t_k;
  plan.status = PlanStatus::Infeasible;
  out.emplace(caev.id, std::move(plan));
}

std::map<std::uint32_t, DispatchPlan> Dispatcher::plan_vehicles(
    double t_k, std::span<const double> x, std::span<const std::size_t> fleet_indices,
    bool parallel) {
  if (t_k >= config_.t_pr_h - kTimeEps)
    throw ValidationError("no plan may be issued at or after t_pr");

  const EdgeWeights weights = make_edge_weights(*graph_, x);
  const Budgets base_budgets{config_.t_pr_h - t_k, 0.0};

  struct Job {
    std::size_t state_index;
    Anchor anchor;
    Budgets budgets;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < states_.size(); ++i) {
    VehicleState& vs = states_[i];
    if (vs.status != PlanStatus::EnRoute) continue;
    if (!fleet_indices.empty() &&
        std::find(fleet_indices.begin(), fleet_indices.end(), vs.fleet_index) ==
            fleet_indices.end())
      continue;
    Budgets b = base_budgets;
    b.energy_kwh = (*fleet_)[vs.fleet_index].battery.e_mob_kwh;
    jobs.push_back({i, planning_anchor(vs), b});
  }

  std::vector<TargetChoice> results(jobs.size());
  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(jobs.size()); ++i)
      results[i] =
          select_target(*graph_, weights, jobs[i].anchor.node, candidates_, jobs[i].budgets);
  } else {
    for (std::size_t i = 0; i < jobs.size(); ++i)
      results[i] =
          select_target(*graph_, weights, jobs[i].anchor.node, candidates_, jobs[i].budgets);
  }

  if (frontier_dump_ && !frontier_dumped_ && !jobs.empty()) {
    SolveOptions opt;
    opt.frontier_dump = frontier_dump_;
    solve_rcsp(*graph_, weights, jobs.front().anchor.node, candidates_.front(),
               jobs.front().budgets, opt);
    frontier_dumped_ = true;
  }

  std::map<std::uint32_t, DispatchPlan> plans;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    VehicleState& vs = states_[jobs[i].state_index];
    if (results[i].best)
      install_plan(vs, t_k, jobs[i].anchor, results[i], x, plans);
    else
      mark_infeasible(vs, t_k, results[i], plans);
  }
  log_.plan_times_h.push_back(t_k);
  return plans;
}

std::map<std::uint32_t, DispatchPlan> Dispatcher::plan_tick(double t_k,
                                                            std::span<const double> x) {
  return plan_vehicles(t_k, x, {}, true);
}

std::map<std::uint32_t, DispatchPlan> Dispatcher::plan_tick_serial(double t_k,
                                                                   std::span<const double> x) {
  return plan_vehicles(t_k, x, {}, false);
}

double Dispatcher::segment_end(const VehicleState& vs, double s, std::size_t* node_out) const {
  double cum = vs.stub_km;
  if (vs.stub_km > 0 && s < cum - kPosEps) {
    if (node_out) *node_out = vs.anchor_node;
    return cum;
  }
  for (std::size_t e : vs.edges) {
    const double end = cum + graph_->link(e).length_km;
    if (s < end - kPosEps) {
      if (node_out) *node_out = graph_->link_to(e);
      return end;
    }
    cum = end;
  }
  if (node_out) *node_out = vs.edges.empty() ? vs.anchor_node : graph_->link_to(vs.edges.back());
  return vs.total_km;
}

void Dispatcher::move_vehicle(VehicleState& vs, double t0, double t1, double u) {
  Caev& caev = (*fleet_)[vs.fleet_index];
  vs.last_u_kmh = u;
  if (u <= 0.0) return;

  const double s_start = vs.s_km;
  double moved_target = u * (t1 - t0);
  double end_s = std::min(s_start + moved_target, vs.total_km);

  // Cross node boundaries, recording each.
  double s = s_start;
  while (s < end_s - kPosEps) {
    std::size_t node = 0;
    const double boundary = segment_end(vs, s, &node);
    if (boundary > end_s + kPosEps) break;
    const double exact_t = t0 + (boundary - s_start) / u;
    caev.current_node = graph_->node(node).id;
    vs.crossed_node = true;
    if (boundary >= vs.total_km - kPosEps) {
      const double driven = vs.total_km - s_start;
      caev.traveled_km = vs.total_km;
      caev.battery.e_mob_kwh = discharge_step(caev.battery.e_mob_kwh, u, driven / u, coeffs_);
      record_arrival(vs, exact_t, t1);
      return;
    }
    log_.events.push_back(
        {t1, caev.id, "node_reached", {{"node", graph_->node(node).id}, {"exact_t_h", exact_t}}});
    s = boundary;
  }

  const double driven = end_s - s_start;
  vs.s_km = end_s;
  caev.traveled_km = vs.s_km;
  caev.progress = vs.total_km > 0 ? vs.s_km / vs.total_km : 1.0;
  caev.battery.e_mob_kwh = discharge_step(caev.battery.e_mob_kwh, u, driven / u, coeffs_);
}

void Dispatcher::advance(double t0, double t1, std::span<const double> speeds_kmh) {
  if (speeds_kmh.size() != states_.size())
    throw ValidationError("speed vector does not match the dispatched fleet");
  for (std::size_t i = 0; i < states_.size(); ++i) {
    VehicleState& vs = states_[i];
    if (vs.status == PlanStatus::Arrived) continue;
    if (vs.status == PlanStatus::Infeasible) {
      // Coast to the next node at the last applied speed, then stop.
      if (vs.last_u_kmh > 0 && vs.s_km < vs.coast_until_km - kPosEps) {
        const double u = vs.last_u_kmh;
        const double reach = std::min(vs.coast_until_km, vs.s_km + u * (t1 - t0));
        Caev& caev = (*fleet_)[vs.fleet_index];
        const double driven = reach - vs.s_km;
        if (reach >= vs.coast_until_km - kPosEps) {
          std::size_t node = 0;
          segment_end(vs, vs.s_km, &node);
          const double exact_t = t0 + driven / u;
          caev.current_node = graph_->node(node).id;
          log_.events.push_back({t1, caev.id, "node_reached",
                                 {{"node", graph_->node(node).id}, {"exact_t_h", exact_t}}});
          vs.last_u_kmh = 0.0;
        }
        caev.battery.e_mob_kwh = discharge_step(caev.battery.e_mob_kwh, u, driven / u, coeffs_);
        vs.s_km = reach;
        caev.traveled_km = vs.s_km;
        if (vs.total_km > 0) caev.progress = vs.s_km / vs.total_km;
      }
      continue;
    }
    move_vehicle(vs, t0, t1, speeds_kmh[i]);
  }
}

void Dispatcher::advance_with(double t0, double t1, const SpeedFn& speed) {
  std::vector<double> speeds(states_.size(), 0.0);
  const std::vector<RouteView> views = route_views();
  for (std::size_t i = 0; i < states_.size(); ++i) {
    if (states_[i].status != PlanStatus::EnRoute) continue;
    speeds[i] = speed((*fleet_)[states_[i].fleet_index], views[i], t0, t1 - t0);
  }
  advance(t0, t1, speeds);
}

std::vector<RouteView> Dispatcher::route_views() const {
  std::vector<RouteView> views(states_.size());
  for (std::size_t i = 0; i < states_.size(); ++i) {
    const VehicleState& vs = states_[i];
    RouteView& rv = views[i];
    rv.vehicle_id = (*fleet_)[vs.fleet_index].id;
    rv.fleet_index = vs.fleet_index;
    rv.status = vs.status;
    rv.route_total_km = vs.total_km;
    rv.progress = vs.total_km > 0 ? vs.s_km / vs.total_km : 1.0;
    rv.remaining_km = vs.has_plan ? std::max(0.0, vs.total_km - vs.s_km) : 0.0;
    rv.speed_cap_kmh = vs.speed_cap_kmh;
  }
  return views;
}

std::vector<std::size_t> Dispatcher::take_node_crossings() {
  std::vector<std::size_t> crossed;
  for (VehicleState& vs : states_) {
    if (vs.crossed_node) {
      vs.crossed_node = false;
      if (vs.status == PlanStatus::EnRoute) crossed.push_back(vs.fleet_index);
    }
  }
  return crossed;
}

bool Dispatcher::all_done() const {
  for (const VehicleState& vs : states_)
    if (vs.status == PlanStatus::EnRoute) return false;
  return true;
}

double Dispatcher::projected_delivery_kwh() const {
  double sum = 0.0;
  for (const VehicleState& vs : states_)
    if (vs.status != PlanStatus::Infeasible)
      sum += (*fleet_)[vs.fleet_index].battery.e_gss_kwh;
  return sum;
}

PlanStatus Dispatcher::status_of(std::size_t fleet_index) const {
  for (const VehicleState& vs : states_)
    if (vs.fleet_index == fleet_index) return vs.status;
  throw ValidationError("vehicle is not part of the dispatch");
}

int Dispatcher::path_changes_of(std::size_t fleet_index) const {
  for (const VehicleState& vs : states_)
    if (vs.fleet_index == fleet_index) return vs.path_changes;
  throw ValidationError("vehicle is not part of the dispatch");
}

std::optional<double> Dispatcher::arrival_of(std::size_t fleet_index) const {
  for (const VehicleState& vs : states_)
    if (vs.fleet_index == fleet_index) return vs.arrival_t_h;
  throw ValidationError("vehicle is not part of the dispatch");
}

DispatchLog Dispatcher::finalize() {
  log_.delivered_kwh = delivered_;
  log_.request_met = delivered_ >= config_.request_kwh;
  log_.shortfall_kwh = log_.request_met ? 0.0 : config_.request_kwh - delivered_;
  return log_;
}

std::vector<FleetCandidate> free_flow_candidates(const UrbanGraph& graph,
                                                 const std::vector<Caev>& fleet,
                                                 const DispatchConfig& config) {
  const EdgeWeights weights = free_flow_weights(graph);
  const std::vector<std::size_t> candidates = graph.v2g_nodes(config.district);
  if (candidates.empty())
    throw ValidationError("district " + std::to_string(config.district) + " has no V2G node");

  std::vector<FleetCandidate> out;
  for (std::size_t i = 0; i < fleet.size(); ++i) {
    const Caev& caev = fleet[i];
    if (!caev.available) continue;
    const Budgets budgets{config.dispatch_window_h(), caev.battery.e_mob_kwh};
    const TargetChoice choice =
        select_target(graph, weights, graph.index_of(caev.current_node), candidates, budgets);
    if (choice.best)
      out.push_back({i, caev.id, caev.battery.e_gss_kwh, choice.best->second.cost_h});
  }
  return out;
}

DispatchLog run_dispatch(const UrbanGraph& graph, const DispatchConfig& config,
                         std::vector<Caev>& fleet, std::vector<std::size_t> selected,
                         const std::function<std::span<const double>(double)>& traffic_at,
                         const SpeedFn& speed, double mpc_dt_h, EnergyCoefficients coeffs) {
  Dispatcher disp(graph, config, fleet, std::move(selected), coeffs);
  std::size_t plan_i = 0, move_i = 0;
  double next_plan = config.t_disp_h;
  double next_move = config.t_disp_h;
  while (true) {
    const bool plan_due = next_plan < config.t_pr_h - kTimeEps;
    const bool move_due = next_move < config.t_pr_h - kTimeEps;
    if (!plan_due && !move_due) break;
    if (plan_due && (!move_due || next_plan <= next_move + kTimeEps)) {
      disp.plan_tick(next_plan, traffic_at(next_plan));
      next_plan = config.t_disp_h + static_cast<double>(++plan_i) * config.plan_period_h;
    } else {
      if (config.replan_on_node_arrival && next_move > config.t_disp_h + kTimeEps) {
        const std::vector<std::size_t> crossed = disp.take_node_crossings();
        if (!crossed.empty()) disp.plan_vehicles(next_move, traffic_at(next_move), crossed);
      }
      const double t1 = std::min(next_move + mpc_dt_h, config.t_pr_h);
      disp.advance_with(next_move, t1, speed);
      next_move = config.t_disp_h + static_cast<double>(++move_i) * mpc_dt_h;
    }
  }
  return disp.finalize();
}

}  // namespace v2g
