#include "v2g/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "json_util.hpp"

namespace v2g {

namespace {

constexpr double kTimeEps = 1e-12;

// Portable seeded uniforms: std distributions are implementation-defined, so
// draws come straight from the engine bits.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}
double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}
std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) { return rng() % n; }

std::string num_csv(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void ScenarioConfig::validate() const {
  if (!(sim_horizon_h > 0)) throw ValidationError("simulation horizon must be positive");
  if (!(traffic_dt_h > 0)) throw ValidationError("traffic sample time must be positive");
  if (!(traffic_dt_h < mpc_dt_h)) throw ValidationError("traffic step must be shorter than the control step");
  if (!(mpc_dt_h < plan_period_h)) throw ValidationError("control step must be shorter than the plan period");
  DispatchConfig d = dispatch;
  d.plan_period_h = plan_period_h;
  d.validate();
  if (sim_horizon_h < dispatch.t_pr_h) throw ValidationError("horizon must reach t_pr");
  if (initial_occupancy_fraction < 0 || initial_occupancy_fraction > 1)
    throw ValidationError("initial occupancy fraction outside [0,1]");
  if (!(spacing_km > 0)) throw ValidationError("vehicle spacing must be positive");
  if (!(energy_rate_kwh_per_km > 0)) throw ValidationError("energy rate must be positive");
  if (sat_flow_vph < 0) throw ValidationError("saturation flow must be non-negative");
  if (boundary_inflow_vph < 0) throw ValidationError("boundary inflow must be non-negative");
  if (!(coeffs.eta1 > 0) || !(coeffs.eta2 > 0)) throw ValidationError("discharge coefficients must be positive");
  if (!(turn_delta0_km > 0)) throw ValidationError("turning-rate smoothing must be positive");
  if (mpc_energy_floor_kwh < 0) throw ValidationError("energy floor must be non-negative");
  if (fleet_init.n_vehicles < 0) throw ValidationError("fleet size must be non-negative");
  if (!(fleet_init.total_capacity_kwh > 0)) throw ValidationError("battery capacity must be positive");
  if (fleet_init.gss_fraction < 0 || fleet_init.gss_fraction > 1)
    throw ValidationError("GSS fraction outside [0,1]");
  for (const auto& range : {fleet_init.e_mob_range_fraction, fleet_init.e_gss_range_fraction})
    if (range[0] < 0 || range[1] > 1 || range[0] > range[1])
      throw ValidationError("charge fraction range must satisfy 0 <= lo <= hi <= 1");
  for (const CongestionPulse& p : pulses) {
    if (p.t_h < 0) throw ValidationError("pulse time must be non-negative");
    if (p.occupancy_ratio < 0 || p.occupancy_ratio > 1)
      throw ValidationError("pulse occupancy ratio outside [0,1]");
  }
}

namespace {
using nlohmann::json;
using detail::get_optional;
using detail::get_required;
using detail::reject_unknown_keys;

template <typename T>
void maybe(const json& obj, const char* key, T& target, const char* ctx) {
  if (auto v = get_optional<T>(obj, key, ctx)) target = *v;
}
}  // namespace

ScenarioConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("config file must be a JSON object");
  reject_unknown_keys(doc,
                      {"sim_horizon_h", "traffic_dt_h", "plan_period_h", "mpc_dt_h", "dispatch",
                       "boundary_inflow_vph", "initial_occupancy_fraction", "spacing_km",
                       "energy_rate_kwh_per_km", "sat_flow_vph", "eta1", "eta2", "fleet_init",
                       "congestion_pulses", "turn_delta0_km", "mpc_energy_floor_kwh",
                       "dump_flows", "mpc_trace"},
                      "config file");

  ScenarioConfig cfg;
  maybe(doc, "sim_horizon_h", cfg.sim_horizon_h, "config");
  maybe(doc, "traffic_dt_h", cfg.traffic_dt_h, "config");
  maybe(doc, "plan_period_h", cfg.plan_period_h, "config");
  maybe(doc, "mpc_dt_h", cfg.mpc_dt_h, "config");
  maybe(doc, "boundary_inflow_vph", cfg.boundary_inflow_vph, "config");
  maybe(doc, "initial_occupancy_fraction", cfg.initial_occupancy_fraction, "config");
  maybe(doc, "spacing_km", cfg.spacing_km, "config");
  maybe(doc, "energy_rate_kwh_per_km", cfg.energy_rate_kwh_per_km, "config");
  maybe(doc, "sat_flow_vph", cfg.sat_flow_vph, "config");
  maybe(doc, "eta1", cfg.coeffs.eta1, "config");
  maybe(doc, "eta2", cfg.coeffs.eta2, "config");
  maybe(doc, "turn_delta0_km", cfg.turn_delta0_km, "config");
  maybe(doc, "mpc_energy_floor_kwh", cfg.mpc_energy_floor_kwh, "config");
  maybe(doc, "dump_flows", cfg.dump_flows, "config");
  maybe(doc, "mpc_trace", cfg.mpc_trace, "config");

  if (auto it = doc.find("dispatch"); it != doc.end()) {
    reject_unknown_keys(*it,
                        {"t_disp_h", "t_pr_h", "t_pr_horizon_h", "request_kwh", "district",
                         "replan_on_node_arrival"},
                        "dispatch config");
    maybe(*it, "t_disp_h", cfg.dispatch.t_disp_h, "dispatch");
    maybe(*it, "t_pr_h", cfg.dispatch.t_pr_h, "dispatch");
    maybe(*it, "t_pr_horizon_h", cfg.dispatch.t_pr_horizon_h, "dispatch");
    maybe(*it, "request_kwh", cfg.dispatch.request_kwh, "dispatch");
    maybe(*it, "district", cfg.dispatch.district, "dispatch");
    maybe(*it, "replan_on_node_arrival", cfg.dispatch.replan_on_node_arrival, "dispatch");
  }
  if (auto it = doc.find("fleet_init"); it != doc.end()) {
    reject_unknown_keys(*it,
                        {"n_vehicles", "total_capacity_kwh", "gss_fraction",
                         "e_mob_range_fraction", "e_gss_range_fraction", "rng_seed"},
                        "fleet_init config");
    maybe(*it, "n_vehicles", cfg.fleet_init.n_vehicles, "fleet_init");
    maybe(*it, "total_capacity_kwh", cfg.fleet_init.total_capacity_kwh, "fleet_init");
    maybe(*it, "gss_fraction", cfg.fleet_init.gss_fraction, "fleet_init");
    maybe(*it, "e_mob_range_fraction", cfg.fleet_init.e_mob_range_fraction, "fleet_init");
    maybe(*it, "e_gss_range_fraction", cfg.fleet_init.e_gss_range_fraction, "fleet_init");
    maybe(*it, "rng_seed", cfg.fleet_init.rng_seed, "fleet_init");
  }
  if (auto it = doc.find("congestion_pulses"); it != doc.end()) {
    if (!it->is_array()) throw ParseError("congestion_pulses must be an array");
    for (const json& jp : *it) {
      reject_unknown_keys(jp, {"t_h", "from", "to", "occupancy_ratio"}, "congestion pulse");
      CongestionPulse p;
      p.t_h = get_required<double>(jp, "t_h", "pulse");
      p.from = static_cast<NodeId>(get_required<std::int64_t>(jp, "from", "pulse"));
      p.to = static_cast<NodeId>(get_required<std::int64_t>(jp, "to", "pulse"));
      maybe(jp, "occupancy_ratio", p.occupancy_ratio, "pulse");
      cfg.pulses.push_back(p);
    }
  }

  cfg.dispatch.plan_period_h = cfg.plan_period_h;
  cfg.validate();
  return cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::vector<Caev> init_fleet(const ScenarioConfig& cfg, const UrbanGraph& graph) {
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < graph.n_nodes(); ++i)
    if (!graph.node(i).is_terminal) candidates.push_back(i);
  std::sort(candidates.begin(), candidates.end(),
            [&](std::size_t a, std::size_t b) { return graph.node(a).id < graph.node(b).id; });

  const auto n = static_cast<std::size_t>(cfg.fleet_init.n_vehicles);
  if (n > candidates.size())
    throw ValidationError("fleet larger than the number of non-terminal nodes");

  std::mt19937_64 rng(cfg.fleet_init.rng_seed);
  // Partial Fisher-Yates: distinct start nodes.
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i + static_cast<std::size_t>(uniform_index(rng, candidates.size() - i));
    std::swap(candidates[i], candidates[j]);
  }

  std::vector<Caev> fleet;
  fleet.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Caev c;
    c.id = static_cast<std::uint32_t>(i);
    c.current_node = graph.node(candidates[i]).id;
    c.battery = make_partition(cfg.fleet_init.total_capacity_kwh, cfg.fleet_init.gss_fraction);
    c.battery.e_mob_kwh = c.battery.cap_mob_kwh() *
                          uniform(rng, cfg.fleet_init.e_mob_range_fraction[0],
                                  cfg.fleet_init.e_mob_range_fraction[1]);
    c.battery.e_gss_kwh = c.battery.cap_gss_kwh() *
                          uniform(rng, cfg.fleet_init.e_gss_range_fraction[0],
                                  cfg.fleet_init.e_gss_range_fraction[1]);
    fleet.push_back(c);
  }
  return fleet;
}

UrbanGraph gen_city(int n_nodes, int n_v2g, std::uint64_t seed, int district) {
  if (n_nodes < 9) throw ValidationError("synthetic city needs at least 9 nodes");
  if (n_v2g < 1) throw ValidationError("synthetic city needs at least one V2G node");

  const int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_nodes))));
  const int rows = (n_nodes + side - 1) / side;
  auto exists = [&](int r, int c) {
    return r >= 0 && c >= 0 && c < side && r >= 0 && r * side + c < n_nodes;
  };
  auto cell = [&](int r, int c) { return static_cast<NodeId>(r * side + c); };

  std::mt19937_64 rng(seed);
  const double pitch = 0.18;

  std::vector<Node> nodes(static_cast<std::size_t>(n_nodes));
  for (int i = 0; i < n_nodes; ++i) nodes[static_cast<std::size_t>(i)].id = static_cast<NodeId>(i);

  // The whole boundary ring is terminal: city-limit junctions absorb the
  // background flow, like the many extra-urban exits of a real extract. The
  // two southeasternmost of them steer the turning rates.
  std::vector<NodeId> boundary;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < side; ++c) {
      if (!exists(r, c)) continue;
      if (r == 0 || c == 0 || r == rows - 1 || c == side - 1 || !exists(r + 1, c) ||
          !exists(r, c + 1)) {
        nodes[cell(r, c)].is_terminal = true;
        boundary.push_back(cell(r, c));
      }
    }
  {
    std::vector<NodeId> sorted = boundary;
    std::sort(sorted.rbegin(), sorted.rend());
    for (std::size_t i = 0; i < sorted.size() && i < 2; ++i)
      nodes[sorted[i]].is_sink_attractor = true;
  }

  // Boundary sources: extra-urban connections on the north and west edges.
  for (auto [r, c] : {std::pair{0, side / 2}, {rows / 2, 0}}) {
    if (exists(r, c)) nodes[cell(r, c)].is_source = true;
  }

  // V2G cluster around the city center.
  {
    const int cr = rows / 2, cc = side / 2;
    std::vector<std::pair<int, NodeId>> by_dist;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < side; ++c) {
        if (!exists(r, c)) continue;
        NodeId id = cell(r, c);
        if (nodes[id].is_terminal || nodes[id].is_source) continue;
        by_dist.push_back({std::abs(r - cr) + std::abs(c - cc), id});
      }
    std::sort(by_dist.begin(), by_dist.end());
    if (static_cast<int>(by_dist.size()) < n_v2g)
      throw ValidationError("not enough interior nodes for the requested V2G count");
    for (int i = 0; i < n_v2g; ++i) {
      nodes[by_dist[static_cast<std::size_t>(i)].second].is_v2g = true;
      nodes[by_dist[static_cast<std::size_t>(i)].second].district = district;
    }
  }

  // Undirected road lengths with mild jitter, shared by both directions.
  std::map<std::pair<NodeId, NodeId>, std::pair<double, double>> roads;  // length, v_ff
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < side; ++c) {
      if (!exists(r, c)) continue;
      for (auto [dr, dc] : {std::pair{0, 1}, {1, 0}}) {
        if (!exists(r + dr, c + dc)) continue;
        const double length = pitch * (1.0 + 0.3 * (uniform01(rng) - 0.5));
        const double v_ff = ((r + c) % 2 == 0) ? 50.0 : 40.0;
        roads[{cell(r, c), cell(r + dr, c + dc)}] = {length, v_ff};
      }
    }

  const GraphDefaults defaults;
  std::vector<Link> links;
  auto add_link = [&](NodeId from, NodeId to, double length, double v_ff) {
    Link l;
    l.from = from;
    l.to = to;
    l.length_km = length;
    l.free_flow_speed_kmh = v_ff;
    l.capacity_veh = derive_capacity(length, defaults.spacing_km);
    l.saturation_flow_vph = defaults.saturation_flow_vph;
    l.exit_rate = nodes[to].is_terminal ? 1.0 : 0.0;
    l.energy_cost_kwh = defaults.energy_rate_kwh_per_km * length;
    links.push_back(l);
  };
  for (const auto& [key, road] : roads) {
    add_link(key.first, key.second, road.first, road.second);
    add_link(key.second, key.first, road.first, road.second);
  }

  // Two-stage signals on a sprinkling of interior junctions: one stage for
  // the north-south approaches, one for east-west.
  for (int r = 1; r < rows - 1; ++r)
    for (int c = 1; c < side - 1; ++c) {
      if (!exists(r, c)) continue;
      if (!exists(r - 1, c) || !exists(r + 1, c) || !exists(r, c - 1) || !exists(r, c + 1))
        continue;
      if ((static_cast<std::uint64_t>(r) * 31 + static_cast<std::uint64_t>(c) * 17 + seed) % 4 != 0)
        continue;
      nodes[cell(r, c)].tl_stages = std::vector<std::vector<NodeId>>{
          {cell(r - 1, c), cell(r + 1, c)}, {cell(r, c - 1), cell(r, c + 1)}};
    }

  return UrbanGraph(std::move(nodes), std::move(links));
}

std::string RunMetrics::to_json() const {
  json doc;
  doc["request_kwh"] = request_kwh;
  doc["delivered_kwh"] = delivered_kwh;
  doc["request_met"] = request_met;
  doc["shortfall_kwh"] = shortfall_kwh;
  doc["filter_met_request"] = filter_met_request;
  doc["clamp_events"] = clamp_events;
  if (max_arrival_time_h)
    doc["max_arrival_time_h"] = *max_arrival_time_h;
  else
    doc["max_arrival_time_h"] = nullptr;
  json arr = json::array();
  for (const VehicleMetrics& v : vehicles) {
    json jv;
    jv["id"] = v.id;
    jv["selected"] = v.selected;
    if (v.arrival_time_h)
      jv["arrival_time_h"] = *v.arrival_time_h;
    else
      jv["arrival_time_h"] = nullptr;
    jv["path_changes"] = v.path_changes;
    jv["final_e_mob_kwh"] = v.final_e_mob_kwh;
    arr.push_back(jv);
  }
  doc["vehicles"] = arr;
  return doc.dump(2) + "\n";
}

RunResult run(const ScenarioConfig& config, const UrbanGraph& graph,
              std::optional<std::vector<Caev>> fleet_in, const std::string& out_dir,
              const std::string& frontier_dump_path) {
  ScenarioConfig cfg = config;
  cfg.dispatch.plan_period_h = cfg.plan_period_h;
  cfg.validate();
  if (cfg.traffic_dt_h <= graph.signal_timing().cycle_time_h)
    std::cerr << "warning: traffic sample time is below the signal cycle; the TL outflow "
                 "formula is applied as a cycle average at sub-cycle resolution\n";

  const TurningRateMap rates = compute_turning_rates(graph, cfg.turn_delta0_km);
  if (!rates.empty_rows().empty())
    std::cerr << "warning: " << rates.empty_rows().size()
              << " incoming link(s) have no turning candidates; their flow vanishes\n";
  const TrafficModel model(graph, rates);
  TrafficState state = model.initial_state(cfg.initial_occupancy_fraction, cfg.traffic_dt_h);
  const BoundaryInflow inflow = uniform_source_inflow(graph, cfg.boundary_inflow_vph);

  std::vector<Caev> fleet = fleet_in ? std::move(*fleet_in) : init_fleet(cfg, graph);
  for (const Caev& c : fleet) graph.index_of(c.current_node);

  const DispatchConfig& dcfg = cfg.dispatch;
  const FleetSelection selection =
      select_fleet(free_flow_candidates(graph, fleet, dcfg), dcfg.request_kwh);
  std::vector<std::size_t> selected;
  for (const FleetCandidate& c : selection.selected) selected.push_back(c.fleet_index);

  RunResult rr;
  rr.metrics.request_kwh = dcfg.request_kwh;
  rr.metrics.filter_met_request = selection.request_met;
  if (!selection.request_met)
    std::cerr << "warning: offline filter covers only "
              << dcfg.request_kwh - selection.shortfall_kwh << " kWh of the request\n";

  Dispatcher disp(graph, dcfg, fleet, selected, cfg.coeffs);
  std::vector<ParetoEntry> frontier;
  if (!frontier_dump_path.empty()) disp.set_frontier_dump(&frontier);

  std::vector<CongestionPulse> pulses = cfg.pulses;
  std::stable_sort(pulses.begin(), pulses.end(),
                   [](const CongestionPulse& a, const CongestionPulse& b) { return a.t_h < b.t_h; });
  std::size_t pulse_i = 0;

  rr.traces.speed_kmh.assign(fleet.size(), {});
  rr.traces.distance_km.assign(fleet.size(), {});

  // Map fleet index -> position among the dispatched set, if any.
  std::vector<std::optional<std::size_t>> dispatched_slot(fleet.size());
  for (std::size_t i = 0; i < selected.size(); ++i) dispatched_slot[selected[i]] = i;

  const double inf = std::numeric_limits<double>::infinity();
  std::size_t traffic_k = 0, plan_i = 0, mpc_i = 0;
  int plan_tick_count = 0;
  double next_traffic = cfg.traffic_dt_h;
  double next_plan = dcfg.t_disp_h;
  double next_mpc = dcfg.t_disp_h;

  while (true) {
    const double t_traffic = next_traffic <= cfg.sim_horizon_h + kTimeEps ? next_traffic : inf;
    const double t_plan = next_plan < dcfg.t_pr_h - kTimeEps ? next_plan : inf;
    const double t_mpc = next_mpc < dcfg.t_pr_h - kTimeEps ? next_mpc : inf;
    const double tmin = std::min({t_traffic, t_plan, t_mpc});
    if (std::isinf(tmin)) break;

    if (t_traffic <= tmin + kTimeEps) {
      StepOutput out = model.step(state, inflow);
      state = std::move(out.state);
      rr.metrics.clamp_events += out.clamped;
      ++traffic_k;
      if (cfg.dump_flows) {
        for (std::size_t e = 0; e < graph.n_links(); ++e)
          rr.traces.flow_rows.push_back(
              {traffic_k, e, state.x[e], out.flows.q[e], out.flows.s[e], out.flows.l[e]});
      }
      while (pulse_i < pulses.size() && pulses[pulse_i].t_h <= next_traffic + kTimeEps) {
        const CongestionPulse& p = pulses[pulse_i];
        auto link = graph.find_link(p.from, p.to);
        if (!link) throw ValidationError("congestion pulse references a missing link");
        state.x[*link] = p.occupancy_ratio * graph.link(*link).capacity_veh;
        ++pulse_i;
      }
      next_traffic = static_cast<double>(traffic_k + 1) * cfg.traffic_dt_h;
    } else if (t_plan <= tmin + kTimeEps) {
      disp.plan_tick(next_plan, state.x);
      rr.traces.occupancy.push_back({plan_tick_count, next_plan, state.x});
      ++plan_tick_count;
      next_plan = dcfg.t_disp_h + static_cast<double>(++plan_i) * cfg.plan_period_h;
    } else {
      const double t0 = next_mpc;
      const double t1 = std::min(t0 + cfg.mpc_dt_h, dcfg.t_pr_h);
      // Optional trigger: crossings observed in earlier windows replan at
      // this window's start, against the current traffic state.
      if (dcfg.replan_on_node_arrival && t0 > dcfg.t_disp_h + kTimeEps) {
        const std::vector<std::size_t> crossed = disp.take_node_crossings();
        if (!crossed.empty()) disp.plan_vehicles(t0, state.x, crossed);
      }
      const std::vector<RouteView> views = disp.route_views();
      std::vector<double> speeds(views.size(), 0.0);
      std::vector<AppliedSpeed> applied(views.size());

#pragma omp parallel for schedule(dynamic)
      for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(views.size()); ++i) {
        if (views[i].status != PlanStatus::EnRoute) continue;
        applied[i] = receding_step(views[i].progress, fleet[views[i].fleet_index].battery.e_mob_kwh,
                                   views[i].route_total_km, views[i].speed_cap_kmh, t0,
                                   {dcfg.t_pr_h, cfg.mpc_dt_h}, cfg.coeffs,
                                   cfg.mpc_energy_floor_kwh);
        speeds[i] = applied[i].speed_kmh;
      }

      rr.traces.sample_times_h.push_back(t0);
      for (std::size_t f = 0; f < fleet.size(); ++f) {
        double u = 0.0, remaining = 0.0;
        if (dispatched_slot[f]) {
          const std::size_t slot = *dispatched_slot[f];
          u = speeds[slot];
          remaining = views[slot].remaining_km;
          if (views[slot].status == PlanStatus::EnRoute) {
            rr.traces.mpc_rows.push_back({t0, fleet[f].id, views[slot].progress,
                                          fleet[f].battery.e_mob_kwh, u, applied[slot].solved,
                                          applied[slot].solve_seconds});
          }
        }
        rr.traces.speed_kmh[f].push_back(u);
        rr.traces.distance_km[f].push_back(remaining);
      }

      disp.advance(t0, t1, speeds);
      next_mpc = dcfg.t_disp_h + static_cast<double>(++mpc_i) * cfg.mpc_dt_h;
    }
  }

  rr.log = disp.finalize();
  rr.metrics.delivered_kwh = rr.log.delivered_kwh;
  rr.metrics.request_met = rr.log.request_met;
  rr.metrics.shortfall_kwh = rr.log.shortfall_kwh;
  rr.metrics.max_arrival_time_h = rr.log.max_arrival_time_h;
  for (std::size_t f = 0; f < fleet.size(); ++f) {
    VehicleMetrics vm;
    vm.id = fleet[f].id;
    vm.selected = dispatched_slot[f].has_value();
    vm.final_e_mob_kwh = fleet[f].battery.e_mob_kwh;
    if (vm.selected) {
      vm.arrival_time_h = disp.arrival_of(f);
      vm.path_changes = disp.path_changes_of(f);
    }
    rr.metrics.vehicles.push_back(vm);
  }

  if (!out_dir.empty())
    emit_outputs(rr.metrics, rr.log, rr.traces, graph, fleet, out_dir, cfg.mpc_trace,
                 cfg.dump_flows);
  if (!frontier_dump_path.empty()) {
    std::ofstream out(frontier_dump_path);
    if (!out) throw ParseError("cannot write frontier dump: " + frontier_dump_path);
    out << "node,time_h,energy_kwh\n";
    for (const ParetoEntry& e : frontier)
      out << e.node << "," << num_csv(e.time_h) << "," << num_csv(e.energy_kwh) << "\n";
  }
  return rr;
}

void emit_outputs(const RunMetrics& metrics, const DispatchLog& log, const RunTraces& traces,
                  const UrbanGraph& graph, const std::vector<Caev>& fleet,
                  const std::string& out_dir, bool mpc_trace, bool dump_flows) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  {
    std::ofstream out(dir / "metrics.json");
    if (!out) throw ParseError("cannot write metrics.json");
    out << metrics.to_json();
  }
  log.write_jsonl((dir / "dispatch.jsonl").string());

  auto write_series = [&](const char* name, const std::vector<std::vector<double>>& series) {
    std::ofstream out(dir / name);
    if (!out) throw ParseError(std::string("cannot write ") + name);
    out << "t_h";
    for (const Caev& c : fleet) out << ",veh_" << c.id;
    out << "\n";
    for (std::size_t row = 0; row < traces.sample_times_h.size(); ++row) {
      out << num_csv(traces.sample_times_h[row]);
      for (std::size_t f = 0; f < fleet.size(); ++f) out << "," << num_csv(series[f][row]);
      out << "\n";
    }
  };
  write_series("speeds.csv", traces.speed_kmh);
  write_series("distance.csv", traces.distance_km);

  {
    std::ofstream out(dir / "occupancy.csv");
    if (!out) throw ParseError("cannot write occupancy.csv");
    out << "tick,t_h,from,to,x_veh,occupancy\n";
    for (const RunTraces::Snapshot& snap : traces.occupancy) {
      for (std::size_t e = 0; e < graph.n_links(); ++e) {
        const Link& l = graph.link(e);
        out << snap.tick << "," << num_csv(snap.t_h) << "," << l.from << "," << l.to << ","
            << num_csv(snap.x[e]) << "," << num_csv(snap.x[e] / l.capacity_veh) << "\n";
      }
    }
  }

  if (mpc_trace) {
    std::ofstream out(dir / "mpc_trace.csv");
    if (!out) throw ParseError("cannot write mpc_trace.csv");
    out << "t_j_h,vehicle,p_hat,e_mob_kwh,applied_u_kmh,solver_status,solve_time_s\n";
    for (const RunTraces::MpcRow& row : traces.mpc_rows)
      out << num_csv(row.t_h) << "," << row.vehicle << "," << num_csv(row.p_hat) << ","
          << num_csv(row.e_mob_kwh) << "," << num_csv(row.applied_u_kmh) << ","
          << (row.solved ? "ok" : "infeasible_fallback") << "," << num_csv(row.solve_seconds)
          << "\n";
  }

  if (dump_flows) {
    std::ofstream out(dir / "flows.csv");
    if (!out) throw ParseError("cannot write flows.csv");
    out << "k,from,to,x,q,s,l\n";
    for (const RunTraces::FlowRow& row : traces.flow_rows) {
      const Link& l = graph.link(row.link);
      out << row.k << "," << l.from << "," << l.to << "," << num_csv(row.x) << ","
          << num_csv(row.q) << "," << num_csv(row.s) << "," << num_csv(row.l) << "\n";
    }
  }
}

}  // namespace v2g
