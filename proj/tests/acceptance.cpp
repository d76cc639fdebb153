// Acceptance suite: one self-contained check per criterion, one PASS/FAIL
// line each. Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "v2g/scenario.hpp"

using namespace v2g;
using namespace v2g::testing;

namespace {

struct Criterion {
  std::string name;
  std::function<std::string()> check;  // empty string = pass, else reason
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ScenarioConfig protocol_config(std::uint64_t fleet_seed) {
  ScenarioConfig cfg;  // defaults carry the protocol values
  cfg.fleet_init.rng_seed = fleet_seed;
  return cfg;
}

// ---------------------------------------------------------------------------
// A1: end-to-end runs on synthetic cities across ten seeds

std::string check_a1() {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const UrbanGraph graph = gen_city(100, 4, 100 + seed);
    const ScenarioConfig cfg = protocol_config(seed);

    const auto t0 = std::chrono::steady_clock::now();
    const RunResult rr = run(cfg, graph);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (elapsed >= 60.0)
      return "seed " + std::to_string(seed) + ": runtime " + std::to_string(elapsed) + " s";
    if (!rr.metrics.filter_met_request)
      return "seed " + std::to_string(seed) + ": filter covers only " +
             std::to_string(rr.metrics.request_kwh - rr.metrics.shortfall_kwh) + " kWh";
    if (!rr.metrics.request_met || rr.metrics.delivered_kwh < 200.0)
      return "seed " + std::to_string(seed) + ": delivered " +
             std::to_string(rr.metrics.delivered_kwh) + " kWh < 200";
    for (const VehicleMetrics& v : rr.metrics.vehicles) {
      if (!v.selected) continue;
      if (!v.arrival_time_h)
        return "seed " + std::to_string(seed) + ": vehicle " + std::to_string(v.id) +
               " never arrived";
      if (*v.arrival_time_h > cfg.dispatch.t_pr_h + 1e-12)
        return "seed " + std::to_string(seed) + ": vehicle " + std::to_string(v.id) +
               " arrived at " + std::to_string(*v.arrival_time_h * 3600.0) + " s";
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// A2: label-setting solver vs simple-path enumeration on 200 seeded graphs

std::string check_a2() {
  std::mt19937_64 rng(5000);
  for (int trial = 0; trial < 200; ++trial) {
    const UrbanGraph g = random_digraph(rng);
    const EdgeWeights w = random_weights(g, rng);
    const auto origin = static_cast<std::size_t>(rng() % g.n_nodes());
    const auto target = static_cast<std::size_t>(rng() % g.n_nodes());
    const Budgets budgets{uniform(rng, 0.02, 0.5), uniform(rng, 0.5, 12.0)};

    const RcspResult got = solve_rcsp(g, w, origin, target, budgets);
    const BruteRcsp want = brute_force_rcsp(g, w, origin, target, budgets);
    if (got.path.has_value() != want.best.has_value())
      return "trial " + std::to_string(trial) + ": feasibility verdicts disagree";
    if (got.path && std::abs(got.path->cost_h - want.best->cost_h) > 1e-9)
      return "trial " + std::to_string(trial) + ": cost " + std::to_string(got.path->cost_h) +
             " vs brute force " + std::to_string(want.best->cost_h);
  }
  return {};
}

// ---------------------------------------------------------------------------
// A3: conservation on a closed network over 1e4 steps

std::string check_a3() {
  // bidirected ring, no boundary inflow, zero exit rates
  const int n = 24;
  std::vector<Node> nodes(n);
  for (int i = 0; i < n; ++i) nodes[static_cast<std::size_t>(i)].id = static_cast<NodeId>(i);
  nodes[0].is_terminal = true;
  nodes[0].is_sink_attractor = true;
  nodes[5].tl_stages = std::vector<std::vector<NodeId>>{{4}, {6}};
  std::vector<Link> links;
  auto add = [&](int f, int t) {
    Link l;
    l.from = static_cast<NodeId>(f);
    l.to = static_cast<NodeId>(t);
    l.length_km = 0.7;
    l.free_flow_speed_kmh = 50;
    l.capacity_veh = 100;
    l.saturation_flow_vph = 1500;
    l.exit_rate = 0.0;
    l.energy_cost_kwh = 0.084;
    links.push_back(l);
  };
  for (int i = 0; i < n; ++i) {
    add(i, (i + 1) % n);
    add((i + 1) % n, i);
  }
  const UrbanGraph g(nodes, links);
  const TurningRateMap rates = compute_turning_rates(g);
  const TrafficModel model(g, rates);

  TrafficState st = model.initial_state(0.5, 0.00027);
  BoundaryInflow d;
  d.d.assign(g.n_links(), 0.0);
  const double total0 = std::accumulate(st.x.begin(), st.x.end(), 0.0);
  long clamped = 0;
  for (int k = 0; k < 10000; ++k) {
    StepOutput out = model.step(st, d);
    st = std::move(out.state);
    clamped += out.clamped;
  }
  const double drift = std::abs(std::accumulate(st.x.begin(), st.x.end(), 0.0) - total0);
  if (drift > 1e-6) return "vehicle-count drift " + std::to_string(drift);
  if (clamped != 0) return "clamp register " + std::to_string(clamped);
  return {};
}

// ---------------------------------------------------------------------------
// A4: speed controller vs exhaustive grid search on 100 seeded instances

std::string check_a4() {
  std::mt19937_64 rng(9100);
  for (int trial = 0; trial < 100; ++trial) {
    const MpcProblem pb = random_mpc_instance(rng);
    const MpcResult got = solve_mpc(pb);
    const GridOracle want = mpc_grid_oracle(pb);
    if (got.ok() != want.feasible)
      return "trial " + std::to_string(trial) + ": feasibility verdicts disagree";
    if (!got.ok()) continue;
    if (got.profile->cost > want.cost + 1e-3)
      return "trial " + std::to_string(trial) + ": cost " + std::to_string(got.profile->cost) +
             " vs grid " + std::to_string(want.cost);
    // re-check every constraint by direct substitution
    double p = pb.p0, e = pb.e0_kwh;
    for (int h = 0; h < pb.horizon_steps; ++h) {
      const double u = got.profile->speeds_kmh[static_cast<std::size_t>(h)];
      if (u < -1e-9 || u > pb.speed_cap_kmh + 1e-9)
        return "trial " + std::to_string(trial) + ": speed bound violated";
      p += u * pb.dt_h / pb.path_length_km;
      e = discharge_step(e, u, pb.dt_h, pb.coeffs);
    }
    if (std::abs(p - 1.0) > 1e-6)
      return "trial " + std::to_string(trial) + ": terminal progress off by " +
             std::to_string(p - 1.0);
    if (e < pb.energy_floor_kwh - 1e-9)
      return "trial " + std::to_string(trial) + ": terminal energy below the floor";
  }
  return {};
}

// ---------------------------------------------------------------------------
// A5: scripted congestion pulse forces a re-route with a distance jump

std::string check_a5() {
  const UrbanGraph g = pulse_city();
  ScenarioConfig cfg;
  cfg.sim_horizon_h = 700.0 / 3600.0;
  cfg.dispatch.t_pr_h = 600.0 / 3600.0;
  cfg.dispatch.request_kwh = 10.0;
  cfg.initial_occupancy_fraction = 0.0;
  cfg.boundary_inflow_vph = 0.0;
  cfg.pulses.push_back({90.0 / 3600.0, 4, 9, 0.999});

  std::vector<Caev> fleet(1);
  fleet[0].id = 0;
  fleet[0].current_node = 0;
  fleet[0].battery = make_partition(82.0, 20.0 / 82.0);
  fleet[0].battery.e_mob_kwh = 20.0;
  fleet[0].battery.e_gss_kwh = 10.0;

  const RunResult rr = run(cfg, g, fleet);

  // the tick-2 plan must switch target or path
  bool switched = false;
  double tick2 = 180.0 / 3600.0;
  for (const auto& ev : rr.log.events)
    if (ev.kind == "path_changed" && std::abs(ev.t_h - tick2) < 1e-9) switched = true;
  if (!switched) return "no path change at the second planning tick";

  // the distance-to-target series shows a positive jump at that tick
  bool jump = false;
  for (std::size_t k = 1; k < rr.traces.sample_times_h.size(); ++k) {
    if (std::abs(rr.traces.sample_times_h[k] - tick2) < 1e-9 &&
        rr.traces.distance_km[0][k] > rr.traces.distance_km[0][k - 1] + 1e-9)
      jump = true;
  }
  if (!jump) return "no positive distance jump at the replanning tick";

  if (!rr.metrics.vehicles[0].arrival_time_h)
    return "the vehicle never arrived";
  if (*rr.metrics.vehicles[0].arrival_time_h > cfg.dispatch.t_pr_h)
    return "arrival after t_pr";
  return {};
}

// ---------------------------------------------------------------------------
// A6: fleet filter vs brute-force minimal prefix on 50 seeded fleets

std::string check_a6() {
  std::mt19937_64 rng(7700);
  int shortfalls = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = static_cast<int>(rng() % 13);  // up to 12 vehicles
    std::vector<FleetCandidate> fleet;
    for (int i = 0; i < n; ++i)
      fleet.push_back({static_cast<std::size_t>(i), static_cast<std::uint32_t>(i),
                       uniform(rng, 1.0, 19.0), uniform(rng, 0.01, 0.2)});
    const double request = uniform(rng, 0.0, 140.0);
    const FleetSelection sel = select_fleet(fleet, request);

    std::vector<FleetCandidate> sorted = fleet;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
      return a.free_flow_cost_h != b.free_flow_cost_h ? a.free_flow_cost_h < b.free_flow_cost_h
                                                      : a.id < b.id;
    });
    std::size_t best_k = sorted.size() + 1;
    for (std::size_t k = 0; k <= sorted.size(); ++k) {
      double sum = 0.0;
      for (std::size_t i = 0; i < k; ++i) sum += sorted[i].e_gss_kwh;
      if (sum >= request) {
        best_k = k;
        break;
      }
    }
    if (best_k <= sorted.size()) {
      if (!sel.request_met || sel.selected.size() != best_k)
        return "trial " + std::to_string(trial) + ": prefix size mismatch";
      for (std::size_t i = 0; i < best_k; ++i)
        if (sel.selected[i].id != sorted[i].id)
          return "trial " + std::to_string(trial) + ": selection order mismatch";
    } else {
      ++shortfalls;
      double covered = 0.0;
      for (const auto& c : sorted) covered += c.e_gss_kwh;
      if (sel.request_met || sel.selected.size() != sorted.size() ||
          std::abs(sel.shortfall_kwh - (request - covered)) > 1e-9)
        return "trial " + std::to_string(trial) + ": shortfall mismatch";
    }
  }
  if (shortfalls == 0) return "generator produced no shortfall cases";
  return {};
}

// ---------------------------------------------------------------------------
// A7: determinism of the A1 scenario

std::string check_a7() {
  const UrbanGraph graph = gen_city(100, 4, 101);
  const ScenarioConfig cfg = protocol_config(1);

  namespace fs = std::filesystem;
  const fs::path dir1 = fs::temp_directory_path() / "v2g_accept_a7_1";
  const fs::path dir2 = fs::temp_directory_path() / "v2g_accept_a7_2";
  fs::remove_all(dir1);
  fs::remove_all(dir2);
  run(cfg, graph, std::nullopt, dir1.string());
  run(cfg, graph, std::nullopt, dir2.string());
  const bool metrics_same = slurp(dir1 / "metrics.json") == slurp(dir2 / "metrics.json");
  const bool log_same = slurp(dir1 / "dispatch.jsonl") == slurp(dir2 / "dispatch.jsonl");
  fs::remove_all(dir1);
  fs::remove_all(dir2);
  if (!metrics_same) return "metrics JSON differs between identical runs";
  if (!log_same) return "dispatch log differs between identical runs";
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {"A1 protocol-shaped end-to-end runs (10 seeds)", check_a1},
      {"A2 routing oracle equivalence (200 graphs)", check_a2},
      {"A3 traffic conservation (1e4 steps)", check_a3},
      {"A4 speed-control oracle (100 instances)", check_a4},
      {"A5 re-planning responsiveness (congestion pulse)", check_a5},
      {"A6 fleet filter minimality (50 fleets)", check_a6},
      {"A7 bit-identical reruns", check_a7},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    if (argc > 1 && c.name.rfind(argv[1], 0) != 0) continue;
    std::string reason;
    try {
      reason = c.check();
    } catch (const std::exception& e) {
      reason = std::string("exception: ") + e.what();
    }
    if (reason.empty()) {
      std::printf("PASS  %s\n", c.name.c_str());
    } else {
      std::printf("FAIL  %s — %s\n", c.name.c_str(), reason.c_str());
      ++failures;
    }
    std::fflush(stdout);
  }
  return failures;
}
