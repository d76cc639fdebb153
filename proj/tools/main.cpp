// Command-line front end: run a scenario, validate inputs, or generate a
// synthetic city graph.

#include <chrono>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "v2g/scenario.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::string& graph_path,
            const std::string& fleet_path, const std::string& out_dir,
            std::optional<std::uint64_t> seed, const std::string& frontier_path) {
  v2g::ScenarioConfig cfg = v2g::load_config(config_path);
  if (seed) cfg.fleet_init.rng_seed = *seed;
  const v2g::UrbanGraph graph = v2g::load_graph(graph_path, cfg.graph_defaults());

  std::optional<std::vector<v2g::Caev>> fleet;
  if (!fleet_path.empty()) fleet = v2g::load_fleet(fleet_path);

  const auto t0 = std::chrono::steady_clock::now();
  const v2g::RunResult rr = v2g::run(cfg, graph, std::move(fleet), out_dir, frontier_path);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::cerr << "run finished in " << elapsed << " s\n";
  std::cout << rr.metrics.to_json();
  if (!rr.metrics.request_met) {
    std::cerr << "request not met: shortfall " << rr.metrics.shortfall_kwh << " kWh\n";
    return 2;
  }
  return 0;
}

int cmd_validate(const std::string& config_path, const std::string& graph_path) {
  const v2g::ScenarioConfig cfg = v2g::load_config(config_path);
  const v2g::UrbanGraph graph = v2g::load_graph(graph_path, cfg.graph_defaults());
  const v2g::TurningRateMap rates = v2g::compute_turning_rates(graph, cfg.turn_delta0_km);
  if (graph.v2g_nodes(cfg.dispatch.district).empty())
    throw v2g::ValidationError("dispatch district has no V2G node");
  if (!rates.empty_rows().empty())
    std::cerr << "warning: " << rates.empty_rows().size()
              << " incoming link(s) have no turning candidates\n";
  if (cfg.traffic_dt_h <= graph.signal_timing().cycle_time_h)
    std::cerr << "warning: traffic sample time is below the signal cycle\n";
  std::cout << "ok: " << graph.n_nodes() << " nodes, " << graph.n_links() << " links, "
            << graph.all_v2g_nodes().size() << " V2G nodes\n";
  return 0;
}

int cmd_gen_city(int nodes, int v2g, std::uint64_t seed, int district, const std::string& out) {
  const v2g::UrbanGraph graph = v2g::gen_city(nodes, v2g, seed, district);
  if (out.empty() || out == "-")
    std::cout << v2g::graph_to_json(graph);
  else
    v2g::write_graph(graph, out);
  std::cerr << "generated " << graph.n_nodes() << " nodes, " << graph.n_links() << " links\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"V2G fleet dispatch simulator"};
  app.require_subcommand(1);

  std::string config_path, graph_path, fleet_path, out_dir = "out", frontier_path;
  std::optional<std::uint64_t> seed;
  auto* run_cmd = app.add_subcommand("run", "simulate a scenario");
  run_cmd->add_option("--config", config_path, "scenario config JSON")->required();
  run_cmd->add_option("--graph", graph_path, "graph JSON")->required();
  run_cmd->add_option("--fleet", fleet_path, "fleet JSON (otherwise seeded random placement)");
  run_cmd->add_option("--out", out_dir, "output directory");
  run_cmd->add_option("--seed", seed, "override the fleet RNG seed");
  run_cmd->add_option("--dump-frontier", frontier_path,
                      "CSV dump of the label frontier of the first planning solve");

  std::string v_config, v_graph;
  auto* validate_cmd = app.add_subcommand("validate", "check config and graph invariants");
  validate_cmd->add_option("--config", v_config, "scenario config JSON")->required();
  validate_cmd->add_option("--graph", v_graph, "graph JSON")->required();

  int g_nodes = 100, g_v2g = 4, g_district = 1;
  std::uint64_t g_seed = 1;
  std::string g_out;
  auto* gen_cmd = app.add_subcommand("gen-city", "generate a synthetic city graph");
  gen_cmd->add_option("--nodes", g_nodes, "number of junctions");
  gen_cmd->add_option("--v2g", g_v2g, "number of V2G nodes");
  gen_cmd->add_option("--seed", g_seed, "generator seed");
  gen_cmd->add_option("--district", g_district, "district id for the V2G cluster");
  gen_cmd->add_option("--out", g_out, "output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed())
      return cmd_run(config_path, graph_path, fleet_path, out_dir, seed, frontier_path);
    if (validate_cmd->parsed()) return cmd_validate(v_config, v_graph);
    if (gen_cmd->parsed()) return cmd_gen_city(g_nodes, g_v2g, g_seed, g_district, g_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
