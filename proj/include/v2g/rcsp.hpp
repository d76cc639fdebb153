#pragma once
// Resource-constrained shortest paths: heuristic-guided label setting with
// Pareto dominance pruning over (travel time, energy), plus target selection
// over a district's V2G candidates.

#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "v2g/network.hpp"
#include "v2g/traffic.hpp"

namespace v2g {

// Per-link weights frozen at a planning instant. Links at or beyond the
// occupancy clamp are excluded from the search graph.
struct EdgeWeights {
  std::vector<double> time_h;
  std::vector<double> energy_kwh;
  std::vector<double> length_km;
  std::vector<char> excluded;
};

EdgeWeights make_edge_weights(const UrbanGraph& graph, std::span<const double> x_veh,
                              double occupancy_cap = kOccupancyCap);
EdgeWeights free_flow_weights(const UrbanGraph& graph);

struct Budgets {
  double time_h = std::numeric_limits<double>::infinity();
  double energy_kwh = std::numeric_limits<double>::infinity();
};

struct PathSolution {
  std::vector<std::size_t> edges;  // ordered link indices, origin to target
  double cost_h = 0;
  double energy_kwh = 0;
  double length_km = 0;
};

enum class InfeasibleReason {
  Disconnected,   // no path at all in the non-excluded graph
  TimeBudget,     // even the fastest path misses the deadline
  EnergyBudget,   // even the leanest path exceeds the mobility energy
  Combined,       // each budget is satisfiable alone but not jointly
};

const char* to_string(InfeasibleReason reason);

struct ParetoEntry {
  NodeId node;
  double time_h;
  double energy_kwh;
};

struct SolveOptions {
  bool use_energy_bound = false;        // admissible backward min-energy pruning
  bool disable_dominance = false;       // testing hook; never changes the cost
  std::vector<ParetoEntry>* frontier_dump = nullptr;
};

// Exact minimum remaining travel time to the target for every node
// (backward one-to-all shortest path); +inf where the target is unreachable.
std::vector<double> heuristic_bound(const UrbanGraph& graph, const EdgeWeights& weights,
                                    std::size_t target);

struct RcspResult {
  std::optional<PathSolution> path;
  std::optional<InfeasibleReason> reason;
  std::size_t labels_created = 0;
  std::size_t labels_expanded = 0;
};

RcspResult solve_rcsp(const UrbanGraph& graph, const EdgeWeights& weights,
                      std::size_t origin, std::size_t target, const Budgets& budgets,
                      const SolveOptions& options = {});

struct TargetChoice {
  std::optional<std::pair<std::size_t, PathSolution>> best;  // node index + path
  std::vector<std::pair<std::size_t, InfeasibleReason>> failures;
};

// Solve one RCSP per candidate and keep the cheapest; cost ties break by
// ascending node id.
TargetChoice select_target(const UrbanGraph& graph, const EdgeWeights& weights,
                           std::size_t origin, std::span<const std::size_t> candidates,
                           const Budgets& budgets, const SolveOptions& options = {});

}  // namespace v2g
