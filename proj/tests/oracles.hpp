#pragma once
// Independent oracles for the test suites: exhaustive simple-path search for
// the constrained routing problem, exhaustive grid search for the speed
// controller, and seeded instance generators. The oracles share no code with
// the implementations they check.

#include <optional>
#include <random>
#include <vector>

#include "v2g/mpc.hpp"
#include "v2g/rcsp.hpp"

namespace v2g::testing {

double u01(std::mt19937_64& rng);
double uniform(std::mt19937_64& rng, double lo, double hi);

// Minimal graph builder for hand-made instances; node ids are 0..n_nodes-1.
struct LinkLite {
  NodeId from;
  NodeId to;
  double length_km = 0.5;
  double v_ff_kmh = 50.0;
  double exit_rate = 0.0;
};
UrbanGraph make_graph(int n_nodes, const std::vector<LinkLite>& links);

// Random weight overlay for routing tests.
EdgeWeights random_weights(const UrbanGraph& graph, std::mt19937_64& rng);

// Random connected-ish digraph with <= max_nodes nodes and <= max_links links.
UrbanGraph random_digraph(std::mt19937_64& rng, int max_nodes = 10, int max_links = 25);

struct BruteRcsp {
  std::optional<PathSolution> best;       // min-cost feasible simple path
  bool any_path = false;                  // some simple path exists at all
  bool time_feasible_exists = false;      // some path within the time budget
  bool energy_feasible_exists = false;    // some path within the energy budget
};
BruteRcsp brute_force_rcsp(const UrbanGraph& graph, const EdgeWeights& weights,
                           std::size_t origin, std::size_t target, const Budgets& budgets);

struct GridOracle {
  bool feasible = false;
  double cost = 0;
  std::vector<double> speeds;
};
// Exhaustive search over speed sequences on a fixed grid; assumes the cap and
// the required speed total are grid-exact.
GridOracle mpc_grid_oracle(const MpcProblem& problem, double grid_kmh = 0.5);

// Instances whose feasibility verdict is identical on the grid and on the
// continuum (budgets are sampled away from the gap between the two minima).
MpcProblem random_mpc_instance(std::mt19937_64& rng);

// Hand-built 12-node city with two V2G nodes (7 and 9) and a narrow link
// (4,9) on the fast route to 9. Jamming that link between planning ticks
// flips the best target from 9 to 7 for a vehicle that starts at node 0.
UrbanGraph pulse_city();

}  // namespace v2g::testing
