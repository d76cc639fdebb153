// Serial vs OpenMP timing for the two hot kernels: the traffic step over
// links and the planning fan-out over vehicles. Also cross-checks that both
// code paths produce identical results.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "v2g/dispatch.hpp"
#include "v2g/scenario.hpp"
#include "v2g/traffic.hpp"

using namespace v2g;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void bench_traffic(int n_nodes, int steps) {
  const UrbanGraph g = gen_city(n_nodes, 4, 7);
  const TurningRateMap rates = compute_turning_rates(g);
  const TrafficModel model(g, rates);
  const BoundaryInflow d = uniform_source_inflow(g, 1500.0);

  TrafficState serial = model.initial_state(0.5, 0.00027);
  auto t0 = std::chrono::steady_clock::now();
  for (int k = 0; k < steps; ++k) serial = model.step_serial(serial, d).state;
  const double t_serial = seconds_since(t0);

  TrafficState parallel = model.initial_state(0.5, 0.00027);
  t0 = std::chrono::steady_clock::now();
  for (int k = 0; k < steps; ++k) parallel = model.step(parallel, d).state;
  const double t_parallel = seconds_since(t0);

  bool identical = serial.x == parallel.x;
  const double total = std::accumulate(serial.x.begin(), serial.x.end(), 0.0);
  std::printf("traffic step   %6zu links x %d steps   serial %7.3f s   omp %7.3f s   "
              "speedup %.2fx   identical=%s   (sum %.3f veh)\n",
              g.n_links(), steps, t_serial, t_parallel, t_serial / t_parallel,
              identical ? "yes" : "NO", total);
}

void bench_planning(int n_nodes, int n_vehicles) {
  const UrbanGraph g = gen_city(n_nodes, 4, 9);
  ScenarioConfig cfg;
  cfg.fleet_init.n_vehicles = n_vehicles;
  cfg.fleet_init.rng_seed = 3;
  std::vector<Caev> fleet_a = init_fleet(cfg, g);
  std::vector<Caev> fleet_b = fleet_a;
  std::vector<std::size_t> all(fleet_a.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

  DispatchConfig dcfg;
  dcfg.request_kwh = 1e9;  // keep everyone active

  const TurningRateMap rates = compute_turning_rates(g);
  const TrafficModel model(g, rates);
  const TrafficState state = model.initial_state(0.5, 0.00027);

  Dispatcher serial(g, dcfg, fleet_a, all);
  auto t0 = std::chrono::steady_clock::now();
  auto plans_serial = serial.plan_tick_serial(0.0, state.x);
  const double t_serial = seconds_since(t0);

  Dispatcher parallel(g, dcfg, fleet_b, all);
  t0 = std::chrono::steady_clock::now();
  auto plans_parallel = parallel.plan_tick(0.0, state.x);
  const double t_parallel = seconds_since(t0);

  bool identical = plans_serial.size() == plans_parallel.size();
  for (const auto& [id, plan] : plans_serial) {
    auto it = plans_parallel.find(id);
    identical = identical && it != plans_parallel.end() &&
                it->second.path.edges == plan.path.edges && it->second.target == plan.target;
  }
  std::printf("plan fan-out   %6zu nodes x %d vehicles  serial %7.3f s   omp %7.3f s   "
              "speedup %.2fx   identical=%s\n",
              g.n_nodes(), n_vehicles, t_serial, t_parallel, t_serial / t_parallel,
              identical ? "yes" : "NO");
}

}  // namespace

int main(int argc, char** argv) {
  const int nodes = argc > 1 ? std::atoi(argv[1]) : 2500;
  const int steps = argc > 2 ? std::atoi(argv[2]) : 2000;
  const int vehicles = argc > 3 ? std::atoi(argv[3]) : 64;
#ifdef _OPENMP
  std::printf("OpenMP with %d thread(s)\n", omp_get_max_threads());
#else
  std::printf("built without OpenMP; both paths run serially\n");
#endif
  bench_traffic(nodes, steps);
  bench_planning(nodes, vehicles);
  return 0;
}
