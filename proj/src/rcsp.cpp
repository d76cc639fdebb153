#include "v2g/rcsp.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <tuple>

namespace v2g {

EdgeWeights make_edge_weights(const UrbanGraph& g, std::span<const double> x_veh,
                              double occupancy_cap) {
  if (x_veh.size() != g.n_links())
    throw ValidationError("occupancy vector does not match the graph");
  EdgeWeights w;
  const std::size_t m = g.n_links();
  w.time_h.resize(m);
  w.energy_kwh.resize(m);
  w.length_km.resize(m);
  w.excluded.resize(m);
  for (std::size_t e = 0; e < m; ++e) {
    const Link& link = g.link(e);
    w.time_h[e] = travel_time(link, x_veh[e]);
    w.energy_kwh[e] = link.energy_cost_kwh;
    w.length_km[e] = link.length_km;
    w.excluded[e] = (x_veh[e] / link.capacity_veh >= occupancy_cap) ? 1 : 0;
  }
  return w;
}

EdgeWeights free_flow_weights(const UrbanGraph& g) {
  std::vector<double> zeros(g.n_links(), 0.0);
  return make_edge_weights(g, zeros);
}

const char* to_string(InfeasibleReason reason) {
  switch (reason) {
    case InfeasibleReason::Disconnected: return "disconnected";
    case InfeasibleReason::TimeBudget: return "time_budget";
    case InfeasibleReason::EnergyBudget: return "energy_budget";
    case InfeasibleReason::Combined: return "combined";
  }
  return "?";
}

namespace {

// Backward one-to-all shortest path under an arbitrary per-link weight.
std::vector<double> backward_bound(const UrbanGraph& g, const EdgeWeights& w,
                                   std::span<const double> link_weight, std::size_t target) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(g.n_nodes(), inf);
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> pq;
  dist[target] = 0.0;
  pq.push({0.0, target});
  while (!pq.empty()) {
    auto [d, v] = pq.top();
    pq.pop();
    if (d > dist[v]) continue;
    for (std::size_t e : g.in_links(v)) {
      if (w.excluded[e]) continue;
      std::size_t u = g.link_from(e);
      double nd = d + link_weight[e];
      if (nd < dist[u]) {
        dist[u] = nd;
        pq.push({nd, u});
      }
    }
  }
  return dist;
}

struct LabelRec {
  std::size_t node;
  double time_h;
  double energy_kwh;
  double dist_km;
  std::int32_t parent;    // index into the arena, -1 at the origin
  std::int32_t via_link;  // -1 at the origin
  bool dominated = false;
};

// Min-priority queue key: f = time + heuristic, then energy, then node id,
// then creation order.
using QueueEntry = std::tuple<double, double, NodeId, std::uint32_t>;

PathSolution reconstruct(const std::vector<LabelRec>& arena, std::uint32_t leaf,
                         const EdgeWeights& w) {
  PathSolution sol;
  const LabelRec& final_label = arena[leaf];
  sol.cost_h = final_label.time_h;
  sol.energy_kwh = final_label.energy_kwh;
  sol.length_km = final_label.dist_km;
  for (std::int32_t i = static_cast<std::int32_t>(leaf); arena[i].via_link >= 0;
       i = arena[i].parent)
    sol.edges.push_back(static_cast<std::size_t>(arena[i].via_link));
  std::reverse(sol.edges.begin(), sol.edges.end());
  (void)w;
  return sol;
}

}  // namespace

std::vector<double> heuristic_bound(const UrbanGraph& g, const EdgeWeights& w,
                                    std::size_t target) {
  return backward_bound(g, w, w.time_h, target);
}

RcspResult solve_rcsp(const UrbanGraph& g, const EdgeWeights& w, std::size_t origin,
                      std::size_t target, const Budgets& budgets, const SolveOptions& options) {
  RcspResult result;
  if (origin >= g.n_nodes() || target >= g.n_nodes())
    throw ValidationError("origin or target outside the graph");

  if (origin == target) {
    result.path = PathSolution{};
    return result;
  }

  const std::vector<double> h = heuristic_bound(g, w, target);
  if (std::isinf(h[origin])) {
    result.reason = InfeasibleReason::Disconnected;
    return result;
  }
  if (h[origin] > budgets.time_h) {
    result.reason = InfeasibleReason::TimeBudget;
    return result;
  }

  std::vector<double> h_energy;
  if (options.use_energy_bound)
    h_energy = backward_bound(g, w, w.energy_kwh, target);

  std::vector<LabelRec> arena;
  // Pareto frontier per node as arena indices, kept mutually non-dominated.
  std::vector<std::vector<std::uint32_t>> frontier(g.n_nodes());
  std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<>> queue;

  auto push_label = [&](std::size_t node, double t, double e, double d, std::int32_t parent,
                        std::int32_t via) {
    if (!options.disable_dominance) {
      for (std::uint32_t idx : frontier[node]) {
        const LabelRec& held = arena[idx];
        if (held.time_h <= t && held.energy_kwh <= e) return;  // dominated or duplicate
      }
    }
    auto li = static_cast<std::uint32_t>(arena.size());
    arena.push_back({node, t, e, d, parent, via});
    ++result.labels_created;
    if (!options.disable_dominance) {
      auto& fr = frontier[node];
      for (std::uint32_t idx : fr)
        if (t <= arena[idx].time_h && e <= arena[idx].energy_kwh) arena[idx].dominated = true;
      fr.erase(std::remove_if(fr.begin(), fr.end(),
                              [&](std::uint32_t idx) { return arena[idx].dominated; }),
               fr.end());
      fr.push_back(li);
    }
    queue.emplace(t + h[node], e, g.node(node).id, li);
  };

  push_label(origin, 0.0, 0.0, 0.0, -1, -1);

  std::optional<std::uint32_t> best;
  while (!queue.empty()) {
    auto [f, e_key, id_key, li] = queue.top();
    queue.pop();
    const LabelRec label = arena[li];
    if (label.dominated) continue;
    if (label.node == target) {
      best = li;
      break;  // first target pop is optimal: h is exact and consistent
    }
    ++result.labels_expanded;
    for (std::size_t edge : g.out_links(label.node)) {
      if (w.excluded[edge]) continue;
      const std::size_t to = g.link_to(edge);
      const double nt = label.time_h + w.time_h[edge];
      const double ne = label.energy_kwh + w.energy_kwh[edge];
      if (nt + h[to] > budgets.time_h) continue;
      const double energy_to_go = options.use_energy_bound ? h_energy[to] : 0.0;
      if (ne + energy_to_go > budgets.energy_kwh) continue;
      push_label(to, nt, ne, label.dist_km + w.length_km[edge], static_cast<std::int32_t>(li),
                 static_cast<std::int32_t>(edge));
    }
  }

  if (options.frontier_dump) {
    for (std::size_t n = 0; n < g.n_nodes(); ++n)
      for (std::uint32_t idx : frontier[n])
        options.frontier_dump->push_back({g.node(n).id, arena[idx].time_h, arena[idx].energy_kwh});
  }

  if (best) {
    result.path = reconstruct(arena, *best, w);
    return result;
  }

  // Exhausted: attribute the failure when determinable.
  const std::vector<double> e_min = backward_bound(g, w, w.energy_kwh, target);
  const bool time_ok = h[origin] <= budgets.time_h;
  const bool energy_ok = e_min[origin] <= budgets.energy_kwh;
  if (!time_ok)
    result.reason = InfeasibleReason::TimeBudget;
  else if (!energy_ok)
    result.reason = InfeasibleReason::EnergyBudget;
  else
    result.reason = InfeasibleReason::Combined;
  return result;
}

TargetChoice select_target(const UrbanGraph& g, const EdgeWeights& w, std::size_t origin,
                           std::span<const std::size_t> candidates, const Budgets& budgets,
                           const SolveOptions& options) {
  if (candidates.empty()) throw ValidationError("select_target requires candidates");

  // Evaluate in ascending node-id order so cost ties keep the lowest id.
  std::vector<std::size_t> order(candidates.begin(), candidates.end());
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return g.node(a).id < g.node(b).id; });

  TargetChoice choice;
  for (std::size_t cand : order) {
    RcspResult res = solve_rcsp(g, w, origin, cand, budgets, options);
    if (res.path) {
      if (!choice.best || res.path->cost_h < choice.best->second.cost_h)
        choice.best = {cand, std::move(*res.path)};
    } else {
      choice.failures.emplace_back(cand, *res.reason);
    }
  }
  return choice;
}

}  // namespace v2g
