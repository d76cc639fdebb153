#include "v2g/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <set>
#include <sstream>

#include "json_util.hpp"

namespace v2g {

double derive_capacity(double length_km, double spacing_km) {
  if (length_km <= 0 || spacing_km <= 0)
    throw ValidationError("derive_capacity requires positive length and spacing");
  return length_km / spacing_km;
}

UrbanGraph::UrbanGraph(std::vector<Node> nodes, std::vector<Link> links, SignalTiming timing)
    : nodes_(std::move(nodes)), links_(std::move(links)), signal_(timing) {
  build_indexes();
  validate();
}

std::size_t UrbanGraph::index_of(NodeId id) const {
  auto it = node_index_.find(id);
  if (it == node_index_.end())
    throw ValidationError("unknown node id " + std::to_string(id));
  return it->second;
}

std::optional<std::size_t> UrbanGraph::find_node(NodeId id) const {
  auto it = node_index_.find(id);
  if (it == node_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> UrbanGraph::find_link(NodeId from, NodeId to) const {
  auto fi = find_node(from);
  if (!fi) return std::nullopt;
  for (std::size_t e : out_links_[*fi])
    if (links_[e].to == to) return e;
  return std::nullopt;
}

std::span<const std::size_t> UrbanGraph::out_links(std::size_t node) const {
  return out_links_[node];
}

std::span<const std::size_t> UrbanGraph::in_links(std::size_t node) const {
  return in_links_[node];
}

std::optional<std::size_t> UrbanGraph::reverse_of(std::size_t e) const {
  return find_link(links_[e].to, links_[e].from);
}

bool UrbanGraph::is_traffic_light(std::size_t node) const {
  return nodes_[node].tl_stages.has_value();
}

const std::vector<std::vector<std::size_t>>& UrbanGraph::stages(std::size_t node) const {
  return stages_[node];
}

std::vector<std::size_t> UrbanGraph::v2g_nodes(int district) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].is_v2g && nodes_[i].district && *nodes_[i].district == district)
      out.push_back(i);
  std::sort(out.begin(), out.end(),
            [&](std::size_t a, std::size_t b) { return nodes_[a].id < nodes_[b].id; });
  return out;
}

std::vector<std::size_t> UrbanGraph::all_v2g_nodes() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].is_v2g) out.push_back(i);
  return out;
}

std::vector<std::size_t> UrbanGraph::sink_attractors() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].is_sink_attractor) out.push_back(i);
  return out;
}

std::vector<int> UrbanGraph::districts() const {
  std::set<int> ids;
  for (const Node& n : nodes_)
    if (n.district) ids.insert(*n.district);
  return {ids.begin(), ids.end()};
}

void UrbanGraph::build_indexes() {
  node_index_.clear();
  node_index_.reserve(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!node_index_.emplace(nodes_[i].id, i).second)
      throw ValidationError("duplicate node id " + std::to_string(nodes_[i].id));
  }

  link_from_.resize(links_.size());
  link_to_.resize(links_.size());
  out_links_.assign(nodes_.size(), {});
  in_links_.assign(nodes_.size(), {});
  for (std::size_t e = 0; e < links_.size(); ++e) {
    auto fi = find_node(links_[e].from);
    auto ti = find_node(links_[e].to);
    if (!fi || !ti)
      throw ValidationError("link (" + std::to_string(links_[e].from) + "," +
                            std::to_string(links_[e].to) + ") references an unknown node");
    link_from_[e] = *fi;
    link_to_[e] = *ti;
    out_links_[*fi].push_back(e);
    in_links_[*ti].push_back(e);
  }

  // Resolve TL stages to incoming link indices.
  stages_.assign(nodes_.size(), {});
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i].tl_stages) continue;
    for (const auto& stage_nodes : *nodes_[i].tl_stages) {
      std::vector<std::size_t> stage;
      for (NodeId pred : stage_nodes) {
        auto e = find_link(pred, nodes_[i].id);
        if (!e)
          throw ValidationError("TL stage at node " + std::to_string(nodes_[i].id) +
                                " references non-incoming predecessor " + std::to_string(pred));
        stage.push_back(*e);
      }
      stages_[i].push_back(std::move(stage));
    }
  }

  stage_count_.assign(links_.size(), 0);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    for (const auto& stage : stages_[i])
      for (std::size_t e : stage) ++stage_count_[e];
  }
}

void UrbanGraph::validate() const {
  if (signal_.cycle_time_h <= 0) throw ValidationError("signal cycle time must be positive");
  if (signal_.green_time_h <= 0 || signal_.green_time_h >= signal_.cycle_time_h)
    throw ValidationError("signal green time must lie in (0, cycle time)");
  if (signal_.lost_time_h < 0) throw ValidationError("signal lost time must be non-negative");

  std::set<std::pair<NodeId, NodeId>> seen;
  for (const Link& l : links_) {
    std::string tag = "link (" + std::to_string(l.from) + "," + std::to_string(l.to) + ")";
    if (l.from == l.to) throw ValidationError(tag + " is a self-loop");
    if (!seen.emplace(l.from, l.to).second) throw ValidationError("duplicate " + tag);
    if (!(l.length_km > 0)) throw ValidationError(tag + ": length must be positive");
    if (!(l.free_flow_speed_kmh > 0)) throw ValidationError(tag + ": free-flow speed must be positive");
    if (!(l.capacity_veh > 0)) throw ValidationError(tag + ": capacity must be positive");
    if (l.saturation_flow_vph < 0) throw ValidationError(tag + ": saturation flow must be non-negative");
    if (l.exit_rate < 0 || l.exit_rate > 1) throw ValidationError(tag + ": exit rate outside [0,1]");
    if (!(l.energy_cost_kwh > 0)) throw ValidationError(tag + ": energy cost must be positive");
  }

  for (const Node& n : nodes_) {
    if (n.is_sink_attractor && !n.is_terminal)
      throw ValidationError("node " + std::to_string(n.id) +
                            " is a sink attractor but not a terminal");
    if (n.is_v2g && !n.district)
      throw ValidationError("V2G node " + std::to_string(n.id) + " has no district");
  }
  for (int d : districts()) {
    if (v2g_nodes(d).empty())
      throw ValidationError("district " + std::to_string(d) + " has no V2G node");
  }

  // Every incoming link of a TL junction must hold ROW in at least one stage.
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i].tl_stages) continue;
    if (stages_[i].empty())
      throw ValidationError("TL node " + std::to_string(nodes_[i].id) + " has no stages");
    for (const auto& stage : stages_[i])
      if (stage.empty())
        throw ValidationError("TL node " + std::to_string(nodes_[i].id) + " has an empty stage");
    for (std::size_t e : in_links_[i]) {
      if (stage_count_[e] == 0)
        throw ValidationError("incoming link (" + std::to_string(links_[e].from) + "," +
                              std::to_string(links_[e].to) + ") appears in no stage");
    }
  }
}

TurningRateMap TurningRateMap::from_rows(std::vector<std::vector<Share>> rows) {
  TurningRateMap map;
  map.rows_ = std::move(rows);
  map.sources_.assign(map.rows_.size(), {});
  for (std::size_t in = 0; in < map.rows_.size(); ++in) {
    if (map.rows_[in].empty()) map.empty_rows_.push_back(in);
    for (const Share& s : map.rows_[in])
      map.sources_[s.out_link].push_back({in, s.rate});
  }
  return map;
}

double TurningRateMap::rate(std::size_t in_link, std::size_t out_link) const {
  for (const Share& s : rows_[in_link])
    if (s.out_link == out_link) return s.rate;
  return 0.0;
}

namespace {

// Length-weighted distance from every node to its nearest sink attractor,
// following link directions (Dijkstra on the reversed graph).
std::vector<double> distance_to_sinks(const UrbanGraph& g) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(g.n_nodes(), inf);
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> pq;
  for (std::size_t s : g.sink_attractors()) {
    dist[s] = 0.0;
    pq.push({0.0, s});
  }
  while (!pq.empty()) {
    auto [d, v] = pq.top();
    pq.pop();
    if (d > dist[v]) continue;
    for (std::size_t e : g.in_links(v)) {
      std::size_t u = g.link_from(e);
      double nd = d + g.link(e).length_km;
      if (nd < dist[u]) {
        dist[u] = nd;
        pq.push({nd, u});
      }
    }
  }
  return dist;
}

}  // namespace

TurningRateMap compute_turning_rates(const UrbanGraph& g, double delta0_km) {
  if (g.sink_attractors().empty())
    throw ValidationError("turning rates need at least one sink attractor");
  if (!(delta0_km > 0)) throw ValidationError("delta0 must be positive");

  const std::vector<double> dist = distance_to_sinks(g);
  std::vector<std::vector<TurningRateMap::Share>> rows(g.n_links());

  for (std::size_t e_in = 0; e_in < g.n_links(); ++e_in) {
    const std::size_t junction = g.link_to(e_in);
    const std::size_t upstream = g.link_from(e_in);

    std::vector<std::size_t> candidates;
    for (std::size_t e_out : g.out_links(junction)) {
      if (g.link_to(e_out) == upstream) continue;  // u-turn ban
      candidates.push_back(e_out);
    }
    if (candidates.empty()) continue;  // row stays empty; flow vanishes here

    std::vector<double> weights(candidates.size(), 0.0);
    double total = 0.0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      double d = dist[g.link_to(candidates[c])];
      if (std::isfinite(d)) {
        weights[c] = 1.0 / (d + delta0_km);
        total += weights[c];
      }
    }
    if (total == 0.0) {
      // No sink reachable through any candidate: spread uniformly.
      for (double& w : weights) w = 1.0;
      total = static_cast<double>(candidates.size());
    }
    auto& row = rows[e_in];
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      double r = weights[c] / total;
      if (r > 0.0) row.push_back({candidates[c], r});
    }
  }
  return TurningRateMap::from_rows(std::move(rows));
}

namespace {

using nlohmann::json;
using detail::get_optional;
using detail::get_required;
using detail::reject_unknown_keys;

Node parse_node(const json& j) {
  if (!j.is_object()) throw ParseError("node record must be an object");
  reject_unknown_keys(j, {"id", "is_v2g", "district", "is_source", "is_terminal",
                          "is_sink_attractor", "tl_stages"},
                      "node record");
  Node n;
  auto id = get_required<std::int64_t>(j, "id", "node record");
  if (id < 0 || id > std::numeric_limits<NodeId>::max())
    throw ParseError("node id out of range");
  n.id = static_cast<NodeId>(id);
  n.is_v2g = get_optional<bool>(j, "is_v2g", "node record").value_or(false);
  n.district = get_optional<int>(j, "district", "node record");
  n.is_source = get_optional<bool>(j, "is_source", "node record").value_or(false);
  n.is_terminal = get_optional<bool>(j, "is_terminal", "node record").value_or(false);
  n.is_sink_attractor = get_optional<bool>(j, "is_sink_attractor", "node record").value_or(false);
  n.tl_stages = get_optional<std::vector<std::vector<NodeId>>>(j, "tl_stages", "node record");
  return n;
}

}  // namespace

UrbanGraph parse_graph(const std::string& json_text, const GraphDefaults& defaults) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("graph file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("graph file must be a JSON object");
  reject_unknown_keys(doc, {"nodes", "edges", "signal_timing"}, "graph file");

  std::vector<Node> nodes;
  for (const json& jn : get_required<json>(doc, "nodes", "graph file"))
    nodes.push_back(parse_node(jn));

  // Terminal lookup for the default exit rate.
  std::set<NodeId> terminals;
  for (const Node& n : nodes)
    if (n.is_terminal) terminals.insert(n.id);

  std::vector<Link> links;
  for (const json& je : get_required<json>(doc, "edges", "graph file")) {
    if (!je.is_object()) throw ParseError("edge record must be an object");
    reject_unknown_keys(je, {"from", "to", "length_km", "v_ff_kmh", "sat_flow_vph",
                             "capacity_veh", "exit_rate"},
                        "edge record");
    Link l;
    l.from = static_cast<NodeId>(get_required<std::int64_t>(je, "from", "edge record"));
    l.to = static_cast<NodeId>(get_required<std::int64_t>(je, "to", "edge record"));
    l.length_km = get_required<double>(je, "length_km", "edge record");
    l.free_flow_speed_kmh = get_required<double>(je, "v_ff_kmh", "edge record");
    l.saturation_flow_vph =
        get_optional<double>(je, "sat_flow_vph", "edge record").value_or(defaults.saturation_flow_vph);
    if (auto cap = get_optional<double>(je, "capacity_veh", "edge record"))
      l.capacity_veh = *cap;
    else
      l.capacity_veh = derive_capacity(l.length_km, defaults.spacing_km);
    if (auto er = get_optional<double>(je, "exit_rate", "edge record"))
      l.exit_rate = *er;
    else
      l.exit_rate = terminals.count(l.to) ? 1.0 : 0.0;
    l.energy_cost_kwh = defaults.energy_rate_kwh_per_km * l.length_km;
    links.push_back(l);
  }

  SignalTiming timing;
  if (auto it = doc.find("signal_timing"); it != doc.end()) {
    reject_unknown_keys(*it, {"cycle_time_h", "lost_time_h", "green_time_h"}, "signal_timing");
    timing.cycle_time_h = get_required<double>(*it, "cycle_time_h", "signal_timing");
    timing.lost_time_h = get_required<double>(*it, "lost_time_h", "signal_timing");
    timing.green_time_h = get_required<double>(*it, "green_time_h", "signal_timing");
  }

  return UrbanGraph(std::move(nodes), std::move(links), timing);
}

UrbanGraph load_graph(const std::string& path, const GraphDefaults& defaults) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open graph file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_graph(ss.str(), defaults);
}

std::string graph_to_json(const UrbanGraph& g) {
  json doc;
  json nodes = json::array();
  for (const Node& n : g.nodes()) {
    json jn;
    jn["id"] = n.id;
    jn["is_v2g"] = n.is_v2g;
    if (n.district) jn["district"] = *n.district;
    jn["is_source"] = n.is_source;
    jn["is_terminal"] = n.is_terminal;
    jn["is_sink_attractor"] = n.is_sink_attractor;
    if (n.tl_stages) jn["tl_stages"] = *n.tl_stages;
    nodes.push_back(jn);
  }
  json edges = json::array();
  for (const Link& l : g.links()) {
    json je;
    je["from"] = l.from;
    je["to"] = l.to;
    je["length_km"] = l.length_km;
    je["v_ff_kmh"] = l.free_flow_speed_kmh;
    je["sat_flow_vph"] = l.saturation_flow_vph;
    je["capacity_veh"] = l.capacity_veh;
    je["exit_rate"] = l.exit_rate;
    edges.push_back(je);
  }
  doc["nodes"] = nodes;
  doc["edges"] = edges;
  doc["signal_timing"] = {{"cycle_time_h", g.signal_timing().cycle_time_h},
                          {"lost_time_h", g.signal_timing().lost_time_h},
                          {"green_time_h", g.signal_timing().green_time_h}};
  return doc.dump(2) + "\n";
}

void write_graph(const UrbanGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write graph file: " + path);
  out << graph_to_json(g);
}

}  // namespace v2g
