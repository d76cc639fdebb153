#pragma once
// Urban road network: junctions, directed links, districts, V2G stations,
// signal timing and the inverse-distance turning-rate map used by the
// store-and-forward traffic dynamics.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace v2g {

using NodeId = std::uint32_t;

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shared by all signalized junctions.
struct SignalTiming {
  double cycle_time_h = 1.0 / 40.0;     // 90 s
  double lost_time_h = 10.0 / 3600.0;   // 10 s, bookkeeping only
  double green_time_h = 1.0 / 120.0;    // 30 s effective green per stage
};

struct Node {
  NodeId id = 0;
  bool is_v2g = false;
  std::optional<int> district;
  bool is_source = false;          // boundary inflow enters links leaving this node
  bool is_terminal = false;        // dead end or extra-urban boundary
  bool is_sink_attractor = false;  // turning rates steer background flow here
  // One stage = predecessor node ids granted right of way during that stage.
  // Absent => plain right-of-way junction.
  std::optional<std::vector<std::vector<NodeId>>> tl_stages;
};

struct Link {
  NodeId from = 0;
  NodeId to = 0;
  double length_km = 0.0;
  double free_flow_speed_kmh = 0.0;
  double capacity_veh = 0.0;
  double saturation_flow_vph = 0.0;
  double exit_rate = 0.0;        // fraction of entering flow that leaves the network
  double energy_cost_kwh = 0.0;  // distance-based consumption weight
};

// Fill-in values for fields the graph file may omit.
struct GraphDefaults {
  double spacing_km = 0.007;
  double energy_rate_kwh_per_km = 0.12;
  double saturation_flow_vph = 1500.0;
};

// capacity = length / average vehicle spacing
double derive_capacity(double length_km, double spacing_km);

class UrbanGraph {
 public:
  UrbanGraph(std::vector<Node> nodes, std::vector<Link> links,
             SignalTiming timing = {});

  std::size_t n_nodes() const { return nodes_.size(); }
  std::size_t n_links() const { return links_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Link>& links() const { return links_; }
  const Node& node(std::size_t i) const { return nodes_[i]; }
  const Link& link(std::size_t e) const { return links_[e]; }
  const SignalTiming& signal_timing() const { return signal_; }

  std::size_t index_of(NodeId id) const;
  std::optional<std::size_t> find_node(NodeId id) const;
  std::optional<std::size_t> find_link(NodeId from, NodeId to) const;

  std::size_t link_from(std::size_t e) const { return link_from_[e]; }
  std::size_t link_to(std::size_t e) const { return link_to_[e]; }
  std::span<const std::size_t> out_links(std::size_t node) const;
  std::span<const std::size_t> in_links(std::size_t node) const;
  // Link (to, from) if it exists.
  std::optional<std::size_t> reverse_of(std::size_t e) const;

  bool is_traffic_light(std::size_t node) const;
  // Stages of a TL junction as incoming link indices.
  const std::vector<std::vector<std::size_t>>& stages(std::size_t node) const;
  // Number of stages granting this link right of way at its downstream
  // junction; 0 when the downstream junction is plain right-of-way.
  int stage_count_with_row(std::size_t e) const { return stage_count_[e]; }

  // V2G node indices of a district, ascending by node id.
  std::vector<std::size_t> v2g_nodes(int district) const;
  std::vector<std::size_t> all_v2g_nodes() const;
  std::vector<std::size_t> sink_attractors() const;
  std::vector<int> districts() const;

 private:
  void build_indexes();
  void validate() const;

  std::vector<Node> nodes_;
  std::vector<Link> links_;
  SignalTiming signal_;

  std::unordered_map<NodeId, std::size_t> node_index_;
  std::vector<std::size_t> link_from_, link_to_;
  std::vector<std::vector<std::size_t>> out_links_, in_links_;
  std::vector<std::vector<std::vector<std::size_t>>> stages_;  // per node
  std::vector<int> stage_count_;                               // per link
};

// Fraction of the flow leaving each incoming link that turns onto each
// outgoing link of the same junction. Rows are indexed by incoming link.
class TurningRateMap {
 public:
  struct Share {
    std::size_t out_link;
    double rate;
  };
  struct Contribution {
    std::size_t in_link;
    double rate;
  };

  static TurningRateMap from_rows(std::vector<std::vector<Share>> rows);

  std::size_t n_links() const { return rows_.size(); }
  const std::vector<Share>& row(std::size_t in_link) const { return rows_[in_link]; }
  double rate(std::size_t in_link, std::size_t out_link) const;
  // Transposed view used by the traffic kernel: which upstream links feed
  // a given link, and with what share.
  const std::vector<Contribution>& inflow_sources(std::size_t link) const {
    return sources_[link];
  }
  // Incoming links that ended up with no admissible outgoing candidate.
  const std::vector<std::size_t>& empty_rows() const { return empty_rows_; }

 private:
  std::vector<std::vector<Share>> rows_;
  std::vector<std::vector<Contribution>> sources_;
  std::vector<std::size_t> empty_rows_;
};

// Sink-steered turning rates: candidates are the non-reverse outgoing links,
// weighted by 1 / (distance-to-nearest-sink + delta0) and normalized.
// Junctions from which no sink is reachable fall back to uniform shares.
TurningRateMap compute_turning_rates(const UrbanGraph& graph,
                                     double delta0_km = 0.1);

UrbanGraph load_graph(const std::string& path, const GraphDefaults& defaults = {});
UrbanGraph parse_graph(const std::string& json_text, const GraphDefaults& defaults = {});
void write_graph(const UrbanGraph& graph, const std::string& path);
std::string graph_to_json(const UrbanGraph& graph);

}  // namespace v2g
