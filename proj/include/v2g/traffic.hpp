#pragma once
// Store-and-forward traffic dynamics: per-link vehicle counts advanced by
// junction-limited outflows, turning-rate inflows and boundary demand, plus
// the congestion-dependent speed and travel-time evaluation.

#include <span>
#include <vector>

#include "v2g/network.hpp"

namespace v2g {

// Occupancy is clamped below jam density so speeds stay positive and travel
// times finite.
inline constexpr double kOccupancyCap = 0.999;

struct TrafficState {
  std::size_t k = 0;          // step index
  double sample_time_h = 0;   // T
  std::vector<double> x;      // vehicles per link
};

// Boundary demand d, in veh/h per link; nonzero entries only on links
// leaving source nodes.
struct BoundaryInflow {
  std::vector<double> d;
};

BoundaryInflow uniform_source_inflow(const UrbanGraph& graph, double vph);
void validate_inflow(const UrbanGraph& graph, const BoundaryInflow& inflow);

struct FlowBreakdown {
  std::vector<double> q;  // entering flow, veh/h
  std::vector<double> s;  // exit flow, veh/h
  std::vector<double> l;  // leaving flow, veh/h
};

// Outflow of a link whose downstream junction grants permanent right of way.
double outflow_row(double x_link, double sample_time_h, double saturation_vph);
// Outflow of a link discharging into a signalized junction.
double outflow_tl(double x_link, double sample_time_h, double saturation_vph,
                  int n_stages_with_row, double green_h, double cycle_h);

// Congestion-dependent maximum speed; strictly positive thanks to the
// occupancy clamp.
double max_speed(const Link& link, double x_link);
double travel_time(const Link& link, double x_link);

struct StepOutput {
  TrafficState state;
  FlowBreakdown flows;
  int clamped = 0;  // negative counts zeroed (floating error only)
};

class TrafficModel {
 public:
  TrafficModel(const UrbanGraph& graph, const TurningRateMap& rates);
  // The model only observes the graph and rates; they must outlive it.
  TrafficModel(const UrbanGraph&&, const TurningRateMap&) = delete;
  TrafficModel(const UrbanGraph&, const TurningRateMap&&) = delete;

  // One step of the dynamics. `step` runs the per-link loops under OpenMP;
  // `step_serial` is the plain-loop reference used for testing. Both are
  // pure and produce identical results.
  StepOutput step(const TrafficState& state, const BoundaryInflow& inflow) const;
  StepOutput step_serial(const TrafficState& state, const BoundaryInflow& inflow) const;

  TrafficState initial_state(double occupancy_fraction, double sample_time_h) const;

  const UrbanGraph& graph() const { return *graph_; }
  const TurningRateMap& rates() const { return *rates_; }

 private:
  double link_outflow_veh(std::size_t e, double x, double T) const;
  void check(const TrafficState& state, const BoundaryInflow& inflow) const;

  const UrbanGraph* graph_;
  const TurningRateMap* rates_;
  std::vector<char> downstream_tl_;  // per link
};

}  // namespace v2g
