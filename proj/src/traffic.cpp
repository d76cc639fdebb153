#include "v2g/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace v2g {

BoundaryInflow uniform_source_inflow(const UrbanGraph& g, double vph) {
  BoundaryInflow inflow;
  inflow.d.assign(g.n_links(), 0.0);
  for (std::size_t e = 0; e < g.n_links(); ++e)
    if (g.node(g.link_from(e)).is_source) inflow.d[e] = vph;
  return inflow;
}

void validate_inflow(const UrbanGraph& g, const BoundaryInflow& inflow) {
  if (inflow.d.size() != g.n_links())
    throw ValidationError("inflow vector size does not match link count");
  for (std::size_t e = 0; e < g.n_links(); ++e) {
    if (inflow.d[e] < 0) throw ValidationError("negative boundary inflow");
    if (inflow.d[e] > 0 && !g.node(g.link_from(e)).is_source)
      throw ValidationError("boundary inflow on a non-source link");
  }
}

double outflow_row(double x_link, double sample_time_h, double saturation_vph) {
  return std::min(x_link / sample_time_h, saturation_vph);
}

double outflow_tl(double x_link, double sample_time_h, double saturation_vph,
                  int n_stages_with_row, double green_h, double cycle_h) {
  return std::min(x_link / sample_time_h,
                  saturation_vph * n_stages_with_row * green_h / cycle_h);
}

double max_speed(const Link& link, double x_link) {
  double occupancy = std::min(x_link / link.capacity_veh, kOccupancyCap);
  return link.free_flow_speed_kmh * (1.0 - occupancy);
}

double travel_time(const Link& link, double x_link) {
  return link.length_km / max_speed(link, x_link);
}

TrafficModel::TrafficModel(const UrbanGraph& graph, const TurningRateMap& rates)
    : graph_(&graph), rates_(&rates) {
  if (rates.n_links() != graph.n_links())
    throw ValidationError("turning-rate map does not match the graph");
  downstream_tl_.resize(graph.n_links());
  for (std::size_t e = 0; e < graph.n_links(); ++e)
    downstream_tl_[e] = graph.is_traffic_light(graph.link_to(e)) ? 1 : 0;
}

TrafficState TrafficModel::initial_state(double occupancy_fraction, double sample_time_h) const {
  TrafficState st;
  st.k = 0;
  st.sample_time_h = sample_time_h;
  st.x.resize(graph_->n_links());
  for (std::size_t e = 0; e < graph_->n_links(); ++e)
    st.x[e] = occupancy_fraction * graph_->link(e).capacity_veh;
  return st;
}

// Vehicles leaving link e during one step. Computing the min in vehicle
// units keeps the demand-limited case exact: a fully drained link lands on
// zero instead of a rounding ulp below it.
double TrafficModel::link_outflow_veh(std::size_t e, double x, double T) const {
  const Link& link = graph_->link(e);
  double cap_vph = link.saturation_flow_vph;
  if (downstream_tl_[e])
    cap_vph *= graph_->stage_count_with_row(e) * graph_->signal_timing().green_time_h /
               graph_->signal_timing().cycle_time_h;
  return std::min(x, T * cap_vph);
}

void TrafficModel::check(const TrafficState& state, const BoundaryInflow& inflow) const {
  if (state.x.size() != graph_->n_links())
    throw ValidationError("traffic state does not match the graph");
  if (inflow.d.size() != graph_->n_links())
    throw ValidationError("inflow vector does not match the graph");
  if (!(state.sample_time_h > 0)) throw ValidationError("sample time must be positive");
}

StepOutput TrafficModel::step_serial(const TrafficState& state, const BoundaryInflow& inflow) const {
  check(state, inflow);
  const std::size_t m = graph_->n_links();
  const double T = state.sample_time_h;

  StepOutput out;
  out.state.k = state.k + 1;
  out.state.sample_time_h = T;
  out.state.x.resize(m);
  out.flows.q.assign(m, 0.0);
  out.flows.s.assign(m, 0.0);
  out.flows.l.assign(m, 0.0);

  std::vector<double> out_veh(m);
  for (std::size_t e = 0; e < m; ++e) {
    out_veh[e] = link_outflow_veh(e, state.x[e], T);
    out.flows.l[e] = out_veh[e] / T;
  }

  for (std::size_t e = 0; e < m; ++e) {
    double q = 0.0;
    for (const auto& src : rates_->inflow_sources(e)) q += src.rate * out.flows.l[src.in_link];
    out.flows.q[e] = q;
    out.flows.s[e] = graph_->link(e).exit_rate * q;
  }

  int clamped = 0;
  for (std::size_t e = 0; e < m; ++e) {
    double next =
        (state.x[e] - out_veh[e]) + T * (out.flows.q[e] - out.flows.s[e] + inflow.d[e]);
    if (next < 0.0) {
      next = 0.0;
      ++clamped;
    }
    out.state.x[e] = next;
  }
  out.clamped = clamped;
  return out;
}

StepOutput TrafficModel::step(const TrafficState& state, const BoundaryInflow& inflow) const {
  check(state, inflow);
  const std::size_t m = graph_->n_links();
  const double T = state.sample_time_h;
  const auto count = static_cast<std::ptrdiff_t>(m);

  StepOutput out;
  out.state.k = state.k + 1;
  out.state.sample_time_h = T;
  out.state.x.resize(m);
  out.flows.q.assign(m, 0.0);
  out.flows.s.assign(m, 0.0);
  out.flows.l.assign(m, 0.0);

  std::vector<double> out_veh(m);
  int clamped = 0;
  // One parallel region per step; the barriers between phases order the
  // l -> q -> x dependencies.
#pragma omp parallel reduction(+ : clamped)
  {
#pragma omp for schedule(static)
    for (std::ptrdiff_t e = 0; e < count; ++e) {
      out_veh[e] = link_outflow_veh(e, state.x[e], T);
      out.flows.l[e] = out_veh[e] / T;
    }

#pragma omp for schedule(static)
    for (std::ptrdiff_t e = 0; e < count; ++e) {
      double q = 0.0;
      for (const auto& src : rates_->inflow_sources(e)) q += src.rate * out.flows.l[src.in_link];
      out.flows.q[e] = q;
      out.flows.s[e] = graph_->link(e).exit_rate * q;
    }

#pragma omp for schedule(static)
    for (std::ptrdiff_t e = 0; e < count; ++e) {
      double next =
          (state.x[e] - out_veh[e]) + T * (out.flows.q[e] - out.flows.s[e] + inflow.d[e]);
      if (next < 0.0) {
        next = 0.0;
        ++clamped;
      }
      out.state.x[e] = next;
    }
  }
  out.clamped = clamped;
  return out;
}

}  // namespace v2g
