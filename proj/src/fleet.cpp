#include "v2g/fleet.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json_util.hpp"

namespace v2g {

VirtualBattery make_partition(double total_kwh, double gss_fraction) {
  if (!(total_kwh > 0)) throw ValidationError("battery capacity must be positive");
  if (gss_fraction < 0 || gss_fraction > 1)
    throw ValidationError("GSS partition fraction outside [0,1]");
  VirtualBattery b;
  b.total_capacity_kwh = total_kwh;
  b.gss_fraction = gss_fraction;
  // Split so the two capacities recompose the pack exactly: subtracting the
  // larger half from the total is error-free (Sterbenz), so deriving the
  // smaller half from that difference keeps the sum exact.
  const double gss = gss_fraction * total_kwh;
  if (gss >= 0.5 * total_kwh) {
    b.gss_capacity_kwh = gss;
    b.mob_capacity_kwh = total_kwh - gss;
  } else {
    b.mob_capacity_kwh = total_kwh - gss;
    b.gss_capacity_kwh = total_kwh - b.mob_capacity_kwh;
  }
  return b;
}

double discharge_step(double e_mob_kwh, double speed_kmh, double dt_h,
                      const EnergyCoefficients& coeffs) {
  return e_mob_kwh - (coeffs.eta1 * speed_kmh + coeffs.eta2 * speed_kmh * speed_kmh) * dt_h;
}

FleetSelection select_fleet(std::vector<FleetCandidate> candidates, double request_kwh) {
  for (const FleetCandidate& c : candidates)
    if (!std::isfinite(c.free_flow_cost_h))
      throw ValidationError("fleet candidate with non-finite cost");

  std::sort(candidates.begin(), candidates.end(),
            [](const FleetCandidate& a, const FleetCandidate& b) {
              if (a.free_flow_cost_h != b.free_flow_cost_h)
                return a.free_flow_cost_h < b.free_flow_cost_h;
              return a.id < b.id;
            });

  FleetSelection sel;
  double sum = 0.0;
  for (const FleetCandidate& c : candidates) {
    if (sum >= request_kwh) break;
    sel.selected.push_back(c);
    sum += c.e_gss_kwh;
  }
  sel.request_met = sum >= request_kwh;
  sel.shortfall_kwh = sel.request_met ? 0.0 : request_kwh - sum;
  return sel;
}

namespace {
using nlohmann::json;
using detail::get_optional;
using detail::get_required;
using detail::reject_unknown_keys;
}  // namespace

std::vector<Caev> parse_fleet(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("fleet file is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw ParseError("fleet file must be a JSON array");

  std::vector<Caev> fleet;
  for (const json& jv : doc) {
    if (!jv.is_object()) throw ParseError("fleet record must be an object");
    reject_unknown_keys(jv, {"id", "node", "total_capacity_kwh", "gss_fraction",
                             "e_mob_kwh", "e_gss_kwh"},
                        "fleet record");
    Caev c;
    c.id = static_cast<std::uint32_t>(get_required<std::int64_t>(jv, "id", "fleet record"));
    c.current_node = static_cast<NodeId>(get_required<std::int64_t>(jv, "node", "fleet record"));
    c.battery = make_partition(get_required<double>(jv, "total_capacity_kwh", "fleet record"),
                               get_required<double>(jv, "gss_fraction", "fleet record"));
    c.battery.e_mob_kwh = get_required<double>(jv, "e_mob_kwh", "fleet record");
    c.battery.e_gss_kwh = get_required<double>(jv, "e_gss_kwh", "fleet record");
    if (c.battery.e_mob_kwh < 0 || c.battery.e_mob_kwh > c.battery.cap_mob_kwh() + 1e-9)
      throw ValidationError("mobility charge outside partition capacity");
    if (c.battery.e_gss_kwh < 0 || c.battery.e_gss_kwh > c.battery.cap_gss_kwh() + 1e-9)
      throw ValidationError("GSS charge outside partition capacity");
    fleet.push_back(c);
  }
  return fleet;
}

std::vector<Caev> load_fleet(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open fleet file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_fleet(ss.str());
}

void write_fleet(const std::vector<Caev>& fleet, const std::string& path) {
  json arr = json::array();
  for (const Caev& c : fleet) {
    json jv;
    jv["id"] = c.id;
    jv["node"] = c.current_node;
    jv["total_capacity_kwh"] = c.battery.total_capacity_kwh;
    jv["gss_fraction"] = c.battery.gss_fraction;
    jv["e_mob_kwh"] = c.battery.e_mob_kwh;
    jv["e_gss_kwh"] = c.battery.e_gss_kwh;
    arr.push_back(jv);
  }
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write fleet file: " + path);
  out << arr.dump(2) << "\n";
}

}  // namespace v2g
