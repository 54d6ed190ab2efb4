#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "spopf/types.hpp"

namespace spopf {

enum class BusKind { Slack, PV, PQ };

struct Bus {
  int id = 0;
  BusKind kind = BusKind::PQ;
  double pd = 0.0, qd = 0.0;  // load, p.u.
  double gs = 0.0, bs = 0.0;  // shunt, p.u.
  double vmin = 0.0, vmax = 0.0;
};

struct Branch {
  int from = 0, to = 0;
  double r = 0.0, x = 0.0, b_charging = 0.0;
  double tap = 1.0;    // off-nominal turns ratio
  double shift = 0.0;  // phase shift, rad
  double flow_limit = 0.0;  // apparent power, p.u.; 0 = unconstrained
  bool has_angle_limit = false;
  double angle_min = 0.0, angle_max = 0.0;  // rad
};

struct Generator {
  int bus = 0;
  double pmin = 0.0, pmax = 0.0;
  double qmin = 0.0, qmax = 0.0;
  double vset = 1.0;
};

class CaseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parsed and normalized grid case. All quantities in per-unit on base_mva.
struct NetworkCase {
  std::string name;
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  std::vector<std::string> warnings;

  Index bus_index(int id) const;
  Index slack_index() const;
  bool has_generator_at(int bus_id) const;

  /// Checks the structural invariants: exactly one slack, valid branch
  /// endpoints, connectivity, ordered bounds. Throws CaseError.
  void validate() const;
};

/// Collapse multiple generators on one bus into a single equivalent unit with
/// summed limits. Voltage setpoints must agree. Idempotent.
NetworkCase merge_generators(const NetworkCase& nc);

}  // namespace spopf
