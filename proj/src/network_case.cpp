#include "spopf/network_case.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <set>
#include <sstream>

namespace spopf {

Index NetworkCase::bus_index(int id) const {
  for (size_t i = 0; i < buses.size(); ++i)
    if (buses[i].id == id) return static_cast<Index>(i);
  throw CaseError("unknown bus id " + std::to_string(id));
}

Index NetworkCase::slack_index() const {
  for (size_t i = 0; i < buses.size(); ++i)
    if (buses[i].kind == BusKind::Slack) return static_cast<Index>(i);
  throw CaseError("case has no slack bus");
}

bool NetworkCase::has_generator_at(int bus_id) const {
  return std::any_of(generators.begin(), generators.end(),
                     [&](const Generator& g) { return g.bus == bus_id; });
}

void NetworkCase::validate() const {
  if (buses.empty()) throw CaseError("case has no buses");
  std::set<int> ids;
  int slack_count = 0;
  for (const auto& b : buses) {
    if (!ids.insert(b.id).second) throw CaseError("duplicate bus id " + std::to_string(b.id));
    if (b.kind == BusKind::Slack) ++slack_count;
    if (b.vmin > b.vmax) throw CaseError("bus " + std::to_string(b.id) + ": Vmin > Vmax");
  }
  if (slack_count != 1)
    throw CaseError("case must have exactly one slack bus, found " + std::to_string(slack_count));
  for (const auto& br : branches) {
    if (!ids.count(br.from) || !ids.count(br.to))
      throw CaseError("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                      " references a missing bus");
    if (br.has_angle_limit &&
        (std::abs(br.angle_min) >= M_PI / 2 || std::abs(br.angle_max) >= M_PI / 2))
      throw CaseError("angle difference limits must lie in (-pi/2, pi/2)");
  }
  for (const auto& g : generators) {
    if (!ids.count(g.bus)) throw CaseError("generator references missing bus " + std::to_string(g.bus));
    if (g.pmin > g.pmax || g.qmin > g.qmax)
      throw CaseError("generator at bus " + std::to_string(g.bus) + ": inverted limits");
  }
  // connectivity
  std::map<int, std::vector<int>> adj;
  for (const auto& br : branches) {
    adj[br.from].push_back(br.to);
    adj[br.to].push_back(br.from);
  }
  std::set<int> seen;
  std::queue<int> q;
  q.push(buses.front().id);
  seen.insert(buses.front().id);
  while (!q.empty()) {
    int v = q.front();
    q.pop();
    for (int nb : adj[v])
      if (seen.insert(nb).second) q.push(nb);
  }
  if (seen.size() != buses.size()) throw CaseError("bus graph is not connected");
}

NetworkCase merge_generators(const NetworkCase& nc) {
  NetworkCase out = nc;
  out.generators.clear();
  std::map<int, Generator> merged;
  std::vector<int> order;
  for (const auto& g : nc.generators) {
    auto it = merged.find(g.bus);
    if (it == merged.end()) {
      merged[g.bus] = g;
      order.push_back(g.bus);
    } else {
      Generator& m = it->second;
      if (std::abs(m.vset - g.vset) > 1e-9)
        throw CaseError("conflicting voltage setpoints on bus " + std::to_string(g.bus));
      m.pmin += g.pmin;
      m.pmax += g.pmax;
      m.qmin += g.qmin;
      m.qmax += g.qmax;
    }
  }
  for (int bus : order) out.generators.push_back(merged[bus]);
  return out;
}

}  // namespace spopf
