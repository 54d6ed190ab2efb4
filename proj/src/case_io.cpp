#include "spopf/case_io.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include <json.hpp>

namespace spopf {

namespace {

constexpr double kDegToRad = M_PI / 180.0;

struct Cursor {
  std::string_view text;
  size_t pos = 0;
  int line = 1, col = 1;

  bool eof() const { return pos >= text.size(); }
  char peek() const { return text[pos]; }
  void advance() {
    if (text[pos] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
    ++pos;
  }
  void skip_ws_and_comments() {
    while (!eof()) {
      char c = peek();
      if (c == '%') {
        while (!eof() && peek() != '\n') advance();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == ',') {
        advance();
      } else {
        break;
      }
    }
  }
};

double parse_number(Cursor& cur) {
  cur.skip_ws_and_comments();
  const size_t start = cur.pos;
  const int line = cur.line, col = cur.col;
  while (!cur.eof()) {
    char c = cur.peek();
    if ((c >= '0' && c <= '9') || c == '+' || c == '-' || c == '.' || c == 'e' || c == 'E')
      cur.advance();
    else
      break;
  }
  if (cur.pos == start) throw ParseError("expected a number", line, col);
  const std::string tok(cur.text.substr(start, cur.pos - start));
  try {
    size_t used = 0;
    double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError("malformed number '" + tok + "'", line, col);
  }
}

/// Rows of a MATPOWER matrix literal `[ ... ; ... ]`.
std::vector<std::vector<double>> parse_matrix(Cursor& cur) {
  cur.skip_ws_and_comments();
  if (cur.eof() || cur.peek() != '[') throw ParseError("expected '['", cur.line, cur.col);
  cur.advance();
  std::vector<std::vector<double>> rows;
  std::vector<double> row;
  while (true) {
    cur.skip_ws_and_comments();
    if (cur.eof()) throw ParseError("unterminated matrix", cur.line, cur.col);
    char c = cur.peek();
    if (c == ']') {
      cur.advance();
      if (!row.empty()) rows.push_back(std::move(row));
      return rows;
    }
    if (c == ';') {
      cur.advance();
      if (!row.empty()) rows.push_back(std::move(row));
      row.clear();
      continue;
    }
    row.push_back(parse_number(cur));
  }
}

std::optional<size_t> find_assignment(std::string_view text, const std::string& field) {
  const std::string key = "mpc." + field;
  size_t search = 0;
  while (true) {
    size_t at = text.find(key, search);
    if (at == std::string_view::npos) return std::nullopt;
    size_t j = at + key.size();
    while (j < text.size() && (text[j] == ' ' || text[j] == '\t')) ++j;
    if (j < text.size() && text[j] == '=') return j + 1;
    search = at + key.size();
  }
}

Cursor cursor_at(std::string_view text, size_t pos) {
  Cursor cur{text, 0, 1, 1};
  while (cur.pos < pos) cur.advance();
  return cur;
}

}  // namespace

NetworkCase parse_matpower(std::string_view text) {
  NetworkCase nc;

  // function header "function mpc = casename" names the case
  if (auto fn = text.find("function"); fn != std::string_view::npos) {
    size_t eq = text.find('=', fn);
    size_t eol = text.find('\n', fn);
    if (eq != std::string_view::npos && (eol == std::string_view::npos || eq < eol)) {
      size_t s = eq + 1;
      while (s < text.size() && (text[s] == ' ' || text[s] == '\t')) ++s;
      size_t e = s;
      while (e < text.size() &&
             (std::isalnum(static_cast<unsigned char>(text[e])) || text[e] == '_'))
        ++e;
      nc.name = std::string(text.substr(s, e - s));
    }
  }

  auto base_at = find_assignment(text, "baseMVA");
  if (!base_at) throw ParseError("missing mpc.baseMVA", 1, 1);
  {
    Cursor cur = cursor_at(text, *base_at);
    nc.base_mva = parse_number(cur);
    if (nc.base_mva <= 0.0) throw ParseError("baseMVA must be positive", cur.line, cur.col);
  }
  const double base = nc.base_mva;

  auto matrix_field = [&](const std::string& field) -> std::vector<std::vector<double>> {
    auto at = find_assignment(text, field);
    if (!at) throw ParseError("missing mpc." + field, 1, 1);
    Cursor cur = cursor_at(text, *at);
    return parse_matrix(cur);
  };

  for (const auto& row : matrix_field("bus")) {
    if (row.size() < 13) throw ParseError("bus row needs 13 columns", 1, 1);
    Bus b;
    b.id = static_cast<int>(row[0]);
    const int type = static_cast<int>(row[1]);
    switch (type) {
      case 1: b.kind = BusKind::PQ; break;
      case 2: b.kind = BusKind::PV; break;
      case 3: b.kind = BusKind::Slack; break;
      default:
        throw CaseError("bus " + std::to_string(b.id) + ": unsupported type " +
                        std::to_string(type));
    }
    b.pd = row[2] / base;
    b.qd = row[3] / base;
    b.gs = row[4] / base;
    b.bs = row[5] / base;
    b.vmax = row[11];
    b.vmin = row[12];
    nc.buses.push_back(b);
  }

  for (const auto& row : matrix_field("gen")) {
    if (row.size() < 10) throw ParseError("gen row needs at least 10 columns", 1, 1);
    const int status = static_cast<int>(row[7]);
    const int bus_id = static_cast<int>(row[0]);
    if (status <= 0) {
      nc.warnings.push_back("generator at bus " + std::to_string(bus_id) +
                            " is out of service and was dropped");
      continue;
    }
    Generator g;
    g.bus = bus_id;
    g.qmax = row[3] / base;
    g.qmin = row[4] / base;
    g.vset = row[5];
    g.pmax = row[8] / base;
    g.pmin = row[9] / base;
    nc.generators.push_back(g);
  }

  for (const auto& row : matrix_field("branch")) {
    if (row.size() < 11) throw ParseError("branch row needs at least 11 columns", 1, 1);
    const int status = static_cast<int>(row[10]);
    if (status <= 0) {
      nc.warnings.push_back("branch " + std::to_string(static_cast<int>(row[0])) + "-" +
                            std::to_string(static_cast<int>(row[1])) +
                            " is out of service and was dropped");
      continue;
    }
    Branch br;
    br.from = static_cast<int>(row[0]);
    br.to = static_cast<int>(row[1]);
    br.r = row[2];
    br.x = row[3];
    br.b_charging = row[4];
    br.flow_limit = row[5] / base;  // RATE_A; 0 means unconstrained
    br.tap = row[8] == 0.0 ? 1.0 : row[8];
    br.shift = row[9] * kDegToRad;
    if (row.size() >= 13) {
      const double amin = row[11], amax = row[12];
      const bool open = (amin == 0.0 && amax == 0.0) || amin <= -360.0 || amax >= 360.0;
      if (!open) {
        br.has_angle_limit = true;
        br.angle_min = amin * kDegToRad;
        br.angle_max = amax * kDegToRad;
      }
    }
    nc.branches.push_back(br);
  }

  if (find_assignment(text, "gencost"))
    nc.warnings.push_back("generator cost data ignored");

  for (size_t i = 0; i < nc.generators.size(); ++i)
    for (size_t j = i + 1; j < nc.generators.size(); ++j)
      if (nc.generators[i].bus == nc.generators[j].bus) {
        nc.warnings.push_back("bus " + std::to_string(nc.generators[i].bus) +
                              " hosts multiple generators; merge before model assembly");
        j = nc.generators.size();
      }

  // A PV bus without an in-service generator carries no control; a PQ bus
  // with a generator is promoted so the model has one convention.
  for (auto& b : nc.buses) {
    const bool has_gen = nc.has_generator_at(b.id);
    if (b.kind == BusKind::PV && !has_gen) {
      b.kind = BusKind::PQ;
      nc.warnings.push_back("bus " + std::to_string(b.id) + " demoted to PQ (no generator)");
    } else if (b.kind == BusKind::PQ && has_gen) {
      b.kind = BusKind::PV;
      nc.warnings.push_back("bus " + std::to_string(b.id) + " promoted to PV (hosts a generator)");
    }
  }
  if (!nc.buses.empty()) {
    const Bus& sb = nc.buses[static_cast<size_t>(nc.slack_index())];
    if (!nc.has_generator_at(sb.id)) throw CaseError("slack bus has no generator");
  }

  nc.validate();
  return nc;
}

namespace {

BusKind kind_from_string(const std::string& s) {
  if (s == "slack") return BusKind::Slack;
  if (s == "PV") return BusKind::PV;
  if (s == "PQ") return BusKind::PQ;
  throw CaseError("unknown bus kind '" + s + "'");
}

std::string kind_to_string(BusKind k) {
  switch (k) {
    case BusKind::Slack: return "slack";
    case BusKind::PV: return "PV";
    default: return "PQ";
  }
}

}  // namespace

NetworkCase parse_case_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), 1, 1);
  }
  NetworkCase nc;
  nc.name = j.value("name", "");
  nc.base_mva = j.at("base_mva").get<double>();
  for (const auto& jb : j.at("buses")) {
    Bus b;
    b.id = jb.at("id").get<int>();
    b.kind = kind_from_string(jb.at("kind").get<std::string>());
    b.pd = jb.value("Pd", 0.0);
    b.qd = jb.value("Qd", 0.0);
    b.gs = jb.value("Gs", 0.0);
    b.bs = jb.value("Bs", 0.0);
    b.vmin = jb.at("Vmin").get<double>();
    b.vmax = jb.at("Vmax").get<double>();
    nc.buses.push_back(b);
  }
  for (const auto& jbr : j.at("branches")) {
    Branch br;
    br.from = jbr.at("from").get<int>();
    br.to = jbr.at("to").get<int>();
    br.r = jbr.at("r").get<double>();
    br.x = jbr.at("x").get<double>();
    br.b_charging = jbr.value("b", 0.0);
    br.tap = jbr.value("tap", 1.0);
    br.shift = jbr.value("shift", 0.0);
    br.flow_limit = jbr.value("flow_limit", 0.0);
    if (jbr.contains("angle_min") || jbr.contains("angle_max")) {
      br.has_angle_limit = true;
      br.angle_min = jbr.at("angle_min").get<double>();
      br.angle_max = jbr.at("angle_max").get<double>();
    }
    nc.branches.push_back(br);
  }
  for (const auto& jg : j.at("generators")) {
    Generator g;
    g.bus = jg.at("bus").get<int>();
    g.pmin = jg.at("Pmin").get<double>();
    g.pmax = jg.at("Pmax").get<double>();
    g.qmin = jg.at("Qmin").get<double>();
    g.qmax = jg.at("Qmax").get<double>();
    g.vset = jg.value("Vset", 1.0);
    nc.generators.push_back(g);
  }
  nc.validate();
  return nc;
}

std::string case_to_json(const NetworkCase& nc) {
  nlohmann::json j;
  if (!nc.name.empty()) j["name"] = nc.name;
  j["base_mva"] = nc.base_mva;
  j["buses"] = nlohmann::json::array();
  for (const auto& b : nc.buses) {
    nlohmann::json jb{{"id", b.id},   {"kind", kind_to_string(b.kind)},
                      {"Pd", b.pd},   {"Qd", b.qd},
                      {"Gs", b.gs},   {"Bs", b.bs},
                      {"Vmin", b.vmin}, {"Vmax", b.vmax}};
    j["buses"].push_back(jb);
  }
  j["branches"] = nlohmann::json::array();
  for (const auto& br : nc.branches) {
    nlohmann::json jbr{{"from", br.from}, {"to", br.to},   {"r", br.r},
                       {"x", br.x},       {"b", br.b_charging}, {"tap", br.tap},
                       {"shift", br.shift}, {"flow_limit", br.flow_limit}};
    if (br.has_angle_limit) {
      jbr["angle_min"] = br.angle_min;
      jbr["angle_max"] = br.angle_max;
    }
    j["branches"].push_back(jbr);
  }
  j["generators"] = nlohmann::json::array();
  for (const auto& g : nc.generators) {
    j["generators"].push_back(nlohmann::json{{"bus", g.bus},
                                             {"Pmin", g.pmin},
                                             {"Pmax", g.pmax},
                                             {"Qmin", g.qmin},
                                             {"Qmax", g.qmax},
                                             {"Vset", g.vset}});
  }
  return j.dump(2);
}

NetworkCase load_case_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CaseError("cannot open case file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") return parse_case_json(text);
  return parse_matpower(text);
}

}  // namespace spopf
