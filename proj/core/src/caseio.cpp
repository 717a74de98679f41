#include "opf/caseio.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace opf {

namespace {

struct Table {
  std::vector<std::vector<double>> rows;
  std::vector<int> row_lines;  // source line per row, 1-based
};

std::string strip_comment(const std::string& line) {
  auto pos = line.find('%');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_number(const std::string& tok, const std::string& table, int line,
                    size_t col) {
  char* end = nullptr;
  double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0' || !std::isfinite(v)) {
    throw ParseError("line " + std::to_string(line) + ": " + table +
                     " table, column " + std::to_string(col + 1) +
                     ": non-numeric field '" + tok + "'");
  }
  return v;
}

void append_rows(Table& table, const std::string& chunk, int line,
                 const std::string& name) {
  std::string row_text;
  std::stringstream rows(chunk);
  while (std::getline(rows, row_text, ';')) {
    row_text = trim(row_text);
    if (row_text.empty()) continue;
    std::vector<double> row;
    std::stringstream toks(row_text);
    std::string tok;
    while (toks >> tok) {
      if (tok == ",") continue;
      if (!tok.empty() && tok.back() == ',') tok.pop_back();
      if (tok.empty()) continue;
      row.push_back(parse_number(tok, name, line, row.size()));
    }
    if (!row.empty()) {
      table.rows.push_back(std::move(row));
      table.row_lines.push_back(line);
    }
  }
}

struct RawCase {
  std::string name = "case";
  double base_mva = 0.0;
  bool base_seen = false;
  std::map<std::string, Table> tables;
};

RawCase scan(const std::string& text) {
  RawCase raw;
  std::stringstream in(text);
  std::string line;
  int lineno = 0;
  std::string open_table;  // currently inside mpc.<name> = [ ... ];
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;

    if (!open_table.empty()) {
      auto close = line.find(']');
      std::string chunk = close == std::string::npos ? line : line.substr(0, close);
      append_rows(raw.tables[open_table], chunk, lineno, open_table);
      if (close != std::string::npos) open_table.clear();
      continue;
    }

    if (line.rfind("function", 0) == 0) {
      auto eq = line.find('=');
      if (eq != std::string::npos) raw.name = trim(line.substr(eq + 1));
      if (!raw.name.empty() && raw.name.back() == ';') {
        raw.name = trim(raw.name.substr(0, raw.name.size() - 1));
      }
      continue;
    }
    if (line.rfind("mpc.", 0) != 0) continue;

    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = trim(line.substr(4, eq - 4));
    std::string rhs = trim(line.substr(eq + 1));
    if (key == "version") continue;
    if (rhs.empty()) {
      throw ParseError("line " + std::to_string(lineno) + ": empty assignment to mpc." + key);
    }
    if (rhs[0] == '[') {
      std::string body = rhs.substr(1);
      auto close = body.find(']');
      std::string chunk = close == std::string::npos ? body : body.substr(0, close);
      append_rows(raw.tables[key], chunk, lineno, key);
      if (close == std::string::npos) open_table = key;
    } else if (key == "baseMVA") {
      if (!rhs.empty() && rhs.back() == ';') rhs = trim(rhs.substr(0, rhs.size() - 1));
      raw.base_mva = parse_number(rhs, "baseMVA", lineno, 0);
      raw.base_seen = true;
    }
  }
  if (!open_table.empty()) {
    throw ParseError("unterminated table mpc." + open_table);
  }
  return raw;
}

const Table& require_table(const RawCase& raw, const std::string& name,
                           size_t min_cols) {
  auto it = raw.tables.find(name);
  if (it == raw.tables.end() || it->second.rows.empty()) {
    throw ParseError("missing table mpc." + name);
  }
  const Table& t = it->second;
  for (size_t i = 0; i < t.rows.size(); ++i) {
    if (t.rows[i].size() < min_cols) {
      throw ParseError("line " + std::to_string(t.row_lines[i]) + ": " + name +
                       " table row has " + std::to_string(t.rows[i].size()) +
                       " columns, expected at least " + std::to_string(min_cols));
    }
  }
  return t;
}

constexpr double kDegToRad = std::numbers::pi / 180.0;

}  // namespace

int CaseData::bus_index(int bus_id) const {
  for (size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].id == bus_id) return static_cast<int>(i);
  }
  return -1;
}

int CaseData::reference_index() const {
  for (size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].is_reference) return static_cast<int>(i);
  }
  return -1;
}

CaseData parse_case(const std::string& text) {
  RawCase raw = scan(text);
  if (!raw.base_seen) throw ParseError("missing mpc.baseMVA");
  if (!(raw.base_mva > 0)) throw ParseError("baseMVA must be positive");

  CaseData data;
  data.name = raw.name;
  data.base_mva = raw.base_mva;
  const double base = raw.base_mva;

  const Table& bus_t = require_table(raw, "bus", 13);
  const Table& gen_t = require_table(raw, "gen", 10);
  const Table& branch_t = require_table(raw, "branch", 11);
  const Table& cost_t = require_table(raw, "gencost", 4);

  int n_ref = 0;
  for (size_t i = 0; i < bus_t.rows.size(); ++i) {
    const auto& row = bus_t.rows[i];
    const int line = bus_t.row_lines[i];
    Bus bus;
    bus.id = static_cast<int>(row[0]);
    int type = static_cast<int>(row[1]);
    if (type < 1 || type > 3) {
      throw ParseError("line " + std::to_string(line) + ": bus " +
                       std::to_string(bus.id) + " has unsupported type " +
                       std::to_string(type));
    }
    bus.is_reference = (type == 3);
    n_ref += bus.is_reference ? 1 : 0;
    bus.p_load = row[2] / base;
    bus.q_load = row[3] / base;
    bus.shunt_g = row[4] / base;
    bus.shunt_b = row[5] / base;
    bus.v_max = row[11];
    bus.v_min = row[12];
    if (!(bus.v_min > 0) || !(bus.v_min <= bus.v_max)) {
      throw ParseError("line " + std::to_string(line) + ": bus " +
                       std::to_string(bus.id) + " voltage bounds violate 0 < Vmin <= Vmax");
    }
    if (data.bus_index(bus.id) >= 0) {
      throw ParseError("line " + std::to_string(line) + ": duplicate bus id " +
                       std::to_string(bus.id));
    }
    data.buses.push_back(bus);
  }
  if (n_ref != 1) {
    throw ParseError("expected exactly one reference bus, found " +
                     std::to_string(n_ref));
  }

  std::vector<bool> gen_active;  // per gencost row alignment
  for (size_t i = 0; i < gen_t.rows.size(); ++i) {
    const auto& row = gen_t.rows[i];
    const int line = gen_t.row_lines[i];
    bool active = row[7] != 0.0;
    gen_active.push_back(active);
    if (!active) continue;
    Generator gen;
    gen.bus = static_cast<int>(row[0]);
    if (data.bus_index(gen.bus) < 0) {
      throw ParseError("line " + std::to_string(line) + ": generator references unknown bus " +
                       std::to_string(gen.bus));
    }
    gen.q_max = row[3] / base;
    gen.q_min = row[4] / base;
    gen.p_max = row[8] / base;
    gen.p_min = row[9] / base;
    if (gen.p_min > gen.p_max || gen.q_min > gen.q_max) {
      throw ParseError("line " + std::to_string(line) + ": generator at bus " +
                       std::to_string(gen.bus) + " has lower bound above upper bound");
    }
    data.generators.push_back(gen);
  }

  for (size_t i = 0; i < branch_t.rows.size(); ++i) {
    const auto& row = branch_t.rows[i];
    const int line = branch_t.row_lines[i];
    if (row[10] == 0.0) continue;  // out of service
    Branch br;
    br.from = static_cast<int>(row[0]);
    br.to = static_cast<int>(row[1]);
    if (data.bus_index(br.from) < 0 || data.bus_index(br.to) < 0) {
      throw ParseError("line " + std::to_string(line) + ": branch references unknown bus");
    }
    if (br.from == br.to) {
      throw ParseError("line " + std::to_string(line) + ": branch endpoints coincide at bus " +
                       std::to_string(br.from));
    }
    br.r = row[2];
    br.x = row[3];
    double z2 = br.r * br.r + br.x * br.x;
    if (z2 == 0.0) {
      throw ParseError("line " + std::to_string(line) + ": zero-impedance branch " +
                       std::to_string(br.from) + "-" + std::to_string(br.to));
    }
    br.series_g = br.r / z2;
    br.series_b = br.x / z2;
    br.charging_b = row[4];
    br.s_max = row[5] / base;
    br.tap_ratio = row[8] == 0.0 ? 1.0 : row[8];
    if (!(br.tap_ratio > 0)) {
      throw ParseError("line " + std::to_string(line) + ": nonpositive tap ratio");
    }
    br.phase_shift_deg = row[9];
    br.phase_shift = row[9] * kDegToRad;
    data.branches.push_back(br);
  }

  if (cost_t.rows.size() != gen_active.size()) {
    throw ParseError("gencost has " + std::to_string(cost_t.rows.size()) +
                     " rows for " + std::to_string(gen_active.size()) + " generators");
  }
  int gen_idx = 0;
  for (size_t i = 0; i < cost_t.rows.size(); ++i) {
    const auto& row = cost_t.rows[i];
    const int line = cost_t.row_lines[i];
    if (!gen_active[i]) continue;
    int model = static_cast<int>(row[0]);
    if (model == 1) {
      throw UnsupportedFeatureError("line " + std::to_string(line) +
                                    ": piecewise-linear gencost model is not supported");
    }
    if (model != 2) {
      throw ParseError("line " + std::to_string(line) + ": unknown gencost model " +
                       std::to_string(model));
    }
    int ncost = static_cast<int>(row[3]);
    if (ncost < 1 || ncost > 3) {
      throw UnsupportedFeatureError("line " + std::to_string(line) +
                                    ": polynomial cost of degree " + std::to_string(ncost - 1) +
                                    " is not supported (max degree 2)");
    }
    if (row.size() < static_cast<size_t>(4 + ncost)) {
      throw ParseError("line " + std::to_string(line) + ": gencost row declares " +
                       std::to_string(ncost) + " coefficients but carries fewer");
    }
    CostFunction cost;
    cost.generator = gen_idx++;
    // Coefficients are highest order first.
    std::vector<double> c(3, 0.0);  // c[0]=quadratic, c[1]=linear, c[2]=constant
    for (int k = 0; k < ncost; ++k) c[3 - ncost + k] = row[4 + k];
    cost.quadratic_src = c[0];
    cost.linear_src = c[1];
    cost.constant_src = c[2];
    cost.quadratic = c[0] * base * base;
    cost.linear = c[1] * base;
    cost.constant = c[2];
    if (cost.quadratic < 0) {
      throw ParseError("line " + std::to_string(line) +
                       ": negative quadratic cost coefficient (nonconvex generator cost)");
    }
    data.costs.push_back(cost);
  }

  return data;
}

CaseData read_case_file(const std::string& path) {
  return parse_case(read_text_file(path));
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string write_case(const CaseData& data) {
  // Normalized to baseMVA = 1: every base-scaled column is written as the
  // per-unit value itself, so a reparse reproduces the numbers bit-exactly.
  std::ostringstream out;
  out << "function mpc = " << data.name << "\n";
  out << "mpc.version = '2';\n";
  out << "mpc.baseMVA = 1;\n";
  out << "mpc.bus = [\n";
  for (const Bus& bus : data.buses) {
    out << "\t" << bus.id << "\t" << (bus.is_reference ? 3 : 1) << "\t"
        << num(bus.p_load) << "\t" << num(bus.q_load) << "\t"
        << num(bus.shunt_g) << "\t" << num(bus.shunt_b)
        << "\t1\t1\t0\t0\t1\t" << num(bus.v_max) << "\t" << num(bus.v_min) << ";\n";
  }
  out << "];\n";
  out << "mpc.gen = [\n";
  for (const Generator& gen : data.generators) {
    out << "\t" << gen.bus << "\t0\t0\t" << num(gen.q_max) << "\t" << num(gen.q_min)
        << "\t1\t1\t1\t" << num(gen.p_max) << "\t" << num(gen.p_min) << ";\n";
  }
  out << "];\n";
  out << "mpc.branch = [\n";
  for (const Branch& br : data.branches) {
    out << "\t" << br.from << "\t" << br.to << "\t" << num(br.r) << "\t" << num(br.x)
        << "\t" << num(br.charging_b) << "\t" << num(br.s_max) << "\t0\t0\t"
        << num(br.tap_ratio) << "\t" << num(br.phase_shift_deg) << "\t1;\n";
  }
  out << "];\n";
  out << "mpc.gencost = [\n";
  for (const CostFunction& cost : data.costs) {
    out << "\t2\t0\t0\t3\t" << num(cost.quadratic) << "\t" << num(cost.linear)
        << "\t" << num(cost.constant) << ";\n";
  }
  out << "];\n";
  return out.str();
}

StartPoint flat_start(const CaseData& data) {
  StartPoint sp;
  sp.theta = Vector::Zero(static_cast<int>(data.buses.size()));
  sp.v = Vector::Ones(static_cast<int>(data.buses.size()));
  return sp;
}

namespace {

void normalize_reference(StartPoint& sp, const CaseData& data) {
  int ref = data.reference_index();
  double shift = sp.theta[ref];
  sp.theta.array() -= shift;
  sp.theta[ref] = 0.0;  // exact
}

std::vector<StartPoint> parse_solution_document(const std::string& text,
                                                const CaseData& data) {
  const int n = static_cast<int>(data.buses.size());
  StartPoint sp;
  sp.theta = Vector::Zero(n);
  sp.v = Vector::Ones(n);
  std::vector<bool> seen(n, false);
  std::vector<double> pg, qg;
  std::stringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    std::stringstream toks(line);
    std::string head;
    if (!(toks >> head)) continue;
    if (head == "bus") {
      std::string id_tok;
      if (!(toks >> id_tok)) throw ParseError("line " + std::to_string(lineno) + ": bus record missing id");
      int idx = data.bus_index(static_cast<int>(parse_number(id_tok, "start", lineno, 1)));
      if (idx < 0) throw ParseError("line " + std::to_string(lineno) + ": unknown bus id " + id_tok);
      std::string key, val;
      while (toks >> key >> val) {
        double v = parse_number(val, "start", lineno, 0);
        if (key == "v") sp.v[idx] = v;
        else if (key == "theta") sp.theta[idx] = v;
      }
      seen[idx] = true;
    } else if (head == "gen") {
      std::string idx_tok;
      if (!(toks >> idx_tok)) continue;
      std::string key, val;
      double p = 0, q = 0;
      while (toks >> key >> val) {
        double v = parse_number(val, "start", lineno, 0);
        if (key == "p") p = v;
        else if (key == "q") q = v;
      }
      pg.push_back(p);
      qg.push_back(q);
    }
  }
  for (int i = 0; i < n; ++i) {
    if (!seen[i]) {
      throw ParseError("start document is missing bus " + std::to_string(data.buses[i].id));
    }
  }
  if (!pg.empty()) {
    if (pg.size() != data.generators.size()) {
      throw ParseError("start document has " + std::to_string(pg.size()) +
                       " generator records for " + std::to_string(data.generators.size()) +
                       " generators");
    }
    sp.p_gen = Eigen::Map<Vector>(pg.data(), static_cast<int>(pg.size()));
    sp.q_gen = Eigen::Map<Vector>(qg.data(), static_cast<int>(qg.size()));
  }
  normalize_reference(sp, data);
  return {sp};
}

}  // namespace

std::vector<StartPoint> load_start_points(const std::string& text,
                                          const CaseData& data) {
  // Document grammar if any line opens with a record keyword.
  std::stringstream probe(text);
  std::string line;
  while (std::getline(probe, line)) {
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    std::stringstream toks(line);
    std::string head;
    toks >> head;
    if (head == "bus" || head == "objective" || head == "status" || head == "gen") {
      return parse_solution_document(text, data);
    }
    break;
  }

  const int n = static_cast<int>(data.buses.size());
  std::vector<StartPoint> points;
  std::stringstream in(text);
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(strip_comment(line.substr(0, line.find('#'))));
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream toks(line);
    std::string tok;
    while (toks >> tok) vals.push_back(parse_number(tok, "start", lineno, vals.size()));
    if (static_cast<int>(vals.size()) != 2 * n) {
      throw ParseError("line " + std::to_string(lineno) + ": start record has " +
                       std::to_string(vals.size()) + " values, expected " +
                       std::to_string(2 * n) + " (theta_1..theta_n v_1..v_n)");
    }
    StartPoint sp;
    sp.theta = Eigen::Map<Vector>(vals.data(), n);
    sp.v = Eigen::Map<Vector>(vals.data() + n, n);
    normalize_reference(sp, data);
    points.push_back(std::move(sp));
  }
  if (points.empty()) throw ParseError("start file contains no records");
  return points;
}

}  // namespace opf
