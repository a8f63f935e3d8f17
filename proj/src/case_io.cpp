#include "opfdl/case_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "opfdl/errors.hpp"

namespace opfdl {
namespace {

constexpr double kPi = 3.14159265358979323846;

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

bool starts_with(const std::string& s, const std::string& prefix) {
  return s.rfind(prefix, 0) == 0;
}

std::vector<double> parse_row(const std::string& text, int line_no,
                              const std::string& origin) {
  std::vector<double> row;
  const char* p = text.c_str();
  while (*p) {
    while (*p == ' ' || *p == '\t' || *p == ',') ++p;
    if (!*p) break;
    char* end = nullptr;
    double v = std::strtod(p, &end);
    if (end == p) {
      throw ParseError("malformed row at " + origin + ":" +
                       std::to_string(line_no) + ": bad token near '" +
                       std::string(p).substr(0, 16) + "'");
    }
    row.push_back(v);
    p = end;
  }
  return row;
}

}  // namespace

RawCase parse_case_text(const std::string& text, const std::string& origin) {
  RawCase raw;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;

  std::string block;        // active mpc.<block> name, empty if none
  bool block_wanted = false;
  std::vector<std::vector<double>>* rows = nullptr;
  bool saw_bus = false, saw_gen = false, saw_branch = false,
       saw_gencost = false;

  auto block_target =
      [&raw](const std::string& name) -> std::vector<std::vector<double>>* {
    if (name == "bus") return &raw.bus;
    if (name == "gen") return &raw.gen;
    if (name == "branch") return &raw.branch;
    if (name == "gencost") return &raw.gencost;
    return nullptr;
  };

  auto consume_rows = [&](const std::string& chunk) {
    if (!block_wanted) return;
    std::string rest = chunk;
    size_t pos;
    while ((pos = rest.find(';')) != std::string::npos) {
      std::string one = trim(rest.substr(0, pos));
      if (!one.empty()) rows->push_back(parse_row(one, line_no, origin));
      rest = rest.substr(pos + 1);
    }
    rest = trim(rest);
    if (!rest.empty()) rows->push_back(parse_row(rest, line_no, origin));
  };

  while (std::getline(in, line)) {
    ++line_no;
    size_t cpos = line.find('%');
    if (cpos != std::string::npos) line = line.substr(0, cpos);
    line = trim(line);
    if (line.empty()) continue;

    if (!block.empty()) {
      size_t close = line.find(']');
      if (close != std::string::npos) {
        consume_rows(line.substr(0, close));
        block.clear();
        block_wanted = false;
        rows = nullptr;
      } else {
        consume_rows(line);
      }
      continue;
    }

    if (starts_with(line, "function")) {
      size_t eq = line.find('=');
      if (eq != std::string::npos) {
        std::string name = trim(line.substr(eq + 1));
        while (!name.empty() && (name.back() == ';' || name.back() == ' '))
          name.pop_back();
        raw.name = name;
      }
      continue;
    }
    if (!starts_with(line, "mpc.")) continue;

    size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string field = trim(line.substr(4, eq - 4));
    std::string rhs = trim(line.substr(eq + 1));

    if (field == "baseMVA") {
      if (!rhs.empty() && rhs.back() == ';') rhs.pop_back();
      bool ok = false;
      char* end = nullptr;
      double v = std::strtod(rhs.c_str(), &end);
      ok = end != rhs.c_str();
      if (!ok)
        throw ParseError("malformed row at " + origin + ":" +
                         std::to_string(line_no) + ": bad baseMVA");
      raw.base_mva = v;
      continue;
    }
    size_t open = rhs.find('[');
    if (open == std::string::npos) continue;  // scalar/string field, skip
    block = field;
    rows = block_target(field);
    block_wanted = rows != nullptr;
    saw_bus |= field == "bus";
    saw_gen |= field == "gen";
    saw_branch |= field == "branch";
    saw_gencost |= field == "gencost";
    std::string tail = rhs.substr(open + 1);
    size_t close = tail.find(']');
    if (close != std::string::npos) {
      consume_rows(tail.substr(0, close));
      block.clear();
      block_wanted = false;
      rows = nullptr;
    } else {
      consume_rows(tail);
    }
  }

  if (!block.empty())
    throw ParseError(origin + ": unterminated block mpc." + block);

  // The branch block may legitimately be empty (single-bus cases); the
  // others must both exist and carry rows.
  std::string missing;
  if (raw.base_mva <= 0.0) missing += " baseMVA";
  if (!saw_bus || raw.bus.empty()) missing += " bus";
  if (!saw_gen || raw.gen.empty()) missing += " gen";
  if (!saw_branch) missing += " branch";
  if (!saw_gencost || raw.gencost.empty()) missing += " gencost";
  if (!missing.empty())
    throw ParseError(origin + ": missing block(s):" + missing);

  for (size_t i = 0; i < raw.bus.size(); ++i)
    if (raw.bus[i].size() < 13)
      throw ParseError(origin + ": bus row " + std::to_string(i + 1) +
                       " has fewer than 13 columns");
  for (size_t i = 0; i < raw.gen.size(); ++i)
    if (raw.gen[i].size() < 10)
      throw ParseError(origin + ": gen row " + std::to_string(i + 1) +
                       " has fewer than 10 columns");
  for (size_t i = 0; i < raw.branch.size(); ++i)
    if (raw.branch[i].size() < 13)
      throw ParseError(origin + ": branch row " + std::to_string(i + 1) +
                       " has fewer than 13 columns");
  for (size_t i = 0; i < raw.gencost.size(); ++i)
    if (raw.gencost[i].size() < 4)
      throw ParseError(origin + ": gencost row " + std::to_string(i + 1) +
                       " has fewer than 4 columns");

  if (raw.name.empty()) raw.name = origin;
  return raw;
}

RawCase parse_case(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open case file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  std::string stem = path;
  size_t slash = stem.find_last_of("/\\");
  if (slash != std::string::npos) stem = stem.substr(slash + 1);
  size_t dot = stem.find_last_of('.');
  if (dot != std::string::npos) stem = stem.substr(0, dot);
  RawCase raw = parse_case_text(ss.str(), path);
  if (raw.name.empty()) raw.name = stem;
  return raw;
}

PowerSystem build_system(const RawCase& raw) {
  PowerSystem sys;
  sys.name = raw.name;
  sys.base_mva = raw.base_mva;
  const double base = raw.base_mva;

  std::unordered_map<int, int> idx;
  sys.buses.reserve(raw.bus.size());
  for (const auto& row : raw.bus) {
    Bus b;
    b.ext_id = static_cast<int>(std::llround(row[0]));
    int type = static_cast<int>(std::llround(row[1]));
    if (type != 1 && type != 2 && type != 3)
      throw CaseError(raw.name + ": bus " + std::to_string(b.ext_id) +
                      " has unsupported type " + std::to_string(type));
    b.is_reference = type == 3;
    b.r_ref = {row[2] / base, row[3] / base};
    // The balance model adds +conj(y_shunt)|v|^2 to the residual, so the
    // MATPOWER consumption-convention Gs+jBs enters negated.
    b.y_shunt = {-row[4] / base, -row[5] / base};
    double vm = row[7], va = row[8] * kPi / 180.0;
    if (vm <= 0.0) vm = 1.0;
    b.v0 = std::polar(vm, va);
    b.v_max = row[11];
    b.v_min = row[12];
    if (!(b.v_min > 0.0) || b.v_max < b.v_min)
      throw CaseError(raw.name + ": bus " + std::to_string(b.ext_id) +
                      " has invalid voltage bounds");
    if (!idx.emplace(b.ext_id, static_cast<int>(sys.buses.size())).second)
      throw CaseError(raw.name + ": duplicate bus id " +
                      std::to_string(b.ext_id));
    sys.buses.push_back(b);
  }

  int n_ref = 0;
  for (const auto& b : sys.buses) n_ref += b.is_reference ? 1 : 0;
  if (n_ref != 1)
    throw CaseError(raw.name + ": expected exactly one reference bus, found " +
                    std::to_string(n_ref));
  for (int i = 0; i < sys.n(); ++i)
    if (sys.buses[i].is_reference) sys.ref_bus = i;

  if (raw.gencost.size() != raw.gen.size())
    throw ParseError(raw.name + ": gencost must have one row per gen row (" +
                     std::to_string(raw.gencost.size()) + " vs " +
                     std::to_string(raw.gen.size()) + ")");

  for (size_t gi = 0; gi < raw.gen.size(); ++gi) {
    const auto& row = raw.gen[gi];
    if (row[7] <= 0.0) continue;  // out of service
    auto it = idx.find(static_cast<int>(std::llround(row[0])));
    if (it == idx.end())
      throw CaseError(raw.name + ": gen row " + std::to_string(gi + 1) +
                      " references unknown bus");
    Bus& b = sys.buses[it->second];
    double pmin = row[9], pmax = row[8], qmin = row[4], qmax = row[3];
    if (pmin > pmax || qmin > qmax)
      throw CaseError(raw.name + ": gen row " + std::to_string(gi + 1) +
                      " has inverted bounds");
    b.s_min += std::complex<double>(pmin / base, qmin / base);
    b.s_max += std::complex<double>(pmax / base, qmax / base);
    b.has_generator = true;

    const auto& cost = raw.gencost[gi];
    int model = static_cast<int>(std::llround(cost[0]));
    if (model != 2)
      throw ParseError(raw.name + ": gencost row " + std::to_string(gi + 1) +
                       ": unsupported cost model " + std::to_string(model) +
                       " (only polynomial)");
    int ncoef = static_cast<int>(std::llround(cost[3]));
    if (ncoef < 1 || ncoef > 3)
      throw ParseError(raw.name + ": gencost row " + std::to_string(gi + 1) +
                       ": polynomial degree must be <= 2");
    if (cost.size() < static_cast<size_t>(4 + ncoef))
      throw ParseError(raw.name + ": gencost row " + std::to_string(gi + 1) +
                       ": missing coefficients");
    if (ncoef == 3) {
      b.c2 += cost[4];
      b.c1 += cost[5];
      b.c0 += cost[6];
    } else if (ncoef == 2) {
      b.c1 += cost[4];
      b.c0 += cost[5];
    } else {
      b.c0 += cost[4];
    }
  }

  for (size_t bi = 0; bi < raw.branch.size(); ++bi) {
    const auto& row = raw.branch[bi];
    if (row[10] <= 0.0) continue;  // out of service
    Branch br;
    auto fit = idx.find(static_cast<int>(std::llround(row[0])));
    auto tit = idx.find(static_cast<int>(std::llround(row[1])));
    if (fit == idx.end() || tit == idx.end())
      throw CaseError(raw.name + ": branch row " + std::to_string(bi + 1) +
                      " references unknown bus");
    br.from = fit->second;
    br.to = tit->second;
    if (br.from == br.to)
      throw CaseError(raw.name + ": branch row " + std::to_string(bi + 1) +
                      " is a self-loop");
    double r = row[2], x = row[3];
    if (r == 0.0 && x == 0.0)
      throw CaseError(raw.name + ": branch row " + std::to_string(bi + 1) +
                      " has zero impedance");
    br.y = 1.0 / std::complex<double>(r, x);
    br.y_c_from = {0.0, row[4] / 2.0};
    br.y_c_to = {0.0, row[4] / 2.0};
    double ratio = row[8] == 0.0 ? 1.0 : row[8];
    br.t = std::polar(ratio, row[9] * kPi / 180.0);
    double rate = row[5];
    br.f_max_from = rate > 0.0 ? rate / base : kUnlimitedFlow;
    br.f_max_to = br.f_max_from;
    double angmin = row[11], angmax = row[12];
    bool unbounded = (angmin == 0.0 && angmax == 0.0);
    br.theta_min = (unbounded || angmin <= -360.0) ? -kPi / 2.0
                                                   : angmin * kPi / 180.0;
    br.theta_max =
        (unbounded || angmax >= 360.0) ? kPi / 2.0 : angmax * kPi / 180.0;
    if (br.theta_min >= br.theta_max)
      throw CaseError(raw.name + ": branch row " + std::to_string(bi + 1) +
                      " has inverted angle bounds");
    sys.branches.push_back(br);
  }

  sys.adjacency.assign(sys.n(), {});
  for (int b = 0; b < sys.m(); ++b) {
    sys.adjacency[sys.branches[b].from].push_back({b, true});
    sys.adjacency[sys.branches[b].to].push_back({b, false});
  }
  for (int i = 0; i < sys.n(); ++i)
    if (sys.buses[i].has_generator) sys.gen_buses.push_back(i);
  return sys;
}

PowerSystem load_system(const std::string& path) {
  return build_system(parse_case(path));
}

PowerSystem apply_bus_permutation(const PowerSystem& sys,
                                  const std::vector<int>& perm) {
  const int n = sys.n();
  if (static_cast<int>(perm.size()) != n)
    throw CaseError("permutation size mismatch");
  std::vector<char> seen(n, 0);
  for (int p : perm) {
    if (p < 0 || p >= n || seen[p]) throw CaseError("invalid permutation");
    seen[p] = 1;
  }
  PowerSystem out;
  out.name = sys.name;
  out.base_mva = sys.base_mva;
  out.buses.resize(n);
  for (int i = 0; i < n; ++i) out.buses[perm[i]] = sys.buses[i];
  out.branches = sys.branches;
  for (auto& br : out.branches) {
    br.from = perm[br.from];
    br.to = perm[br.to];
  }
  out.ref_bus = perm[sys.ref_bus];
  out.adjacency.assign(n, {});
  for (int b = 0; b < out.m(); ++b) {
    out.adjacency[out.branches[b].from].push_back({b, true});
    out.adjacency[out.branches[b].to].push_back({b, false});
  }
  for (int i = 0; i < n; ++i)
    if (out.buses[i].has_generator) out.gen_buses.push_back(i);
  return out;
}

}  // namespace opfdl
