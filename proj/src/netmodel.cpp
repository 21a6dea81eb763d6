#include "mopf/netmodel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace mopf {

namespace {

std::string with_line(const std::string& what, int line) {
  if (line <= 0) return what;
  return "line " + std::to_string(line) + ": " + what;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char ch) { return std::tolower(ch); });
  return s;
}

std::string strip_comment(const std::string& s, char mark) {
  auto pos = s.find(mark);
  return pos == std::string::npos ? s : s.substr(0, pos);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

double parse_double(const std::string& tok, int line) {
  try {
    std::size_t used = 0;
    double v = std::stod(tok, &used);
    if (used != tok.size())
      throw CaseError("bad number '" + tok + "'", line);
    return v;
  } catch (const CaseError&) {
    throw;
  } catch (const std::exception&) {
    throw CaseError("bad number '" + tok + "'", line);
  }
}

int parse_int(const std::string& tok, int line) {
  double v = parse_double(tok, line);
  int i = static_cast<int>(v);
  if (static_cast<double>(i) != v)
    throw CaseError("expected an integer, got '" + tok + "'", line);
  return i;
}

// Complex literals are written re+imj (e.g. 0.96-4.8j, 2.5, 0.45j).
cplx parse_complex(const std::string& tok, int line) {
  if (tok.empty()) throw CaseError("bad complex number ''", line);
  if (tok.back() != 'j' && tok.back() != 'J')
    return {parse_double(tok, line), 0.0};
  std::string body = tok.substr(0, tok.size() - 1);
  // Split at the sign of the imaginary part: the last +/- that neither
  // starts the literal nor belongs to an exponent.
  std::size_t split = std::string::npos;
  for (std::size_t i = body.size(); i-- > 1;) {
    if ((body[i] == '+' || body[i] == '-') &&
        body[i - 1] != 'e' && body[i - 1] != 'E') {
      split = i;
      break;
    }
  }
  auto imag_part = [&](const std::string& s) -> double {
    if (s.empty() || s == "+") return 1.0;  // bare j / +j
    if (s == "-") return -1.0;
    return parse_double(s, line);
  };
  if (split == std::string::npos) return {0.0, imag_part(body)};
  return {parse_double(body.substr(0, split), line),
          imag_part(body.substr(split))};
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_complex(cplx z) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.17g%+.17gj", z.real(), z.imag());
  return buf;
}

}  // namespace

CaseError::CaseError(const std::string& what, int line)
    : std::runtime_error(with_line(what, line)), line_(line) {}

int NetworkCase::bus_index(int bus_id) const {
  for (int i = 0; i < n(); ++i)
    if (buses[i].id == bus_id) return i;
  throw CaseError("unknown bus id " + std::to_string(bus_id));
}

const Generator* NetworkCase::generator_at(int bus_id) const {
  for (const Generator& g : generators)
    if (g.bus == bus_id) return &g;
  return nullptr;
}

void NetworkCase::validate() const {
  if (!(base_mva > 0.0)) throw CaseError("base MVA must be positive");
  if (buses.empty()) throw CaseError("case has no buses");
  std::set<int> ids;
  for (const Bus& b : buses) {
    if (!ids.insert(b.id).second)
      throw CaseError("duplicate bus id " + std::to_string(b.id));
    if (b.v_min < 0.0 || b.v_min > b.v_max)
      throw CaseError("bus " + std::to_string(b.id) +
                      ": voltage bounds must satisfy 0 <= v_min <= v_max");
  }
  std::set<int> gen_buses;
  for (const Generator& g : generators) {
    if (!ids.count(g.bus))
      throw CaseError("generator references unknown bus " +
                      std::to_string(g.bus));
    if (!gen_buses.insert(g.bus).second)
      throw CaseError("multiple generators at bus " + std::to_string(g.bus));
    if (g.p_min > g.p_max || g.q_min > g.q_max)
      throw CaseError("generator at bus " + std::to_string(g.bus) +
                      ": inverted output bounds");
  }
  for (const Branch& b : branches) {
    std::string name =
        std::to_string(b.from) + "-" + std::to_string(b.to);
    for (int end : {b.from, b.to})
      if (!ids.count(end))
        throw CaseError("branch " + name + " references unknown bus " +
                        std::to_string(end));
    if (b.from == b.to)
      throw CaseError("branch " + name + " connects a bus to itself");
    if (b.rho_from == cplx{0.0, 0.0} || b.rho_to == cplx{0.0, 0.0})
      throw CaseError("zero transformer ratio on branch " + name);
    if (b.y == cplx{0.0, 0.0})
      throw CaseError("zero mutual admittance on branch " + name);
    for (double lim : {b.i_max, b.vdiff_max, b.p_max, b.s_max})
      if (lim < 0.0)
        throw CaseError("negative flow limit on branch " + name);
  }
}

// ---------------------------------------------------------------------------
// Native format
// ---------------------------------------------------------------------------

NetworkCase parse_native(const std::string& text) {
  NetworkCase c;
  enum class Sec { none, bus, gen, branch };
  Sec sec = Sec::none;
  std::vector<int> bus_lines, gen_lines, branch_lines;

  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::vector<std::string> tok = split_ws(strip_comment(raw, '#'));
    if (tok.empty()) continue;
    const std::string kw = lower(tok[0]);
    if (kw == "case") {
      if (tok.size() != 2)
        throw CaseError("'case' takes exactly one field (base MVA)", lineno);
      c.base_mva = parse_double(tok[1], lineno);
      continue;
    }
    if (tok.size() == 1 && (kw == "bus" || kw == "gen" || kw == "branch")) {
      sec = kw == "bus" ? Sec::bus : kw == "gen" ? Sec::gen : Sec::branch;
      continue;
    }
    switch (sec) {
      case Sec::none:
        throw CaseError("expected a section header (bus, gen or branch)",
                        lineno);
      case Sec::bus: {
        if (tok.size() != 5)
          throw CaseError("bus row needs 5 fields: id p_dem q_dem v_min v_max",
                          lineno);
        Bus b;
        b.id = parse_int(tok[0], lineno);
        b.p_dem = parse_double(tok[1], lineno);
        b.q_dem = parse_double(tok[2], lineno);
        b.v_min = parse_double(tok[3], lineno);
        b.v_max = parse_double(tok[4], lineno);
        c.buses.push_back(b);
        bus_lines.push_back(lineno);
        break;
      }
      case Sec::gen: {
        if (tok.size() != 8)
          throw CaseError(
              "gen row needs 8 fields: bus p_min p_max q_min q_max c0 c1 c2",
              lineno);
        Generator g;
        g.bus = parse_int(tok[0], lineno);
        g.p_min = parse_double(tok[1], lineno);
        g.p_max = parse_double(tok[2], lineno);
        g.q_min = parse_double(tok[3], lineno);
        g.q_max = parse_double(tok[4], lineno);
        g.c0 = parse_double(tok[5], lineno);
        g.c1 = parse_double(tok[6], lineno);
        g.c2 = parse_double(tok[7], lineno);
        c.generators.push_back(g);
        gen_lines.push_back(lineno);
        break;
      }
      case Sec::branch: {
        // Limits may be omitted as a group (then all four default to +inf).
        if (tok.size() != 7 && tok.size() != 11)
          throw CaseError(
              "branch row needs 7 or 11 fields: from to y y_gr_from y_gr_to "
              "rho_from rho_to [i_max vdiff_max p_max s_max]",
              lineno);
        Branch b;
        b.from = parse_int(tok[0], lineno);
        b.to = parse_int(tok[1], lineno);
        b.y = parse_complex(tok[2], lineno);
        b.y_gr_from = parse_complex(tok[3], lineno);
        b.y_gr_to = parse_complex(tok[4], lineno);
        b.rho_from = parse_complex(tok[5], lineno);
        b.rho_to = parse_complex(tok[6], lineno);
        if (tok.size() == 11) {
          b.i_max = parse_double(tok[7], lineno);
          b.vdiff_max = parse_double(tok[8], lineno);
          b.p_max = parse_double(tok[9], lineno);
          b.s_max = parse_double(tok[10], lineno);
        }
        c.branches.push_back(b);
        branch_lines.push_back(lineno);
        break;
      }
    }
  }

  // Re-run the referential checks with line attribution before the
  // whole-case validation, so errors point at the offending row.
  std::set<int> ids;
  for (std::size_t i = 0; i < c.buses.size(); ++i)
    if (!ids.insert(c.buses[i].id).second)
      throw CaseError("duplicate bus id " + std::to_string(c.buses[i].id),
                      bus_lines[i]);
  for (std::size_t i = 0; i < c.generators.size(); ++i)
    if (!ids.count(c.generators[i].bus))
      throw CaseError("generator references unknown bus " +
                          std::to_string(c.generators[i].bus),
                      gen_lines[i]);
  for (std::size_t i = 0; i < c.branches.size(); ++i) {
    const Branch& b = c.branches[i];
    for (int end : {b.from, b.to})
      if (!ids.count(end))
        throw CaseError("branch " + std::to_string(b.from) + "-" +
                            std::to_string(b.to) +
                            " references unknown bus " + std::to_string(end),
                        branch_lines[i]);
    if (b.rho_from == cplx{0.0, 0.0} || b.rho_to == cplx{0.0, 0.0})
      throw CaseError("zero transformer ratio on branch " +
                          std::to_string(b.from) + "-" + std::to_string(b.to),
                      branch_lines[i]);
  }
  c.validate();
  return c;
}

std::string serialize_case(const NetworkCase& c) {
  std::ostringstream out;
  out << "case " << fmt_double(c.base_mva) << "\n";
  out << "bus\n";
  for (const Bus& b : c.buses)
    out << b.id << " " << fmt_double(b.p_dem) << " " << fmt_double(b.q_dem)
        << " " << fmt_double(b.v_min) << " " << fmt_double(b.v_max) << "\n";
  out << "gen\n";
  for (const Generator& g : c.generators)
    out << g.bus << " " << fmt_double(g.p_min) << " " << fmt_double(g.p_max)
        << " " << fmt_double(g.q_min) << " " << fmt_double(g.q_max) << " "
        << fmt_double(g.c0) << " " << fmt_double(g.c1) << " "
        << fmt_double(g.c2) << "\n";
  out << "branch\n";
  for (const Branch& b : c.branches)
    out << b.from << " " << b.to << " " << fmt_complex(b.y) << " "
        << fmt_complex(b.y_gr_from) << " " << fmt_complex(b.y_gr_to) << " "
        << fmt_complex(b.rho_from) << " " << fmt_complex(b.rho_to) << " "
        << fmt_double(b.i_max) << " " << fmt_double(b.vdiff_max) << " "
        << fmt_double(b.p_max) << " " << fmt_double(b.s_max) << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// MATPOWER subset importer
// ---------------------------------------------------------------------------

namespace {

struct NumericTable {
  std::vector<std::vector<double>> rows;
  std::vector<int> lines;  // 1-based source line per row
};

int line_of_offset(const std::string& text, std::size_t off) {
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + off,
                                         '\n'));
}

// Finds "<anything>.<name> = [ ... ];" and tokenizes the bracket body into
// numeric rows.  Rows are separated by ';' or line breaks.
bool extract_table(const std::string& text, const std::string& name,
                   NumericTable* out) {
  const std::string key = "." + name;
  std::size_t pos = 0;
  while ((pos = text.find(key, pos)) != std::string::npos) {
    std::size_t p = pos + key.size();
    while (p < text.size() && std::isspace(static_cast<unsigned char>(text[p])))
      ++p;
    if (p >= text.size() || text[p] != '=') {
      pos += key.size();
      continue;
    }
    ++p;
    while (p < text.size() && std::isspace(static_cast<unsigned char>(text[p])))
      ++p;
    if (p >= text.size() || text[p] != '[')
      throw CaseError("expected '[' after " + key + " =",
                      line_of_offset(text, p));
    std::size_t close = text.find(']', p);
    if (close == std::string::npos)
      throw CaseError("unterminated matrix for " + key,
                      line_of_offset(text, p));
    std::string body = text.substr(p + 1, close - p - 1);
    int lineno = line_of_offset(text, p);
    std::vector<double> row;
    int row_line = lineno;
    std::string tok;
    auto flush_tok = [&]() {
      if (tok.empty()) return;
      if (tok[0] == '\001') {  // dangling comment sentinel
        tok.clear();
        return;
      }
      row.push_back(parse_double(tok, row_line));
      tok.clear();
    };
    auto flush_row = [&]() {
      flush_tok();
      if (!row.empty()) {
        out->rows.push_back(row);
        out->lines.push_back(row_line);
        row.clear();
      }
    };
    for (char ch : body) {
      if (ch == '%') {  // comment to end of line
        flush_tok();
        tok = "\001";   // sentinel: skip until newline
      }
      if (!tok.empty() && tok[0] == '\001') {
        if (ch == '\n') tok.clear(); else continue;
      }
      if (ch == '\n') {
        flush_row();
        ++lineno;
        row_line = lineno;
      } else if (ch == ';') {
        flush_row();
      } else if (ch == ',' || std::isspace(static_cast<unsigned char>(ch))) {
        flush_tok();
      } else {
        tok += ch;
      }
    }
    flush_row();
    return true;
  }
  return false;
}

double require_field(const std::vector<double>& row, std::size_t i,
                     const std::string& what, int line) {
  if (i >= row.size())
    throw CaseError(what + ": row has only " + std::to_string(row.size()) +
                        " fields",
                    line);
  return row[i];
}

}  // namespace

NetworkCase import_matpower(const std::string& text) {
  NetworkCase c;

  // baseMVA is a scalar assignment, not a matrix.
  std::size_t bpos = text.find(".baseMVA");
  if (bpos != std::string::npos) {
    std::size_t eq = text.find('=', bpos);
    if (eq != std::string::npos) {
      std::size_t end = text.find_first_of(";\n", eq);
      std::string tok = text.substr(eq + 1, end - eq - 1);
      tok.erase(std::remove_if(tok.begin(), tok.end(),
                               [](unsigned char ch) {
                                 return std::isspace(ch) != 0;
                               }),
                tok.end());
      c.base_mva = parse_double(tok, line_of_offset(text, bpos));
    }
  }

  NumericTable bus, gen, branch, gencost;
  if (!extract_table(text, "bus", &bus))
    throw CaseError("no bus table found");
  if (!extract_table(text, "gen", &gen))
    throw CaseError("no gen table found");
  if (!extract_table(text, "branch", &branch))
    throw CaseError("no branch table found");
  const bool have_cost = extract_table(text, "gencost", &gencost);
  if (have_cost && gencost.rows.size() != gen.rows.size())
    throw CaseError("gencost must have one row per generator");

  for (std::size_t i = 0; i < bus.rows.size(); ++i) {
    const auto& r = bus.rows[i];
    const int line = bus.lines[i];
    Bus b;
    b.id = static_cast<int>(require_field(r, 0, "bus", line));
    b.p_dem = require_field(r, 2, "bus", line);
    b.q_dem = require_field(r, 3, "bus", line);
    if (require_field(r, 4, "bus", line) != 0.0 ||
        require_field(r, 5, "bus", line) != 0.0)
      throw CaseError("bus shunts (GS/BS) are not supported", line);
    b.v_max = require_field(r, 11, "bus", line);
    b.v_min = require_field(r, 12, "bus", line);
    c.buses.push_back(b);
  }

  for (std::size_t i = 0; i < gen.rows.size(); ++i) {
    const auto& r = gen.rows[i];
    const int line = gen.lines[i];
    if (require_field(r, 7, "gen", line) <= 0.0) continue;  // offline
    Generator g;
    g.bus = static_cast<int>(require_field(r, 0, "gen", line));
    g.q_max = require_field(r, 3, "gen", line);
    g.q_min = require_field(r, 4, "gen", line);
    g.p_max = require_field(r, 8, "gen", line);
    g.p_min = require_field(r, 9, "gen", line);
    if (have_cost) {
      const auto& cr = gencost.rows[i];
      const int cline = gencost.lines[i];
      if (require_field(cr, 0, "gencost", cline) != 2.0)
        throw CaseError("only polynomial cost model 2 is supported", cline);
      int ncost = static_cast<int>(require_field(cr, 3, "gencost", cline));
      if (ncost < 1 || ncost > 3)
        throw CaseError("polynomial cost must have degree <= 2", cline);
      std::vector<double> coef;  // highest degree first
      for (int k = 0; k < ncost; ++k)
        coef.push_back(require_field(cr, 4 + k, "gencost", cline));
      g.c0 = coef[ncost - 1];
      g.c1 = ncost >= 2 ? coef[ncost - 2] : 0.0;
      g.c2 = ncost >= 3 ? coef[ncost - 3] : 0.0;
    }
    c.generators.push_back(g);
  }

  for (std::size_t i = 0; i < branch.rows.size(); ++i) {
    const auto& r = branch.rows[i];
    const int line = branch.lines[i];
    if (require_field(r, 10, "branch", line) == 0.0) continue;  // out of service
    Branch b;
    b.from = static_cast<int>(require_field(r, 0, "branch", line));
    b.to = static_cast<int>(require_field(r, 1, "branch", line));
    const double br_r = require_field(r, 2, "branch", line);
    const double br_x = require_field(r, 3, "branch", line);
    if (br_r == 0.0 && br_x == 0.0)
      throw CaseError("branch with zero series impedance", line);
    b.y = 1.0 / cplx{br_r, br_x};
    const double chg = require_field(r, 4, "branch", line);
    b.y_gr_from = b.y_gr_to = cplx{0.0, chg / 2.0};
    const double rate_a = require_field(r, 5, "branch", line);
    if (rate_a > 0.0) b.s_max = rate_a;
    double tap = require_field(r, 8, "branch", line);
    const double shift_deg = require_field(r, 9, "branch", line);
    if (tap == 0.0) tap = 1.0;  // MATPOWER convention: 0 means nominal
    b.rho_from = std::polar(tap, shift_deg * M_PI / 180.0);
    b.rho_to = cplx{1.0, 0.0};
    c.branches.push_back(b);
  }

  c.validate();
  return c;
}

NetworkCase parse_case(const std::string& text) {
  // MATPOWER files carry matrix assignments like "mpc.bus = [...]"; the
  // native format never contains '=' or '['.
  if (text.find(".bus") != std::string::npos &&
      text.find('[') != std::string::npos)
    return import_matpower(text);
  return parse_native(text);
}

// ---------------------------------------------------------------------------
// Admittance
// ---------------------------------------------------------------------------

cplx branch_current_from(const Branch& b, cplx v_from, cplx v_to) {
  return (b.y + b.y_gr_from) / std::norm(b.rho_from) * v_from -
         b.y / (std::conj(b.rho_from) * b.rho_to) * v_to;
}

cplx branch_current_to(const Branch& b, cplx v_from, cplx v_to) {
  return (b.y + b.y_gr_to) / std::norm(b.rho_to) * v_to -
         b.y / (std::conj(b.rho_to) * b.rho_from) * v_from;
}

AdmittanceMatrix build_admittance(const NetworkCase& c) {
  c.validate();
  const int n = c.n();
  Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(n, n);
  for (const Branch& b : c.branches) {
    const int l = c.bus_index(b.from);
    const int m = c.bus_index(b.to);
    Y(l, l) += (b.y + b.y_gr_from) / std::norm(b.rho_from);
    Y(m, m) += (b.y + b.y_gr_to) / std::norm(b.rho_to);
    Y(l, m) -= b.y / (std::conj(b.rho_from) * b.rho_to);
    Y(m, l) -= b.y / (std::conj(b.rho_to) * b.rho_from);
  }
  return {n, std::move(Y)};
}

}  // namespace mopf
