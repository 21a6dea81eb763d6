#pragma once

// Network model: buses, generators and branches of an AC power network,
// the per-unit bus admittance matrix, and case-file I/O (a native text
// format plus an importer for a subset of the MATPOWER format).

#include <complex>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mopf {

using cplx = std::complex<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Error raised for malformed or inconsistent case data.  Carries the
// 1-based source line when the defect is tied to a specific line of the
// input file (0 when it is a whole-case consistency problem).
class CaseError : public std::runtime_error {
 public:
  explicit CaseError(const std::string& what, int line = 0);
  int line() const noexcept { return line_; }

 private:
  int line_;
};

struct Bus {
  int id = 0;          // external bus id (unique within a case)
  double p_dem = 0.0;  // active demand, MW
  double q_dem = 0.0;  // reactive demand, MVAr
  double v_min = 0.0;  // voltage magnitude lower bound, p.u.
  double v_max = 0.0;  // voltage magnitude upper bound, p.u.
};

struct Generator {
  int bus = 0;
  double p_min = 0.0, p_max = 0.0;  // active output range, MW
  double q_min = 0.0, q_max = 0.0;  // reactive output range, MVAr
  // Cost c2*p^2 + c1*p + c0 with p in MW: $/h, $/MWh, $/MW^2h.
  double c0 = 0.0, c1 = 0.0, c2 = 0.0;
};

// One undirected branch (line or transformer).  Directed orientations
// (from,to) and (to,from) are expanded where needed, not stored.
struct Branch {
  int from = 0, to = 0;
  cplx y{0.0, 0.0};          // mutual admittance, p.u.
  cplx y_gr_from{0.0, 0.0};  // admittance to ground at the from end, p.u.
  cplx y_gr_to{0.0, 0.0};    // admittance to ground at the to end, p.u.
  cplx rho_from{1.0, 0.0};   // ideal transformer ratio at the from end
  cplx rho_to{1.0, 0.0};     // ideal transformer ratio at the to end
  // Flow limits; kInf means "no constraint".
  double i_max = kInf;      // current magnitude, p.u.
  double vdiff_max = kInf;  // voltage-difference magnitude, p.u.
  double p_max = kInf;      // active flow, MW
  double s_max = kInf;      // apparent flow, MVA
};

struct NetworkCase {
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Generator> generators;
  std::vector<Branch> branches;

  int n() const noexcept { return static_cast<int>(buses.size()); }

  // 0-based position of an external bus id; throws CaseError if unknown.
  int bus_index(int bus_id) const;

  // Generator connected at a bus id, or nullptr if the bus has none.
  const Generator* generator_at(int bus_id) const;

  // Whole-case consistency checks shared by both parsers: duplicate bus
  // ids, dangling bus references, zero transformer ratios, inverted or
  // negative bounds, more than one generator on a bus.  Throws CaseError.
  void validate() const;
};

struct AdmittanceMatrix {
  int n = 0;
  Eigen::MatrixXcd entries;  // dense n x n, p.u.
};

// Parses a case file, sniffing whether it is native or MATPOWER text.
NetworkCase parse_case(const std::string& text);

// Parses the native line-oriented format (see docs/formats.md).
NetworkCase parse_native(const std::string& text);

// Imports the bus/gen/branch/gencost tables of a MATPOWER case file.
// Only numeric rows and polynomial costs of degree <= 2 are supported.
NetworkCase import_matpower(const std::string& text);

// Serializes to the native format; parse_native(serialize_case(c)) == c.
std::string serialize_case(const NetworkCase& c);

// Bus admittance matrix Y with i = Y v: diagonal entries sum
// (y + y_gr)/|rho|^2 over incident branch ends, off-diagonal entries
// -y/(rho_l^H rho_m) on branches and 0 elsewhere.
AdmittanceMatrix build_admittance(const NetworkCase& c);

// Current (p.u.) flowing from the given end of a branch into the branch,
//   i = (y + y_gr_end)/|rho_end|^2 * v_end - y/(rho_end^H rho_other) * v_other,
// used both for oracle checks and to derive flow constraint forms.
cplx branch_current_from(const Branch& b, cplx v_from, cplx v_to);
cplx branch_current_to(const Branch& b, cplx v_from, cplx v_to);

}  // namespace mopf
