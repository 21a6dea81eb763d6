#include "mopf/formulation.hpp"

#include <cmath>
#include <sstream>

namespace mopf {

ComplexToRealMaps realify(const Eigen::MatrixXcd& M) {
  const Eigen::Index n = M.rows();
  const Eigen::MatrixXd P = M.real();
  const Eigen::MatrixXd Q = M.imag();
  ComplexToRealMaps maps;
  maps.re.resize(2 * n, 2 * n);
  maps.re << P, -Q, Q, P;
  maps.im.resize(2 * n, 2 * n);
  maps.im << Q, P, -P, Q;
  return maps;
}

// ---------------------------------------------------------------------------
// SparsePolynomial
// ---------------------------------------------------------------------------

void SparsePolynomial::add_term(const std::vector<int>& alpha, double coeff) {
  if (coeff == 0.0) return;
  auto [it, inserted] = terms.try_emplace(alpha, coeff);
  if (!inserted) {
    it->second += coeff;
    if (it->second == 0.0) terms.erase(it);
  }
}

void SparsePolynomial::add_constant(double c) {
  add_term(std::vector<int>(nvars, 0), c);
}

void SparsePolynomial::add_linear(int var, double coeff) {
  std::vector<int> alpha(nvars, 0);
  alpha[var] = 1;
  add_term(alpha, coeff);
}

int SparsePolynomial::degree() const {
  int deg = 0;
  for (const auto& [alpha, coeff] : terms) {
    int total = 0;
    for (int a : alpha) total += a;
    deg = std::max(deg, total);
  }
  return deg;
}

double SparsePolynomial::evaluate(const Eigen::VectorXd& x) const {
  double val = 0.0;
  for (const auto& [alpha, coeff] : terms) {
    double mono = coeff;
    for (int i = 0; i < nvars; ++i)
      for (int k = 0; k < alpha[i]; ++k) mono *= x(i);
    val += mono;
  }
  return val;
}

SparsePolynomial& SparsePolynomial::operator+=(const SparsePolynomial& other) {
  for (const auto& [alpha, coeff] : other.terms) add_term(alpha, coeff);
  return *this;
}

SparsePolynomial SparsePolynomial::scaled(double s) const {
  SparsePolynomial out(nvars);
  if (s == 0.0) return out;
  for (const auto& [alpha, coeff] : terms) out.terms.emplace(alpha, coeff * s);
  return out;
}

SparsePolynomial poly_product(const SparsePolynomial& a,
                              const SparsePolynomial& b) {
  SparsePolynomial out(a.nvars);
  std::vector<int> gamma(a.nvars);
  for (const auto& [alpha, ca] : a.terms)
    for (const auto& [beta, cb] : b.terms) {
      for (int i = 0; i < a.nvars; ++i) gamma[i] = alpha[i] + beta[i];
      out.add_term(gamma, ca * cb);
    }
  return out;
}

SparsePolynomial quadratic_poly(const Eigen::MatrixXd& S, int nvars) {
  SparsePolynomial out(nvars);
  const int m = std::min<int>(nvars, static_cast<int>(S.rows()));
  std::vector<int> alpha(nvars, 0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      if (S(i, j) == 0.0) continue;
      alpha.assign(nvars, 0);
      ++alpha[i];
      ++alpha[j];
      out.add_term(alpha, S(i, j));
    }
  return out;
}

// ---------------------------------------------------------------------------
// Complex quadratic-form OPF
// ---------------------------------------------------------------------------

namespace {

std::string bus_label(int id, const char* what) {
  return "bus " + std::to_string(id) + ": " + what;
}

std::string branch_label(int from, int to, const char* what) {
  return "branch " + std::to_string(from) + "-" + std::to_string(to) + ": " +
         what;
}

// Row vector w with branch current i = w^T v seen from the `from_side`
// end of the branch.
Eigen::VectorXcd current_row(const NetworkCase& c, const Branch& b,
                             bool from_side) {
  Eigen::VectorXcd w = Eigen::VectorXcd::Zero(c.n());
  const int l = c.bus_index(from_side ? b.from : b.to);
  const int m = c.bus_index(from_side ? b.to : b.from);
  const cplx rho_l = from_side ? b.rho_from : b.rho_to;
  const cplx rho_m = from_side ? b.rho_to : b.rho_from;
  const cplx y_gr = from_side ? b.y_gr_from : b.y_gr_to;
  w(l) = (b.y + y_gr) / std::norm(rho_l);
  w(m) = -b.y / (std::conj(rho_l) * rho_m);
  return w;
}

}  // namespace

HermitianFormSet build_complex_opf(const NetworkCase& c) {
  c.validate();
  const int n = c.n();
  const Eigen::MatrixXcd Y = build_admittance(c).entries;
  const cplx j{0.0, 1.0};

  HermitianFormSet fs;
  fs.n = n;
  fs.A.reserve(n);
  fs.A_react.reserve(n);
  for (int k = 0; k < n; ++k) {
    // v^H Phi v = conj(i_k) v_k = s_k, the net complex injection at k.
    Eigen::MatrixXcd Phi = Eigen::MatrixXcd::Zero(n, n);
    Phi.col(k) = Y.row(k).conjugate().transpose();
    fs.A.push_back((Phi + Phi.adjoint()) / 2.0);
    fs.A_react.push_back((Phi - Phi.adjoint()) / (2.0 * j));
  }

  const double base = c.base_mva;
  for (int k = 0; k < n; ++k) {
    const Bus& bus = c.buses[k];
    const double pd = bus.p_dem / base, qd = bus.q_dem / base;
    const Generator* g = c.generator_at(bus.id);
    // Net injection bounds: generation range shifted by demand; a bus
    // without a generator has the degenerate range [0, 0], so its power
    // balance appears as an opposing pair of inequalities.
    const double pmin = (g ? g->p_min / base : 0.0) - pd;
    const double pmax = (g ? g->p_max / base : 0.0) - pd;
    const double qmin = (g ? g->q_min / base : 0.0) - qd;
    const double qmax = (g ? g->q_max / base : 0.0) - qd;
    const char* pu = g ? "active generation max" : "active balance (upper)";
    const char* pl = g ? "active generation min" : "active balance (lower)";
    const char* qu = g ? "reactive generation max" : "reactive balance (upper)";
    const char* ql = g ? "reactive generation min" : "reactive balance (lower)";
    if (std::isfinite(pmax))
      fs.ineq.push_back({fs.A[k], pmax, bus_label(bus.id, pu)});
    if (std::isfinite(pmin))
      fs.ineq.push_back({-fs.A[k], -pmin, bus_label(bus.id, pl)});
    if (std::isfinite(qmax))
      fs.ineq.push_back({fs.A_react[k], qmax, bus_label(bus.id, qu)});
    if (std::isfinite(qmin))
      fs.ineq.push_back({-fs.A_react[k], -qmin, bus_label(bus.id, ql)});

    Eigen::MatrixXcd E = Eigen::MatrixXcd::Zero(n, n);
    E(k, k) = 1.0;
    fs.ineq.push_back(
        {E, bus.v_max * bus.v_max, bus_label(bus.id, "voltage max")});
    fs.ineq.push_back(
        {-E, -bus.v_min * bus.v_min, bus_label(bus.id, "voltage min")});
  }

  for (const Branch& b : c.branches) {
    if (std::isfinite(b.vdiff_max)) {
      // |v_l - v_m| is orientation-independent; one constraint suffices.
      const int l = c.bus_index(b.from), m = c.bus_index(b.to);
      Eigen::VectorXcd d = Eigen::VectorXcd::Zero(n);
      d(l) = 1.0;
      d(m) = -1.0;
      fs.ineq.push_back({d * d.adjoint(), b.vdiff_max * b.vdiff_max,
                         branch_label(b.from, b.to, "voltage difference")});
    }
    for (bool from_side : {true, false}) {
      const int l_id = from_side ? b.from : b.to;
      const int m_id = from_side ? b.to : b.from;
      const int l = c.bus_index(l_id);
      const Eigen::VectorXcd w = current_row(c, b, from_side);
      if (std::isfinite(b.i_max)) {
        // |i_lm|^2 = v^H (conj(w) w^T) v
        fs.ineq.push_back({w.conjugate() * w.transpose(), b.i_max * b.i_max,
                           branch_label(l_id, m_id, "current limit")});
      }
      // s_lm = v_l conj(i_lm) = v^H C v with C = conj(w) e_l^T.
      Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(n, n);
      C.col(l) = w.conjugate();
      if (std::isfinite(b.p_max)) {
        fs.ineq.push_back({(C + C.adjoint()) / 2.0, b.p_max / base,
                           branch_label(l_id, m_id, "active flow limit")});
      }
      if (std::isfinite(b.s_max)) {
        fs.apparent.push_back({C, b.s_max / base,
                               branch_label(l_id, m_id, "apparent flow limit")});
      }
    }
  }
  return fs;
}

// ---------------------------------------------------------------------------
// Polynomial problems
// ---------------------------------------------------------------------------

namespace {

PolyProblem build_poly(const NetworkCase& c, bool phase_fixed) {
  const HermitianFormSet fs = build_complex_opf(c);
  const int n = fs.n;
  const int nvars = phase_fixed ? 2 * n - 1 : 2 * n;
  const Bus& last = c.buses.back();

  PolyProblem p;
  p.nvars = nvars;

  // Objective: sum of generator costs with generation in MW recovered as
  // base * (x^T A_re x + demand).
  p.objective = SparsePolynomial(nvars);
  for (const Generator& g : c.generators) {
    const int k = c.bus_index(g.bus);
    SparsePolynomial pg =
        quadratic_poly(realify(fs.A[k]).re, nvars).scaled(c.base_mva);
    pg.add_constant(c.buses[k].p_dem);
    if (g.c2 != 0.0) p.objective += poly_product(pg, pg).scaled(g.c2);
    if (g.c1 != 0.0) p.objective += pg.scaled(g.c1);
    p.objective.add_constant(g.c0);
  }

  // Quadratic inequalities: b - x^T B_re x >= 0.  Under phase fixing the
  // last bus's magnitude band is handled below as linear bounds instead.
  const std::string skip_max = bus_label(last.id, "voltage max");
  const std::string skip_min = bus_label(last.id, "voltage min");
  for (const QuadraticBound& q : fs.ineq) {
    if (phase_fixed && (q.label == skip_max || q.label == skip_min)) continue;
    SparsePolynomial f(nvars);
    f.add_constant(q.bound);
    f += quadratic_poly(realify(q.B).re, nvars).scaled(-1.0);
    p.constraints.push_back({std::move(f), q.label});
  }

  if (phase_fixed) {
    if (last.v_min < 0.0)
      throw FormulationError(
          "phase fixing requires a nonnegative voltage lower bound at bus " +
          std::to_string(last.id));
    // With Im(v_n) = 0 and v_n >= 0, the band on |v_n| is linear in x_n.
    SparsePolynomial up(nvars), lo(nvars);
    up.add_constant(last.v_max);
    up.add_linear(n - 1, -1.0);
    lo.add_constant(-last.v_min);
    lo.add_linear(n - 1, 1.0);
    p.constraints.push_back({std::move(up), skip_max});
    p.constraints.push_back({std::move(lo), skip_min});
  }

  // Apparent-flow limits, squared: c^2 - (x^T C_re x)^2 - (x^T C_im x)^2.
  for (const ApparentBound& a : fs.apparent) {
    if (!phase_fixed)
      throw FormulationError(
          "apparent-flow limits cannot be kept quadratic: " + a.label);
    const ComplexToRealMaps maps = realify(a.C);
    const SparsePolynomial pre = quadratic_poly(maps.re, nvars);
    const SparsePolynomial pim = quadratic_poly(maps.im, nvars);
    SparsePolynomial f(nvars);
    f.add_constant(a.bound * a.bound);
    f += poly_product(pre, pre).scaled(-1.0);
    f += poly_product(pim, pim).scaled(-1.0);
    p.constraints.push_back({std::move(f), a.label});
  }

  if (phase_fixed) {
    // Redundant ball constraint sum_k v_max_k^2 - |x|^2 >= 0, appended
    // last; it keeps the feasible set inside a known ball, which the
    // hierarchy's convergence guarantee requires.
    double radius2 = 0.0;
    for (const Bus& b : c.buses) radius2 += b.v_max * b.v_max;
    SparsePolynomial ball(nvars);
    ball.add_constant(radius2);
    for (int i = 0; i < nvars; ++i) {
      std::vector<int> alpha(nvars, 0);
      alpha[i] = 2;
      ball.add_term(alpha, -1.0);
    }
    p.constraints.push_back({std::move(ball), "ball"});
  }
  return p;
}

}  // namespace

PolyProblem build_poly_opf(const NetworkCase& c) { return build_poly(c, true); }

PolyProblem build_quadratic_opf(const NetworkCase& c) {
  for (const Generator& g : c.generators)
    if (g.c2 != 0.0)
      throw FormulationError(
          "quadratic variant requires an affine active-power objective");
  return build_poly(c, false);
}

std::string describe(const PolyProblem& p) {
  std::ostringstream out;
  auto poly_str = [&](const SparsePolynomial& f) {
    std::ostringstream s;
    bool first = true;
    for (const auto& [alpha, coeff] : f.terms) {
      s << (first ? "" : " + ") << coeff;
      first = false;
      for (int i = 0; i < f.nvars; ++i)
        if (alpha[i] > 0) {
          s << "*x" << i + 1;
          if (alpha[i] > 1) s << "^" << alpha[i];
        }
    }
    return first ? std::string("0") : s.str();
  };
  out << "min " << poly_str(p.objective) << "\n";
  for (const PolyConstraint& c : p.constraints)
    out << poly_str(c.f) << " >= 0    [" << c.label << "]\n";
  return out.str();
}

}  // namespace mopf
