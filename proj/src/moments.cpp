#include "mopf/moments.hpp"

#include <array>
#include <sstream>

namespace mopf {

namespace {

std::string alpha_str(const std::vector<int>& alpha) {
  std::ostringstream out;
  out << "(";
  for (std::size_t i = 0; i < alpha.size(); ++i)
    out << (i ? "," : "") << alpha[i];
  out << ")";
  return out.str();
}

// Appends all alpha with the given total degree in lexicographic order
// (leading positions take the larger exponents first).
void append_grade(std::vector<int>& alpha, int pos, int remaining,
                  std::vector<std::vector<int>>& out) {
  if (pos + 1 == static_cast<int>(alpha.size())) {
    alpha[pos] = remaining;
    out.push_back(alpha);
    return;
  }
  for (int a = remaining; a >= 0; --a) {
    alpha[pos] = a;
    append_grade(alpha, pos + 1, remaining - a, out);
  }
}

int half_degree(const SparsePolynomial& f) { return (f.degree() + 1) / 2; }

std::vector<int> add_exponents(const std::vector<int>& a,
                               const std::vector<int>& b) {
  std::vector<int> sum(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) sum[i] = a[i] + b[i];
  return sum;
}

std::vector<int> add_exponents(const std::vector<int>& a,
                               const std::vector<int>& b,
                               const std::vector<int>& c) {
  std::vector<int> sum(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) sum[i] = a[i] + b[i] + c[i];
  return sum;
}

}  // namespace

int MultiIndexSet::index_of(const std::vector<int>& alpha) const {
  const auto it = position.find(alpha);
  if (it == position.end())
    throw MomentError("exponent " + alpha_str(alpha) +
                      " lies outside the degree-" + std::to_string(q) +
                      " index set");
  return it->second;
}

MultiIndexSet multi_index_set(int p, int q) {
  if (p < 1) throw MomentError("index set needs at least one variable");
  if (q < 0) throw MomentError("index set needs a nonnegative degree");
  MultiIndexSet s;
  s.p = p;
  s.q = q;
  std::vector<int> alpha(p, 0);
  for (int g = 0; g <= q; ++g) append_grade(alpha, 0, g, s.members);
  for (int i = 0; i < s.size(); ++i) s.position.emplace(s.members[i], i);
  return s;
}

int minimum_order(const PolyProblem& prob) {
  int d = std::max(1, half_degree(prob.objective));
  for (const PolyConstraint& c : prob.constraints)
    d = std::max(d, half_degree(c.f));
  return d;
}

MomentSDP build_relaxation(const PolyProblem& prob, int d) {
  if (prob.nvars < 1)
    throw MomentError("polynomial problem has no variables");
  if (d < 1) throw MomentError("relaxation order must be at least 1");

  const int v0 = half_degree(prob.objective);
  if (v0 > d)
    throw MomentError("relaxation order " + std::to_string(d) +
                      " is below v_0 = " + std::to_string(v0) +
                      " (objective)");
  for (std::size_t i = 0; i < prob.constraints.size(); ++i) {
    const int vi = half_degree(prob.constraints[i].f);
    if (vi > d)
      throw MomentError("relaxation order " + std::to_string(d) +
                        " is below v_" + std::to_string(i + 1) + " = " +
                        std::to_string(vi) + " (constraint '" +
                        prob.constraints[i].label + "')");
  }

  MomentSDP m;
  m.d = d;
  m.basis = multi_index_set(prob.nvars, 2 * d);
  m.unit_index = m.basis.index_of(std::vector<int>(prob.nvars, 0));
  for (const auto& [alpha, coeff] : prob.objective.terms)
    m.objective[m.basis.index_of(alpha)] += coeff;

  // Moment matrix: entry (a, b) is the moment of x^(alpha_a + alpha_b).
  const MultiIndexSet rows = multi_index_set(prob.nvars, d);
  PsdBlock moment;
  moment.side = rows.size();
  moment.label = "moment matrix";
  for (int r = 0; r < rows.size(); ++r)
    for (int c = r; c < rows.size(); ++c)
      moment.entries.push_back(
          {r, c, m.basis.index_of(add_exponents(rows.members[r],
                                                rows.members[c])),
           1.0});
  m.blocks.push_back(std::move(moment));

  // One localizing matrix per constraint: entry (a, b) carries
  // sum_gamma f_gamma * y_(alpha_a + alpha_b + gamma).
  for (const PolyConstraint& pc : prob.constraints) {
    const int vi = half_degree(pc.f);
    const MultiIndexSet sub = multi_index_set(prob.nvars, d - vi);
    std::map<std::array<int, 3>, double> acc;
    for (int r = 0; r < sub.size(); ++r)
      for (int c = r; c < sub.size(); ++c)
        for (const auto& [gamma, coeff] : pc.f.terms)
          acc[{r, c,
               m.basis.index_of(add_exponents(sub.members[r], sub.members[c],
                                              gamma))}] += coeff;
    PsdBlock loc;
    loc.side = sub.size();
    loc.label = pc.label;
    for (const auto& [key, coeff] : acc)
      if (coeff != 0.0) loc.entries.push_back({key[0], key[1], key[2], coeff});
    m.blocks.push_back(std::move(loc));
  }
  return m;
}

namespace {

// Splits a quadratic-plus-constant polynomial into x^T A x + a0.
void quadratic_parts(const SparsePolynomial& f, const std::string& label,
                     Eigen::MatrixXd& A, double& a0) {
  const int n = f.nvars;
  A = Eigen::MatrixXd::Zero(n, n);
  a0 = 0.0;
  for (const auto& [alpha, coeff] : f.terms) {
    int total = 0, first = -1, second = -1;
    for (int i = 0; i < n; ++i) {
      total += alpha[i];
      if (alpha[i] > 0) {
        if (first < 0)
          first = i;
        else
          second = i;
      }
    }
    if (total == 0) {
      a0 += coeff;
    } else if (total == 2) {
      if (second < 0) {
        A(first, first) += coeff;  // x_i^2
      } else {
        A(first, second) += coeff / 2.0;  // x_i x_j, split symmetrically
        A(second, first) += coeff / 2.0;
      }
    } else if (total == 1) {
      throw MomentError("rank relaxation needs quadratic forms without "
                        "odd terms; '" +
                        label + "' has a linear term");
    } else {
      throw MomentError("rank relaxation needs quadratic forms; '" + label +
                        "' has degree " + std::to_string(f.degree()));
    }
  }
}

}  // namespace

LiftedQuadraticSDP build_rank_relaxation(const PolyProblem& prob) {
  if (prob.nvars < 1)
    throw MomentError("polynomial problem has no variables");
  LiftedQuadraticSDP sdp;
  sdp.n_x = prob.nvars;
  quadratic_parts(prob.objective, "objective", sdp.A0, sdp.offset);
  sdp.constraints.reserve(prob.constraints.size());
  for (const PolyConstraint& pc : prob.constraints) {
    LiftedConstraint lc;
    lc.label = pc.label;
    quadratic_parts(pc.f, pc.label, lc.A, lc.a0);
    sdp.constraints.push_back(std::move(lc));
  }
  return sdp;
}

}  // namespace mopf
