#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "mopf/moments.hpp"
#include "mopf/netmodel.hpp"

using namespace mopf;

namespace {

NetworkCase load_case(const std::string& name) {
  std::ifstream in(std::string(MOPF_DATA_DIR) + "/" + name);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_case(ss.str());
}

long binomial(int n, int k) {
  long out = 1;
  for (int i = 1; i <= k; ++i) out = out * (n - k + i) / i;
  return out;
}

int total_degree(const std::vector<int>& alpha) {
  int t = 0;
  for (int a : alpha) t += a;
  return t;
}

// Moment vector of the evaluation functional at x: y_alpha = x^alpha.
Eigen::VectorXd point_moments(const MultiIndexSet& basis,
                              const Eigen::VectorXd& x) {
  Eigen::VectorXd y(basis.size());
  for (int i = 0; i < basis.size(); ++i) {
    double mono = 1.0;
    for (int k = 0; k < basis.p; ++k)
      for (int e = 0; e < basis.members[i][k]; ++e) mono *= x(k);
    y(i) = mono;
  }
  return y;
}

Eigen::MatrixXd assemble(const PsdBlock& block, const Eigen::VectorXd& y) {
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(block.side, block.side);
  for (const BlockEntry& e : block.entries) {
    B(e.row, e.col) += e.coeff * y(e.y_index);
    if (e.row != e.col) B(e.col, e.row) += e.coeff * y(e.y_index);
  }
  return B;
}

// Monomial vector of the index set at x.
Eigen::VectorXd monomials(const MultiIndexSet& s, const Eigen::VectorXd& x) {
  return point_moments(s, x);
}

}  // namespace

TEST_CASE("index sets enumerate graded-lex monomials") {
  SUBCASE("two variables, degree one") {
    const MultiIndexSet s = multi_index_set(2, 1);
    REQUIRE(s.size() == 3);
    CHECK(s.members[0] == std::vector<int>{0, 0});
    CHECK(s.members[1] == std::vector<int>{1, 0});
    CHECK(s.members[2] == std::vector<int>{0, 1});
  }

  SUBCASE("cardinality is binomial(p+q, q)") {
    CHECK(multi_index_set(9, 2).size() == 55);
    CHECK(multi_index_set(3, 2).size() == 10);
    CHECK(multi_index_set(3, 3).size() == 20);
    CHECK(multi_index_set(3, 4).size() == 35);
    for (int p = 1; p <= 6; ++p)
      for (int q = 0; q <= 4; ++q)
        CHECK(multi_index_set(p, q).size() == binomial(p + q, q));
  }

  SUBCASE("graded order with lexicographic ties") {
    const MultiIndexSet s = multi_index_set(3, 2);
    for (int i = 1; i < s.size(); ++i) {
      const int ga = total_degree(s.members[i - 1]);
      const int gb = total_degree(s.members[i]);
      CHECK(ga <= gb);
      if (ga == gb) CHECK(s.members[i - 1] > s.members[i]);
    }
    // Lower-degree sets are prefixes of higher-degree ones.
    const MultiIndexSet low = multi_index_set(3, 1);
    for (int i = 0; i < low.size(); ++i) CHECK(low.members[i] == s.members[i]);
  }

  SUBCASE("positions invert the enumeration") {
    const MultiIndexSet s = multi_index_set(4, 3);
    for (int i = 0; i < s.size(); ++i) CHECK(s.index_of(s.members[i]) == i);
    CHECK_THROWS_AS(s.index_of({4, 0, 0, 0}), MomentError);
    CHECK_THROWS_AS(multi_index_set(0, 2), MomentError);
    CHECK_THROWS_AS(multi_index_set(2, -1), MomentError);
  }
}

TEST_CASE("relaxation blocks have the prescribed shapes") {
  const NetworkCase wb2 = load_case("wb2.m");
  const PolyProblem p2 = build_poly_opf(wb2);
  CHECK(minimum_order(p2) == 1);

  const MomentSDP m1 = build_relaxation(p2, 1);
  CHECK(m1.d == 1);
  CHECK(m1.basis.q == 2);
  CHECK(m1.basis.size() == 10);  // binomial(3+2, 2)
  CHECK(m1.unit_index == 0);
  REQUIRE(m1.blocks.size() == 1 + p2.constraints.size());
  CHECK(m1.blocks[0].label == "moment matrix");
  CHECK(m1.blocks[0].side == 4);  // binomial(3+1, 1)
  for (std::size_t i = 1; i < m1.blocks.size(); ++i) {
    CHECK(m1.blocks[i].side == 1);  // every v_i is 1 at order 1
    CHECK(m1.blocks[i].label == p2.constraints[i - 1].label);
  }

  const MomentSDP m2 = build_relaxation(p2, 2);
  CHECK(m2.basis.size() == 35);   // binomial(3+4, 4)
  CHECK(m2.blocks[0].side == 10); // binomial(3+2, 2)
  CHECK(m2.blocks[1].side == 4);  // quadratic constraint: v_i = 1

  const NetworkCase lm3 = load_case("lmbm3.m");
  const PolyProblem p3 = build_poly_opf(lm3);
  CHECK(minimum_order(p3) == 2);  // quartic objective
  CHECK_THROWS_WITH_AS(build_relaxation(p3, 1),
                       doctest::Contains("v_0 = 2"), MomentError);

  const MomentSDP m3 = build_relaxation(p3, 2);
  CHECK(m3.basis.size() == 126);  // binomial(5+4, 4)
  CHECK(m3.blocks[0].side == 21); // binomial(5+2, 2)
  for (std::size_t i = 1; i < m3.blocks.size(); ++i) {
    const int deg = p3.constraints[i - 1].f.degree();
    CHECK(m3.blocks[i].side == (deg > 2 ? 1 : 6));
  }

  // Every referenced moment stays inside the degree-2d index set.
  for (const PsdBlock& b : m3.blocks)
    for (const BlockEntry& e : b.entries) {
      CHECK(e.row <= e.col);
      CHECK(e.y_index >= 0);
      CHECK(e.y_index < m3.basis.size());
    }
}

TEST_CASE("order errors name the first offending constraint") {
  // A quartic constraint in three variables: order 1 must be refused.
  PolyProblem p;
  p.nvars = 3;
  p.objective = SparsePolynomial(3);
  p.objective.add_linear(0, 1.0);
  SparsePolynomial f(3);
  f.add_term({2, 2, 0}, -1.0);
  f.add_constant(1.0);
  p.constraints.push_back({f, "quartic box"});
  CHECK(minimum_order(p) == 2);
  CHECK_THROWS_WITH_AS(build_relaxation(p, 1),
                       doctest::Contains("quartic box"), MomentError);
  CHECK_NOTHROW(build_relaxation(p, 2));
  CHECK_THROWS_AS(build_relaxation(p, 0), MomentError);
}

TEST_CASE("localizing rows follow the shifted moment pattern") {
  // Single constraint x2 >= 0 in three variables.
  PolyProblem p;
  p.nvars = 3;
  p.objective = SparsePolynomial(3);
  p.objective.add_linear(2, 1.0);
  SparsePolynomial f(3);
  f.add_linear(1, 1.0);
  p.constraints.push_back({f, "x2 nonnegative"});

  const MomentSDP m1 = build_relaxation(p, 1);
  REQUIRE(m1.blocks.size() == 2);
  const PsdBlock& loc1 = m1.blocks[1];
  REQUIRE(loc1.side == 1);
  REQUIRE(loc1.entries.size() == 1);
  CHECK(loc1.entries[0].y_index == m1.basis.index_of({0, 1, 0}));
  CHECK(loc1.entries[0].coeff == 1.0);

  const MomentSDP m2 = build_relaxation(p, 2);
  const PsdBlock& loc2 = m2.blocks[1];
  REQUIRE(loc2.side == 4);
  // First row of the localizing matrix: y_010, y_110, y_020, y_011.
  const std::vector<std::vector<int>> want = {
      {0, 1, 0}, {1, 1, 0}, {0, 2, 0}, {0, 1, 1}};
  for (int c = 0; c < 4; ++c) {
    bool found = false;
    for (const BlockEntry& e : loc2.entries)
      if (e.row == 0 && e.col == c) {
        CHECK(e.y_index == m2.basis.index_of(want[c]));
        CHECK(e.coeff == 1.0);
        found = true;
      }
    CHECK(found);
  }
}

TEST_CASE("point evaluation reproduces rank-one outer products") {
  const NetworkCase lm3 = load_case("lmbm3.m");
  const PolyProblem p = build_poly_opf(lm3);
  const MomentSDP m = build_relaxation(p, 2);
  const MultiIndexSet rows = multi_index_set(p.nvars, 2);

  std::mt19937 rng(60422);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd x(p.nvars);
    for (int i = 0; i < p.nvars; ++i) x(i) = u(rng);
    const Eigen::VectorXd y = point_moments(m.basis, x);

    // The moment matrix becomes u(x) u(x)^T.
    const Eigen::VectorXd ud = monomials(rows, x);
    CHECK(assemble(m.blocks[0], y).isApprox(ud * ud.transpose(), 1e-10));

    // Each localizing matrix becomes f_i(x) times an outer product.
    for (std::size_t i = 0; i < p.constraints.size(); ++i) {
      const PsdBlock& b = m.blocks[i + 1];
      const int vi = (p.constraints[i].f.degree() + 1) / 2;
      const MultiIndexSet sub = multi_index_set(p.nvars, 2 - vi);
      REQUIRE(sub.size() == b.side);
      const Eigen::VectorXd us = monomials(sub, x);
      const double fx = p.constraints[i].f.evaluate(x);
      const Eigen::MatrixXd want = fx * us * us.transpose();
      CHECK((assemble(b, y) - want).norm() <= 1e-10 * (1 + want.norm()));
    }

    // The objective functional evaluates the original polynomial.
    double obj = 0.0;
    for (const auto& [idx, coeff] : m.objective) obj += coeff * y(idx);
    CHECK(obj == doctest::Approx(p.objective.evaluate(x)).epsilon(1e-10));
    CHECK(y(m.unit_index) == 1.0);
  }
}

TEST_CASE("feasible points give semidefinite blocks") {
  // Known optimum of the wb2 case (multistart nonlinear solve).
  const NetworkCase wb2 = load_case("wb2.m");
  const PolyProblem p = build_poly_opf(wb2);
  Eigen::VectorXd x(3);
  x << 0.516666666667, 1.05, 0.8;

  for (int d : {1, 2, 3}) {
    CAPTURE(d);
    const MomentSDP m = build_relaxation(p, d);
    const Eigen::VectorXd y = point_moments(m.basis, x);
    for (const PsdBlock& b : m.blocks) {
      const Eigen::MatrixXd B = assemble(b, y);
      const double lo = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(B)
                            .eigenvalues()
                            .minCoeff();
      CAPTURE(b.label);
      CHECK(lo >= -1e-8 * (1 + B.norm()));
    }
  }
}

TEST_CASE("relaxation assembly is deterministic") {
  const PolyProblem p = build_poly_opf(load_case("lmbm3.m"));
  const MomentSDP a = build_relaxation(p, 2);
  const MomentSDP b = build_relaxation(p, 2);
  REQUIRE(a.blocks.size() == b.blocks.size());
  CHECK(a.objective == b.objective);
  for (std::size_t i = 0; i < a.blocks.size(); ++i) {
    REQUIRE(a.blocks[i].entries.size() == b.blocks[i].entries.size());
    for (std::size_t k = 0; k < a.blocks[i].entries.size(); ++k) {
      const BlockEntry &x = a.blocks[i].entries[k], &y = b.blocks[i].entries[k];
      CHECK(x.row == y.row);
      CHECK(x.col == y.col);
      CHECK(x.y_index == y.y_index);
      CHECK(x.coeff == y.coeff);
    }
  }
}

TEST_CASE("rank relaxation splits quadratics into matrices") {
  SUBCASE("scalar example") {
    PolyProblem p;
    p.nvars = 1;
    p.objective = SparsePolynomial(1);
    p.objective.add_term({2}, 1.0);
    SparsePolynomial f(1);
    f.add_term({2}, 1.0);
    f.add_constant(-1.0);
    p.constraints.push_back({f, "unit norm"});

    const LiftedQuadraticSDP sdp = build_rank_relaxation(p);
    CHECK(sdp.n_x == 1);
    CHECK(sdp.A0(0, 0) == 1.0);
    CHECK(sdp.offset == 0.0);
    REQUIRE(sdp.constraints.size() == 1);
    CHECK(sdp.constraints[0].A(0, 0) == 1.0);
    CHECK(sdp.constraints[0].a0 == -1.0);
  }

  SUBCASE("wb2 quadratic variant round-trips through the matrices") {
    const NetworkCase wb2 = load_case("wb2.m");
    const PolyProblem p = build_quadratic_opf(wb2);
    const LiftedQuadraticSDP sdp = build_rank_relaxation(p);
    REQUIRE(sdp.n_x == 4);
    REQUIRE(sdp.constraints.size() == p.constraints.size());
    CHECK(sdp.A0.isApprox(sdp.A0.transpose()));

    std::mt19937 rng(88);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd z(4);
      for (int i = 0; i < 4; ++i) z(i) = u(rng);
      CHECK(z.dot(sdp.A0 * z) + sdp.offset ==
            doctest::Approx(p.objective.evaluate(z)).epsilon(1e-10));
      for (std::size_t i = 0; i < sdp.constraints.size(); ++i) {
        const LiftedConstraint& lc = sdp.constraints[i];
        CHECK(lc.A.isApprox(lc.A.transpose()));
        CHECK(z.dot(lc.A * z) + lc.a0 ==
              doctest::Approx(p.constraints[i].f.evaluate(z)).epsilon(1e-10));
      }
    }
  }

  SUBCASE("odd or higher-degree terms are refused") {
    // Phase-fixed problems contain linear voltage bands.
    CHECK_THROWS_WITH_AS(
        build_rank_relaxation(build_poly_opf(load_case("wb2.m"))),
        doctest::Contains("linear"), MomentError);
    // Quartic costs cannot be lifted to a single quadratic form.
    PolyProblem p;
    p.nvars = 2;
    p.objective = SparsePolynomial(2);
    p.objective.add_term({4, 0}, 1.0);
    CHECK_THROWS_WITH_AS(build_rank_relaxation(p),
                         doctest::Contains("degree"), MomentError);
  }
}
