#pragma once

// Moment relaxations of polynomial problems.  The order-d relaxation
// replaces monomials x^alpha by moment variables y_alpha (graded-lex
// indexed, |alpha| <= 2d) and requires the moment matrix and one
// localizing matrix per constraint to be positive semidefinite.  For
// problems whose polynomials are quadratic with no odd terms, the rank
// relaxation over a lifted matrix Y ~ x x^T is also provided.

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mopf/formulation.hpp"

namespace mopf {

class MomentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// All exponent vectors alpha over p variables with |alpha| <= q, in
// graded lexicographic order: ascending total degree, and within one
// degree the leading variables carry the higher exponents first, e.g.
// (0,0), (1,0), (0,1), (2,0), (1,1), (0,2).  Cardinality is
// binomial(p+q, q).  Because the order is graded, the members with
// |alpha| <= r < q are exactly a prefix.
struct MultiIndexSet {
  int p = 0;
  int q = 0;
  std::vector<std::vector<int>> members;
  std::map<std::vector<int>, int> position;

  int size() const { return static_cast<int>(members.size()); }
  int index_of(const std::vector<int>& alpha) const;  // throws if absent
};

MultiIndexSet multi_index_set(int p, int q);

// One coefficient of a symmetric-matrix-valued linear map of the moment
// vector: entry (row, col) of the block receives coeff * y[y_index].
// Only the upper triangle (row <= col) is stored.
struct BlockEntry {
  int row = 0;
  int col = 0;
  int y_index = 0;
  double coeff = 0.0;
};

struct PsdBlock {
  int side = 0;
  std::string label;
  std::vector<BlockEntry> entries;
};

// The order-d moment relaxation: minimize the objective functional over
// moment vectors y with y[unit_index] = 1 and every block PSD.
// blocks[0] is always the moment matrix.
struct MomentSDP {
  int d = 0;
  MultiIndexSet basis;                // y is indexed by basis (degree 2d)
  std::map<int, double> objective;    // y index -> coefficient
  int unit_index = 0;                 // position of alpha = 0
  std::vector<PsdBlock> blocks;
};

// Smallest admissible relaxation order: the max of ceil(deg/2) over the
// objective and all constraints (at least 1).
int minimum_order(const PolyProblem& prob);

MomentSDP build_relaxation(const PolyProblem& prob, int d);

// Rank relaxation of a problem whose polynomials are all of the form
// x^T A x + a0 (quadratic and constant terms only): minimize
// tr(A_0 Y) + a_00 over PSD matrices Y with tr(A_i Y) + a_i0 >= 0.
// Dropping rank(Y) = 1 is the only relaxation step.
struct LiftedConstraint {
  Eigen::MatrixXd A;
  double a0 = 0.0;
  std::string label;
};

struct LiftedQuadraticSDP {
  int n_x = 0;
  Eigen::MatrixXd A0;
  double offset = 0.0;  // constant part of the objective
  std::vector<LiftedConstraint> constraints;
};

LiftedQuadraticSDP build_rank_relaxation(const PolyProblem& prob);

}  // namespace mopf
