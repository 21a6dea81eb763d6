#pragma once

// Dense primal-dual interior-point solver for linear matrix inequalities
//
//     minimize c^T y   subject to   B_j(y) = F_j0 + sum_a y_a F_ja  PSD,
//
// with Nesterov-Todd scaling and a Mehrotra predictor-corrector, plus
// conversions from the moment and lifted relaxations and a sparse text
// exchange format for cross-checking against other solvers.

#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mopf/moments.hpp"

namespace mopf {

class SdpError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One coefficient of a block map: entry (row, col) of block matrix F_var
// (var = -1 addresses the constant matrix F_0).  Upper triangle only.
struct SdpEntry {
  int var = -1;
  int row = 0;
  int col = 0;
  double coeff = 0.0;
};

struct SdpBlock {
  int side = 0;
  std::string label;
  std::vector<SdpEntry> entries;
};

// sum_i coeff_i * y_i = rhs; used to hold normalizations such as y_0 = 1.
struct LinearEquality {
  std::map<int, double> coeff;
  double rhs = 0.0;
};

struct SDPInstance {
  int nvars = 0;
  std::map<int, double> objective;  // var -> coefficient
  double obj_constant = 0.0;        // added to both reported objectives
  std::vector<SdpBlock> blocks;
  std::vector<LinearEquality> equalities;
};

enum class SolveStatus { kOptimal, kInfeasible, kUnbounded, kNumericalFailure };

std::string to_string(SolveStatus s);

// One row of the iteration log.  duality_slack bounds the amount by which
// weak duality may fail at an infeasible iterate: dual_obj <= primal_obj
// + duality_slack always holds along the path.
struct IterateStat {
  int iter = 0;
  double primal_obj = 0.0;
  double dual_obj = 0.0;
  double gap = 0.0;
  double primal_res = 0.0;
  double dual_res = 0.0;
  double mu = 0.0;
  double duality_slack = 0.0;
};

struct Residuals {
  double primal = std::numeric_limits<double>::infinity();
  double dual = std::numeric_limits<double>::infinity();
  double gap = std::numeric_limits<double>::infinity();
};

struct SDPSolution {
  SolveStatus status = SolveStatus::kNumericalFailure;
  Eigen::VectorXd y;                          // full length (pins restored)
  std::vector<Eigen::MatrixXd> block_duals;   // PSD multipliers, per block
  double primal_obj = std::numeric_limits<double>::infinity();
  double dual_obj = -std::numeric_limits<double>::infinity();
  Residuals residuals;
  int iterations = 0;
  std::vector<IterateStat> trace;
};

// Interior-point solve to relative accuracy tol (all of gap, primal and
// dual residuals).  tol must lie in [1e-13, 1e-4].  Deterministic.
SDPSolution solve(const SDPInstance& inst, double tol = 1e-9,
                  int max_iter = 300);

// The moment relaxation as an LMI over the moment vector, with the
// normalization carried as an equality.
SDPInstance to_sdp_instance(const MomentSDP& m);

// The rank relaxation as an LMI over the upper triangle of the lifted
// matrix (row-major svec indexing).
SDPInstance to_sdp_instance(const LiftedQuadraticSDP& sdp);

// Sparse text exchange format.  The writer first eliminates the
// equalities, then emits the standard block layout with the convention
// F(y) = sum_i y_i F_i - F_0; a comment line records the objective
// constant so that read_sdpa(write_sdpa(inst)) reproduces the reduced
// instance exactly.
std::string write_sdpa(const SDPInstance& inst);
SDPInstance read_sdpa(const std::string& text);

}  // namespace mopf
