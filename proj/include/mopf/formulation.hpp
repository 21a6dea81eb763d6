#pragma once

// Quadratic-form formulation of OPF over complex voltages, its
// realification to symmetric forms in x = [Re(v); Im(v)], and the final
// polynomial optimization problem in 2n-1 real variables obtained by
// fixing the voltage phase at the last bus.

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mopf/netmodel.hpp"

namespace mopf {

class FormulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Real matrix pair with v^H M v = x^T M_re x + j * x^T M_im x for every
// complex v and x = [Re(v); Im(v)].
struct ComplexToRealMaps {
  Eigen::MatrixXd re, im;
};

ComplexToRealMaps realify(const Eigen::MatrixXcd& M);

// One scalar inequality v^H B v <= bound of the complex formulation.
// B is Hermitian, so the form is real for every v.
struct QuadraticBound {
  Eigen::MatrixXcd B;
  double bound = 0.0;
  std::string label;  // originating OPF constraint, used in reports
};

// One apparent-flow bound |v^H C v| <= bound (C is not Hermitian).
struct ApparentBound {
  Eigen::MatrixXcd C;
  double bound = 0.0;
  std::string label;
};

// The matrices of the quadratic-form OPF.  A and A_react hold the net
// injection forms for every bus: v^H A[k] v is the net active power
// injected at bus k (p.u.), so generation there is v^H A[k] v + demand.
struct HermitianFormSet {
  int n = 0;
  std::vector<Eigen::MatrixXcd> A;
  std::vector<Eigen::MatrixXcd> A_react;
  std::vector<QuadraticBound> ineq;      // v^H B v <= b
  std::vector<ApparentBound> apparent;   // |v^H C v| <= c
};

HermitianFormSet build_complex_opf(const NetworkCase& c);

// Polynomial with sparse real coefficients, keyed by exponent vector.
// Zero coefficients are never stored.
struct SparsePolynomial {
  int nvars = 0;
  std::map<std::vector<int>, double> terms;

  explicit SparsePolynomial(int nvars = 0) : nvars(nvars) {}

  void add_term(const std::vector<int>& alpha, double coeff);
  void add_constant(double c);
  void add_linear(int var, double coeff);
  int degree() const;
  double evaluate(const Eigen::VectorXd& x) const;
  SparsePolynomial& operator+=(const SparsePolynomial& other);
  SparsePolynomial scaled(double s) const;
};

SparsePolynomial poly_product(const SparsePolynomial& a,
                              const SparsePolynomial& b);

// x^T S x restricted to the first nvars coordinates of x (terms touching
// dropped coordinates are omitted, which is exact when those coordinates
// are pinned to zero).
SparsePolynomial quadratic_poly(const Eigen::MatrixXd& S, int nvars);

struct PolyConstraint {
  SparsePolynomial f;  // constraint reads f(x) >= 0
  std::string label;
};

struct PolyProblem {
  int nvars = 0;
  SparsePolynomial objective;  // $/h
  std::vector<PolyConstraint> constraints;
};

// The polynomial OPF in 2n-1 variables: phase fixed at the last bus
// (its imaginary coordinate is eliminated and its magnitude band becomes
// a pair of linear bounds), apparent-flow limits squared into quartic
// constraints, and one redundant ball constraint sum(v_max^2) - |x|^2 >= 0
// appended last.
PolyProblem build_poly_opf(const NetworkCase& c);

// The fully quadratic variant in all 2n variables: no phase fixing and
// every constraint kept quadratic.  Its order-1 moment relaxation
// coincides with the rank relaxation of the lifted problem.  Requires an
// affine active-power objective (all c2 = 0) and no apparent-flow
// limits; anything else cannot stay quadratic and is rejected.
PolyProblem build_quadratic_opf(const NetworkCase& c);

// Debug dump of a polynomial problem (one constraint per line with its
// label), for inspection only.
std::string describe(const PolyProblem& p);

}  // namespace mopf
