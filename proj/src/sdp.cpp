#include "mopf/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace mopf {

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kOptimal:
      return "optimal";
    case SolveStatus::kInfeasible:
      return "infeasible";
    case SolveStatus::kUnbounded:
      return "unbounded";
    case SolveStatus::kNumericalFailure:
      return "numerical-failure";
  }
  return "numerical-failure";
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd sym(const MatrixXd& M) { return (M + M.transpose()) / 2.0; }

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Equality elimination.  Each equality pins one variable to an affine
// expression of the remaining free ones; the expressions are substituted
// into the blocks and the objective, leaving an unconstrained-variable LMI.
// ---------------------------------------------------------------------------

struct Expr {  // pinned variable = constant + sum lin[i] * y_i (free i)
  double constant = 0.0;
  std::map<int, double> lin;
};

struct SparseCoef {
  int p = 0, q = 0;  // p <= q
  double v = 0.0;
};

struct ReducedBlock {
  int side = 0;
  std::string label;
  MatrixXd F0;
  std::vector<int> vars;                       // reduced ids, ascending
  std::vector<std::vector<SparseCoef>> coefs;  // parallel to vars
};

struct Reduced {
  bool inconsistent = false;
  int nvars = 0;  // free variable count
  VectorXd c;
  double constant = 0.0;
  std::vector<ReducedBlock> blocks;
  std::vector<int> free_ids;   // reduced -> original
  std::map<int, Expr> pinned;  // original id -> expression over free ids
};

void validate_instance(const SDPInstance& inst) {
  if (inst.nvars < 0) throw SdpError("negative variable count");
  for (const auto& [v, c] : inst.objective)
    if (v < 0 || v >= inst.nvars)
      throw SdpError("objective references variable " + std::to_string(v) +
                     " outside [0, " + std::to_string(inst.nvars) + ")");
  for (const SdpBlock& b : inst.blocks) {
    if (b.side < 1) throw SdpError("block '" + b.label + "' has empty side");
    for (const SdpEntry& e : b.entries) {
      if (e.var < -1 || e.var >= inst.nvars)
        throw SdpError("block '" + b.label + "' references variable " +
                       std::to_string(e.var));
      if (e.row < 0 || e.row >= b.side || e.col < 0 || e.col >= b.side)
        throw SdpError("block '" + b.label + "' has an entry outside the block");
    }
  }
  for (const LinearEquality& eq : inst.equalities)
    for (const auto& [v, c] : eq.coeff)
      if (v < 0 || v >= inst.nvars)
        throw SdpError("equality references variable " + std::to_string(v));
}

Reduced reduce(const SDPInstance& inst) {
  validate_instance(inst);
  Reduced r;
  r.constant = inst.obj_constant;

  for (const LinearEquality& eq : inst.equalities) {
    double rhs = eq.rhs;
    std::map<int, double> coef;
    for (const auto& [v, c] : eq.coeff) {
      if (c == 0.0) continue;
      const auto it = r.pinned.find(v);
      if (it == r.pinned.end()) {
        coef[v] += c;
        continue;
      }
      rhs -= c * it->second.constant;
      for (const auto& [w, cw] : it->second.lin) coef[w] += c * cw;
    }
    for (auto it = coef.begin(); it != coef.end();)
      it = (it->second == 0.0) ? coef.erase(it) : std::next(it);
    if (coef.empty()) {
      if (std::abs(rhs) > 1e-9 * (1.0 + std::abs(eq.rhs))) {
        r.inconsistent = true;
        return r;
      }
      continue;  // redundant equality
    }
    auto pivot = coef.begin();
    for (auto it = coef.begin(); it != coef.end(); ++it)
      if (std::abs(it->second) > std::abs(pivot->second)) pivot = it;
    Expr e;
    e.constant = rhs / pivot->second;
    for (const auto& [v, c] : coef)
      if (v != pivot->first) e.lin[v] = -c / pivot->second;
    const int pv = pivot->first;
    // Keep earlier expressions free of the newly pinned variable.
    for (auto& [v, ex] : r.pinned) {
      const auto it = ex.lin.find(pv);
      if (it == ex.lin.end()) continue;
      const double f = it->second;
      ex.lin.erase(it);
      ex.constant += f * e.constant;
      for (const auto& [w, cw] : e.lin) ex.lin[w] += f * cw;
    }
    r.pinned[pv] = std::move(e);
  }

  std::vector<int> old2new(inst.nvars, -1);
  for (int v = 0; v < inst.nvars; ++v)
    if (!r.pinned.count(v)) {
      old2new[v] = static_cast<int>(r.free_ids.size());
      r.free_ids.push_back(v);
    }
  r.nvars = static_cast<int>(r.free_ids.size());

  r.c = VectorXd::Zero(r.nvars);
  for (const auto& [v, c] : inst.objective) {
    const auto it = r.pinned.find(v);
    if (it == r.pinned.end()) {
      r.c(old2new[v]) += c;
    } else {
      r.constant += c * it->second.constant;
      for (const auto& [w, cw] : it->second.lin) r.c(old2new[w]) += c * cw;
    }
  }

  for (const SdpBlock& b : inst.blocks) {
    ReducedBlock rb;
    rb.side = b.side;
    rb.label = b.label;
    rb.F0 = MatrixXd::Zero(b.side, b.side);
    std::map<int, std::map<std::pair<int, int>, double>> per_var;
    auto add_coef = [&](int var, int p, int q, double v) {
      if (p > q) std::swap(p, q);
      per_var[var][{p, q}] += v;
    };
    auto add_const = [&](int p, int q, double v) {
      rb.F0(p, q) += v;
      if (p != q) rb.F0(q, p) += v;
    };
    for (const SdpEntry& e : b.entries) {
      if (e.coeff == 0.0) continue;
      if (e.var < 0) {
        add_const(e.row, e.col, e.coeff);
        continue;
      }
      const auto it = r.pinned.find(e.var);
      if (it == r.pinned.end()) {
        add_coef(old2new[e.var], e.row, e.col, e.coeff);
      } else {
        if (it->second.constant != 0.0)
          add_const(e.row, e.col, e.coeff * it->second.constant);
        for (const auto& [w, cw] : it->second.lin)
          add_coef(old2new[w], e.row, e.col, e.coeff * cw);
      }
    }
    for (const auto& [var, cells] : per_var) {
      std::vector<SparseCoef> list;
      list.reserve(cells.size());
      for (const auto& [pq, v] : cells)
        if (v != 0.0) list.push_back({pq.first, pq.second, v});
      if (list.empty()) continue;
      rb.vars.push_back(var);
      rb.coefs.push_back(std::move(list));
    }
    r.blocks.push_back(std::move(rb));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Interior-point core
// ---------------------------------------------------------------------------

MatrixXd chol_safe(const MatrixXd& M) {
  const int k = static_cast<int>(M.rows());
  const double base = std::max(M.trace() / k, 1e-300);
  double jit = 0.0;
  for (int attempt = 0; attempt < 40; ++attempt) {
    Eigen::LLT<MatrixXd> llt(
        jit == 0.0 ? M : MatrixXd(M + jit * MatrixXd::Identity(k, k)));
    if (llt.info() == Eigen::Success) return llt.matrixL();
    jit = std::max(jit * 10.0, base * 1e-15);
  }
  throw SdpError("unrecoverable non-positive-definite matrix");
}

double min_eig(const MatrixXd& M) {
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(M, Eigen::EigenvaluesOnly)
      .eigenvalues()
      .minCoeff();
}

// Largest t <= 1 with M + t*dM still positive definite (up to the 0.98
// fraction-to-the-boundary rule).
double max_step(const MatrixXd& M, const MatrixXd& dM) {
  const MatrixXd L = chol_safe(M);
  const MatrixXd T = L.triangularView<Eigen::Lower>().solve(dM);
  const MatrixXd W =
      L.triangularView<Eigen::Lower>().solve(MatrixXd(T.transpose()));
  const double lam = min_eig(sym(W));
  if (lam >= 0.0) return 1.0;
  return std::min(1.0, -0.98 / lam);
}

double dot_coefs(const std::vector<SparseCoef>& coefs, const MatrixXd& X) {
  double acc = 0.0;
  for (const SparseCoef& e : coefs)
    acc += e.v * (e.p == e.q ? X(e.p, e.p) : 2.0 * X(e.p, e.q));
  return acc;
}

void add_coefs(MatrixXd& M, const std::vector<SparseCoef>& coefs, double w) {
  for (const SparseCoef& e : coefs) {
    M(e.p, e.q) += w * e.v;
    if (e.p != e.q) M(e.q, e.p) += w * e.v;
  }
}

struct CoreOut {
  SolveStatus status = SolveStatus::kNumericalFailure;
  VectorXd y;
  std::vector<MatrixXd> X;
  double pobj = std::numeric_limits<double>::infinity();
  double dobj = -std::numeric_limits<double>::infinity();
  Residuals res;
  int iters = 0;
  std::vector<IterateStat> trace;
};

CoreOut run_ipm(const Reduced& r, double tol, int max_iter) {
  const int m = r.nvars;
  const int J = static_cast<int>(r.blocks.size());
  int dim = 0;
  for (const ReducedBlock& b : r.blocks) dim += b.side;

  CoreOut out;
  if (J == 0 || dim == 0) {  // nothing to constrain
    out.status = SolveStatus::kOptimal;
    out.y = VectorXd::Zero(m);
    out.pobj = out.dobj = r.constant;
    out.res = {0.0, 0.0, 0.0};
    return out;
  }

  double scale = 1.0;
  for (int a = 0; a < m; ++a) scale = std::max(scale, std::abs(r.c(a)));
  double fnorm = 1.0;
  for (const ReducedBlock& b : r.blocks) {
    fnorm = std::max(fnorm, b.F0.cwiseAbs().maxCoeff());
    for (const auto& coefs : b.coefs)
      for (const SparseCoef& e : coefs) fnorm = std::max(fnorm, std::abs(e.v));
  }

  VectorXd y = VectorXd::Zero(m);
  std::vector<MatrixXd> X, S;
  for (const ReducedBlock& b : r.blocks) {
    X.push_back(MatrixXd::Identity(b.side, b.side) * scale);
    S.push_back(MatrixXd::Identity(b.side, b.side) * fnorm);
  }

  const double cnorm = r.c.norm();

  struct Best {
    double merit = std::numeric_limits<double>::infinity();
    VectorXd y;
    std::vector<MatrixXd> X;
    double pobj = std::numeric_limits<double>::infinity();
    double dobj = -std::numeric_limits<double>::infinity();
    Residuals res;
    int iter = 0;
  } best;

  std::vector<MatrixXd> Bs(J), Rp(J), Gs(J), Ws(J), Gis(J);
  std::vector<VectorXd> lams(J);
  MatrixXd H(m, m);

  for (int it = 0; it < max_iter; ++it) {
    // Residuals of the current iterate.
    VectorXd rd = r.c;
    for (int j = 0; j < J; ++j)
      for (std::size_t vi = 0; vi < r.blocks[j].vars.size(); ++vi)
        rd(r.blocks[j].vars[vi]) -= dot_coefs(r.blocks[j].coefs[vi], X[j]);
    double mu = 0.0;
    for (int j = 0; j < J; ++j) {
      MatrixXd B = r.blocks[j].F0;
      for (std::size_t vi = 0; vi < r.blocks[j].vars.size(); ++vi)
        add_coefs(B, r.blocks[j].coefs[vi], y(r.blocks[j].vars[vi]));
      Bs[j] = sym(B);
      Rp[j] = Bs[j] - S[j];
      mu += X[j].cwiseProduct(S[j]).sum();
    }
    mu /= dim;

    double pobj = r.c.dot(y) + r.constant;
    double dobj = r.constant;
    for (int j = 0; j < J; ++j) dobj -= r.blocks[j].F0.cwiseProduct(X[j]).sum();
    const double gap =
        std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    const double rdn = rd.norm() / (1.0 + cnorm);
    double rpn = 0.0;
    double slack = std::abs(rd.dot(y));
    for (int j = 0; j < J; ++j) {
      rpn = std::max(rpn, Rp[j].norm() / (1.0 + r.blocks[j].F0.norm()));
      slack += std::abs(Rp[j].cwiseProduct(X[j]).sum());
    }
    out.trace.push_back({it, pobj, dobj, gap, rpn, rdn, mu, slack});

    const double merit = std::max({gap, rpn, rdn});
    if (merit < best.merit) {
      best = {merit, y, X, pobj, dobj, Residuals{rpn, rdn, gap}, it};
    }
    if (merit < tol) break;
    // Once the merit has deteriorated far past the best iterate, double
    // precision is exhausted on this instance.
    if (merit > 1e4 * best.merit && it > best.iter + 3) break;

    // Improving-ray certificates.
    double trX = 0.0;
    for (int j = 0; j < J; ++j) trX += X[j].trace();
    if (trX > 1e8 * scale) {
      const double lin = (r.c - rd).norm() / trX;
      double f0x = 0.0;
      for (int j = 0; j < J; ++j) f0x += r.blocks[j].F0.cwiseProduct(X[j]).sum();
      f0x /= trX;
      if (lin < 1e-7 && f0x < -1e-9) {
        out.status = SolveStatus::kInfeasible;
        out.y = y;
        out.X.clear();
        for (int j = 0; j < J; ++j) out.X.push_back(X[j] / trX);
        out.pobj = pobj;
        out.dobj = dobj;
        out.res = {rpn, rdn, gap};
        out.iters = it;
        return out;
      }
    }
    const double yn = y.norm();
    if (yn > 1e8 * std::max(1.0, scale)) {
      const VectorXd yr = y / yn;
      double dirmin = std::numeric_limits<double>::infinity();
      for (int j = 0; j < J; ++j) {
        MatrixXd D = MatrixXd::Zero(r.blocks[j].side, r.blocks[j].side);
        for (std::size_t vi = 0; vi < r.blocks[j].vars.size(); ++vi)
          add_coefs(D, r.blocks[j].coefs[vi], yr(r.blocks[j].vars[vi]));
        dirmin = std::min(dirmin, min_eig(sym(D)));
      }
      if (dirmin > -1e-9 && r.c.dot(yr) < -1e-9) {
        out.status = SolveStatus::kUnbounded;
        out.y = y;
        out.X = X;
        out.pobj = pobj;
        out.dobj = dobj;
        out.res = {rpn, rdn, gap};
        out.iters = it;
        return out;
      }
      break;  // diverging without a certificate: numerical failure
    }

    if (mu < 1e-18 * std::max(scale, fnorm)) break;

    try {
      // Nesterov-Todd scaling point per block: G with G^T S G = G^-1 X G^-T
      // = diag(lam).
      for (int j = 0; j < J; ++j) {
        const MatrixXd Lx = chol_safe(X[j]);
        const MatrixXd Ls = chol_safe(S[j]);
        Eigen::BDCSVD<MatrixXd> svd(Ls.transpose() * Lx,
                                    Eigen::ComputeFullU | Eigen::ComputeFullV);
        lams[j] = svd.singularValues();
        Gs[j] = Lx * svd.matrixV() *
                lams[j].cwiseSqrt().cwiseInverse().asDiagonal();
        Gis[j] = Gs[j].inverse();
        MatrixXd w(r.blocks[j].side, r.blocks[j].side);
        for (int a = 0; a < r.blocks[j].side; ++a)
          for (int bname = 0; bname < r.blocks[j].side; ++bname)
            w(a, bname) = (lams[j](a) + lams[j](bname)) / 2.0;
        Ws[j] = w;
      }

      // Schur complement H(a,b) = sum_j <G^T F_ja G, G^T F_jb G>, built
      // per block as Z Z^T on the svec packing of the scaled maps.
      H.setZero();
      for (int j = 0; j < J; ++j) {
        const ReducedBlock& b = r.blocks[j];
        const int k = b.side;
        const int na = static_cast<int>(b.vars.size());
        if (na == 0) continue;
        const int pack = k * (k + 1) / 2;
        MatrixXd Z(na, pack);
        MatrixXd Phi(k, k);
        const double rt2 = std::sqrt(2.0);
        for (int vi = 0; vi < na; ++vi) {
          Phi.setZero();
          for (const SparseCoef& e : b.coefs[vi]) {
            Phi.noalias() +=
                e.v * (Gs[j].row(e.p).transpose() * Gs[j].row(e.q));
            if (e.p != e.q)
              Phi.noalias() +=
                  e.v * (Gs[j].row(e.q).transpose() * Gs[j].row(e.p));
          }
          int idx = 0;
          for (int col = 0; col < k; ++col) {
            for (int row = 0; row < col; ++row) Z(vi, idx++) = rt2 * Phi(row, col);
            Z(vi, idx++) = Phi(col, col);
          }
        }
        MatrixXd Hsub = MatrixXd::Zero(na, na);
        Hsub.selfadjointView<Eigen::Lower>().rankUpdate(Z);
        for (int i = 0; i < na; ++i) {
          for (int l = 0; l <= i; ++l) {
            const double v = Hsub(i, l);
            H(b.vars[i], b.vars[l]) += v;
            if (i != l) H(b.vars[l], b.vars[i]) += v;
          }
        }
      }

      const double hjit = std::max(1e-14 * H.trace() / m, 1e-300);
      Eigen::LLT<MatrixXd> hllt(MatrixXd(H + hjit * MatrixXd::Identity(m, m)));
      if (hllt.info() != Eigen::Success) break;
      auto hsolve = [&](const VectorXd& rv) {
        VectorXd d = hllt.solve(rv);
        d += hllt.solve(VectorXd(rv - H * d));  // one refinement pass
        return d;
      };

      auto solve_newton = [&](const std::vector<MatrixXd>& Rc, VectorXd& dy,
                              std::vector<MatrixXd>& dX,
                              std::vector<MatrixXd>& dS) {
        VectorXd rhs = rd;
        for (int j = 0; j < J; ++j) {
          const MatrixXd Rphat = sym(Gs[j].transpose() * Rp[j] * Gs[j]);
          const MatrixXd T = Rc[j].cwiseQuotient(Ws[j]) - Rphat;
          const MatrixXd M = sym(Gs[j] * T * Gs[j].transpose());
          for (std::size_t vi = 0; vi < r.blocks[j].vars.size(); ++vi)
            rhs(r.blocks[j].vars[vi]) -= dot_coefs(r.blocks[j].coefs[vi], M);
        }
        dy = hsolve(-rhs);
        dX.assign(J, MatrixXd());
        dS.assign(J, MatrixXd());
        for (int j = 0; j < J; ++j) {
          MatrixXd dSj = Rp[j];
          for (std::size_t vi = 0; vi < r.blocks[j].vars.size(); ++vi)
            add_coefs(dSj, r.blocks[j].coefs[vi], dy(r.blocks[j].vars[vi]));
          dSj = sym(dSj);
          const MatrixXd dShat = sym(Gs[j].transpose() * dSj * Gs[j]);
          const MatrixXd dXhat = Rc[j].cwiseQuotient(Ws[j]) - dShat;
          dX[j] = sym(Gs[j] * dXhat * Gs[j].transpose());
          dS[j] = dSj;
        }
      };

      // Predictor (affine scaling) step.
      std::vector<MatrixXd> Rc(J);
      for (int j = 0; j < J; ++j) {
        Rc[j] = MatrixXd::Zero(r.blocks[j].side, r.blocks[j].side);
        Rc[j].diagonal() = -lams[j].array().square();
      }
      VectorXd dy_a;
      std::vector<MatrixXd> dX_a, dS_a;
      solve_newton(Rc, dy_a, dX_a, dS_a);
      double ap = 1.0, ad = 1.0;
      for (int j = 0; j < J; ++j) {
        ap = std::min(ap, max_step(X[j], dX_a[j]));
        ad = std::min(ad, max_step(S[j], dS_a[j]));
      }
      double mu_aff = 0.0;
      for (int j = 0; j < J; ++j)
        mu_aff += (X[j] + ap * dX_a[j]).cwiseProduct(S[j] + ad * dS_a[j]).sum();
      mu_aff /= dim;
      double sigma =
          std::max(1e-8, std::min(1.0, std::pow(mu_aff / mu, 3.0)));
      // Mild recentring when feasibility residuals dominate the barrier;
      // keeps late iterates in the neighbourhood without the large sigma
      // values that destabilize degenerate endgames.
      const double mun = mu / std::max(scale, fnorm);
      if (std::max(rpn, rdn) > 10.0 * mun && sigma < 0.5) sigma = 0.5;

      // Corrector step with the Mehrotra cross term.
      for (int j = 0; j < J; ++j) {
        const MatrixXd dXhat_a = sym(Gis[j] * dX_a[j] * Gis[j].transpose());
        const MatrixXd dShat_a = sym(Gs[j].transpose() * dS_a[j] * Gs[j]);
        const MatrixXd cross = sym(dXhat_a * dShat_a);
        Rc[j] = -cross;
        Rc[j].diagonal().array() +=
            sigma * mu - lams[j].array().square();
      }
      VectorXd dy;
      std::vector<MatrixXd> dX, dS;
      solve_newton(Rc, dy, dX, dS);
      ap = ad = 1.0;
      for (int j = 0; j < J; ++j) {
        ap = std::min(ap, max_step(X[j], dX[j]));
        ad = std::min(ad, max_step(S[j], dS[j]));
      }
      y += ad * dy;
      for (int j = 0; j < J; ++j) {
        X[j] = sym(X[j] + ap * dX[j]);
        S[j] = sym(S[j] + ad * dS[j]);
      }
    } catch (const SdpError&) {
      break;  // scaling collapsed; report the best iterate
    }
    out.iters = it + 1;
  }

  out.status = best.merit < tol ? SolveStatus::kOptimal
                                : SolveStatus::kNumericalFailure;
  out.y = best.y.size() ? best.y : VectorXd::Zero(m);
  out.X = best.X.empty() ? X : best.X;
  out.pobj = best.pobj;
  out.dobj = best.dobj;
  out.res = best.res;
  out.iters = std::max(out.iters, best.iter);
  return out;
}

}  // namespace

SDPSolution solve(const SDPInstance& inst, double tol, int max_iter) {
  if (!(tol >= 1e-13 && tol <= 1e-4))
    throw SdpError("tolerance " + fmt(tol) + " outside [1e-13, 1e-4]");
  if (max_iter < 1) throw SdpError("iteration budget must be positive");

  Reduced r = reduce(inst);
  SDPSolution sol;
  if (r.inconsistent) {
    sol.status = SolveStatus::kInfeasible;
    sol.y = VectorXd::Zero(inst.nvars);
    return sol;
  }

  // Equilibrate so the iteration sees unit-sized data: divide the objective
  // by its largest coefficient and every block by its largest entry, then map
  // values and dual blocks back afterwards.  The optimizer y is unchanged.
  double s0 = std::abs(r.constant);
  for (int a = 0; a < r.nvars; ++a) s0 = std::max(s0, std::abs(r.c(a)));
  if (s0 == 0.0) s0 = 1.0;
  r.c /= s0;
  r.constant /= s0;
  std::vector<double> bscale;
  bscale.reserve(r.blocks.size());
  for (ReducedBlock& b : r.blocks) {
    double s = b.F0.size() ? b.F0.cwiseAbs().maxCoeff() : 0.0;
    for (auto& coefs : b.coefs)
      for (const SparseCoef& e : coefs) s = std::max(s, std::abs(e.v));
    if (s == 0.0) s = 1.0;
    b.F0 /= s;
    for (auto& coefs : b.coefs)
      for (SparseCoef& e : coefs) e.v /= s;
    bscale.push_back(s);
  }

  CoreOut core = run_ipm(r, tol, max_iter);
  core.pobj *= s0;
  core.dobj *= s0;
  for (IterateStat& row : core.trace) {
    row.primal_obj *= s0;
    row.dual_obj *= s0;
    row.duality_slack *= s0;
  }
  if (core.status == SolveStatus::kInfeasible) {
    double tot = 0.0;
    for (std::size_t j = 0; j < core.X.size(); ++j) {
      core.X[j] /= bscale[j];
      tot += core.X[j].trace();
    }
    if (tot > 0.0)
      for (MatrixXd& Xj : core.X) Xj /= tot;
  } else {
    for (std::size_t j = 0; j < core.X.size(); ++j)
      core.X[j] *= s0 / bscale[j];
  }

  sol.status = core.status;
  sol.primal_obj = core.pobj;
  sol.dual_obj = core.dobj;
  sol.residuals = core.res;
  sol.iterations = core.iters;
  sol.trace = core.trace;
  sol.block_duals = core.X;

  sol.y = VectorXd::Zero(inst.nvars);
  for (int a = 0; a < r.nvars; ++a) sol.y(r.free_ids[a]) = core.y(a);
  for (const auto& [v, e] : r.pinned) {
    double val = e.constant;
    for (const auto& [w, cw] : e.lin) val += cw * sol.y(w);
    sol.y(v) = val;
  }
  return sol;
}

// ---------------------------------------------------------------------------
// Conversions
// ---------------------------------------------------------------------------

SDPInstance to_sdp_instance(const MomentSDP& m) {
  SDPInstance inst;
  inst.nvars = m.basis.size();
  inst.objective = m.objective;
  for (const PsdBlock& b : m.blocks) {
    SdpBlock sb;
    sb.side = b.side;
    sb.label = b.label;
    sb.entries.reserve(b.entries.size());
    for (const BlockEntry& e : b.entries)
      sb.entries.push_back({e.y_index, e.row, e.col, e.coeff});
    inst.blocks.push_back(std::move(sb));
  }
  LinearEquality unit;
  unit.coeff[m.unit_index] = 1.0;
  unit.rhs = 1.0;
  inst.equalities.push_back(std::move(unit));
  return inst;
}

SDPInstance to_sdp_instance(const LiftedQuadraticSDP& sdp) {
  const int n = sdp.n_x;
  const auto vid = [n](int i, int j) {  // row-major upper triangle
    return i * n - i * (i - 1) / 2 + (j - i);
  };
  SDPInstance inst;
  inst.nvars = n * (n + 1) / 2;
  inst.obj_constant = sdp.offset;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const double c = (i == j) ? sdp.A0(i, i) : 2.0 * sdp.A0(i, j);
      if (c != 0.0) inst.objective[vid(i, j)] += c;
    }

  SdpBlock lifted;
  lifted.side = n;
  lifted.label = "lifted matrix";
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) lifted.entries.push_back({vid(i, j), i, j, 1.0});
  inst.blocks.push_back(std::move(lifted));

  for (const LiftedConstraint& lc : sdp.constraints) {
    SdpBlock b;
    b.side = 1;
    b.label = lc.label;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        const double c = (i == j) ? lc.A(i, i) : 2.0 * lc.A(i, j);
        if (c != 0.0) b.entries.push_back({vid(i, j), 0, 0, c});
      }
    if (lc.a0 != 0.0) b.entries.push_back({-1, 0, 0, lc.a0});
    inst.blocks.push_back(std::move(b));
  }
  return inst;
}

// ---------------------------------------------------------------------------
// Sparse text exchange format
// ---------------------------------------------------------------------------

std::string write_sdpa(const SDPInstance& inst) {
  const Reduced r = reduce(inst);
  if (r.inconsistent)
    throw SdpError("cannot export inconsistent equality constraints");

  std::ostringstream out;
  out << "* sparse LMI exchange file\n";
  out << "* offset " << fmt(r.constant) << "\n";
  out << r.nvars << "\n";
  out << r.blocks.size() << "\n";
  for (std::size_t j = 0; j < r.blocks.size(); ++j)
    out << (j ? " " : "") << r.blocks[j].side;
  out << "\n";
  for (int a = 0; a < r.nvars; ++a) out << (a ? " " : "") << fmt(r.c(a));
  out << "\n";
  for (std::size_t j = 0; j < r.blocks.size(); ++j) {
    const ReducedBlock& b = r.blocks[j];
    // Constant part, negated: the file convention is sum_i y_i F_i - F_0.
    for (int p = 0; p < b.side; ++p)
      for (int q = p; q < b.side; ++q)
        if (b.F0(p, q) != 0.0)
          out << "0 " << j + 1 << " " << p + 1 << " " << q + 1 << " "
              << fmt(-b.F0(p, q)) << "\n";
    for (std::size_t vi = 0; vi < b.vars.size(); ++vi)
      for (const SparseCoef& e : b.coefs[vi])
        out << b.vars[vi] + 1 << " " << j + 1 << " " << e.p + 1 << " "
            << e.q + 1 << " " << fmt(e.v) << "\n";
  }
  return out.str();
}

SDPInstance read_sdpa(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  double offset = 0.0;
  std::vector<std::string> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && (line[0] == '*' || line[0] == '"')) {
      std::istringstream ls(line.substr(1));
      std::string word;
      if (ls >> word && word == "offset") ls >> offset;
      continue;
    }
    for (char& ch : line)
      if (ch == '{' || ch == '}' || ch == ',' || ch == '(' || ch == ')')
        ch = ' ';
    if (line.find_first_not_of(" \t\r") != std::string::npos)
      rows.push_back(line);
  }
  if (rows.size() < 4) throw SdpError("truncated exchange file");

  std::size_t cursor = 0;
  auto next_stream = [&]() -> std::istringstream {
    return std::istringstream(rows.at(cursor++));
  };
  int m = 0, nblocks = 0;
  {
    auto s = next_stream();
    if (!(s >> m) || m < 0) throw SdpError("bad variable count");
  }
  {
    auto s = next_stream();
    if (!(s >> nblocks) || nblocks < 1) throw SdpError("bad block count");
  }
  SDPInstance inst;
  inst.nvars = m;
  inst.obj_constant = offset;
  {
    auto s = next_stream();
    for (int j = 0; j < nblocks; ++j) {
      int side = 0;
      if (!(s >> side) || side == 0) throw SdpError("bad block size list");
      SdpBlock b;
      b.side = std::abs(side);  // negative marks a diagonal block
      b.label = "block " + std::to_string(j + 1);
      inst.blocks.push_back(std::move(b));
    }
  }
  {
    auto s = next_stream();
    for (int a = 0; a < m; ++a) {
      double c = 0.0;
      if (!(s >> c)) throw SdpError("objective row is shorter than nvars");
      if (c != 0.0) inst.objective[a] = c;
    }
  }
  for (; cursor < rows.size(); ++cursor) {
    std::istringstream s(rows[cursor]);
    int matno = 0, blk = 0, i = 0, j = 0;
    double v = 0.0;
    if (!(s >> matno >> blk >> i >> j >> v))
      throw SdpError("bad entry line: " + rows[cursor]);
    if (blk < 1 || blk > nblocks) throw SdpError("entry block out of range");
    SdpBlock& b = inst.blocks[blk - 1];
    if (i < 1 || j < 1 || i > b.side || j > b.side)
      throw SdpError("entry index out of range");
    if (matno < 0 || matno > m) throw SdpError("entry matrix out of range");
    if (i > j) std::swap(i, j);
    if (matno == 0)
      b.entries.push_back({-1, i - 1, j - 1, -v});
    else
      b.entries.push_back({matno - 1, i - 1, j - 1, v});
  }
  return inst;
}

}  // namespace mopf
