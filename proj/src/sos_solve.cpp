#include <cmath>
#include <limits>

#include <Eigen/SparseCholesky>
#include <json.hpp>
#include <lapacke.h>

#include "psos/error.hpp"
#include "psos/sos.hpp"

namespace psos {

struct SolverFactor {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> H;  // LᵀL
  Eigen::SparseMatrix<double> Lt, At;
  Eigen::MatrixXd Y;      // H^{-1} Aᵀ
  Eigen::MatrixXd Spinv;  // (A H^{-1} Aᵀ)^+
  Eigen::MatrixXd AAtpinv;
  // Dual residuals are bounded through the main blocks: each free moment is
  // spread over its entries in one block and ⟨R, M⟩ ≤ λmax(R) tr M.
  struct TraceBlock {
    int n = 0;
    std::vector<int> entry_var;  // n × n, −1 when not assigned here
    double trace_bound = 0.0;
  };
  std::vector<TraceBlock> trace_blocks;
  std::vector<int> var_count;  // entries of the assigned block, 0 when unassigned
};

namespace {

Eigen::MatrixXd pinv_psd(const Eigen::MatrixXd& S) {
  if (S.rows() == 0) return S;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  const double cut = 1e-12 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  Eigen::VectorXd inv = es.eigenvalues();
  for (Eigen::Index i = 0; i < inv.size(); ++i) inv[i] = inv[i] > cut ? 1.0 / inv[i] : 0.0;
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

std::shared_ptr<SolverFactor> factorize(const CompiledProblem& p) {
  auto f = std::make_shared<SolverFactor>();
  f->Lt = p.L.transpose();
  f->At = p.A.transpose();
  const Eigen::SparseMatrix<double> H = f->Lt * p.L;
  f->H.compute(H);
  if (f->H.info() != Eigen::Success) throw Error(ErrorCode::SolverDiverged, "normal-equation factorization failed");
  if (p.A.rows() > 0) {
    const Eigen::MatrixXd At = Eigen::MatrixXd(f->At);
    f->Y = f->H.solve(At);
    f->Spinv = pinv_psd(Eigen::MatrixXd(p.A * f->Y));
    f->AAtpinv = pinv_psd(Eigen::MatrixXd(p.A * f->At));
  }
  std::vector<const CompiledProblem::Block*> mains;
  for (const auto& blk : p.blocks)
    if (blk.kind == CompiledProblem::BlockKind::Main) mains.push_back(&blk);
  std::vector<std::vector<int>> vars(mains.size());
  std::vector<std::vector<int>> counts(mains.size(), std::vector<int>(p.num_vars, 0));
  for (std::size_t b = 0; b < mains.size(); ++b) {
    const int n = mains[b]->size();
    vars[b].assign(static_cast<std::size_t>(n) * n, -1);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Exponent e = p.basis[mains[b]->rows[i]];
        const Exponent& o = p.basis[mains[b]->rows[j]];
        for (std::size_t k = 0; k < e.size(); ++k) e[k] += o[k];
        const int v = p.var_index[p.moments.index(e)];
        vars[b][static_cast<std::size_t>(i) * n + j] = v;
        if (v >= 0) ++counts[b][v];
      }
  }
  std::vector<int> owner(p.num_vars, -1);
  f->var_count.assign(p.num_vars, 0);
  for (int v = 0; v < p.num_vars; ++v)
    for (std::size_t b = 0; b < mains.size(); ++b)
      if (counts[b][v] > f->var_count[v]) {
        f->var_count[v] = counts[b][v];
        owner[v] = static_cast<int>(b);
      }
  for (std::size_t b = 0; b < mains.size(); ++b) {
    SolverFactor::TraceBlock tb;
    tb.n = mains[b]->size();
    tb.entry_var = vars[b];
    for (int& v : tb.entry_var)
      if (v >= 0 && owner[v] != static_cast<int>(b)) v = -1;
    std::vector<bool> seen(p.half + 1, false);
    for (int row : mains[b]->rows) seen[p.basis.degree(row)] = true;
    for (int j = 0; j <= p.half; ++j)
      if (seen[j]) tb.trace_bound += std::pow(p.ball_radius, j);
    tb.trace_bound /= mains[b]->weight;
    f->trace_blocks.push_back(std::move(tb));
  }
  return f;
}

struct BlockView {
  int offset, n;
};

Eigen::MatrixXd unpack(const Eigen::VectorXd& s, int offset, int n) {
  Eigen::MatrixXd m(n, n);
  const double r2 = std::sqrt(2.0);
  for (int b = 0; b < n; ++b)
    for (int a = 0; a <= b; ++a) {
      const double v = s[offset + b * (b + 1) / 2 + a];
      m(a, b) = m(b, a) = a == b ? v : v / r2;
    }
  return m;
}

void pack(const Eigen::MatrixXd& m, Eigen::VectorXd& s, int offset) {
  const double r2 = std::sqrt(2.0);
  const int n = static_cast<int>(m.rows());
  for (int b = 0; b < n; ++b)
    for (int a = 0; a <= b; ++a) s[offset + b * (b + 1) / 2 + a] = a == b ? m(a, a) : m(a, b) * r2;
}

// Z = Π_PSD(v), U = v − Z blockwise.
void project_cone(const std::vector<BlockView>& blocks, const Eigen::VectorXd& v, Eigen::VectorXd& Z, Eigen::VectorXd& U) {
  for (const auto& b : blocks) {
    if (b.n == 1) {
      Z[b.offset] = std::max(v[b.offset], 0.0);
      U[b.offset] = v[b.offset] - Z[b.offset];
      continue;
    }
    Eigen::MatrixXd Q = unpack(v, b.offset, b.n);
    Eigen::VectorXd ev(b.n);
    if (LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', b.n, Q.data(), b.n, ev.data()) != 0)
      throw Error(ErrorCode::SolverDiverged, "eigendecomposition failed");
    int neg = 0;
    while (neg < b.n && ev[neg] < 0.0) ++neg;
    // Use whichever side has fewer eigenvectors.
    const int len = b.n * (b.n + 1) / 2;
    if (neg <= b.n - neg) {
      pack(Q.leftCols(neg) * ev.head(neg).asDiagonal() * Q.leftCols(neg).transpose(), U, b.offset);
      Z.segment(b.offset, len) = v.segment(b.offset, len) - U.segment(b.offset, len);
    } else {
      pack(Q.rightCols(b.n - neg) * ev.tail(b.n - neg).asDiagonal() * Q.rightCols(b.n - neg).transpose(), Z, b.offset);
      U.segment(b.offset, len) = v.segment(b.offset, len) - Z.segment(b.offset, len);
    }
  }
}

double min_eigenvalue(const Eigen::VectorXd& s, const BlockView& b) {
  if (b.n == 1) return s[b.offset];
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(unpack(s, b.offset, b.n), Eigen::EigenvaluesOnly).eigenvalues()[0];
}

bool finite(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

SolveResult solve_feasible(CompiledProblem& p, double tol, int max_iters, const SolveOptions& opt) {
  if (!(tol > 0.0)) throw Error(ErrorCode::PreconditionFailed, "tol must be positive");
  if (!p.factor) p.factor = factorize(p);
  const SolverFactor& f = *p.factor;
  const int N = p.svec_length();
  std::vector<BlockView> views;
  for (const auto& blk : p.blocks) views.push_back({blk.offset, blk.size()});

  SolveResult res;
  if (p.inconsistent_equalities) {
    res.status = SolveStatus::Infeasible;
    res.certificate = Certificate{std::numeric_limits<double>::infinity(), 0.0, 0.0, {}};
    return res;
  }

  auto x_step = [&](const Eigen::VectorXd& target) {
    Eigen::VectorXd x = f.H.solve(f.Lt * target);
    if (p.A.rows() > 0) {
      const Eigen::VectorXd lam = f.Spinv * (p.A * x - p.b);
      x -= f.Y * lam;
    }
    return x;
  };

  // Equalities alone must be consistent.
  if (p.A.rows() > 0) {
    const Eigen::VectorXd x0 = x_step(-p.c);
    const double r = (p.A * x0 - p.b).cwiseAbs().maxCoeff();
    if (r > std::max(tol, 1e-9 * std::max(1.0, p.b.cwiseAbs().maxCoeff()))) {
      res.status = SolveStatus::Infeasible;
      res.certificate = Certificate{r, 0.0, 0.0, {}};
      return res;
    }
  }

  // The iteration is the fixed-point map v ↦ α s + (1 − α) Z + U with
  // (Z, U) the cone split of v and s = L x + c the affine step from Z − U.
  struct Eval {
    Eigen::VectorXd Z, U, x, s, next;
  };
  auto evaluate = [&](const Eigen::VectorXd& v, Eval& e) {
    e.Z.resize(N);
    e.U.resize(N);
    project_cone(views, v, e.Z, e.U);
    e.x = x_step(e.Z - e.U - p.c);
    e.s = p.L * e.x + p.c;
    e.next = opt.alpha * e.s + (1.0 - opt.alpha) * e.Z + e.U;
  };

  Eigen::VectorXd v = Eigen::VectorXd::Zero(N);
  if (opt.warm && opt.warm->Z.size() == N && opt.warm->U.size() == N) v = opt.warm->Z + opt.warm->U;
  Eval cur;
  evaluate(v, cur);
  Eigen::VectorXd& Z = cur.Z;
  Eigen::VectorXd& U = cur.U;
  Eigen::VectorXd& x = cur.x;
  Eigen::VectorXd Zprev = Z;

  auto finish_feasible = [&](int iter) {
    res.status = SolveStatus::Feasible;
    res.iterations = iter;
    const std::vector<double> y = p.expand(x);
    PseudoExpectation pe = make_pseudo_expectation(p.basis, p.moments, y);
    pe.residuals = evaluate_residuals(p, y);
    res.pe = std::move(pe);
    res.state = {Z, U};
    return res;
  };

  // Farkas test with Λ = −U: for every x with A x = b,
  // 0 ≤ ⟨Λ, L x + c⟩ = ⟨r, x⟩ − λᵀb + ⟨Λ, c⟩ where r = LᵀΛ + Aᵀλ.
  auto certificate = [&](const Eigen::VectorXd& Lam) -> std::optional<Certificate> {
    const double nrm = Lam.norm();
    if (!(nrm > 0.0)) return std::nullopt;
    const Eigen::VectorXd g = f.Lt * Lam;
    Eigen::VectorXd lam = Eigen::VectorXd::Zero(p.A.rows());
    Eigen::VectorXd r = g;
    if (p.A.rows() > 0) {
      lam = -f.AAtpinv * (p.A * g);
      r += f.At * lam;
    }
    double slack = 0.0, spread = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      slack += std::abs(r[i]) * p.moment_bound[i];
      if (f.var_count[i] == 0) spread += std::abs(r[i]) * p.moment_bound[i];
    }
    for (const auto& tb : f.trace_blocks) {
      Eigen::MatrixXd R = Eigen::MatrixXd::Zero(tb.n, tb.n);
      for (int i = 0; i < tb.n * tb.n; ++i)
        if (const int v = tb.entry_var[i]; v >= 0) R(i / tb.n, i % tb.n) = r[v] / f.var_count[v];
      const double top = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(R, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
      spread += std::max(top, 0.0) * tb.trace_bound;
    }
    slack = std::min(slack, spread);
    const double value = Lam.dot(p.c) - lam.dot(p.b) + slack;
    Certificate cert{-value / nrm, slack / nrm, lam.norm() / nrm, {}};
    for (const auto& blk : p.blocks) cert.scalar_multipliers.push_back(blk.size() == 1 ? Lam[blk.offset] / nrm : 0.0);
    return cert;
  };

  auto verified_certificate = [&](const Eigen::VectorXd& Lam) -> std::optional<Certificate> {
    auto cert = certificate(Lam);
    if (!cert || !(cert->margin > tol)) return std::nullopt;
    // Re-project onto the cone so Λ ⪰ 0 holds to rounding.
    Eigen::VectorXd Zc(N), Uc(N);
    project_cone(views, Lam, Zc, Uc);
    cert = certificate(Zc);
    if (!cert || !(cert->margin > tol)) return std::nullopt;
    return cert;
  };

  Eigen::VectorXd Ucheck;
  double best_primal = std::numeric_limits<double>::infinity();
  int best_iter = 0;
  const int mem = std::max(0, opt.anderson_memory);
  std::vector<Eigen::VectorXd> dV, dF;
  Eval trial;
  for (int iter = 1; iter <= max_iters; ++iter) {
    if (iter > 1) {
      // Advance v: Anderson candidate when it lowers the residual, plain step otherwise.
      const Eigen::VectorXd f = cur.next - v;
      Eigen::VectorXd v_new = cur.next;
      bool accepted = false;
      if (mem > 0 && !dF.empty()) {
        const int m = static_cast<int>(dF.size());
        Eigen::MatrixXd G(N, m), Vm(N, m);
        for (int j = 0; j < m; ++j) {
          G.col(j) = dF[j];
          Vm.col(j) = dV[j] + dF[j];
        }
        Eigen::MatrixXd H = G.transpose() * G;
        H.diagonal().array() += 1e-10 * (H.trace() + 1e-300);
        const Eigen::VectorXd gamma = H.ldlt().solve(G.transpose() * f);
        if (gamma.allFinite()) {
          const Eigen::VectorXd cand = cur.next - Vm * gamma;
          evaluate(cand, trial);
          if ((trial.next - cand).norm() <= f.norm()) {
            dV.push_back(cand - v);
            dF.push_back((trial.next - cand) - f);
            v = cand;
            Zprev = Z;
            std::swap(cur, trial);
            accepted = true;
          }
        }
      }
      if (!accepted) {
        Zprev = Z;
        evaluate(v_new, trial);
        dV.push_back(v_new - v);
        dF.push_back((trial.next - v_new) - f);
        v = v_new;
        std::swap(cur, trial);
      }
      if (static_cast<int>(dV.size()) > mem) {
        dV.erase(dV.begin());
        dF.erase(dF.begin());
      }
    }
    const Eigen::VectorXd& s = cur.s;
    if (!finite(x) || !finite(Z) || !finite(U)) throw Error(ErrorCode::SolverDiverged, "non-finite iterate");

    double primal = 0.0, worst_block = 0.0;
    std::vector<double> block_res(views.size());
    for (std::size_t j = 0; j < views.size(); ++j) {
      block_res[j] = (s.segment(views[j].offset, views[j].n * (views[j].n + 1) / 2) -
                      Z.segment(views[j].offset, views[j].n * (views[j].n + 1) / 2)).norm();
      worst_block = std::max(worst_block, block_res[j]);
      primal += block_res[j] * block_res[j];
    }
    primal = std::sqrt(primal);
    res.primal_residual = primal;
    res.iterations = iter;

    if (worst_block <= tol) return finish_feasible(iter);
    const bool check = iter % opt.check_every == 0;
    if (check && worst_block <= 1e3 * tol) {
      bool ok = true;
      for (std::size_t j = 0; j < views.size() && ok; ++j)
        if (block_res[j] > tol && min_eigenvalue(s, views[j]) < -tol) ok = false;
      if (ok) return finish_feasible(iter);
    }

    if (check || iter == max_iters) {
      res.dual_residual = (f.Lt * (Z - Zprev)).norm();
      if (opt.log && iter % opt.log_every == 0) {
        nlohmann::json line;
        line["iter"] = iter;
        line["primal"] = primal;
        line["dual"] = res.dual_residual;
        *opt.log << line.dump() << "\n";
      }
      if (iter >= 50) {
        std::optional<Certificate> cert = verified_certificate(-U);
        if (!cert && Ucheck.size() == N) cert = verified_certificate(Ucheck - U);
        Ucheck = U;
        if (cert) {
          res.status = SolveStatus::Infeasible;
          res.certificate = cert;
          res.state = {Z, U};
          return res;
        }
      }
      if (primal < 0.99 * best_primal) {
        best_primal = primal;
        best_iter = iter;
      } else if (iter - best_iter >= opt.stall_window) {
        break;
      }
    }
  }
  res.status = SolveStatus::Undecided;
  res.state = {Z, U};
  return res;
}

}  // namespace psos
