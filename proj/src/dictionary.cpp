#include "cdl/dictionary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "cdl/errors.hpp"

namespace cdl {

void Dictionary::validate() const {
  for (Eigen::Index j = 0; j < B.cols(); ++j) {
    if (!(B.col(j).norm() <= 1.0 + kAtomNormSlack)) {
      throw InputError("dictionary: atom " + std::to_string(j) + " has norm above 1");
    }
  }
}

double reconstruction_objective(const Eigen::MatrixXd& D, const Eigen::MatrixXd& B,
                                const Eigen::MatrixXd& W) {
  return (D - B * W).squaredNorm();
}

namespace {

struct DualState {
  Eigen::MatrixXd k_inv;   // (A + diag(lambda))^-1
  Eigen::MatrixXd bb;      // B^T B = K^-1 S K^-1
  double value = 0.0;      // dual objective
  bool ok = false;
};

class DualProblem {
 public:
  DualProblem(const Eigen::MatrixXd& A, const Eigen::MatrixXd& S, double trace_dd)
      : A_(A), S_(S), trace_dd_(trace_dd) {
    ridge_ = 1e-10 * std::max(1.0, A.diagonal().maxCoeff());
  }

  DualState evaluate(const Eigen::VectorXd& lambda) const {
    DualState st;
    Eigen::MatrixXd K = A_;
    K.diagonal() += lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    if (llt.info() != Eigen::Success) {
      K.diagonal().array() += ridge_;
      llt.compute(K);
      if (llt.info() != Eigen::Success) return st;
    }
    const auto k = A_.rows();
    st.k_inv = llt.solve(Eigen::MatrixXd::Identity(k, k));
    st.bb = st.k_inv * S_ * st.k_inv;
    st.value = trace_dd_ - (st.k_inv * S_).trace() - lambda.sum();
    st.ok = std::isfinite(st.value);
    return st;
  }

  // ||D - B W||^2 with B = Mt K^-1, each column scaled into the unit ball.
  double feasible_primal(const DualState& st) const {
    const auto k = A_.rows();
    Eigen::VectorXd scale(k);
    for (Eigen::Index j = 0; j < k; ++j) {
      const double n = std::sqrt(std::max(0.0, st.bb(j, j)));
      scale(j) = n > 1.0 ? 1.0 / n : 1.0;
    }
    // B_s = Mt K^-1 diag(scale);  tr(B_s^T Mt) and tr(B_s^T B_s A).
    const Eigen::MatrixXd kis = st.k_inv * scale.asDiagonal();
    const double cross = (kis.transpose() * S_).trace();
    const Eigen::MatrixXd bsbs = scale.asDiagonal() * st.bb * scale.asDiagonal();
    return std::max(0.0, trace_dd_ - 2.0 * cross + (bsbs * A_).trace());
  }

 private:
  const Eigen::MatrixXd& A_;
  const Eigen::MatrixXd& S_;
  double trace_dd_;
  double ridge_;
};

// Exact block-coordinate updates of single atoms followed by projection.
// Used only when the dual iteration fails to reach its tolerance.
Eigen::MatrixXd column_descent(const Eigen::MatrixXd& Mt, const Eigen::MatrixXd& A,
                               Eigen::MatrixXd B) {
  for (int sweep = 0; sweep < 2000; ++sweep) {
    double change = 0.0;
    for (Eigen::Index j = 0; j < B.cols(); ++j) {
      if (A(j, j) <= 0.0) continue;
      Eigen::VectorXd col = (Mt.col(j) - B * A.col(j) + B.col(j) * A(j, j)) / A(j, j);
      const double n = col.norm();
      if (n > 1.0) col /= n;
      change = std::max(change, (col - B.col(j)).cwiseAbs().maxCoeff());
      B.col(j) = col;
    }
    if (change < 1e-14) break;
  }
  return B;
}

}  // namespace

DictionaryUpdate update_dictionary(const Eigen::MatrixXd& D, const Eigen::MatrixXd& W,
                                   const Dictionary* previous) {
  if (D.cols() != W.cols()) throw InputError("update_dictionary: D and W must have equal columns");
  if (D.cols() < 1) throw InputError("update_dictionary: need at least one example");
  if (!D.allFinite() || !W.allFinite()) throw InputError("update_dictionary: non-finite input");
  const Eigen::Index p = D.rows();
  const Eigen::Index m = W.rows();
  if (previous && (previous->dim() != p || previous->atoms() != m)) {
    throw InputError("update_dictionary: previous dictionary has the wrong shape");
  }

  std::vector<Eigen::Index> used;
  for (Eigen::Index j = 0; j < m; ++j) {
    if ((W.row(j).array() != 0.0).any()) used.push_back(j);
  }
  if (used.empty()) throw InputError("update_dictionary: every atom has zero usage");
  const auto k = static_cast<Eigen::Index>(used.size());

  Eigen::MatrixXd Wu(k, W.cols());
  for (Eigen::Index r = 0; r < k; ++r) Wu.row(r) = W.row(used[r]);
  const Eigen::MatrixXd A = Wu * Wu.transpose();
  const Eigen::MatrixXd Mt = D * Wu.transpose();
  const Eigen::MatrixXd S = Mt.transpose() * Mt;
  const double trace_dd = D.squaredNorm();
  const double gap_tol = 1e-8 * std::max(1.0, trace_dd);

  DualProblem dual(A, S, trace_dd);
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(k);
  DualState st = dual.evaluate(lambda);
  const bool unconstrained_ok = st.ok && (st.bb.diagonal().array() <= 1.0).all();
  int iterations = 0;
  double gap = 0.0;

  if (!unconstrained_ok) {
    lambda.setConstant(1e-6 * std::max(1.0, A.diagonal().mean()));
    st = dual.evaluate(lambda);
    if (!st.ok) {
      std::string atoms;
      for (auto j : used) atoms += (atoms.empty() ? "" : ",") + std::to_string(j);
      throw NumericalError("update_dictionary: degenerate Gram matrix for atoms [" + atoms + "]");
    }
    for (; iterations < 200; ++iterations) {
      const Eigen::VectorXd grad = st.bb.diagonal().array() - 1.0;
      gap = dual.feasible_primal(st) - st.value;
      double proj_grad = 0.0;
      for (Eigen::Index j = 0; j < k; ++j) {
        proj_grad = std::max(proj_grad, lambda(j) > 0.0 ? std::abs(grad(j)) : std::max(0.0, grad(j)));
      }
      if (gap <= gap_tol && proj_grad <= 1e-9) break;

      std::vector<Eigen::Index> free;
      for (Eigen::Index j = 0; j < k; ++j) {
        if (lambda(j) > 0.0 || grad(j) > 0.0) free.push_back(j);
      }
      if (free.empty()) break;
      const auto f = static_cast<Eigen::Index>(free.size());
      // Negated Hessian of the dual restricted to the free set.
      Eigen::MatrixXd negH(f, f);
      Eigen::VectorXd gf(f);
      for (Eigen::Index r = 0; r < f; ++r) {
        gf(r) = grad(free[r]);
        for (Eigen::Index c = 0; c < f; ++c) {
          negH(r, c) = 2.0 * st.bb(free[r], free[c]) * st.k_inv(free[r], free[c]);
        }
      }
      Eigen::LDLT<Eigen::MatrixXd> ldlt(negH);
      Eigen::VectorXd step = ldlt.solve(gf);
      if (ldlt.info() != Eigen::Success || !step.allFinite() || step.dot(gf) <= 0.0) step = gf;

      double t = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
        Eigen::VectorXd trial = lambda;
        for (Eigen::Index r = 0; r < f; ++r) {
          trial(free[r]) = std::max(0.0, lambda(free[r]) + t * step(r));
        }
        DualState ts = dual.evaluate(trial);
        if (ts.ok && ts.value >= st.value - 1e-15 * std::abs(st.value)) {
          accepted = ts.value > st.value || (trial - lambda).cwiseAbs().maxCoeff() > 0.0;
          lambda = trial;
          st = std::move(ts);
          break;
        }
      }
      if (!accepted) break;
    }
  }

  Eigen::MatrixXd Bu = Mt * st.k_inv;
  for (Eigen::Index j = 0; j < k; ++j) {
    const double n = Bu.col(j).norm();
    if (n > 1.0) Bu.col(j) /= n;
  }
  if (!unconstrained_ok) gap = dual.feasible_primal(st) - st.value;
  if (!unconstrained_ok && gap > gap_tol) {
    Bu = column_descent(Mt, A, Bu);
    const double primal = std::max(0.0, trace_dd - 2.0 * (Bu.transpose() * Mt).trace() +
                                            (Bu.transpose() * Bu * A).trace());
    gap = primal - st.value;
  }

  DictionaryUpdate out;
  out.dictionary.B = previous ? previous->B : Eigen::MatrixXd::Zero(p, m);
  out.dual = Eigen::VectorXd::Zero(m);
  for (Eigen::Index r = 0; r < k; ++r) {
    out.dictionary.B.col(used[r]) = Bu.col(r);
    out.dual(used[r]) = lambda(r);
  }
  out.dual_gap = std::max(0.0, gap);
  out.newton_iterations = iterations;
  return out;
}

Dictionary unused_atom_policy(const Dictionary& dict, const Eigen::MatrixXd& W,
                              const Eigen::MatrixXd& D) {
  if (W.rows() != dict.atoms() || W.cols() != D.cols() || D.rows() != dict.dim()) {
    throw InputError("unused_atom_policy: shape mismatch");
  }
  std::vector<Eigen::Index> dead;
  for (Eigen::Index j = 0; j < W.rows(); ++j) {
    if ((W.row(j).array() == 0.0).all()) dead.push_back(j);
  }
  if (dead.empty()) return dict;

  const Eigen::MatrixXd R = D - dict.B * W;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(R.cols()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Eigen::VectorXd norms = R.colwise().norm().transpose();
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return norms(a) > norms(b); });

  Dictionary out = dict;
  std::size_t next = 0;
  for (auto j : dead) {
    if (next >= order.size() || norms(order[next]) == 0.0) break;
    out.B.col(j) = R.col(order[next]) / norms(order[next]);
    ++next;
  }
  return out;
}

}  // namespace cdl
