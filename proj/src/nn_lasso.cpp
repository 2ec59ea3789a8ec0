#include "cdl/nn_lasso.hpp"

#include <cmath>
#include <limits>

#include "cdl/errors.hpp"

namespace cdl {

namespace {

bool finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

// Gradient of  w^T G w - 2 b^T w + lambda 1^T w.
Eigen::VectorXd gram_gradient(const Eigen::MatrixXd& G, const Eigen::VectorXd& b,
                              const Eigen::VectorXd& w, double lambda) {
  return (2.0 * (G * w - b)).array() + lambda;
}

double gram_objective(const Eigen::MatrixXd& G, const Eigen::VectorXd& b,
                      const Eigen::VectorXd& w, double lambda) {
  return w.dot(G * w) - 2.0 * b.dot(w) + lambda * w.sum();
}

double gram_kkt(const Eigen::MatrixXd& G, const Eigen::VectorXd& b, const Eigen::VectorXd& w,
                double lambda) {
  const Eigen::VectorXd g = gram_gradient(G, b, w, lambda);
  double worst = 0.0;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    worst = std::max(worst, w(j) > 0.0 ? std::abs(g(j)) : std::max(0.0, -g(j)));
  }
  return worst;
}

}  // namespace

void LassoConfig::validate() const {
  if (!(lambda_w >= 0.0) || !std::isfinite(lambda_w)) {
    throw InputError("lasso: lambda_w must be finite and >= 0");
  }
  if (!(tol > 0.0)) throw InputError("lasso: tol must be > 0");
  if (max_iter < 0) throw InputError("lasso: max_iter must be >= 0");
}

SparseWeights SparseWeights::from_dense(Eigen::VectorXd w) {
  SparseWeights out;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    if (w(j) != 0.0) out.support.push_back(j);
  }
  out.w = std::move(w);
  return out;
}

double lasso_objective(const Eigen::MatrixXd& C, const Eigen::VectorXd& a,
                       const Eigen::VectorXd& w, double lambda) {
  return (a - C * w).squaredNorm() + lambda * w.lpNorm<1>();
}

double kkt_violation(const Eigen::MatrixXd& C, const Eigen::VectorXd& a,
                     const Eigen::VectorXd& w, double lambda) {
  const Eigen::VectorXd g = (2.0 * C.transpose() * (C * w - a)).array() + lambda;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    if (w(j) < 0.0) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, w(j) > 0.0 ? std::abs(g(j)) : std::max(0.0, -g(j)));
  }
  return worst;
}

NnLassoSolver::NnLassoSolver(const Eigen::MatrixXd& C) {
  if (!finite(C)) throw InputError("lasso: design matrix has non-finite entries");
  design_t_ = C.transpose();
  gram_ = design_t_ * C;
}

NnLassoSolver NnLassoSolver::from_gram(Eigen::MatrixXd gram) {
  if (gram.rows() != gram.cols()) throw InputError("lasso: Gram matrix must be square");
  if (!finite(gram)) throw InputError("lasso: Gram matrix has non-finite entries");
  NnLassoSolver s;
  s.gram_ = std::move(gram);
  return s;
}

SparseWeights NnLassoSolver::solve(const Eigen::VectorXd& a, const LassoConfig& cfg) const {
  if (design_t_.size() == 0 && gram_.size() != 0) {
    throw InputError("lasso: solver built from a Gram matrix needs solve_correlation");
  }
  if (a.size() != design_t_.cols()) throw InputError("lasso: target length does not match design rows");
  if (!a.allFinite()) throw InputError("lasso: target has non-finite entries");
  return solve_correlation(design_t_ * a, cfg);
}

SparseWeights NnLassoSolver::solve_correlation(const Eigen::VectorXd& b,
                                               const LassoConfig& cfg) const {
  cfg.validate();
  if (b.size() != gram_.rows()) throw InputError("lasso: correlation length does not match atoms");
  if (!b.allFinite()) throw InputError("lasso: correlation has non-finite entries");
  if (!cfg.allow_negative) return SparseWeights::from_dense(solve_nonnegative(gram_, b, cfg));

  // Signed weights through the split w = u - v with u, v >= 0.
  const Eigen::Index m = gram_.rows();
  Eigen::MatrixXd G2(2 * m, 2 * m);
  G2 << gram_, -gram_, -gram_, gram_;
  Eigen::VectorXd b2(2 * m);
  b2 << b, -b;
  const Eigen::VectorXd uv = solve_nonnegative(G2, b2, cfg);
  return SparseWeights::from_dense(uv.head(m) - uv.tail(m));
}

// Active-set method (Lawson-Hanson form with a linear term). The passive set
// P holds the free coordinates; on each inner step the unconstrained
// minimizer over P is computed and, if it leaves the feasible region, the
// iterate moves to the boundary and the blocking coordinates leave P.
// A coordinate-descent pass polishes the result if the active-set phase
// stops short of the KKT tolerance.
Eigen::VectorXd NnLassoSolver::solve_nonnegative(const Eigen::MatrixXd& G,
                                                 const Eigen::VectorXd& b,
                                                 const LassoConfig& cfg) const {
  const Eigen::Index m = G.rows();
  const double lambda = cfg.lambda_w;
  const int max_iter = cfg.effective_max_iter(m);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
  if (m == 0) return w;

  std::vector<char> passive(static_cast<std::size_t>(m), 0);
  const Eigen::VectorXd q = 2.0 * b.array() - lambda;

  auto passive_indices = [&] {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
    }
    return idx;
  };

  // Unconstrained minimizer on the passive set: 2 G_PP z = q_P. Returns
  // false when G_PP is numerically singular.
  auto subspace_solve = [&](const std::vector<Eigen::Index>& idx, Eigen::VectorXd& z) {
    const auto k = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd Gpp(k, k);
    Eigen::VectorXd qp(k);
    for (Eigen::Index r = 0; r < k; ++r) {
      qp(r) = q(idx[r]);
      for (Eigen::Index c = 0; c < k; ++c) Gpp(r, c) = 2.0 * G(idx[r], idx[c]);
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(Gpp);
    if (ldlt.info() != Eigen::Success) return false;
    const Eigen::VectorXd pivots = ldlt.vectorD().cwiseAbs();
    if (pivots.minCoeff() <= 1e-12 * pivots.maxCoeff() || ldlt.rcond() <= 1e-12) return false;
    const Eigen::VectorXd zp = ldlt.solve(qp);
    const double scale = Gpp.cwiseAbs().maxCoeff() * zp.cwiseAbs().maxCoeff() + qp.cwiseAbs().maxCoeff();
    if (!zp.allFinite() || (Gpp * zp - qp).cwiseAbs().maxCoeff() > 1e-10 * std::max(scale, 1e-300)) {
      return false;
    }
    z.setZero(m);
    for (Eigen::Index r = 0; r < k; ++r) z(idx[r]) = zp(r);
    return true;
  };

  // Direction v with v_enter = 1 and C v = 0 on the passive set, when the
  // entering column is dependent on the other passive columns.
  auto null_direction = [&](const std::vector<Eigen::Index>& idx, Eigen::Index enter, Eigen::VectorXd& v) {
    std::vector<Eigen::Index> rest;
    for (auto j : idx) {
      if (j != enter) rest.push_back(j);
    }
    const auto k = static_cast<Eigen::Index>(rest.size());
    Eigen::MatrixXd Grr(k, k);
    Eigen::VectorXd ge(k);
    for (Eigen::Index r = 0; r < k; ++r) {
      ge(r) = G(rest[r], enter);
      for (Eigen::Index c = 0; c < k; ++c) Grr(r, c) = G(rest[r], rest[c]);
    }
    const Eigen::VectorXd coef = k > 0 ? Eigen::VectorXd(Grr.completeOrthogonalDecomposition().solve(ge))
                                       : Eigen::VectorXd();
    v.setZero(m);
    v(enter) = 1.0;
    for (Eigen::Index r = 0; r < k; ++r) v(rest[r]) = -coef(r);
    return v.allFinite() && v.dot(G * v) <= 1e-10 * std::max(G(enter, enter), 1e-300);
  };

  std::vector<char> blocked(static_cast<std::size_t>(m), 0);
  for (int outer = 0; outer < max_iter; ++outer) {
    const Eigen::VectorXd grad = 2.0 * (G * w) - q;
    Eigen::Index enter = -1;
    double most_negative = -cfg.tol;
    for (Eigen::Index j = 0; j < m; ++j) {
      const auto sj = static_cast<std::size_t>(j);
      if (!passive[sj] && !blocked[sj] && grad(j) < most_negative) {
        most_negative = grad(j);
        enter = j;
      }
    }
    if (enter < 0) break;
    passive[static_cast<std::size_t>(enter)] = 1;

    Eigen::VectorXd z;
    bool entered = true;
    for (Eigen::Index inner = 0; inner <= m; ++inner) {
      const auto idx = passive_indices();
      if (!subspace_solve(idx, z)) {
        // Dependent passive columns: the objective is linear along the null
        // direction, so walk down it until a coordinate reaches zero.
        Eigen::VectorXd v;
        double t = std::numeric_limits<double>::infinity();
        if (null_direction(idx, enter, v)) {
          if (v.dot(2.0 * (G * w) - q) > 0.0) v = -v;
          for (auto j : idx) {
            if (v(j) < 0.0) t = std::min(t, w(j) / -v(j));
          }
        }
        if (!std::isfinite(t)) {
          passive[static_cast<std::size_t>(enter)] = 0;
          w(enter) = 0.0;
          blocked[static_cast<std::size_t>(enter)] = 1;
          entered = false;
          break;
        }
        w += t * v;
        for (auto j : idx) {
          if (v(j) < 0.0 && w(j) <= 1e-15 * std::max(1.0, w.cwiseAbs().maxCoeff())) {
            w(j) = 0.0;
            passive[static_cast<std::size_t>(j)] = 0;
          }
        }
        continue;
      }
      bool feasible = true;
      for (auto j : idx) feasible = feasible && z(j) > 0.0;
      if (feasible) {
        w = z;
        break;
      }
      double alpha = 1.0;
      for (auto j : idx) {
        if (z(j) <= 0.0) alpha = std::min(alpha, w(j) / (w(j) - z(j)));
      }
      w += alpha * (z - w);
      for (auto j : idx) {
        if (w(j) <= 0.0 || (z(j) <= 0.0 && w(j) <= 1e-15 * std::max(1.0, w.cwiseAbs().maxCoeff()))) {
          w(j) = 0.0;
          passive[static_cast<std::size_t>(j)] = 0;
        }
      }
      if (!passive[static_cast<std::size_t>(enter)] && inner == 0) {
        // Entering coordinate bounced straight back: roundoff at the
        // tolerance boundary. Skip it for the rest of this solve.
        blocked[static_cast<std::size_t>(enter)] = 1;
        entered = false;
        break;
      }
    }
    if (entered) std::fill(blocked.begin(), blocked.end(), 0);
  }

  for (Eigen::Index j = 0; j < m; ++j) {
    if (!passive[static_cast<std::size_t>(j)] || w(j) < 0.0) w(j) = 0.0;
  }
  if (gram_kkt(G, b, w, lambda) <= cfg.tol) return w;

  // Coordinate-descent polish.
  Eigen::VectorXd grad = gram_gradient(G, b, w, lambda);
  Eigen::VectorXd best = w;
  double best_obj = gram_objective(G, b, w, lambda);
  const int sweeps = std::max(1000, 10 * max_iter);
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const double h = 2.0 * G(j, j);
      if (h <= 0.0) continue;
      const double next = std::max(0.0, w(j) - grad(j) / h);
      const double delta = next - w(j);
      if (delta != 0.0) {
        w(j) = next;
        grad += (2.0 * delta) * G.col(j);
      }
    }
    if (sweep % 8 == 7 || sweep + 1 == sweeps) {
      grad = gram_gradient(G, b, w, lambda);
      const double obj = gram_objective(G, b, w, lambda);
      if (obj < best_obj) {
        best_obj = obj;
        best = w;
      }
      if (gram_kkt(G, b, w, lambda) <= cfg.tol) return w;
    }
  }
  throw ConvergenceError("lasso: KKT tolerance not reached within iteration cap (violation " +
                             std::to_string(gram_kkt(G, b, best, lambda)) + ")",
                         best);
}

SparseWeights solve_nn_lasso(const Eigen::MatrixXd& C, const Eigen::VectorXd& a,
                             const LassoConfig& cfg) {
  if (C.rows() != a.size()) throw InputError("lasso: C rows must equal length of a");
  return NnLassoSolver(C).solve(a, cfg);
}

SparseWeights infer_weights(const Eigen::MatrixXd& T, const Eigen::VectorXd& phi,
                            const LassoConfig& cfg) {
  cfg.validate();
  if (T.cols() != phi.size()) throw InputError("infer_weights: T columns must equal length of phi");
  if (!T.allFinite() || !phi.allFinite()) throw InputError("infer_weights: non-finite input");
  const Eigen::VectorXd target = T * phi;
  const double shrink = 0.5 * cfg.lambda_w;
  Eigen::VectorXd w(target.size());
  for (Eigen::Index j = 0; j < target.size(); ++j) {
    if (cfg.allow_negative) {
      const double mag = std::max(0.0, std::abs(target(j)) - shrink);
      w(j) = std::copysign(mag, target(j));
      if (mag == 0.0) w(j) = 0.0;
    } else {
      w(j) = std::max(0.0, target(j) - shrink);
    }
  }
  return SparseWeights::from_dense(std::move(w));
}

}  // namespace cdl
