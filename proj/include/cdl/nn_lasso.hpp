#pragma once

#include <vector>

#include <Eigen/Dense>

namespace cdl {

/// Settings for the nonnegative L1-regularized least-squares problem
///
///   min_w ||a - C w||^2 + lambda_w ||w||_1   s.t. w >= 0.
struct LassoConfig {
  double lambda_w = 0.0;
  /// Active-set iteration cap; 0 selects 10 * m.
  int max_iter = 0;
  /// Absolute tolerance on the KKT conditions of the problem above.
  double tol = 1e-8;
  /// Drop the positivity constraint. Only used to compare against the
  /// signed formulation in tests; the pipeline never sets it.
  bool allow_negative = false;

  void validate() const;
  int effective_max_iter(Eigen::Index m) const {
    return max_iter > 0 ? max_iter : static_cast<int>(10 * std::max<Eigen::Index>(m, 1));
  }
};

struct SparseWeights {
  Eigen::VectorXd w;
  /// Indices j with w_j != 0, ascending.
  std::vector<Eigen::Index> support;

  static SparseWeights from_dense(Eigen::VectorXd w);
};

/// ||a - C w||^2 + lambda ||w||_1.
double lasso_objective(const Eigen::MatrixXd& C, const Eigen::VectorXd& a,
                       const Eigen::VectorXd& w, double lambda);

/// Largest KKT violation of w for the nonnegative problem: |g_j| on the
/// support and max(0, -g_j) off it, where g = 2 C^T (C w - a) + lambda.
double kkt_violation(const Eigen::MatrixXd& C, const Eigen::VectorXd& a,
                     const Eigen::VectorXd& w, double lambda);

/// Solver for many right-hand sides sharing one design matrix. Works on
/// the Gram form  w^T G w - 2 b^T w + lambda 1^T w  with G = C^T C and
/// b = C^T a.
class NnLassoSolver {
 public:
  explicit NnLassoSolver(const Eigen::MatrixXd& C);
  static NnLassoSolver from_gram(Eigen::MatrixXd gram);

  Eigen::Index atoms() const { return gram_.rows(); }
  const Eigen::MatrixXd& gram() const { return gram_; }

  /// Solves for target `a` (length p). Throws ConvergenceError carrying
  /// the best iterate when the KKT tolerance is not reached.
  SparseWeights solve(const Eigen::VectorXd& a, const LassoConfig& cfg) const;
  /// Same, given the correlation vector b = C^T a directly.
  SparseWeights solve_correlation(const Eigen::VectorXd& b, const LassoConfig& cfg) const;

 private:
  NnLassoSolver() = default;
  Eigen::VectorXd solve_nonnegative(const Eigen::MatrixXd& G, const Eigen::VectorXd& b,
                                    const LassoConfig& cfg) const;

  Eigen::MatrixXd design_t_;  // C^T, empty when built from a Gram matrix
  Eigen::MatrixXd gram_;
};

/// One-shot wrapper around NnLassoSolver.
SparseWeights solve_nn_lasso(const Eigen::MatrixXd& C, const Eigen::VectorXd& a,
                             const LassoConfig& cfg);

/// Weights for inference: min ||w - T phi||^2 + lambda_w ||w||_1, w >= 0,
/// which has the closed form w_j = max(0, (T phi)_j - lambda_w / 2).
SparseWeights infer_weights(const Eigen::MatrixXd& T, const Eigen::VectorXd& phi,
                            const LassoConfig& cfg);

}  // namespace cdl
