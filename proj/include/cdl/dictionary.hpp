#pragma once

#include <Eigen/Dense>

namespace cdl {

/// Depth basis: p_low x m matrix whose columns (atoms) have Euclidean norm
/// at most one.
struct Dictionary {
  Eigen::MatrixXd B;

  Eigen::Index atoms() const { return B.cols(); }
  Eigen::Index dim() const { return B.rows(); }
  /// Throws InputError when some column norm exceeds 1 + 1e-9.
  void validate() const;
};

inline constexpr double kAtomNormSlack = 1e-9;

/// sum_i ||d_i - B w_i||^2 over the columns of D and W.
double reconstruction_objective(const Eigen::MatrixXd& D, const Eigen::MatrixXd& B,
                                const Eigen::MatrixXd& W);

struct DictionaryUpdate {
  Dictionary dictionary;
  /// Lagrange multipliers of the norm constraints (zero for unused atoms).
  Eigen::VectorXd dual;
  /// Primal objective minus dual objective at the returned point.
  double dual_gap = 0.0;
  int newton_iterations = 0;
};

/// Norm-constrained least squares for the basis,
///
///   min_B ||D - B W||_F^2   s.t. ||b_j|| <= 1,
///
/// solved by projected Newton ascent on the Lagrange dual. D is p x N, W is
/// m x N. Atoms whose row of W is all zero are left out of the solve and
/// keep their column from `previous` (or zero when none is given).
DictionaryUpdate update_dictionary(const Eigen::MatrixXd& D, const Eigen::MatrixXd& W,
                                   const Dictionary* previous = nullptr);

/// Replaces every atom with an all-zero usage row by the normalized
/// residual of a badly reconstructed example. Dead atoms are filled in
/// index order from the examples sorted by residual norm (largest first,
/// ties to the lower example index). Atoms are left alone when no residual
/// signal remains.
Dictionary unused_atom_policy(const Dictionary& dict, const Eigen::MatrixXd& W,
                              const Eigen::MatrixXd& D);

}  // namespace cdl
