#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cdl/depth_map.hpp"
#include "cdl/dictionary.hpp"
#include "cdl/kernel.hpp"
#include "cdl/nn_lasso.hpp"

namespace cdl {

/// Weights of the coupled objective
///
///   J(B, W, T) = sum_i ||d_i - B w_i||^2 + lambda_w sum_i ||w_i||_1
///              + lambda_r sum_i ||w_i - T phi(x_i)||^2 + lambda_T ||T||_F^2.
struct Regularization {
  double lambda_w = 0.0;
  double lambda_r = 1.0;
  double lambda_T = 1e-3;
};

struct TrainConfig {
  Eigen::Index m = 48;
  /// Unset: 0.1 * mean_i ||d_i|| / m over the mean-subtracted coarse depths.
  std::optional<double> lambda_w;
  double lambda_r = 1.0;
  double lambda_T = 1e-3;
  int max_outer = 50;
  /// Cap on the sparse-coding alternations used for initialization.
  int max_init = 100;
  double rel_tol = 1e-5;
  std::uint64_t seed = 0;
  double lasso_tol = 1e-8;
  int lasso_max_iter = 0;

  void validate() const;
  /// Regularization with lambda_w resolved against mean-subtracted depths
  /// D (p x N).
  Regularization resolve(const Eigen::MatrixXd& D) const;
  LassoConfig lasso(double lambda_w) const;
};

struct GlobalRegressor {
  Eigen::MatrixXd T;  // m x n
};

/// Everything needed to predict a coarse depth map from one crop's feature.
struct GlobalModel {
  Dictionary dictionary;
  GlobalRegressor regressor;
  CenterBank bank;
  DepthMap mean_depth;
  Eigen::Index coarse_rows = 0;
  Eigen::Index coarse_cols = 0;
  double lambda_w = 0.0;

  void validate() const;
};

double objective_J(const Dictionary& B, const Eigen::MatrixXd& W, const GlobalRegressor& T,
                   const Eigen::MatrixXd& D, const Eigen::MatrixXd& Phi, const Regularization& reg);

/// Closed-form ridge step T = lambda_r W Phi^T (lambda_r Phi Phi^T + lambda_T I)^-1.
GlobalRegressor solve_T(const Eigen::MatrixXd& W, const Eigen::MatrixXd& Phi, double lambda_r,
                        double lambda_T);

/// Gradient of lambda_r ||W - T Phi||_F^2 + lambda_T ||T||_F^2 with respect to T.
Eigen::MatrixXd ridge_gradient(const GlobalRegressor& T, const Eigen::MatrixXd& W,
                               const Eigen::MatrixXd& Phi, double lambda_r, double lambda_T);

/// Weight step: per example, a nonnegative lasso on the stacked system
/// C = [B; sqrt(lambda_r) I], a_i = [d_i; sqrt(lambda_r) T phi_i].
Eigen::MatrixXd step1_weights(const Dictionary& B, const GlobalRegressor& T,
                              const Eigen::MatrixXd& Phi, const Eigen::MatrixXd& D,
                              const Regularization& reg, const LassoConfig& lasso);

/// Training inputs for one crop: feature vectors (dim x N) and depth maps
/// at any resolution (resized to the coarse grid internally).
struct TrainingSet {
  Eigen::MatrixXd features;
  std::vector<DepthMap> depths;
};

/// Coarse targets: resized, vectorized depths (p x N) and their per-pixel
/// mean.
struct CoarseTargets {
  Eigen::MatrixXd D;
  Eigen::VectorXd mean;
};
CoarseTargets coarse_targets(const std::vector<DepthMap>& depths, Eigen::Index coarse_rows,
                             Eigen::Index coarse_cols);

/// Random training examples, normalized, as starting atoms (Gaussian
/// columns when there are fewer usable examples than m).
Dictionary initial_dictionary(const Eigen::MatrixXd& D, Eigen::Index m, std::uint64_t seed);

struct SparseCodingResult {
  Dictionary dictionary;
  Eigen::MatrixXd weights;
  std::vector<double> trace;
};

/// Alternates the lambda_r = 0 weight step and the dictionary step from
/// (B, W) until the relative objective change falls below cfg.rel_tol, for
/// at most cfg.max_init rounds.
SparseCodingResult sparse_coding(const Eigen::MatrixXd& D, Dictionary B, Eigen::MatrixXd W,
                                 double lambda_w, const TrainConfig& cfg);

struct TrainResult {
  GlobalModel model;
  /// Sparse-coding objective per initialization round.
  std::vector<double> init_trace;
  /// J after initialization (entry 0) and after each outer iteration.
  std::vector<double> j_trace;
  Eigen::MatrixXd weights;
  Regularization reg;
  int outer_iterations = 0;
};

/// Block-coordinate descent on J. max_outer = 0 yields the uncoupled
/// model: sparse-coding initialization followed by a single ridge step.
TrainResult train_global(const TrainingSet& data, const TrainConfig& cfg, const CenterBank& bank,
                         Eigen::Index coarse_rows, Eigen::Index coarse_cols);

/// d = B w + mean with w = max(0, T phi(f) - lambda_w / 2).
DepthMap infer_global(const GlobalModel& model, const Eigen::VectorXd& feature,
                      const LassoConfig& cfg);
DepthMap infer_global(const GlobalModel& model, const Eigen::VectorXd& feature);

/// Baseline without a basis: ridge regression from phi(x) straight to the
/// mean-subtracted coarse depth.
struct DirectModel {
  Eigen::MatrixXd V;  // p x n
  CenterBank bank;
  DepthMap mean_depth;
  Eigen::Index coarse_rows = 0;
  Eigen::Index coarse_cols = 0;
};
DirectModel train_direct(const TrainingSet& data, double lambda_T, const CenterBank& bank,
                         Eigen::Index coarse_rows, Eigen::Index coarse_cols);
DepthMap infer_direct(const DirectModel& model, const Eigen::VectorXd& feature);

/// Crop layout for merging per-crop predictions on the coarse grid.
struct CropGeometry {
  std::vector<std::string> names;                  // declared order
  std::map<std::string, Eigen::Vector2d> centers;  // (row, col) on the coarse grid
  double gamma = 1.0;
  /// Non-default: use ||p - p_i||^2 in the merge exponent.
  bool squared_distance = false;

  void validate() const;
};

inline const std::vector<std::string> kCropNames{"C", "UL", "UR", "DL", "DR"};

/// Five crops of crop_size x crop_size pixels (center and four corners) of a
/// full_rows x full_cols image, centers mapped onto the coarse grid, gamma
/// set to half the largest distance between crop centers.
CropGeometry default_crop_geometry(Eigen::Index full_rows, Eigen::Index full_cols,
                                   Eigen::Index crop_size, Eigen::Index coarse_rows,
                                   Eigen::Index coarse_cols);

/// Merge weights beta_i(p) at coarse pixel (row, col), in declared order.
Eigen::VectorXd merge_weights(const CropGeometry& geometry, double row, double col);

/// Per-pixel convex combination of the crop predictions.
DepthMap merge_crops(const CropGeometry& geometry, const std::map<std::string, DepthMap>& per_crop);

struct CropEnsemble {
  CropGeometry geometry;
  std::map<std::string, GlobalModel> models;

  void validate() const;
};

/// Rounds every stored parameter to float32 (atoms toward zero so the norm
/// constraint survives) so that the file form is an exact copy.
void quantize_for_storage(GlobalModel& model);

}  // namespace cdl
