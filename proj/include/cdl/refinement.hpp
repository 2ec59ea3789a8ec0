#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cdl/depth_map.hpp"
#include "cdl/kernel.hpp"
#include "cdl/spatial.hpp"

namespace cdl {

struct RefinementConfig {
  Eigen::Index n_centers = 512;
  double lambda_t = 1e-3;
  /// 0: intermediate rows / 8, the last block taking any remainder.
  Eigen::Index block_height = 0;
  std::uint64_t seed = 0;
  /// Pixels drawn per block (across all training images) for k-means.
  Eigen::Index samples_per_block = 20000;
  int kmeans_max_iter = 100;
  /// RBF bandwidth; unset uses sigma_heuristic over each block's centroids.
  std::optional<double> nu;
  /// One regressor over the union of all block banks.
  bool single_model = false;
  /// false drops the global-estimate coefficient (held at zero).
  bool use_global_feature = true;
  int threads = 1;

  void validate() const;
};

struct RowRange {
  Eigen::Index begin = 0;
  Eigen::Index end = 0;
};

/// Consecutive row blocks covering [0, rows) exactly.
std::vector<RowRange> block_partition(Eigen::Index rows, Eigen::Index block_height);

struct RefinementBlock {
  RowRange rows;
  /// [bias, global-estimate coefficient, rbf coefficients...]
  Eigen::VectorXd t_up;
  CenterBank bank;
};

struct RefinementModel {
  std::vector<RefinementBlock> blocks;
  Eigen::Index pi_rows = 0;
  Eigen::Index pi_cols = 0;

  void validate() const;
  const RefinementBlock& block_for_row(Eigen::Index row) const;
};

/// [1, g_up, rbf_vector(hyper, bank)...].
Eigen::VectorXd build_local_feature(const Eigen::VectorXd& hyper, double g_up, const CenterBank& bank);

/// Normal equations of sum_j (y_j - t . f_j)^2 + lambda_t sum_{k >= 2} t_k^2.
class LocalRidge {
 public:
  explicit LocalRidge(Eigen::Index dim);
  /// Columns of F are feature vectors, y the matching targets.
  void add(const Eigen::MatrixXd& F, const Eigen::VectorXd& y);
  Eigen::Index count() const { return count_; }
  Eigen::MatrixXd gram() const { return gram_.selfadjointView<Eigen::Lower>(); }
  const Eigen::VectorXd& rhs() const { return rhs_; }
  /// Regularized normal matrix (index 1 pinned to zero when the global
  /// feature is dropped).
  Eigen::MatrixXd system(double lambda_t, bool use_global) const;
  Eigen::VectorXd solve(double lambda_t, bool use_global) const;
  /// Gradient of the objective at t.
  Eigen::VectorXd gradient(const Eigen::VectorXd& t, double lambda_t, bool use_global) const;

 private:
  Eigen::MatrixXd gram_;  // lower triangle
  Eigen::VectorXd rhs_;
  Eigen::Index count_ = 0;
};

/// One training image at the intermediate resolution: hypercolumns, the
/// target depth and the cross-validated global estimate.
struct RefinementExample {
  HypercolumnField hyper;
  DepthMap target;
  DepthMap global;
};

RefinementModel train_refinement(const std::vector<RefinementExample>& train,
                                 const RefinementConfig& cfg, Eigen::Index pi_rows,
                                 Eigen::Index pi_cols);

/// t_up . f_j at every intermediate pixel, each row using its block model.
DepthMap predict_intermediate(const RefinementModel& model, const HypercolumnField& hyper,
                              const DepthMap& g_up);

/// predict_intermediate followed by pipeline_upsample to full resolution.
DepthMap infer_refined(const RefinementModel& model, const HypercolumnField& hyper,
                       const DepthMap& g_up, const Tensor* guide_full, Eigen::Index full_rows,
                       Eigen::Index full_cols, const ColorizationConfig& color);

struct FoldPlan {
  int k = 10;
  std::map<std::string, int> assignment;
  std::uint64_t seed = 0;

  void validate() const;
  std::vector<std::string> members(int fold) const;
};

/// Seeded shuffle of the ids dealt round-robin into k folds.
FoldPlan make_fold_plan(const std::vector<std::string>& ids, int k, std::uint64_t seed);

}  // namespace cdl
