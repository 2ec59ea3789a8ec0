#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "cdl/tensor.hpp"

namespace cdl {

/// RBF centers (one per row) with per-center bandwidths.
struct CenterBank {
  Eigen::MatrixXd centers;  // n x dim
  Eigen::VectorXd sigmas;   // n

  Eigen::Index size() const { return centers.rows(); }
  Eigen::Index dim() const { return centers.cols(); }
  void validate() const;

  /// Bank whose bandwidths all equal sigma_heuristic(centers).
  static CenterBank with_heuristic_sigma(Eigen::MatrixXd centers);
};

/// phi_j = exp(-||f - c_j||^2 / (2 sigma_j^2)).
Eigen::VectorXd rbf_vector(const Eigen::VectorXd& f, const CenterBank& bank);

/// n x N matrix whose columns are rbf_vector of the columns of `features`
/// (dim x N).
Eigen::MatrixXd rbf_matrix(const Eigen::MatrixXd& features, const CenterBank& bank);

/// Half the largest pairwise Euclidean distance between rows.
double sigma_heuristic(const Eigen::MatrixXd& centers);

struct KMeansResult {
  Eigen::MatrixXd centroids;          // k x dim
  std::vector<double> inertia_trace;  // within-cluster sum of squares per Lloyd iteration
  int iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding. Empty clusters take the point
/// farthest from its current centroid. Deterministic for a fixed seed.
KMeansResult kmeans(const Eigen::MatrixXd& points, Eigen::Index k, std::uint64_t seed,
                    int max_iter = 100);

/// Stack of convolutional feature maps, each a tensor [h, w, channels],
/// sampled on a target grid of target_rows x target_cols.
struct HypercolumnField {
  std::vector<Tensor> layers;
  Eigen::Index target_rows = 0;
  Eigen::Index target_cols = 0;

  Eigen::Index channels() const;
  void validate() const;
};

/// Bilinear sample of every layer at target pixel (row, col), layers
/// concatenated in order. Target pixel centers map proportionally into each
/// layer's grid (pixel-center alignment, clamped at the borders).
Eigen::VectorXd hypercolumn_at(const HypercolumnField& field, Eigen::Index row, Eigen::Index col);

/// Source coordinate for target index i under pixel-center alignment.
double source_coordinate(Eigen::Index i, Eigen::Index target_size, Eigen::Index source_size);

}  // namespace cdl
