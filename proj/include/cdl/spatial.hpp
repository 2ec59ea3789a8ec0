#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "cdl/depth_map.hpp"
#include "cdl/tensor.hpp"

namespace cdl {

/// Edge-aware smoothing parameters.
struct ColorizationConfig {
  /// Stiffness of the pull toward the seed values (low = more smoothing).
  double seed_penalty = 0.1;
  /// Window radius in pixels (1 = 3x3 windows).
  int neighborhood = 1;
  /// Floor added to the per-window color covariance.
  double variance_floor = 1e-4;

  void validate() const;
};

/// Pixel-center-aligned bilinear resize. Returns the source unchanged when
/// the size already matches.
DepthMap resize_bilinear(const DepthMap& src, Eigen::Index rows, Eigen::Index cols);
Grid resize_bilinear(const Grid& src, Eigen::Index rows, Eigen::Index cols);

/// Resizes each channel of an image tensor [rows, cols, ch].
Tensor resize_image(const Tensor& image, Eigen::Index rows, Eigen::Index cols);

/// Colorization-style smoothing. Each pixel is tied to the affinity-weighted
/// average of its window and, with stiffness seed_penalty, to its seed:
///
///   (u_p - sum_q a_pq u_q) + seed_penalty * (u_p - seed_p) = 0   for all p
///
/// where a_pq are nonnegative guide-image affinities over the window around
/// p, normalized per pixel to sum to one. The result is a convex
/// combination of the seeds. `guide` is [rows, cols, 3] in [0, 1].
DepthMap colorize_smooth(const DepthMap& seed, const Tensor& guide, const ColorizationConfig& cfg);

/// Affinity matrix A (rows*cols square, row-major pixel order). Each row is
/// a convex combination over the neighbors of that pixel.
Eigen::SparseMatrix<double, Eigen::RowMajor> colorization_affinities(
    const Tensor& guide, const ColorizationConfig& cfg);

/// Bilinear resize to the intermediate grid followed by colorization against
/// the guide resized to that grid. Without a guide only the resize is done.
DepthMap upsample_to_intermediate(const DepthMap& coarse, const Tensor* guide_full,
                                  Eigen::Index pi_rows, Eigen::Index pi_cols,
                                  const ColorizationConfig& cfg);

/// Bilinear resize to full resolution followed by colorization.
DepthMap upsample_to_full(const DepthMap& intermediate, const Tensor* guide_full,
                          Eigen::Index full_rows, Eigen::Index full_cols,
                          const ColorizationConfig& cfg);

/// Both stages back to back.
DepthMap pipeline_upsample(const DepthMap& coarse, const Tensor* guide_full, Eigen::Index pi_rows,
                           Eigen::Index pi_cols, Eigen::Index full_rows, Eigen::Index full_cols,
                           const ColorizationConfig& cfg);

}  // namespace cdl
