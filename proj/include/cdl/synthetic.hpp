#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "cdl/manifest.hpp"

namespace cdl {

/// Parameters of the synthetic coupled generator.
///
/// Latent descriptors x sit near one of `n_prototypes` prototypes z_k. The
/// hidden weights are w* = T* phi*(x) with phi* an RBF expansion around the
/// prototypes and T* nonnegative with `sparsity` nonzeros per column, so
/// w* is nonnegative, dominated by the code of the nearest prototype, and a
/// noiseless linear function of phi*. Coarse depths are
/// base + amplitude * B* w* + noise with B* = [U, -U] for a random
/// orthonormal U, which keeps mean-subtracted targets exactly representable
/// by m_true nonnegative combinations.
struct SynthSpec {
  Eigen::Index n_train = 64;
  Eigen::Index n_test = 32;
  Eigen::Index p_low = 192;
  Eigen::Index m_true = 8;
  Eigen::Index feat_dim = 32;
  Eigen::Index sparsity = 3;
  double noise_sigma = 0.01;
  std::uint64_t seed = 0;

  Eigen::Index n_prototypes = 16;
  /// Examples reserved as RBF centers (center split).
  Eigen::Index n_centers = 32;
  /// Spread of descriptors around their prototype, relative to the
  /// prototype scale.
  double spread = 0.35;
  /// Per-crop descriptor noise (each crop sees x plus its own noise).
  double crop_noise = 0.1;
  double amplitude = 4.0;
  /// Amplitude of the block-dependent local structure at full resolution.
  double local_amplitude = 0.3;
  /// Intermediate and full grids are these multiples of the coarse grid.
  Eigen::Index pi_factor = 2;
  Eigen::Index full_factor = 4;
  Eigen::Index hyper_channels = 4;

  void validate() const;
  /// Coarse shape rows x cols = p_low, the factorization closest to 3:4.
  std::pair<Eigen::Index, Eigen::Index> coarse_shape() const;
};

/// Hidden quantities kept for oracle checks.
struct GroundTruthBundle {
  Eigen::MatrixXd B;           // p_low x m_true, unit-norm atoms
  Eigen::MatrixXd T;           // m_true x n_prototypes, nonnegative
  Eigen::MatrixXd prototypes;  // n_prototypes x feat_dim
  double sigma = 1.0;          // bandwidth of phi*
  Eigen::MatrixXd W_train;     // m_true x n_train
  Eigen::MatrixXd W_test;      // m_true x n_test
  Eigen::VectorXd base;        // p_low, the added mean level (row-major)
  /// Noiseless coarse depths (p_low x n), row-major vectorized.
  Eigen::MatrixXd coarse_train;
  Eigen::MatrixXd coarse_test;
  Eigen::Index coarse_rows = 0, coarse_cols = 0;
  Eigen::Index pi_rows = 0, pi_cols = 0;
  Eigen::Index full_rows = 0, full_cols = 0;
  /// Amplitude of the local structure in each row block of the
  /// intermediate grid (8 blocks).
  Eigen::VectorXd block_amplitude;
};

struct SyntheticData {
  Dataset dataset;
  GroundTruthBundle truth;
};

/// Pure function of the spec (seed included).
SyntheticData generate_synthetic(const SynthSpec& spec);

}  // namespace cdl
