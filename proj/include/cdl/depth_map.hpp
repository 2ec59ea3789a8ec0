#pragma once

#include <optional>

#include <Eigen/Dense>

#include "cdl/tensor.hpp"

namespace cdl {

using Grid = Eigen::MatrixXd;

/// Depth in meters on a rows x cols grid with an optional {0,1} validity
/// mask. Values are held in double precision; conversion to the float32
/// tensor form happens at I/O time.
struct DepthMap {
  Grid depth;
  std::optional<Grid> mask;

  DepthMap() = default;
  explicit DepthMap(Grid d) : depth(std::move(d)) {}
  DepthMap(Grid d, Grid m) : depth(std::move(d)), mask(std::move(m)) {}

  Eigen::Index rows() const { return depth.rows(); }
  Eigen::Index cols() const { return depth.cols(); }
  bool valid(Eigen::Index r, Eigen::Index c) const { return !mask || (*mask)(r, c) != 0.0; }

  /// Row-major flattening (the coarse vector d_i).
  Eigen::VectorXd vectorized() const;
  static DepthMap from_vector(const Eigen::VectorXd& v, Eigen::Index rows, Eigen::Index cols);
};

/// Checks dims of the mask, {0,1} mask values, and strictly positive depth
/// at masked-in pixels. Throws InputError.
void validate_ground_truth(const DepthMap& d);

/// Tensor [rows, cols] (or [rows, cols, 2] with the mask as the second
/// channel).
Tensor to_tensor(const DepthMap& d);
DepthMap depth_from_tensor(const Tensor& t);

}  // namespace cdl
