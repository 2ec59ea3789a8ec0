#include "cdl/depth_map.hpp"

#include "cdl/errors.hpp"

namespace cdl {

Eigen::VectorXd DepthMap::vectorized() const {
  Eigen::VectorXd v(depth.size());
  for (Eigen::Index r = 0; r < rows(); ++r) {
    for (Eigen::Index c = 0; c < cols(); ++c) v(r * cols() + c) = depth(r, c);
  }
  return v;
}

DepthMap DepthMap::from_vector(const Eigen::VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols) throw InputError("depth vector length does not match grid");
  Grid g(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) g(r, c) = v(r * cols + c);
  }
  return DepthMap(std::move(g));
}

void validate_ground_truth(const DepthMap& d) {
  if (d.mask && (d.mask->rows() != d.rows() || d.mask->cols() != d.cols())) {
    throw InputError("depth mask dims differ from depth dims");
  }
  for (Eigen::Index r = 0; r < d.rows(); ++r) {
    for (Eigen::Index c = 0; c < d.cols(); ++c) {
      if (d.mask) {
        const double m = (*d.mask)(r, c);
        if (m != 0.0 && m != 1.0) throw InputError("depth mask values must be 0 or 1");
      }
      if (d.valid(r, c) && !(d.depth(r, c) > 0.0)) {
        throw InputError("ground-truth depth must be strictly positive at valid pixels");
      }
    }
  }
}

Tensor to_tensor(const DepthMap& d) {
  const auto rows = static_cast<std::uint64_t>(d.rows());
  const auto cols = static_cast<std::uint64_t>(d.cols());
  if (!d.mask) return Tensor::from_matrix(d.depth);
  Tensor t({rows, cols, 2});
  auto out = t.data();
  for (Eigen::Index r = 0; r < d.rows(); ++r) {
    for (Eigen::Index c = 0; c < d.cols(); ++c) {
      const auto base = static_cast<std::size_t>(2 * (r * d.cols() + c));
      out[base] = static_cast<float>(d.depth(r, c));
      out[base + 1] = static_cast<float>((*d.mask)(r, c));
    }
  }
  return t;
}

DepthMap depth_from_tensor(const Tensor& t) {
  const auto& dims = t.dims();
  if (dims.size() == 2) return DepthMap(t.to_matrix());
  if (dims.size() == 3 && dims[2] == 2) {
    const auto rows = static_cast<Eigen::Index>(dims[0]);
    const auto cols = static_cast<Eigen::Index>(dims[1]);
    Grid depth(rows, cols);
    Grid mask(rows, cols);
    const auto in = t.data();
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        const auto base = static_cast<std::size_t>(2 * (r * cols + c));
        depth(r, c) = in[base];
        mask(r, c) = in[base + 1];
      }
    }
    return DepthMap(std::move(depth), std::move(mask));
  }
  throw FormatError("depth tensor must have dims [rows, cols] or [rows, cols, 2]");
}

}  // namespace cdl
