#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace cdl {

/// Dense row-major float32 array. The on-disk form is the "CDLT" format:
///
///   magic "CDLT" | u32 version (=1) | u8 dtype (0 = float32) | u8 ndim |
///   u64 dim[ndim] | float32 payload (row-major)
///
/// All multi-byte fields are little-endian.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<std::uint64_t> dims, std::vector<float> data);
  explicit Tensor(std::vector<std::uint64_t> dims);

  const std::vector<std::uint64_t>& dims() const { return dims_; }
  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }
  std::size_t size() const { return data_.size(); }
  std::size_t ndim() const { return dims_.size(); }

  bool all_finite() const;

  /// 2-D tensor from a matrix, rounding each entry to float32.
  static Tensor from_matrix(const Eigen::MatrixXd& m);
  static Tensor from_vector(const Eigen::VectorXd& v);
  /// Requires ndim == 2 (or ndim == 1, read as a single column).
  Eigen::MatrixXd to_matrix() const;
  /// Flattens any shape.
  Eigen::VectorXd to_vector() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::uint64_t> dims_;
  std::vector<float> data_;
};

inline constexpr std::uint32_t kTensorVersion = 1;
inline constexpr std::uint8_t kDtypeFloat32 = 0;

/// Size in bytes of the encoded tensor.
std::size_t encoded_size(const Tensor& t);

void write_tensor(const Tensor& t, std::ostream& out);
void write_tensor(const Tensor& t, const std::filesystem::path& path);

/// Reads one tensor. When `check_finite` is set a NaN/Inf payload raises a
/// FormatError.
Tensor read_tensor(std::istream& in, bool check_finite = true);
Tensor read_tensor(const std::filesystem::path& path, bool check_finite = true);

}  // namespace cdl
