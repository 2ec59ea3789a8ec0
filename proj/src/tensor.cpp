#include "cdl/tensor.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cdl/errors.hpp"

namespace cdl {

static_assert(std::endian::native == std::endian::little,
              "CDLT I/O assumes a little-endian host");

namespace {

std::uint64_t element_count(const std::vector<std::uint64_t>& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::uint64_t{1},
                         std::multiplies<>());
}

template <class T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
bool get(std::istream& in, T& value) {
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  return static_cast<std::size_t>(in.gcount()) == sizeof(T);
}

constexpr std::array<char, 4> kMagic{'C', 'D', 'L', 'T'};

}  // namespace

Tensor::Tensor(std::vector<std::uint64_t> dims, std::vector<float> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  if (element_count(dims_) != data_.size()) {
    throw InputError("tensor: product of dims does not match data length");
  }
}

Tensor::Tensor(std::vector<std::uint64_t> dims)
    : dims_(std::move(dims)), data_(element_count(dims_), 0.0f) {}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](float v) { return std::isfinite(v); });
}

Tensor Tensor::from_matrix(const Eigen::MatrixXd& m) {
  Tensor t({static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())});
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      t.data_[static_cast<std::size_t>(r * m.cols() + c)] = static_cast<float>(m(r, c));
    }
  }
  return t;
}

Tensor Tensor::from_vector(const Eigen::VectorXd& v) {
  Tensor t({static_cast<std::uint64_t>(v.size())});
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    t.data_[static_cast<std::size_t>(i)] = static_cast<float>(v(i));
  }
  return t;
}

Eigen::MatrixXd Tensor::to_matrix() const {
  if (dims_.size() != 1 && dims_.size() != 2) {
    throw InputError("tensor: to_matrix requires a 1-D or 2-D tensor");
  }
  const auto rows = static_cast<Eigen::Index>(dims_[0]);
  const auto cols = dims_.size() == 2 ? static_cast<Eigen::Index>(dims_[1]) : 1;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = data_[static_cast<std::size_t>(r * cols + c)];
    }
  }
  return m;
}

Eigen::VectorXd Tensor::to_vector() const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(data_.size()));
  for (std::size_t i = 0; i < data_.size(); ++i) v(static_cast<Eigen::Index>(i)) = data_[i];
  return v;
}

std::size_t encoded_size(const Tensor& t) {
  return 4 + 4 + 1 + 1 + 8 * t.ndim() + 4 * t.size();
}

void write_tensor(const Tensor& t, std::ostream& out) {
  if (t.ndim() > 255) throw InputError("tensor: more than 255 dimensions");
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kTensorVersion);
  put<std::uint8_t>(out, kDtypeFloat32);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(t.ndim()));
  for (auto d : t.dims()) put<std::uint64_t>(out, d);
  out.write(reinterpret_cast<const char*>(t.data().data()),
            static_cast<std::streamsize>(t.size() * sizeof(float)));
}

void write_tensor(const Tensor& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  write_tensor(t, out);
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

Tensor read_tensor(std::istream& in, bool check_finite) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != 4 || magic != kMagic) throw FormatError("bad magic (expected CDLT)");
  std::uint32_t version = 0;
  std::uint8_t dtype = 0;
  std::uint8_t ndim = 0;
  if (!get(in, version) || !get(in, dtype) || !get(in, ndim)) {
    throw LengthError("truncated header");
  }
  if (version != kTensorVersion) {
    throw FormatError("unsupported version " + std::to_string(version));
  }
  if (dtype != kDtypeFloat32) throw FormatError("unsupported dtype " + std::to_string(dtype));
  std::vector<std::uint64_t> dims(ndim);
  for (auto& d : dims) {
    if (!get(in, d)) throw LengthError("truncated dims");
  }
  const std::uint64_t count = element_count(dims);
  if (count > (std::uint64_t{1} << 40)) throw FormatError("implausible tensor size");
  std::vector<float> data(count);
  const auto bytes = static_cast<std::streamsize>(count * sizeof(float));
  in.read(reinterpret_cast<char*>(data.data()), bytes);
  if (in.gcount() != bytes) {
    throw LengthError("payload holds " + std::to_string(in.gcount() / 4) + " floats, dims declare " +
                      std::to_string(count));
  }
  Tensor t(std::move(dims), std::move(data));
  if (check_finite && !t.all_finite()) throw FormatError("non-finite value in payload");
  return t;
}

Tensor read_tensor(const std::filesystem::path& path, bool check_finite) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  try {
    Tensor t = read_tensor(in, check_finite);
    if (in.peek() != std::char_traits<char>::eof()) {
      throw LengthError("trailing bytes after payload");
    }
    return t;
  } catch (const LengthError& e) {
    throw LengthError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace cdl
