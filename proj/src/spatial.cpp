#include "cdl/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "cdl/errors.hpp"
#include "cdl/kernel.hpp"

namespace cdl {

void ColorizationConfig::validate() const {
  if (!(seed_penalty > 0.0) || !std::isfinite(seed_penalty)) {
    throw InputError("colorization: seed_penalty must be finite and > 0");
  }
  if (neighborhood < 1) throw InputError("colorization: neighborhood must be >= 1");
  if (!(variance_floor > 0.0)) throw InputError("colorization: variance_floor must be > 0");
}

namespace {

struct Taps {
  Eigen::Index lo, hi;
  double frac;
};

std::vector<Taps> taps(Eigen::Index target, Eigen::Index source) {
  std::vector<Taps> out(static_cast<std::size_t>(target));
  for (Eigen::Index i = 0; i < target; ++i) {
    const double s = source_coordinate(i, target, source);
    const auto lo = static_cast<Eigen::Index>(std::floor(s));
    out[static_cast<std::size_t>(i)] = {lo, std::min(lo + 1, source - 1), s - static_cast<double>(lo)};
  }
  return out;
}

}  // namespace

Grid resize_bilinear(const Grid& src, Eigen::Index rows, Eigen::Index cols) {
  if (rows < 1 || cols < 1) throw InputError("resize_bilinear: target size must be >= 1");
  if (src.size() == 0) throw InputError("resize_bilinear: empty source");
  if (src.rows() == rows && src.cols() == cols) return src;
  const auto tr = taps(rows, src.rows());
  const auto tc = taps(cols, src.cols());
  Grid out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& a = tr[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& b = tc[static_cast<std::size_t>(c)];
      const double top = (1.0 - b.frac) * src(a.lo, b.lo) + b.frac * src(a.lo, b.hi);
      const double bottom = (1.0 - b.frac) * src(a.hi, b.lo) + b.frac * src(a.hi, b.hi);
      out(r, c) = (1.0 - a.frac) * top + a.frac * bottom;
    }
  }
  return out;
}

DepthMap resize_bilinear(const DepthMap& src, Eigen::Index rows, Eigen::Index cols) {
  if (src.rows() == rows && src.cols() == cols) return src;
  DepthMap out(resize_bilinear(src.depth, rows, cols));
  if (src.mask) {
    // A resized pixel is valid only where every contributing tap is valid.
    Grid m = resize_bilinear(*src.mask, rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = m.data()[i] >= 1.0 - 1e-12 ? 1.0 : 0.0;
    out.mask = std::move(m);
  }
  return out;
}

Tensor resize_image(const Tensor& image, Eigen::Index rows, Eigen::Index cols) {
  if (image.ndim() != 3) throw InputError("resize_image: expected [rows, cols, channels]");
  const auto h = static_cast<Eigen::Index>(image.dims()[0]);
  const auto w = static_cast<Eigen::Index>(image.dims()[1]);
  const auto ch = static_cast<Eigen::Index>(image.dims()[2]);
  if (h == rows && w == cols) return image;
  Tensor out({static_cast<std::uint64_t>(rows), static_cast<std::uint64_t>(cols),
              static_cast<std::uint64_t>(ch)});
  const auto in = image.data();
  auto dst = out.data();
  for (Eigen::Index k = 0; k < ch; ++k) {
    Grid plane(h, w);
    for (Eigen::Index r = 0; r < h; ++r) {
      for (Eigen::Index c = 0; c < w; ++c) plane(r, c) = in[static_cast<std::size_t>((r * w + c) * ch + k)];
    }
    const Grid resized = resize_bilinear(plane, rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        dst[static_cast<std::size_t>((r * cols + c) * ch + k)] = static_cast<float>(resized(r, c));
      }
    }
  }
  return out;
}

Eigen::SparseMatrix<double, Eigen::RowMajor> colorization_affinities(const Tensor& guide,
                                                                     const ColorizationConfig& cfg) {
  if (guide.ndim() != 3 || guide.dims()[2] != 3) {
    throw InputError("colorization: guide must be [rows, cols, 3]");
  }
  const auto rows = static_cast<Eigen::Index>(guide.dims()[0]);
  const auto cols = static_cast<Eigen::Index>(guide.dims()[1]);
  const auto data = guide.data();
  auto color = [&](Eigen::Index r, Eigen::Index c) {
    const auto base = static_cast<std::size_t>((r * cols + c) * 3);
    return Eigen::Vector3d(data[base], data[base + 1], data[base + 2]);
  };
  const int rad = cfg.neighborhood;
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(rows * cols * (2 * rad + 1) * (2 * rad + 1)));

  std::vector<std::pair<Eigen::Index, double>> row_weights;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const Eigen::Index r0 = std::max<Eigen::Index>(0, r - rad);
      const Eigen::Index r1 = std::min<Eigen::Index>(rows - 1, r + rad);
      const Eigen::Index c0 = std::max<Eigen::Index>(0, c - rad);
      const Eigen::Index c1 = std::min<Eigen::Index>(cols - 1, c + rad);
      const double count = static_cast<double>((r1 - r0 + 1) * (c1 - c0 + 1));
      Eigen::Vector3d mu = Eigen::Vector3d::Zero();
      for (Eigen::Index y = r0; y <= r1; ++y) {
        for (Eigen::Index x = c0; x <= c1; ++x) mu += color(y, x);
      }
      mu /= count;
      Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
      for (Eigen::Index y = r0; y <= r1; ++y) {
        for (Eigen::Index x = c0; x <= c1; ++x) {
          const Eigen::Vector3d d = color(y, x) - mu;
          cov += d * d.transpose();
        }
      }
      cov /= count;
      cov.diagonal().array() += cfg.variance_floor;
      const Eigen::Matrix3d inv = cov.inverse();
      const Eigen::Vector3d zp = inv * (color(r, c) - mu);

      row_weights.clear();
      double total = 0.0;
      for (Eigen::Index y = r0; y <= r1; ++y) {
        for (Eigen::Index x = c0; x <= c1; ++x) {
          if (y == r && x == c) continue;
          const double w = std::max(0.0, 1.0 + zp.dot(color(y, x) - mu));
          row_weights.emplace_back(y * cols + x, w);
          total += w;
        }
      }
      const Eigen::Index p = r * cols + c;
      for (const auto& [q, w] : row_weights) {
        const double a = total > 0.0 ? w / total : 1.0 / static_cast<double>(row_weights.size());
        if (a != 0.0) triplets.emplace_back(p, q, a);
      }
    }
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> A(rows * cols, rows * cols);
  A.setFromTriplets(triplets.begin(), triplets.end());
  return A;
}

DepthMap colorize_smooth(const DepthMap& seed, const Tensor& guide, const ColorizationConfig& cfg) {
  cfg.validate();
  if (guide.ndim() != 3 || static_cast<Eigen::Index>(guide.dims()[0]) != seed.rows() ||
      static_cast<Eigen::Index>(guide.dims()[1]) != seed.cols()) {
    throw InputError("colorize_smooth: guide dims do not match the depth map");
  }
  if (cfg.seed_penalty == 0.0) {
    throw NumericalError(
        "colorize_smooth: system is singular without seed fidelity; use seed_penalty > 0");
  }
  const Eigen::Index n = seed.rows() * seed.cols();
  // Row p:  (1 + s) u_p - sum_q a_pq u_q = s seed_p.  With nonnegative,
  // row-stochastic affinities the matrix is a strictly diagonally dominant
  // M-matrix, so u is a convex combination of seed values.
  Eigen::SparseMatrix<double> M(n, n);
  M.setIdentity();
  M *= 1.0 + cfg.seed_penalty;
  M -= Eigen::SparseMatrix<double>(colorization_affinities(guide, cfg));
  M.makeCompressed();

  const Eigen::VectorXd rhs = cfg.seed_penalty * seed.vectorized();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> solver;
  solver.analyzePattern(M);
  solver.factorize(M);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("colorize_smooth: factorization failed; use seed_penalty > 0");
  }
  Eigen::VectorXd u = solver.solve(rhs);
  const double rhs_inf = rhs.cwiseAbs().maxCoeff();
  for (int refine = 0; refine < 3; ++refine) {
    const Eigen::VectorXd res = rhs - M * u;
    if (res.cwiseAbs().maxCoeff() <= 1e-6 * rhs_inf) break;
    u += solver.solve(res);
  }
  if (!u.allFinite() || (rhs - M * u).cwiseAbs().maxCoeff() > 1e-6 * std::max(rhs_inf, 1e-300)) {
    throw NumericalError("colorize_smooth: solve did not meet the residual bound");
  }
  DepthMap out = DepthMap::from_vector(u, seed.rows(), seed.cols());
  out.mask = seed.mask;
  return out;
}

DepthMap upsample_to_intermediate(const DepthMap& coarse, const Tensor* guide_full,
                                  Eigen::Index pi_rows, Eigen::Index pi_cols,
                                  const ColorizationConfig& cfg) {
  DepthMap resized = resize_bilinear(coarse, pi_rows, pi_cols);
  if (!guide_full) return resized;
  return colorize_smooth(resized, resize_image(*guide_full, pi_rows, pi_cols), cfg);
}

DepthMap upsample_to_full(const DepthMap& intermediate, const Tensor* guide_full,
                          Eigen::Index full_rows, Eigen::Index full_cols,
                          const ColorizationConfig& cfg) {
  return upsample_to_intermediate(intermediate, guide_full, full_rows, full_cols, cfg);
}

DepthMap pipeline_upsample(const DepthMap& coarse, const Tensor* guide_full, Eigen::Index pi_rows,
                           Eigen::Index pi_cols, Eigen::Index full_rows, Eigen::Index full_cols,
                           const ColorizationConfig& cfg) {
  return upsample_to_full(upsample_to_intermediate(coarse, guide_full, pi_rows, pi_cols, cfg),
                          guide_full, full_rows, full_cols, cfg);
}

}  // namespace cdl
