#include "cdl/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "cdl/errors.hpp"

namespace cdl {

void CenterBank::validate() const {
  if (centers.rows() < 1) throw InputError("center bank: need at least one center");
  if (sigmas.size() != centers.rows()) throw InputError("center bank: one sigma per center required");
  if (!centers.allFinite()) throw InputError("center bank: non-finite center");
  if (!(sigmas.array() > 0.0).all() || !sigmas.allFinite()) {
    throw InputError("center bank: sigmas must be finite and > 0");
  }
}

CenterBank CenterBank::with_heuristic_sigma(Eigen::MatrixXd centers) {
  CenterBank bank;
  const double sigma = sigma_heuristic(centers);
  if (!(sigma > 0.0)) throw InputError("center bank: all centers coincide, bandwidth is zero");
  bank.sigmas = Eigen::VectorXd::Constant(centers.rows(), sigma);
  bank.centers = std::move(centers);
  return bank;
}

Eigen::VectorXd rbf_vector(const Eigen::VectorXd& f, const CenterBank& bank) {
  if (f.size() != bank.dim()) {
    throw InputError("rbf_vector: feature dim " + std::to_string(f.size()) +
                     " does not match center dim " + std::to_string(bank.dim()));
  }
  Eigen::VectorXd phi(bank.size());
  for (Eigen::Index j = 0; j < bank.size(); ++j) {
    const double d2 = (bank.centers.row(j).transpose() - f).squaredNorm();
    phi(j) = std::exp(-d2 / (2.0 * bank.sigmas(j) * bank.sigmas(j)));
  }
  return phi;
}

Eigen::MatrixXd rbf_matrix(const Eigen::MatrixXd& features, const CenterBank& bank) {
  Eigen::MatrixXd Phi(bank.size(), features.cols());
  for (Eigen::Index i = 0; i < features.cols(); ++i) Phi.col(i) = rbf_vector(features.col(i), bank);
  return Phi;
}

double sigma_heuristic(const Eigen::MatrixXd& centers) {
  if (centers.rows() < 2) throw InputError("sigma_heuristic: need at least two centers");
  double best = 0.0;
  for (Eigen::Index a = 0; a < centers.rows(); ++a) {
    for (Eigen::Index b = a + 1; b < centers.rows(); ++b) {
      best = std::max(best, (centers.row(a) - centers.row(b)).squaredNorm());
    }
  }
  return 0.5 * std::sqrt(best);
}

namespace {

// Squared distances to the nearest centroid and its index (lowest index on
// ties).
double assign(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids,
              std::vector<Eigen::Index>& label, Eigen::VectorXd& dist2) {
  const Eigen::VectorXd pn = points.rowwise().squaredNorm();
  const Eigen::VectorXd cn = centroids.rowwise().squaredNorm();
  const Eigen::MatrixXd cross = points * centroids.transpose();
  double inertia = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    Eigen::Index arg = 0;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const double d = std::max(0.0, pn(i) - 2.0 * cross(i, c) + cn(c));
      if (d < best) {
        best = d;
        arg = c;
      }
    }
    label[static_cast<std::size_t>(i)] = arg;
    dist2(i) = best;
    inertia += best;
  }
  return inertia;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, Eigen::Index k, std::uint64_t seed,
                    int max_iter) {
  const Eigen::Index q = points.rows();
  if (k < 1 || q < k) throw InputError("kmeans: need q >= k >= 1");
  if (!points.allFinite()) throw InputError("kmeans: non-finite point");

  std::mt19937_64 rng(seed);
  Eigen::MatrixXd centroids(k, points.cols());
  std::vector<char> chosen(static_cast<std::size_t>(q), 0);

  // k-means++ seeding.
  std::uniform_int_distribution<Eigen::Index> pick(0, q - 1);
  Eigen::Index first = pick(rng);
  centroids.row(0) = points.row(first);
  chosen[static_cast<std::size_t>(first)] = 1;
  Eigen::VectorXd d2 = (points.rowwise() - points.row(first)).rowwise().squaredNorm();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Eigen::Index c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index next = -1;
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < q; ++i) {
        acc += d2(i);
        if (d2(i) > 0.0 && acc >= target) {
          next = i;
          break;
        }
      }
      if (next < 0) {
        for (Eigen::Index i = q - 1; i >= 0; --i) {
          if (d2(i) > 0.0) {
            next = i;
            break;
          }
        }
      }
    }
    if (next < 0) {
      for (Eigen::Index i = 0; i < q; ++i) {
        if (!chosen[static_cast<std::size_t>(i)]) {
          next = i;
          break;
        }
      }
    }
    centroids.row(c) = points.row(next);
    chosen[static_cast<std::size_t>(next)] = 1;
    d2 = d2.cwiseMin((points.rowwise() - points.row(next)).rowwise().squaredNorm());
  }

  KMeansResult out;
  std::vector<Eigen::Index> label(static_cast<std::size_t>(q), -1);
  std::vector<Eigen::Index> previous;
  Eigen::VectorXd dist2(q);
  for (int it = 0; it < std::max(1, max_iter); ++it) {
    out.inertia_trace.push_back(assign(points, centroids, label, dist2));
    out.iterations = it + 1;
    if (label == previous) break;
    previous = label;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < q; ++i) {
      sums.row(label[static_cast<std::size_t>(i)]) += points.row(i);
      counts(label[static_cast<std::size_t>(i)]) += 1.0;
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts(c) > 0.0) {
        centroids.row(c) = sums.row(c) / counts(c);
        continue;
      }
      // Empty cluster: re-seed at the point farthest from its centroid.
      Eigen::Index far = 0;
      dist2.maxCoeff(&far);
      centroids.row(c) = points.row(far);
      dist2(far) = 0.0;
    }
  }
  out.centroids = std::move(centroids);
  return out;
}

Eigen::Index HypercolumnField::channels() const {
  Eigen::Index total = 0;
  for (const auto& l : layers) total += static_cast<Eigen::Index>(l.dims().back());
  return total;
}

void HypercolumnField::validate() const {
  if (layers.empty()) throw InputError("hypercolumn: no layers");
  if (target_rows < 1 || target_cols < 1) throw InputError("hypercolumn: empty target grid");
  for (const auto& l : layers) {
    if (l.ndim() != 3 || l.dims()[0] < 1 || l.dims()[1] < 1 || l.dims()[2] < 1) {
      throw InputError("hypercolumn: layers must be tensors [h, w, channels]");
    }
  }
}

double source_coordinate(Eigen::Index i, Eigen::Index target_size, Eigen::Index source_size) {
  const double s = (static_cast<double>(i) + 0.5) * static_cast<double>(source_size) /
                       static_cast<double>(target_size) -
                   0.5;
  return std::clamp(s, 0.0, static_cast<double>(source_size - 1));
}

Eigen::VectorXd hypercolumn_at(const HypercolumnField& field, Eigen::Index row, Eigen::Index col) {
  if (row < 0 || row >= field.target_rows || col < 0 || col >= field.target_cols) {
    throw InputError("hypercolumn_at: location (" + std::to_string(row) + ", " +
                     std::to_string(col) + ") outside target grid");
  }
  Eigen::VectorXd out(field.channels());
  Eigen::Index offset = 0;
  for (const auto& layer : field.layers) {
    const auto h = static_cast<Eigen::Index>(layer.dims()[0]);
    const auto w = static_cast<Eigen::Index>(layer.dims()[1]);
    const auto ch = static_cast<Eigen::Index>(layer.dims()[2]);
    const double sr = source_coordinate(row, field.target_rows, h);
    const double sc = source_coordinate(col, field.target_cols, w);
    const auto r0 = static_cast<Eigen::Index>(std::floor(sr));
    const auto c0 = static_cast<Eigen::Index>(std::floor(sc));
    const Eigen::Index r1 = std::min(r0 + 1, h - 1);
    const Eigen::Index c1 = std::min(c0 + 1, w - 1);
    const double fr = sr - static_cast<double>(r0);
    const double fc = sc - static_cast<double>(c0);
    const auto data = layer.data();
    auto at = [&](Eigen::Index r, Eigen::Index c, Eigen::Index k) {
      return static_cast<double>(data[static_cast<std::size_t>((r * w + c) * ch + k)]);
    };
    for (Eigen::Index k = 0; k < ch; ++k) {
      const double top = (1.0 - fc) * at(r0, c0, k) + fc * at(r0, c1, k);
      const double bottom = (1.0 - fc) * at(r1, c0, k) + fc * at(r1, c1, k);
      out(offset + k) = (1.0 - fr) * top + fr * bottom;
    }
    offset += ch;
  }
  return out;
}

}  // namespace cdl
