#include "cdl/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cdl/coupled_model.hpp"
#include "cdl/errors.hpp"
#include "cdl/spatial.hpp"

namespace cdl {

void SynthSpec::validate() const {
  auto need = [](bool ok, const char* field, const std::string& why) {
    if (!ok) throw InputError(std::string("synth spec: ") + field + " " + why);
  };
  need(n_train >= 1, "n_train", "must be >= 1");
  need(n_test >= 0, "n_test", "must be >= 0");
  need(p_low >= 1, "p_low", "must be >= 1");
  need(m_true >= 1, "m_true", "must be >= 1");
  need(m_true <= p_low, "m_true", "must be <= p_low");
  need(sparsity >= 1, "sparsity", "must be >= 1");
  need(sparsity <= m_true, "sparsity", "must be <= m_true");
  need(feat_dim >= 1, "feat_dim", "must be >= 1");
  need(noise_sigma >= 0.0 && std::isfinite(noise_sigma), "noise_sigma", "must be finite and >= 0");
  need(n_prototypes >= 2, "n_prototypes", "must be >= 2");
  need(n_centers >= 2, "n_centers", "must be >= 2");
  need(spread > 0.0, "spread", "must be > 0");
  need(crop_noise >= 0.0, "crop_noise", "must be >= 0");
  need(amplitude > 0.0, "amplitude", "must be > 0");
  need(local_amplitude >= 0.0, "local_amplitude", "must be >= 0");
  need(pi_factor >= 1, "pi_factor", "must be >= 1");
  need(full_factor >= pi_factor, "full_factor", "must be >= pi_factor");
  need(hyper_channels >= 1, "hyper_channels", "must be >= 1");
}

std::pair<Eigen::Index, Eigen::Index> SynthSpec::coarse_shape() const {
  Eigen::Index best_r = 1;
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index r = 1; r <= p_low; ++r) {
    if (p_low % r != 0) continue;
    const double score = std::abs(std::log(static_cast<double>(r) / static_cast<double>(p_low / r)) -
                                  std::log(0.75));
    if (score < best - 1e-12) {
      best = score;
      best_r = r;
    }
  }
  return {best_r, p_low / best_r};
}

namespace {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  double normal() { return normal_(eng_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  Eigen::Index index(Eigen::Index n) {
    return std::uniform_int_distribution<Eigen::Index>(0, n - 1)(eng_);
  }
  Eigen::MatrixXd normal(Eigen::Index r, Eigen::Index c) {
    Eigen::MatrixXd out(r, c);
    for (Eigen::Index j = 0; j < c; ++j) {
      for (Eigen::Index i = 0; i < r; ++i) out(i, j) = normal();
    }
    return out;
  }
  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
  std::normal_distribution<double> normal_;
};

/// Random low-frequency field: a Gaussian combination of separable cosines
/// with frequencies below `freq`, scaled to unit standard deviation.
Grid smooth_field(Rng& rng, Eigen::Index rows, Eigen::Index cols, int freq) {
  Grid g = Grid::Zero(rows, cols);
  for (int a = 0; a < freq; ++a) {
    for (int b = 0; b < freq; ++b) {
      if (a == 0 && b == 0) continue;
      const double coef = rng.normal() / (1.0 + a + b);
      for (Eigen::Index r = 0; r < rows; ++r) {
        const double cr = std::cos(M_PI * a * (r + 0.5) / static_cast<double>(rows));
        for (Eigen::Index c = 0; c < cols; ++c) {
          g(r, c) += coef * cr * std::cos(M_PI * b * (c + 0.5) / static_cast<double>(cols));
        }
      }
    }
  }
  const double mean = g.mean();
  g.array() -= mean;
  const double sd = std::sqrt(g.squaredNorm() / static_cast<double>(g.size()));
  if (sd > 0.0) g /= sd;
  return g;
}

Eigen::MatrixXd signed_basis(Rng& rng, const SynthSpec& spec, Eigen::Index rows, Eigen::Index cols) {
  const Eigen::Index half = (spec.m_true + 1) / 2;
  Eigen::MatrixXd raw(spec.p_low, half);
  const int freq = std::max(4, static_cast<int>(std::ceil(std::sqrt(2.0 * static_cast<double>(half)))) + 1);
  const bool smooth = freq <= std::min(rows, cols);
  for (Eigen::Index j = 0; j < half; ++j) {
    if (smooth) {
      raw.col(j) = smooth_field(rng, rows, cols, freq).reshaped<Eigen::RowMajor>();
    } else {
      for (Eigen::Index i = 0; i < spec.p_low; ++i) raw(i, j) = rng.normal();
    }
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
  const Eigen::MatrixXd U = qr.householderQ() * Eigen::MatrixXd::Identity(spec.p_low, half);
  Eigen::MatrixXd B(spec.p_low, spec.m_true);
  for (Eigen::Index j = 0; j < spec.m_true; ++j) {
    B.col(j) = j < half ? Eigen::VectorXd(U.col(j)) : Eigen::VectorXd(-U.col(j - half));
    B.col(j).normalize();
  }
  return B;
}

struct Draw {
  Eigen::VectorXd x;
  Eigen::VectorXd w;
};

Draw draw_latent(Rng& rng, const SynthSpec& spec, const GroundTruthBundle& truth) {
  const Eigen::Index k = rng.index(spec.n_prototypes);
  Draw d;
  d.x = truth.prototypes.row(k).transpose() + spec.spread * rng.normal(spec.feat_dim, 1);
  CenterBank hidden{truth.prototypes, Eigen::VectorXd::Constant(spec.n_prototypes, truth.sigma)};
  d.w = truth.T * rbf_vector(d.x, hidden);
  return d;
}

std::map<std::string, Eigen::VectorXd> crop_views(Rng& rng, const SynthSpec& spec, const Eigen::VectorXd& x) {
  std::map<std::string, Eigen::VectorXd> out;
  for (const auto& crop : kCropNames) {
    out[crop] = x + spec.crop_noise * rng.normal(spec.feat_dim, 1);
  }
  return out;
}

Tensor image_tensor(const std::vector<Grid>& channels) {
  const auto rows = channels.front().rows();
  const auto cols = channels.front().cols();
  const auto ch = static_cast<Eigen::Index>(channels.size());
  Tensor t({static_cast<std::uint64_t>(rows), static_cast<std::uint64_t>(cols), static_cast<std::uint64_t>(ch)});
  auto data = t.data();
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      for (Eigen::Index k = 0; k < ch; ++k) {
        data[static_cast<std::size_t>((r * cols + c) * ch + k)] =
            static_cast<float>(channels[static_cast<std::size_t>(k)](r, c));
      }
    }
  }
  return t;
}

Eigen::Index block_of_row(Eigen::Index pi_row, Eigen::Index pi_rows) {
  const Eigen::Index height = std::max<Eigen::Index>(1, pi_rows / 8);
  const Eigen::Index blocks = std::clamp<Eigen::Index>(pi_rows / height, 1, 8);
  return std::min(pi_row / height, blocks - 1);
}

}  // namespace

SyntheticData generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  SyntheticData out;
  auto& truth = out.truth;
  std::tie(truth.coarse_rows, truth.coarse_cols) = spec.coarse_shape();
  truth.pi_rows = truth.coarse_rows * spec.pi_factor;
  truth.pi_cols = truth.coarse_cols * spec.pi_factor;
  truth.full_rows = truth.coarse_rows * spec.full_factor;
  truth.full_cols = truth.coarse_cols * spec.full_factor;

  truth.B = signed_basis(rng, spec, truth.coarse_rows, truth.coarse_cols);
  truth.prototypes = rng.normal(spec.n_prototypes, spec.feat_dim);
  // Descriptors sit about spread * sqrt(feat_dim) from their prototype; the
  // hidden bandwidth is matched to that radius so phi* is near one-hot.
  truth.sigma = spec.spread * std::sqrt(static_cast<double>(spec.feat_dim));
  truth.T = Eigen::MatrixXd::Zero(spec.m_true, spec.n_prototypes);
  std::vector<Eigen::Index> atoms(static_cast<std::size_t>(spec.m_true));
  for (Eigen::Index k = 0; k < spec.n_prototypes; ++k) {
    std::iota(atoms.begin(), atoms.end(), 0);
    std::shuffle(atoms.begin(), atoms.end(), rng.engine());
    for (Eigen::Index s = 0; s < spec.sparsity; ++s) {
      truth.T(atoms[static_cast<std::size_t>(s)], k) = spec.amplitude * rng.uniform(0.5, 1.5);
    }
  }
  truth.block_amplitude.resize(8);
  for (Eigen::Index b = 0; b < 8; ++b) {
    truth.block_amplitude(b) = spec.local_amplitude * (b % 2 == 0 ? 1.0 : -1.0) * (0.5 + 0.125 * static_cast<double>(b));
  }

  Grid base_grid(truth.coarse_rows, truth.coarse_cols);
  for (Eigen::Index r = 0; r < truth.coarse_rows; ++r) {
    base_grid.row(r).setConstant(3.0 + 1.5 * static_cast<double>(r) / static_cast<double>(std::max<Eigen::Index>(1, truth.coarse_rows - 1)));
  }
  truth.base = base_grid.reshaped<Eigen::RowMajor>();

  struct Pending {
    Example ex;
    Eigen::VectorXd clean;  // coarse, without base
    Eigen::VectorXd noisy;
    Grid local_pi;
    Eigen::VectorXd w;
  };
  auto make = [&](const std::string& id, bool with_depth) {
    Pending p;
    p.ex.id = id;
    const Draw d = draw_latent(rng, spec, truth);
    p.w = d.w;
    p.ex.features = crop_views(rng, spec, d.x);
    p.ex.mirrored = crop_views(rng, spec, d.x);
    if (!with_depth) return p;
    p.clean = truth.B * d.w;
    p.noisy = p.clean;
    for (Eigen::Index i = 0; i < p.noisy.size(); ++i) p.noisy(i) += spec.noise_sigma * rng.normal();
    p.local_pi = smooth_field(rng, truth.pi_rows, truth.pi_cols, 7);
    std::vector<Grid> layers;
    for (int l = 0; l < 3; ++l) {
      const Eigen::Index h = std::max<Eigen::Index>(1, truth.pi_rows >> l);
      const Eigen::Index w = std::max<Eigen::Index>(1, truth.pi_cols >> l);
      std::vector<Grid> channels;
      channels.push_back(resize_bilinear(p.local_pi, h, w));
      for (Eigen::Index c = 1; c < spec.hyper_channels; ++c) channels.push_back(smooth_field(rng, h, w, 5));
      for (auto& ch : channels) {
        for (Eigen::Index i = 0; i < ch.size(); ++i) ch.data()[i] += 0.05 * rng.normal();
      }
      p.ex.conv_layers.push_back(image_tensor(channels));
    }
    return p;
  };

  std::vector<Pending> train, test, centers;
  for (Eigen::Index i = 0; i < spec.n_train; ++i) train.push_back(make("train" + std::to_string(10000 + i).substr(1), true));
  for (Eigen::Index i = 0; i < spec.n_test; ++i) test.push_back(make("test" + std::to_string(10000 + i).substr(1), true));
  for (Eigen::Index i = 0; i < spec.n_centers; ++i) centers.push_back(make("ctr" + std::to_string(10000 + i).substr(1), false));

  // Full-resolution depth: upsampled coarse depth plus block-dependent local
  // structure. The base level is lifted if needed so every depth is >= 0.5.
  auto full_depth = [&](const Pending& p, double lift) {
    Grid coarse = DepthMap::from_vector(p.noisy + truth.base, truth.coarse_rows, truth.coarse_cols).depth;
    coarse.array() += lift;
    Grid full = resize_bilinear(coarse, truth.full_rows, truth.full_cols);
    const Grid local = resize_bilinear(p.local_pi, truth.full_rows, truth.full_cols);
    for (Eigen::Index r = 0; r < truth.full_rows; ++r) {
      const auto pi_row = static_cast<Eigen::Index>(std::floor((static_cast<double>(r) + 0.5) * static_cast<double>(truth.pi_rows) / static_cast<double>(truth.full_rows)));
      full.row(r) += truth.block_amplitude(block_of_row(pi_row, truth.pi_rows)) * local.row(r);
    }
    return full;
  };
  double lowest = std::numeric_limits<double>::infinity();
  for (const auto* set : {&train, &test}) {
    for (const auto& p : *set) {
      lowest = std::min(lowest, full_depth(p, 0.0).minCoeff());
      lowest = std::min(lowest, (p.clean + truth.base).minCoeff());
    }
  }
  const double lift = lowest < 0.5 ? 0.5 - lowest : 0.0;
  truth.base.array() += lift;

  auto finish = [&](std::vector<Pending>& set, std::vector<Example>& dst, Eigen::MatrixXd& W, Eigen::MatrixXd& C) {
    W.resize(spec.m_true, static_cast<Eigen::Index>(set.size()));
    C.resize(spec.p_low, static_cast<Eigen::Index>(set.size()));
    for (std::size_t i = 0; i < set.size(); ++i) {
      auto& p = set[i];
      W.col(static_cast<Eigen::Index>(i)) = p.w;
      C.col(static_cast<Eigen::Index>(i)) = p.clean + truth.base;
      const Grid full = full_depth(p, 0.0);
      p.ex.depth = DepthMap(full);
      const double lo = full.minCoeff();
      const double span = std::max(full.maxCoeff() - lo, 1e-9);
      const Grid n = (full.array() - lo) / span;
      const Grid local = resize_bilinear(p.local_pi, truth.full_rows, truth.full_cols);
      Grid blue = (0.5 + 0.25 * local.array().tanh()).matrix();
      p.ex.guide = image_tensor({n, Grid((1.0 - n.array()).matrix()), blue});
      dst.push_back(std::move(p.ex));
    }
  };
  out.dataset.crop_names = kCropNames;
  out.dataset.layer_names = {"l0", "l1", "l2"};
  finish(train, out.dataset.train, truth.W_train, truth.coarse_train);
  finish(test, out.dataset.test, truth.W_test, truth.coarse_test);
  for (auto& p : centers) out.dataset.centers.push_back(std::move(p.ex));
  return out;
}

}  // namespace cdl
