#include "cdl/refinement.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "cdl/errors.hpp"
#include "cdl/parallel.hpp"

namespace cdl {

void RefinementConfig::validate() const {
  if (n_centers < 1) throw InputError("refinement: n_centers must be >= 1");
  if (!(lambda_t >= 0.0)) throw InputError("refinement: lambda_t must be >= 0");
  if (block_height < 0) throw InputError("refinement: block_height must be >= 0");
  if (samples_per_block < 1) throw InputError("refinement: samples_per_block must be >= 1");
  if (nu && !(*nu > 0.0)) throw InputError("refinement: nu must be > 0");
  if (threads < 1) throw InputError("refinement: threads must be >= 1");
}

std::vector<RowRange> block_partition(Eigen::Index rows, Eigen::Index block_height) {
  if (rows < 1) throw InputError("block_partition: no rows");
  const Eigen::Index h = block_height > 0 ? block_height : std::max<Eigen::Index>(1, rows / 8);
  Eigen::Index count = std::max<Eigen::Index>(1, rows / h);
  if (block_height <= 0) count = std::min<Eigen::Index>(count, 8);
  std::vector<RowRange> out;
  for (Eigen::Index b = 0; b < count; ++b) out.push_back({b * h, b + 1 == count ? rows : (b + 1) * h});
  return out;
}

void RefinementModel::validate() const {
  if (blocks.empty()) throw InputError("refinement model: no blocks");
  Eigen::Index next = 0;
  for (const auto& b : blocks) {
    if (b.rows.begin != next || b.rows.end <= b.rows.begin) {
      throw InputError("refinement model: row blocks do not partition the rows");
    }
    next = b.rows.end;
    b.bank.validate();
    if (b.t_up.size() != b.bank.size() + 2) throw InputError("refinement model: t_up length mismatch");
    if (!b.t_up.allFinite()) throw InputError("refinement model: non-finite coefficients");
  }
  if (next != pi_rows) throw InputError("refinement model: row blocks do not cover the rows");
  if (pi_cols < 1) throw InputError("refinement model: no columns");
}

const RefinementBlock& RefinementModel::block_for_row(Eigen::Index row) const {
  for (const auto& b : blocks) {
    if (row >= b.rows.begin && row < b.rows.end) return b;
  }
  throw InputError("refinement model: row " + std::to_string(row) + " outside every block");
}

Eigen::VectorXd build_local_feature(const Eigen::VectorXd& hyper, double g_up, const CenterBank& bank) {
  Eigen::VectorXd f(bank.size() + 2);
  f(0) = 1.0;
  f(1) = g_up;
  f.tail(bank.size()) = rbf_vector(hyper, bank);
  return f;
}

LocalRidge::LocalRidge(Eigen::Index dim) : gram_(Eigen::MatrixXd::Zero(dim, dim)), rhs_(Eigen::VectorXd::Zero(dim)) {}

void LocalRidge::add(const Eigen::MatrixXd& F, const Eigen::VectorXd& y) {
  gram_.selfadjointView<Eigen::Lower>().rankUpdate(F);
  rhs_ += F * y;
  count_ += F.cols();
}

Eigen::MatrixXd LocalRidge::system(double lambda_t, bool use_global) const {
  Eigen::MatrixXd M = gram_.selfadjointView<Eigen::Lower>();
  M.diagonal().tail(M.rows() - 2).array() += lambda_t;
  if (!use_global) {
    M.row(1).setZero();
    M.col(1).setZero();
    M(1, 1) = 1.0;
  }
  return M;
}

Eigen::VectorXd LocalRidge::solve(double lambda_t, bool use_global) const {
  const Eigen::MatrixXd M = system(lambda_t, use_global);
  Eigen::VectorXd b = rhs_;
  if (!use_global) b(1) = 0.0;
  Eigen::VectorXd t = M.ldlt().solve(b);
  const double scale = 1.0 + b.norm();
  if (!t.allFinite() || (M * t - b).norm() > 1e-9 * scale) {
    t = M.completeOrthogonalDecomposition().solve(b);
  }
  for (int step = 0; step < 2 && t.allFinite(); ++step) {
    const Eigen::VectorXd r = b - M * t;
    if (r.norm() <= 1e-12 * scale) break;
    t += M.completeOrthogonalDecomposition().solve(r);
  }
  if (!t.allFinite()) throw NumericalError("refinement ridge: solve failed");
  return t;
}

Eigen::VectorXd LocalRidge::gradient(const Eigen::VectorXd& t, double lambda_t, bool use_global) const {
  Eigen::VectorXd g = 2.0 * (system(lambda_t, use_global) * t - rhs_);
  if (!use_global) g(1) = 0.0;
  return g;
}

namespace {

/// Hypercolumns (channels x count) and pixel list for rows [begin, end).
Eigen::MatrixXd block_hypercolumns(const HypercolumnField& field, RowRange rows) {
  const Eigen::Index cols = field.target_cols;
  Eigen::MatrixXd H(field.channels(), (rows.end - rows.begin) * cols);
  for (Eigen::Index r = rows.begin; r < rows.end; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) H.col((r - rows.begin) * cols + c) = hypercolumn_at(field, r, c);
  }
  return H;
}

Eigen::MatrixXd local_features(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, const CenterBank& bank) {
  Eigen::MatrixXd F(bank.size() + 2, H.cols());
  F.row(0).setOnes();
  F.row(1) = g.transpose();
  F.bottomRows(bank.size()) = rbf_matrix(H, bank);
  return F;
}

Eigen::VectorXd block_values(const DepthMap& d, RowRange rows) {
  return d.depth.middleRows(rows.begin, rows.end - rows.begin).reshaped<Eigen::RowMajor>();
}

CenterBank block_bank(const std::vector<RefinementExample>& train, const RefinementConfig& cfg,
                      RowRange rows, std::size_t index) {
  const Eigen::Index cols = train.front().hyper.target_cols;
  const Eigen::Index per_image = (rows.end - rows.begin) * cols;
  const Eigen::Index total = per_image * static_cast<Eigen::Index>(train.size());
  if (total == 0) throw InputError("refinement: block " + std::to_string(index) + " has no pixels to sample");
  const Eigen::Index take = std::min(cfg.samples_per_block, total);
  std::mt19937_64 rng(cfg.seed + 0x9E3779B97F4A7C15ULL * (index + 1));
  std::vector<Eigen::Index> pool(static_cast<std::size_t>(total));
  std::iota(pool.begin(), pool.end(), Eigen::Index{0});
  for (Eigen::Index i = 0; i < take; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, total - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
  }
  Eigen::MatrixXd points(take, train.front().hyper.channels());
  for (Eigen::Index i = 0; i < take; ++i) {
    const Eigen::Index id = pool[static_cast<std::size_t>(i)];
    const auto& ex = train[static_cast<std::size_t>(id / per_image)];
    const Eigen::Index within = id % per_image;
    points.row(i) = hypercolumn_at(ex.hyper, rows.begin + within / cols, within % cols).transpose();
  }
  const Eigen::Index k = std::min(cfg.n_centers, take);
  KMeansResult km = kmeans(points, k, cfg.seed + index, cfg.kmeans_max_iter);
  double nu = 0.0;
  if (cfg.nu) {
    nu = *cfg.nu;
  } else {
    if (k < 2) throw InputError("refinement: block " + std::to_string(index) + " has one centroid; set nu");
    nu = sigma_heuristic(km.centroids);
    if (!(nu > 0.0)) throw InputError("refinement: block " + std::to_string(index) + " centroids coincide; set nu");
  }
  for (auto& x : km.centroids.reshaped()) x = static_cast<float>(x);
  return CenterBank{std::move(km.centroids), Eigen::VectorXd::Constant(k, static_cast<float>(nu))};
}

void accumulate(LocalRidge& ridge, const std::vector<RefinementExample>& train, RowRange rows,
                const CenterBank& bank) {
  for (const auto& ex : train) {
    const Eigen::MatrixXd H = block_hypercolumns(ex.hyper, rows);
    const Eigen::MatrixXd F = local_features(H, block_values(ex.global, rows), bank);
    const Eigen::VectorXd y = block_values(ex.target, rows);
    if (!ex.target.mask) {
      ridge.add(F, y);
      continue;
    }
    const Eigen::VectorXd m = block_values(DepthMap(*ex.target.mask), rows);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index j = 0; j < m.size(); ++j) {
      if (m(j) != 0.0) keep.push_back(j);
    }
    ridge.add(F(Eigen::all, keep), y(keep));
  }
}

// Banks are already float32-exact; the coefficients are rounded last so the
// stored form is an exact copy.
RefinementModel quantized(RefinementModel model) {
  for (auto& b : model.blocks) {
    for (auto& x : b.t_up) x = static_cast<float>(x);
  }
  return model;
}

}  // namespace

RefinementModel train_refinement(const std::vector<RefinementExample>& train,
                                 const RefinementConfig& cfg, Eigen::Index pi_rows,
                                 Eigen::Index pi_cols) {
  cfg.validate();
  if (train.empty()) throw InputError("train_refinement: no training examples");
  for (const auto& ex : train) {
    ex.hyper.validate();
    if (ex.hyper.target_rows != pi_rows || ex.hyper.target_cols != pi_cols || ex.target.rows() != pi_rows ||
        ex.target.cols() != pi_cols || ex.global.rows() != pi_rows || ex.global.cols() != pi_cols) {
      throw InputError("train_refinement: example dims differ from the intermediate grid");
    }
    if (ex.hyper.channels() != train.front().hyper.channels()) {
      throw InputError("train_refinement: hypercolumn dims differ across examples");
    }
  }
  const auto ranges = block_partition(pi_rows, cfg.block_height);
  std::vector<CenterBank> banks(ranges.size());
  parallel_for(ranges.size(), cfg.threads, [&](std::size_t b) { banks[b] = block_bank(train, cfg, ranges[b], b); });

  RefinementModel model;
  model.pi_rows = pi_rows;
  model.pi_cols = pi_cols;
  if (cfg.single_model) {
    Eigen::Index n = 0;
    for (const auto& bk : banks) n += bk.size();
    CenterBank all{Eigen::MatrixXd(n, banks.front().dim()), Eigen::VectorXd(n)};
    Eigen::Index at = 0;
    for (const auto& bk : banks) {
      all.centers.middleRows(at, bk.size()) = bk.centers;
      all.sigmas.segment(at, bk.size()) = bk.sigmas;
      at += bk.size();
    }
    LocalRidge ridge(n + 2);
    for (const auto& r : ranges) accumulate(ridge, train, r, all);
    if (ridge.count() == 0) throw InputError("train_refinement: no valid target pixels");
    model.blocks.push_back({{0, pi_rows}, ridge.solve(cfg.lambda_t, cfg.use_global_feature), std::move(all)});
    return quantized(std::move(model));
  }
  model.blocks.resize(ranges.size());
  parallel_for(ranges.size(), cfg.threads, [&](std::size_t b) {
    LocalRidge ridge(banks[b].size() + 2);
    accumulate(ridge, train, ranges[b], banks[b]);
    if (ridge.count() == 0) {
      throw InputError("train_refinement: block " + std::to_string(b) + " has no valid target pixels");
    }
    model.blocks[b] = {ranges[b], ridge.solve(cfg.lambda_t, cfg.use_global_feature), std::move(banks[b])};
  });
  return quantized(std::move(model));
}

DepthMap predict_intermediate(const RefinementModel& model, const HypercolumnField& hyper,
                              const DepthMap& g_up) {
  if (hyper.target_rows != model.pi_rows || hyper.target_cols != model.pi_cols ||
      g_up.rows() != model.pi_rows || g_up.cols() != model.pi_cols) {
    throw InputError("predict_intermediate: dims do not match the model's intermediate grid");
  }
  Grid out(model.pi_rows, model.pi_cols);
  for (const auto& block : model.blocks) {
    const Eigen::MatrixXd H = block_hypercolumns(hyper, block.rows);
    const Eigen::MatrixXd F = local_features(H, block_values(g_up, block.rows), block.bank);
    const Eigen::VectorXd pred = F.transpose() * block.t_up;
    out.middleRows(block.rows.begin, block.rows.end - block.rows.begin) =
        pred.reshaped<Eigen::RowMajor>(block.rows.end - block.rows.begin, model.pi_cols);
  }
  DepthMap d(std::move(out));
  d.mask = g_up.mask;
  return d;
}

DepthMap infer_refined(const RefinementModel& model, const HypercolumnField& hyper,
                       const DepthMap& g_up, const Tensor* guide_full, Eigen::Index full_rows,
                       Eigen::Index full_cols, const ColorizationConfig& color) {
  return pipeline_upsample(predict_intermediate(model, hyper, g_up), guide_full, model.pi_rows,
                           model.pi_cols, full_rows, full_cols, color);
}

void FoldPlan::validate() const {
  if (k < 2) throw InputError("fold plan: k must be >= 2");
  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  for (const auto& [id, f] : assignment) {
    if (f < 0 || f >= k) throw InputError("fold plan: " + id + " assigned to fold " + std::to_string(f));
    ++sizes[static_cast<std::size_t>(f)];
  }
  for (int f = 0; f < k; ++f) {
    if (sizes[static_cast<std::size_t>(f)] == 0) throw InputError("fold plan: fold " + std::to_string(f) + " is empty");
  }
}

std::vector<std::string> FoldPlan::members(int fold) const {
  std::vector<std::string> out;
  for (const auto& [id, f] : assignment) {
    if (f == fold) out.push_back(id);
  }
  return out;
}

FoldPlan make_fold_plan(const std::vector<std::string>& ids, int k, std::uint64_t seed) {
  if (k < 2) throw InputError("fold plan: k must be >= 2");
  if (static_cast<std::size_t>(k) > ids.size()) {
    throw InputError("fold plan: " + std::to_string(k) + " folds for " + std::to_string(ids.size()) + " examples");
  }
  if (std::set<std::string>(ids.begin(), ids.end()).size() != ids.size()) {
    throw InputError("fold plan: duplicate ids");
  }
  std::vector<std::string> order = ids;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  for (std::size_t i = 0; i < order.size(); ++i) plan.assignment[order[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
  return plan;
}

}  // namespace cdl
