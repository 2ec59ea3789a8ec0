#include "cdl/coupled_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "cdl/errors.hpp"
#include "cdl/spatial.hpp"

namespace cdl {

void TrainConfig::validate() const {
  if (m < 1) throw InputError("train config: m must be >= 1");
  if (lambda_w && !(*lambda_w >= 0.0)) throw InputError("train config: lambda_w must be >= 0");
  if (!(lambda_r >= 0.0)) throw InputError("train config: lambda_r must be >= 0");
  if (!(lambda_T >= 0.0)) throw InputError("train config: lambda_T must be >= 0");
  if (max_outer < 0 || max_init < 1) throw InputError("train config: iteration caps out of range");
  if (!(rel_tol > 0.0)) throw InputError("train config: rel_tol must be > 0");
  if (!(lasso_tol > 0.0)) throw InputError("train config: lasso_tol must be > 0");
}

Regularization TrainConfig::resolve(const Eigen::MatrixXd& D) const {
  Regularization reg;
  reg.lambda_r = lambda_r;
  reg.lambda_T = lambda_T;
  if (lambda_w) {
    reg.lambda_w = *lambda_w;
  } else {
    const double mean_norm = D.cols() > 0 ? D.colwise().norm().mean() : 0.0;
    reg.lambda_w = 0.1 * mean_norm / static_cast<double>(m);
  }
  return reg;
}

LassoConfig TrainConfig::lasso(double lambda) const {
  LassoConfig cfg;
  cfg.lambda_w = lambda;
  cfg.tol = lasso_tol;
  cfg.max_iter = lasso_max_iter;
  return cfg;
}

void GlobalModel::validate() const {
  dictionary.validate();
  bank.validate();
  if (dictionary.dim() != coarse_rows * coarse_cols) {
    throw InputError("global model: dictionary length does not match the coarse grid");
  }
  if (regressor.T.rows() != dictionary.atoms() || regressor.T.cols() != bank.size()) {
    throw InputError("global model: regressor shape does not match dictionary and centers");
  }
  if (mean_depth.rows() != coarse_rows || mean_depth.cols() != coarse_cols) {
    throw InputError("global model: mean depth map has the wrong size");
  }
  if (!regressor.T.allFinite()) throw InputError("global model: non-finite regressor");
}

double objective_J(const Dictionary& B, const Eigen::MatrixXd& W, const GlobalRegressor& T,
                   const Eigen::MatrixXd& D, const Eigen::MatrixXd& Phi, const Regularization& reg) {
  if (B.dim() != D.rows() || B.atoms() != W.rows() || W.cols() != D.cols() ||
      T.T.rows() != W.rows() || T.T.cols() != Phi.rows() || Phi.cols() != D.cols()) {
    throw InputError("objective_J: shape mismatch");
  }
  return (D - B.B * W).squaredNorm() + reg.lambda_w * W.cwiseAbs().sum() +
         reg.lambda_r * (W - T.T * Phi).squaredNorm() + reg.lambda_T * T.T.squaredNorm();
}

Eigen::MatrixXd ridge_gradient(const GlobalRegressor& T, const Eigen::MatrixXd& W,
                               const Eigen::MatrixXd& Phi, double lambda_r, double lambda_T) {
  return 2.0 * lambda_r * (T.T * Phi - W) * Phi.transpose() + 2.0 * lambda_T * T.T;
}

GlobalRegressor solve_T(const Eigen::MatrixXd& W, const Eigen::MatrixXd& Phi, double lambda_r,
                        double lambda_T) {
  if (W.cols() != Phi.cols()) throw InputError("solve_T: W and Phi must have equal columns");
  if (W.cols() < 1) throw InputError("solve_T: need at least one example");
  if (!(lambda_r >= 0.0) || !(lambda_T >= 0.0)) throw InputError("solve_T: lambdas must be >= 0");
  const Eigen::Index n = Phi.rows();
  GlobalRegressor out;
  if (lambda_r == 0.0) {
    if (lambda_T == 0.0) throw NumericalError("solve_T: objective is identically zero; use lambda_T > 0");
    out.T = Eigen::MatrixXd::Zero(W.rows(), n);
    return out;
  }
  Eigen::MatrixXd K = lambda_r * (Phi * Phi.transpose());
  K.diagonal().array() += lambda_T;
  const Eigen::MatrixXd rhs = lambda_r * (Phi * W.transpose());  // n x m
  Eigen::LDLT<Eigen::MatrixXd> ldlt(K);
  if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-15 ||
      (lambda_T == 0.0 && !ldlt.isPositive())) {
    throw NumericalError("solve_T: singular system; use lambda_T > 0");
  }
  Eigen::MatrixXd Tt = ldlt.solve(rhs);
  Tt += ldlt.solve(rhs - K * Tt);
  if (!Tt.allFinite()) throw NumericalError("solve_T: non-finite solution; use lambda_T > 0");
  out.T = Tt.transpose();
  return out;
}

Eigen::MatrixXd step1_weights(const Dictionary& B, const GlobalRegressor& T,
                              const Eigen::MatrixXd& Phi, const Eigen::MatrixXd& D,
                              const Regularization& reg, const LassoConfig& lasso) {
  if (B.dim() != D.rows() || T.T.rows() != B.atoms() || T.T.cols() != Phi.rows() ||
      Phi.cols() != D.cols()) {
    throw InputError("step1_weights: shape mismatch");
  }
  // Gram form of the stacked system: C^T C = B^T B + lambda_r I and
  // C^T a_i = B^T d_i + lambda_r T phi_i.
  Eigen::MatrixXd gram = B.B.transpose() * B.B;
  gram.diagonal().array() += reg.lambda_r;
  const NnLassoSolver solver = NnLassoSolver::from_gram(std::move(gram));
  Eigen::MatrixXd corr = B.B.transpose() * D;
  if (reg.lambda_r > 0.0) corr += reg.lambda_r * (T.T * Phi);
  LassoConfig cfg = lasso;
  cfg.lambda_w = reg.lambda_w;
  Eigen::MatrixXd W(B.atoms(), D.cols());
  for (Eigen::Index i = 0; i < D.cols(); ++i) W.col(i) = solver.solve_correlation(corr.col(i), cfg).w;
  return W;
}

CoarseTargets coarse_targets(const std::vector<DepthMap>& depths, Eigen::Index coarse_rows,
                             Eigen::Index coarse_cols) {
  if (depths.empty()) throw InputError("coarse_targets: no depth maps");
  CoarseTargets out;
  out.D.resize(coarse_rows * coarse_cols, static_cast<Eigen::Index>(depths.size()));
  for (std::size_t i = 0; i < depths.size(); ++i) {
    out.D.col(static_cast<Eigen::Index>(i)) =
        resize_bilinear(depths[i].depth, coarse_rows, coarse_cols).reshaped<Eigen::RowMajor>();
  }
  out.mean = out.D.rowwise().mean();
  out.D.colwise() -= out.mean;
  return out;
}

namespace {

// Per-example objective of the weight step.
Eigen::VectorXd weight_step_cost(const Dictionary& B, const Eigen::MatrixXd& W,
                                 const Eigen::MatrixXd& TPhi, const Eigen::MatrixXd& D,
                                 const Regularization& reg) {
  Eigen::VectorXd cost = (D - B.B * W).colwise().squaredNorm().transpose();
  cost += reg.lambda_w * W.cwiseAbs().colwise().sum().transpose();
  if (reg.lambda_r > 0.0) cost += reg.lambda_r * (W - TPhi).colwise().squaredNorm().transpose();
  return cost;
}

// Weight step keeping, per example, whichever of the old and new weights has
// the lower cost.
void guarded_weight_step(const Dictionary& B, const GlobalRegressor& T, const Eigen::MatrixXd& Phi,
                         const Eigen::MatrixXd& D, const Regularization& reg,
                         const LassoConfig& lasso, Eigen::MatrixXd& W) {
  const Eigen::MatrixXd fresh = step1_weights(B, T, Phi, D, reg, lasso);
  const Eigen::MatrixXd TPhi = T.T * Phi;
  const Eigen::VectorXd before = weight_step_cost(B, W, TPhi, D, reg);
  const Eigen::VectorXd after = weight_step_cost(B, fresh, TPhi, D, reg);
  for (Eigen::Index i = 0; i < W.cols(); ++i) {
    if (after(i) <= before(i)) W.col(i) = fresh.col(i);
  }
}

void guarded_dictionary_step(const Eigen::MatrixXd& D, const Eigen::MatrixXd& W, Dictionary& B) {
  if ((W.array() == 0.0).all()) return;
  Dictionary next = update_dictionary(D, W, &B).dictionary;
  if (reconstruction_objective(D, next.B, W) <= reconstruction_objective(D, B.B, W)) {
    B = std::move(next);
  }
  B = unused_atom_policy(B, W, D);
}

void guarded_ridge_step(const Eigen::MatrixXd& W, const Eigen::MatrixXd& Phi,
                        const Regularization& reg, GlobalRegressor& T) {
  GlobalRegressor next = solve_T(W, Phi, reg.lambda_r, reg.lambda_T);
  auto cost = [&](const GlobalRegressor& t) {
    return reg.lambda_r * (W - t.T * Phi).squaredNorm() + reg.lambda_T * t.T.squaredNorm();
  };
  if (T.T.size() == 0 || cost(next) <= cost(T)) T = std::move(next);
}

bool converged(double previous, double current, double rel_tol) {
  const double scale = std::max(std::abs(previous), std::numeric_limits<double>::min());
  return std::abs(previous - current) / scale < rel_tol;
}

float toward_zero(double x) {
  float q = static_cast<float>(x);
  if (std::abs(static_cast<double>(q)) > std::abs(x)) q = std::nextafter(q, 0.0f);
  return q;
}

}  // namespace

Dictionary initial_dictionary(const Eigen::MatrixXd& D, Eigen::Index m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(D.cols()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  Dictionary dict;
  dict.B.resize(D.rows(), m);
  Eigen::Index filled = 0;
  for (auto i : order) {
    if (filled == m) break;
    const double n = D.col(i).norm();
    if (n > 0.0) dict.B.col(filled++) = D.col(i) / n;
  }
  std::normal_distribution<double> normal;
  for (; filled < m; ++filled) {
    Eigen::VectorXd v(D.rows());
    for (auto& x : v) x = normal(rng);
    dict.B.col(filled) = v / v.norm();
  }
  return dict;
}

SparseCodingResult sparse_coding(const Eigen::MatrixXd& D, Dictionary B, Eigen::MatrixXd W,
                                 double lambda_w, const TrainConfig& cfg) {
  if (B.dim() != D.rows() || W.rows() != B.atoms() || W.cols() != D.cols()) {
    throw InputError("sparse_coding: shape mismatch");
  }
  Regularization sc;
  sc.lambda_w = lambda_w;
  sc.lambda_r = 0.0;
  const LassoConfig lasso = cfg.lasso(lambda_w);
  const GlobalRegressor no_regressor{Eigen::MatrixXd::Zero(B.atoms(), 0)};
  const Eigen::MatrixXd no_phi(0, D.cols());
  SparseCodingResult out;
  for (int it = 0; it < cfg.max_init; ++it) {
    try {
      guarded_weight_step(B, no_regressor, no_phi, D, sc, lasso, W);
      guarded_dictionary_step(D, W, B);
    } catch (const NumericalError& e) {
      throw ConvergenceError("sparse coding round " + std::to_string(it) + ": " + e.what(),
                             Eigen::VectorXd(), out.trace);
    }
    const double value = reconstruction_objective(D, B.B, W) + lambda_w * W.cwiseAbs().sum();
    const bool done = !out.trace.empty() && converged(out.trace.back(), value, cfg.rel_tol);
    out.trace.push_back(value);
    if (done) break;
  }
  out.dictionary = std::move(B);
  out.weights = std::move(W);
  return out;
}

TrainResult train_global(const TrainingSet& data, const TrainConfig& cfg, const CenterBank& bank,
                         Eigen::Index coarse_rows, Eigen::Index coarse_cols) {
  cfg.validate();
  bank.validate();
  const auto N = static_cast<Eigen::Index>(data.depths.size());
  if (N < 1 || data.features.cols() != N) {
    throw InputError("train_global: need one feature vector per depth map");
  }
  if (data.features.rows() != bank.dim()) {
    throw InputError("train_global: feature dim does not match center bank");
  }
  if (coarse_rows < 1 || coarse_cols < 1) throw InputError("train_global: empty coarse grid");

  const CoarseTargets targets = coarse_targets(data.depths, coarse_rows, coarse_cols);
  const Eigen::MatrixXd& D = targets.D;
  const Eigen::MatrixXd Phi = rbf_matrix(data.features, bank);
  const Regularization reg = cfg.resolve(D);
  const LassoConfig lasso = cfg.lasso(reg.lambda_w);

  TrainResult result;
  result.reg = reg;
  SparseCodingResult init;
  try {
    init = sparse_coding(D, initial_dictionary(D, cfg.m, cfg.seed), Eigen::MatrixXd::Zero(cfg.m, N),
                         reg.lambda_w, cfg);
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(std::string("train_global: initialization: ") + e.what(), e.best_iterate(),
                           e.trace());
  }
  Dictionary B = std::move(init.dictionary);
  Eigen::MatrixXd W = std::move(init.weights);
  result.init_trace = std::move(init.trace);

  GlobalRegressor T;
  guarded_ridge_step(W, Phi, reg, T);
  result.j_trace.push_back(objective_J(B, W, T, D, Phi, reg));

  for (int outer = 1; outer <= cfg.max_outer; ++outer) {
    try {
      guarded_weight_step(B, T, Phi, D, reg, lasso, W);
      guarded_dictionary_step(D, W, B);
      guarded_ridge_step(W, Phi, reg, T);
    } catch (const NumericalError& e) {
      throw ConvergenceError("train_global: outer iteration " + std::to_string(outer) + ": " + e.what(),
                             Eigen::VectorXd(), result.j_trace);
    }
    const double J = objective_J(B, W, T, D, Phi, reg);
    const bool done = converged(result.j_trace.back(), J, cfg.rel_tol);
    result.j_trace.push_back(J);
    result.outer_iterations = outer;
    if (done) break;
  }

  GlobalModel& model = result.model;
  model.dictionary = std::move(B);
  model.regressor = std::move(T);
  model.bank = bank;
  model.mean_depth = DepthMap::from_vector(targets.mean, coarse_rows, coarse_cols);
  model.coarse_rows = coarse_rows;
  model.coarse_cols = coarse_cols;
  model.lambda_w = reg.lambda_w;
  quantize_for_storage(model);
  result.weights = std::move(W);
  return result;
}

DepthMap infer_global(const GlobalModel& model, const Eigen::VectorXd& feature,
                      const LassoConfig& cfg) {
  const Eigen::VectorXd phi = rbf_vector(feature, model.bank);
  const SparseWeights w = infer_weights(model.regressor.T, phi, cfg);
  const Eigen::VectorXd d = model.dictionary.B * w.w;
  DepthMap out = DepthMap::from_vector(d, model.coarse_rows, model.coarse_cols);
  out.depth += model.mean_depth.depth;
  return out;
}

DepthMap infer_global(const GlobalModel& model, const Eigen::VectorXd& feature) {
  LassoConfig cfg;
  cfg.lambda_w = model.lambda_w;
  return infer_global(model, feature, cfg);
}

DirectModel train_direct(const TrainingSet& data, double lambda_T, const CenterBank& bank,
                         Eigen::Index coarse_rows, Eigen::Index coarse_cols) {
  bank.validate();
  if (data.features.cols() != static_cast<Eigen::Index>(data.depths.size())) {
    throw InputError("train_direct: need one feature vector per depth map");
  }
  const CoarseTargets targets = coarse_targets(data.depths, coarse_rows, coarse_cols);
  const Eigen::MatrixXd Phi = rbf_matrix(data.features, bank);
  DirectModel model;
  model.V = solve_T(targets.D, Phi, 1.0, lambda_T).T;
  model.bank = bank;
  model.mean_depth = DepthMap::from_vector(targets.mean, coarse_rows, coarse_cols);
  model.coarse_rows = coarse_rows;
  model.coarse_cols = coarse_cols;
  return model;
}

DepthMap infer_direct(const DirectModel& model, const Eigen::VectorXd& feature) {
  const Eigen::VectorXd d = model.V * rbf_vector(feature, model.bank);
  DepthMap out = DepthMap::from_vector(d, model.coarse_rows, model.coarse_cols);
  out.depth += model.mean_depth.depth;
  return out;
}

void CropGeometry::validate() const {
  if (names.empty()) throw InputError("crop geometry: no crops");
  if (!(gamma > 0.0)) throw InputError("crop geometry: gamma must be > 0");
  for (const auto& n : names) {
    if (!centers.count(n)) throw InputError("crop geometry: no center for crop " + n);
  }
}

CropGeometry default_crop_geometry(Eigen::Index full_rows, Eigen::Index full_cols,
                                   Eigen::Index crop_size, Eigen::Index coarse_rows,
                                   Eigen::Index coarse_cols) {
  if (crop_size < 1 || crop_size > full_rows || crop_size > full_cols) {
    throw InputError("crop geometry: crop size must fit inside the image");
  }
  const double half = 0.5 * static_cast<double>(crop_size - 1);
  const double last_r = static_cast<double>(full_rows - 1);
  const double last_c = static_cast<double>(full_cols - 1);
  const std::map<std::string, Eigen::Vector2d> full{
      {"C", {0.5 * last_r, 0.5 * last_c}},  {"UL", {half, half}},
      {"UR", {half, last_c - half}},        {"DL", {last_r - half, half}},
      {"DR", {last_r - half, last_c - half}}};
  CropGeometry g;
  g.names = kCropNames;
  for (const auto& [name, p] : full) {
    g.centers[name] = {(p.x() + 0.5) * static_cast<double>(coarse_rows) / static_cast<double>(full_rows) - 0.5,
                       (p.y() + 0.5) * static_cast<double>(coarse_cols) / static_cast<double>(full_cols) - 0.5};
  }
  double widest = 0.0;
  for (const auto& a : g.names) {
    for (const auto& b : g.names) widest = std::max(widest, (g.centers[a] - g.centers[b]).norm());
  }
  g.gamma = widest > 0.0 ? 0.5 * widest : 1.0;
  return g;
}

Eigen::VectorXd merge_weights(const CropGeometry& geometry, double row, double col) {
  const auto k = static_cast<Eigen::Index>(geometry.names.size());
  Eigen::VectorXd expo(k);
  const double g2 = geometry.gamma * geometry.gamma;
  for (Eigen::Index i = 0; i < k; ++i) {
    const Eigen::Vector2d d = Eigen::Vector2d(row, col) - geometry.centers.at(geometry.names[static_cast<std::size_t>(i)]);
    expo(i) = -(geometry.squared_distance ? d.squaredNorm() : d.norm()) / g2;
  }
  const Eigen::VectorXd w = (expo.array() - expo.maxCoeff()).exp();
  return w / w.sum();
}

DepthMap merge_crops(const CropGeometry& geometry, const std::map<std::string, DepthMap>& per_crop) {
  geometry.validate();
  const DepthMap* first = nullptr;
  for (const auto& n : geometry.names) {
    auto it = per_crop.find(n);
    if (it == per_crop.end()) throw InputError("merge_crops: missing prediction for crop " + n);
    if (!first) first = &it->second;
    if (it->second.rows() != first->rows() || it->second.cols() != first->cols()) {
      throw InputError("merge_crops: crop predictions differ in size");
    }
  }
  DepthMap out(Grid::Zero(first->rows(), first->cols()));
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      const Eigen::VectorXd w = merge_weights(geometry, static_cast<double>(r), static_cast<double>(c));
      double v = 0.0;
      for (std::size_t i = 0; i < geometry.names.size(); ++i) {
        v += w(static_cast<Eigen::Index>(i)) * per_crop.at(geometry.names[i]).depth(r, c);
      }
      out.depth(r, c) = v;
    }
  }
  return out;
}

void CropEnsemble::validate() const {
  geometry.validate();
  Eigen::Index rows = -1;
  Eigen::Index cols = -1;
  for (const auto& n : geometry.names) {
    auto it = models.find(n);
    if (it == models.end()) throw InputError("crop ensemble: no model for crop " + n);
    it->second.validate();
    if (rows < 0) {
      rows = it->second.coarse_rows;
      cols = it->second.coarse_cols;
    } else if (rows != it->second.coarse_rows || cols != it->second.coarse_cols) {
      throw InputError("crop ensemble: models disagree on the coarse grid");
    }
  }
}

void quantize_for_storage(GlobalModel& model) {
  for (auto& x : model.dictionary.B.reshaped()) x = toward_zero(x);
  for (auto& x : model.regressor.T.reshaped()) x = static_cast<float>(x);
  for (auto& x : model.bank.centers.reshaped()) x = static_cast<float>(x);
  for (auto& x : model.bank.sigmas) x = static_cast<float>(x);
  for (auto& x : model.mean_depth.depth.reshaped()) x = static_cast<float>(x);
}

}  // namespace cdl
