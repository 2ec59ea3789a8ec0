#include "cdl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cdl/dictionary.hpp"
#include "cdl/errors.hpp"
#include "cdl/spatial.hpp"

namespace cdl {

void CompensatedSum::add(double x) {
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x)) {
    comp_ += (sum_ - t) + x;
  } else {
    comp_ += (x - t) + sum_;
  }
  sum_ = t;
}

void CompensatedSum::merge(const CompensatedSum& o) {
  add(o.sum_);
  add(o.comp_);
}

void MetricAccumulator::add(double pred, double gt) {
  if (!(gt > 0.0) || !std::isfinite(gt)) throw InputError("evaluate: ground truth must be positive and finite");
  if (!std::isfinite(pred)) throw InputError("evaluate: non-finite prediction");
  const double diff = pred - gt;
  sq_.add(diff * diff);
  double p = pred;
  if (p < kDepthFloor) {
    p = kDepthFloor;
    ++clamped_;
  }
  rel_.add(std::abs(p - gt) / gt);
  log10_.add(std::abs(std::log10(p) - std::log10(gt)));
  if (std::max(p / gt, gt / p) < 1.25) ++below_;
  const double e = std::log(p) - std::log(gt);
  ++n_;
  const double delta = e - e_mean_;
  e_mean_ += delta / static_cast<double>(n_);
  e_m2_ += delta * (e - e_mean_);
}

void MetricAccumulator::add(const DepthMap& pred, const DepthMap& gt) {
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols()) {
    throw InputError("evaluate: prediction " + std::to_string(pred.rows()) + "x" + std::to_string(pred.cols()) +
                     " vs ground truth " + std::to_string(gt.rows()) + "x" + std::to_string(gt.cols()));
  }
  for (Eigen::Index r = 0; r < gt.rows(); ++r) {
    for (Eigen::Index c = 0; c < gt.cols(); ++c) {
      if (gt.valid(r, c)) add(pred.depth(r, c), gt.depth(r, c));
    }
  }
}

void MetricAccumulator::merge(const MetricAccumulator& o) {
  if (o.n_ == 0) return;
  if (n_ == 0) {
    *this = o;
    return;
  }
  const auto na = static_cast<double>(n_);
  const auto nb = static_cast<double>(o.n_);
  const double delta = o.e_mean_ - e_mean_;
  const double n = na + nb;
  e_mean_ += delta * nb / n;
  e_m2_ += o.e_m2_ + delta * delta * na * nb / n;
  n_ += o.n_;
  below_ += o.below_;
  clamped_ += o.clamped_;
  sq_.merge(o.sq_);
  rel_.merge(o.rel_);
  log10_.merge(o.log10_);
}

MetricReport MetricAccumulator::report() const {
  if (n_ == 0) throw InputError("evaluate: no valid pixels");
  const auto n = static_cast<double>(n_);
  MetricReport r;
  r.pixel_count = n_;
  r.clamped = clamped_;
  r.rmse = std::sqrt(sq_.value() / n);
  r.abs_rel = rel_.value() / n;
  r.log10 = log10_.value() / n;
  r.sc_inv = std::sqrt(std::max(0.0, e_m2_ / n));
  r.threshold_125 = static_cast<double>(below_) / n;
  return r;
}

MetricReport evaluate(const DepthMap& pred, const DepthMap& gt) {
  MetricAccumulator acc;
  acc.add(pred, gt);
  return acc.report();
}

MetricReport evaluate_at_gt_resolution(const DepthMap& pred, const DepthMap& gt) {
  return evaluate(resize_bilinear(pred, gt.rows(), gt.cols()), gt);
}

std::string format_report(const MetricReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "rmse: " << r.rmse << "\n"
      << "abs_rel: " << r.abs_rel << "\n"
      << "log10: " << r.log10 << "\n"
      << "sc_inv: " << r.sc_inv << "\n"
      << "threshold_125: " << r.threshold_125 << "\n"
      << "pixel_count: " << r.pixel_count << "\n"
      << "clamped: " << r.clamped << "\n";
  return out.str();
}

MetricReport mean_prediction_baseline(const std::vector<DepthMap>& train,
                                      const std::vector<DepthMap>& test) {
  if (train.empty() || test.empty()) throw InputError("mean_prediction_baseline: empty set");
  const Eigen::Index rows = train.front().rows();
  const Eigen::Index cols = train.front().cols();
  Grid sum = Grid::Zero(rows, cols);
  Grid count = Grid::Zero(rows, cols);
  for (const auto& d : train) {
    const DepthMap g = resize_bilinear(d, rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        if (g.valid(r, c)) {
          sum(r, c) += g.depth(r, c);
          count(r, c) += 1.0;
        }
      }
    }
  }
  if ((count.array() == 0.0).all()) throw InputError("mean_prediction_baseline: no valid training pixels");
  const double fallback = sum.sum() / count.sum();
  DepthMap mean(Grid((count.array() > 0.0).select(sum.array() / count.array().max(1.0), fallback)));
  MetricAccumulator acc;
  for (const auto& g : test) acc.add(resize_bilinear(mean, g.rows(), g.cols()), g);
  return acc.report();
}

std::vector<SweepPoint> dict_size_sweep(const std::vector<DepthMap>& depths,
                                        const std::vector<Eigen::Index>& sizes,
                                        const TrainConfig& cfg) {
  if (sizes.empty()) throw InputError("dict_size_sweep: no sizes");
  if (!std::is_sorted(sizes.begin(), sizes.end()) || sizes.front() < 1) {
    throw InputError("dict_size_sweep: sizes must be ascending and >= 1");
  }
  if (depths.empty()) throw InputError("dict_size_sweep: no depth maps");
  const CoarseTargets targets = coarse_targets(depths, depths.front().rows(), depths.front().cols());
  const Eigen::MatrixXd& D = targets.D;
  TrainConfig first = cfg;
  first.m = sizes.front();
  const double lambda_w = first.resolve(D).lambda_w;
  const double cells = static_cast<double>(D.size());

  std::vector<SweepPoint> out;
  Dictionary B;
  Eigen::MatrixXd W;
  double previous_error = 0.0;
  for (const Eigen::Index m : sizes) {
    Dictionary start;
    Eigen::MatrixXd W0;
    if (out.empty()) {
      start = initial_dictionary(D, m, cfg.seed);
      W0 = Eigen::MatrixXd::Zero(m, D.cols());
    } else {
      start.B = Eigen::MatrixXd::Zero(D.rows(), m);
      start.B.leftCols(B.atoms()) = B.B;
      W0 = Eigen::MatrixXd::Zero(m, D.cols());
      W0.topRows(W.rows()) = W;
      start = unused_atom_policy(start, W0, D);
    }
    SparseCodingResult fit = sparse_coding(D, start, W0, lambda_w, cfg);
    double error = reconstruction_objective(D, fit.dictionary.B, fit.weights);
    if (!out.empty() && error > previous_error) {
      // The previous dictionary padded with idle atoms is a size-m solution.
      fit.dictionary.B = Eigen::MatrixXd::Zero(D.rows(), m);
      fit.dictionary.B.leftCols(B.atoms()) = B.B;
      fit.dictionary = unused_atom_policy(fit.dictionary, W0, D);
      fit.weights = W0;
      error = previous_error;
    }
    B = std::move(fit.dictionary);
    W = std::move(fit.weights);
    previous_error = error;
    out.push_back({m, std::sqrt(error / cells)});
  }
  return out;
}

}  // namespace cdl
