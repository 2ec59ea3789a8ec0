#include "cdl/pipeline.hpp"

#include <functional>

#include "cdl/errors.hpp"
#include "cdl/parallel.hpp"
#include "cdl/spatial.hpp"

namespace cdl {

const std::map<std::string, std::vector<std::string>>& center_crops() {
  static const std::map<std::string, std::vector<std::string>> table{
      {"C", {"UL", "UR"}}, {"UL", {"C", "UR"}}, {"UR", {"C", "UL"}}, {"DL", {"C", "DR"}}, {"DR", {"C", "DL"}}};
  return table;
}

Eigen::VectorXd crop_feature(const Example& ex, const std::string& crop, bool normalize) {
  const auto it = ex.features.find(crop);
  if (it == ex.features.end()) throw InputError("example " + ex.id + " has no feature for crop " + crop);
  if (!normalize) return it->second;
  const double n = it->second.norm();
  return n > 0.0 ? Eigen::VectorXd(it->second / n) : it->second;
}

std::vector<const Example*> center_examples(const Dataset& data) {
  std::vector<const Example*> out;
  for (const auto& ex : data.centers.empty() ? data.train : data.centers) out.push_back(&ex);
  return out;
}

CenterBank assemble_bank(const std::vector<const Example*>& centers, const std::string& crop,
                         const RunConfig& cfg) {
  const auto it = center_crops().find(crop);
  if (it == center_crops().end()) throw InputError("no center-crop rule for crop " + crop);
  std::vector<Eigen::VectorXd> rows;
  for (const Example* ex : centers) {
    for (const auto& source : it->second) {
      rows.push_back(crop_feature(*ex, source, cfg.normalize_features));
      if (!cfg.mirrored_centers) continue;
      if (const auto m = ex->mirrored.find(source); m != ex->mirrored.end()) {
        const double n = m->second.norm();
        rows.push_back(cfg.normalize_features && n > 0.0 ? Eigen::VectorXd(m->second / n) : m->second);
      }
    }
  }
  if (rows.size() < 2) throw InputError("center bank for crop " + crop + " needs at least two centers");
  Eigen::MatrixXd C(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != C.cols()) throw InputError("center descriptors differ in length for crop " + crop);
    C.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  return CenterBank::with_heuristic_sigma(std::move(C));
}

CropGeometry crop_geometry(const RunConfig& cfg) {
  CropGeometry g = default_crop_geometry(cfg.full_rows, cfg.full_cols, cfg.crop_size, cfg.coarse_rows, cfg.coarse_cols);
  if (cfg.gamma) g.gamma = *cfg.gamma;
  g.squared_distance = cfg.merge_squared_distance;
  return g;
}

namespace {

TrainingSet training_set(const std::vector<const Example*>& train, const std::string& crop, const RunConfig& cfg) {
  if (train.empty()) throw InputError("no training examples");
  TrainingSet set;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const Example& ex = *train[i];
    const Eigen::VectorXd f = crop_feature(ex, crop, cfg.normalize_features);
    if (i == 0) set.features.resize(f.size(), static_cast<Eigen::Index>(train.size()));
    if (f.size() != set.features.rows()) throw InputError("example " + ex.id + ": descriptor length differs");
    set.features.col(static_cast<Eigen::Index>(i)) = f;
    if (!ex.depth) throw InputError("example " + ex.id + " has no depth map");
    set.depths.push_back(*ex.depth);
  }
  return set;
}

const Tensor* guide_of(const Example& ex, const RunConfig& cfg) {
  return cfg.colorize && ex.guide ? &*ex.guide : nullptr;
}

std::vector<const Example*> pointers(const std::vector<Example>& v) {
  std::vector<const Example*> out;
  for (const auto& ex : v) out.push_back(&ex);
  return out;
}

}  // namespace

EnsembleTraining train_ensemble(const Dataset& data, const std::vector<const Example*>& train,
                                const RunConfig& cfg) {
  const CropGeometry geometry = crop_geometry(cfg);
  const auto centers = center_examples(data);
  std::vector<TrainResult> results(geometry.names.size());
  parallel_for(geometry.names.size(), cfg.worker_threads(), [&](std::size_t i) {
    const std::string& crop = geometry.names[i];
    const CenterBank bank = assemble_bank(centers, crop, cfg);
    try {
      results[i] = train_global(training_set(train, crop, cfg), cfg.train, bank, cfg.coarse_rows, cfg.coarse_cols);
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("crop " + crop + ": " + e.what(), e.best_iterate(), e.trace());
    }
  });
  EnsembleTraining out;
  out.ensemble.geometry = geometry;
  for (std::size_t i = 0; i < geometry.names.size(); ++i) {
    const std::string& crop = geometry.names[i];
    out.init_traces[crop] = results[i].init_trace;
    out.j_traces[crop] = results[i].j_trace;
    out.ensemble.models[crop] = std::move(results[i].model);
  }
  out.ensemble.validate();
  return out;
}

DepthMap infer_coarse(const CropEnsemble& ensemble, const Example& ex, const RunConfig& cfg) {
  std::map<std::string, DepthMap> per_crop;
  for (const auto& crop : ensemble.geometry.names) {
    per_crop[crop] = infer_global(ensemble.models.at(crop), crop_feature(ex, crop, cfg.normalize_features));
  }
  return merge_crops(ensemble.geometry, per_crop);
}

DepthMap global_intermediate(const CropEnsemble& ensemble, const Example& ex, const RunConfig& cfg) {
  return upsample_to_intermediate(infer_coarse(ensemble, ex, cfg), guide_of(ex, cfg), cfg.pi_rows, cfg.pi_cols,
                                  cfg.color);
}

DepthMap global_full(const CropEnsemble& ensemble, const Example& ex, const RunConfig& cfg) {
  return pipeline_upsample(infer_coarse(ensemble, ex, cfg), guide_of(ex, cfg), cfg.pi_rows, cfg.pi_cols,
                           cfg.full_rows, cfg.full_cols, cfg.color);
}

DepthMap intermediate_target(const Example& ex, const RunConfig& cfg) {
  if (!ex.depth) throw InputError("example " + ex.id + " has no depth map");
  return resize_bilinear(*ex.depth, cfg.pi_rows, cfg.pi_cols);
}

std::map<std::string, DepthMap> make_cv_estimates(const Dataset& data, const FoldPlan& plan,
                                                  const RunConfig& cfg) {
  plan.validate();
  for (const auto& ex : data.train) {
    if (!plan.assignment.count(ex.id)) throw InputError("fold plan does not cover example " + ex.id);
  }
  if (plan.assignment.size() != data.train.size()) throw InputError("fold plan lists ids outside the training set");
  RunConfig inner = cfg;
  inner.threads = 1;
  std::vector<std::vector<std::pair<std::string, DepthMap>>> per_fold(static_cast<std::size_t>(plan.k));
  parallel_for(per_fold.size(), cfg.worker_threads(), [&](std::size_t f) {
    std::vector<const Example*> fit, held;
    for (const auto& ex : data.train) {
      (plan.assignment.at(ex.id) == static_cast<int>(f) ? held : fit).push_back(&ex);
    }
    if (fit.empty()) throw InputError("fold " + std::to_string(f) + " leaves no training examples");
    const CropEnsemble ensemble = train_ensemble(data, fit, inner).ensemble;
    for (const Example* ex : held) per_fold[f].emplace_back(ex->id, global_intermediate(ensemble, *ex, inner));
  });
  std::map<std::string, DepthMap> out;
  for (auto& fold : per_fold) {
    for (auto& [id, d] : fold) out.emplace(id, std::move(d));
  }
  return out;
}

RefinementTraining train_refinement_stage(const Dataset& data, const RunConfig& cfg) {
  RefinementTraining out;
  std::vector<std::string> ids;
  for (const auto& ex : data.train) ids.push_back(ex.id);
  out.plan = make_fold_plan(ids, cfg.cv_folds, cfg.refine.seed);
  out.cv_estimates = make_cv_estimates(data, out.plan, cfg);
  std::vector<RefinementExample> examples;
  for (const auto& ex : data.train) {
    examples.push_back({ex.hypercolumns(cfg.pi_rows, cfg.pi_cols), intermediate_target(ex, cfg),
                        out.cv_estimates.at(ex.id)});
  }
  RefinementConfig rc = cfg.refine;
  rc.threads = cfg.worker_threads();
  out.model = train_refinement(examples, rc, cfg.pi_rows, cfg.pi_cols);
  return out;
}

DepthMap refined_full(const CropEnsemble& ensemble, const RefinementModel& model, const Example& ex,
                      const RunConfig& cfg) {
  return infer_refined(model, ex.hypercolumns(cfg.pi_rows, cfg.pi_cols), global_intermediate(ensemble, ex, cfg),
                       guide_of(ex, cfg), cfg.full_rows, cfg.full_cols, cfg.color);
}

AblationMode parse_ablation_mode(const std::string& s) {
  if (s == "coupled") return AblationMode::coupled;
  if (s == "uncoupled") return AblationMode::uncoupled;
  if (s == "direct_regression") return AblationMode::direct_regression;
  throw InputError("unknown ablation mode '" + s + "' (coupled, uncoupled, direct_regression)");
}

std::string to_string(AblationMode m) {
  switch (m) {
    case AblationMode::coupled:
      return "coupled";
    case AblationMode::uncoupled:
      return "uncoupled";
    case AblationMode::direct_regression:
      return "direct_regression";
  }
  return "";
}

AblationResult run_ablation(const Dataset& data, AblationMode mode, const RunConfig& cfg) {
  if (data.test.empty()) throw InputError("ablation: no test examples");
  const auto train = pointers(data.train);
  std::function<DepthMap(const Example&)> coarse;
  CropEnsemble ensemble;
  std::map<std::string, DirectModel> direct;
  const CropGeometry geometry = crop_geometry(cfg);
  if (mode == AblationMode::direct_regression) {
    const auto centers = center_examples(data);
    for (const auto& crop : geometry.names) {
      direct[crop] = train_direct(training_set(train, crop, cfg), cfg.train.lambda_T,
                                  assemble_bank(centers, crop, cfg), cfg.coarse_rows, cfg.coarse_cols);
    }
    coarse = [&](const Example& ex) {
      std::map<std::string, DepthMap> per_crop;
      for (const auto& crop : geometry.names) {
        per_crop[crop] = infer_direct(direct.at(crop), crop_feature(ex, crop, cfg.normalize_features));
      }
      return merge_crops(geometry, per_crop);
    };
  } else {
    RunConfig variant = cfg;
    if (mode == AblationMode::uncoupled) variant.train.max_outer = 0;
    ensemble = train_ensemble(data, train, variant).ensemble;
    coarse = [&](const Example& ex) { return infer_coarse(ensemble, ex, cfg); };
  }
  AblationResult out;
  MetricAccumulator pooled;
  for (const auto& ex : data.test) {
    if (!ex.depth) throw InputError("test example " + ex.id + " has no depth map");
    const DepthMap pred = pipeline_upsample(coarse(ex), guide_of(ex, cfg), cfg.pi_rows, cfg.pi_cols,
                                            cfg.full_rows, cfg.full_cols, cfg.color);
    MetricAccumulator one;
    one.add(resize_bilinear(pred, ex.depth->rows(), ex.depth->cols()), *ex.depth);
    out.per_example[ex.id] = one.report();
    pooled.merge(one);
  }
  out.report = pooled.report();
  return out;
}

}  // namespace cdl
