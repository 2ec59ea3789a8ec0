#pragma once

#include <map>
#include <string>
#include <vector>

#include "cdl/config.hpp"
#include "cdl/coupled_model.hpp"
#include "cdl/manifest.hpp"
#include "cdl/metrics.hpp"
#include "cdl/refinement.hpp"

namespace cdl {

/// Crops whose center-image descriptors form each crop's RBF bank.
const std::map<std::string, std::vector<std::string>>& center_crops();

/// Descriptor of one crop of an example, optionally L2-normalized.
Eigen::VectorXd crop_feature(const Example& ex, const std::string& crop, bool normalize);

/// Bank for `crop` from the designated center images: the descriptors of the
/// two neighboring crops (and their mirrored versions when requested),
/// bandwidth from the sigma heuristic.
CenterBank assemble_bank(const std::vector<const Example*>& centers, const std::string& crop,
                         const RunConfig& cfg);

/// Center images: the dataset's center split, or the training examples when
/// there is none.
std::vector<const Example*> center_examples(const Dataset& data);

CropGeometry crop_geometry(const RunConfig& cfg);

struct EnsembleTraining {
  CropEnsemble ensemble;
  std::map<std::string, std::vector<double>> init_traces;
  std::map<std::string, std::vector<double>> j_traces;
};

/// One global model per crop (in parallel), trained on `train`.
EnsembleTraining train_ensemble(const Dataset& data, const std::vector<const Example*>& train,
                                const RunConfig& cfg);

/// Per-crop inference merged on the coarse grid.
DepthMap infer_coarse(const CropEnsemble& ensemble, const Example& ex, const RunConfig& cfg);
/// Coarse estimate brought to the intermediate grid (colorized if enabled).
DepthMap global_intermediate(const CropEnsemble& ensemble, const Example& ex, const RunConfig& cfg);
/// Coarse estimate brought to full resolution through both stages.
DepthMap global_full(const CropEnsemble& ensemble, const Example& ex, const RunConfig& cfg);

/// Refinement target: ground truth resized to the intermediate grid.
DepthMap intermediate_target(const Example& ex, const RunConfig& cfg);

/// For each fold, an ensemble trained on the other folds predicts the fold's
/// examples at the intermediate resolution. Keyed by example id.
std::map<std::string, DepthMap> make_cv_estimates(const Dataset& data, const FoldPlan& plan,
                                                  const RunConfig& cfg);

struct RefinementTraining {
  FoldPlan plan;
  std::map<std::string, DepthMap> cv_estimates;
  RefinementModel model;
};
RefinementTraining train_refinement_stage(const Dataset& data, const RunConfig& cfg);

DepthMap refined_full(const CropEnsemble& ensemble, const RefinementModel& model, const Example& ex,
                      const RunConfig& cfg);

enum class AblationMode { coupled, uncoupled, direct_regression };
AblationMode parse_ablation_mode(const std::string& s);
std::string to_string(AblationMode m);

struct AblationResult {
  MetricReport report;
  std::map<std::string, MetricReport> per_example;
};

/// Trains the chosen global variant on the train split and evaluates it on
/// the test split at ground-truth resolution.
AblationResult run_ablation(const Dataset& data, AblationMode mode, const RunConfig& cfg);

}  // namespace cdl
