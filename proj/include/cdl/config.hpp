#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "cdl/coupled_model.hpp"
#include "cdl/refinement.hpp"
#include "cdl/spatial.hpp"
#include "cdl/synthetic.hpp"

namespace cdl {

/// Everything a CLI run needs. Text form: one "key = value" per line, '#'
/// starts a comment, dotted keys address the nested configs (train.m,
/// lasso.tol, color.seed_penalty, refine.n_centers, synth.n_train, ...).
/// Unknown keys are rejected. Relative paths resolve against the config
/// file's directory.
struct RunConfig {
  std::filesystem::path manifest;
  std::filesystem::path out_dir;
  std::string profile = "custom";

  Eigen::Index coarse_rows = 0, coarse_cols = 0;
  Eigen::Index pi_rows = 0, pi_cols = 0;
  Eigen::Index full_rows = 0, full_cols = 0;
  Eigen::Index crop_size = 227;
  /// Unset: half the largest distance between crop centers.
  std::optional<double> gamma;
  bool merge_squared_distance = false;
  /// L2-normalize image descriptors before the RBF expansion.
  bool normalize_features = false;
  /// Include mirrored-crop descriptors of the center images in each bank.
  bool mirrored_centers = true;
  /// Colorization smoothing after each upsampling (needs guide images).
  bool colorize = true;
  int cv_folds = 10;
  /// 0 selects the number of hardware threads.
  int threads = 0;

  TrainConfig train;
  ColorizationConfig color;
  RefinementConfig refine;
  SynthSpec synth;

  /// Profile defaults (indoor, outdoor) for grid sizes, m and crop size.
  /// Keys set explicitly in the file win over the profile.
  void apply_profile(const std::string& name);
  void validate() const;
  int worker_threads() const;
  /// Replaces every seed (train, refine, synth).
  void set_seed(std::uint64_t seed);
  /// Canonical "key = value" listing of every field.
  std::string canonical_text() const;
};

RunConfig default_config();
/// `profile`, when given, replaces the file's profile key.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir,
                       const std::optional<std::string>& profile = std::nullopt);
RunConfig load_config(const std::filesystem::path& path,
                      const std::optional<std::string>& profile = std::nullopt);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes);

}  // namespace cdl
