#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cdl/depth_map.hpp"
#include "cdl/kernel.hpp"
#include "cdl/tensor.hpp"

namespace cdl {

namespace fs = std::filesystem;

/// One line of a manifest. Paths are relative to the manifest's directory.
struct ManifestRecord {
  std::string id;
  std::string split;  // "train", "test" or "center"
  std::map<std::string, fs::path> features;   // crop -> feature vector
  std::map<std::string, fs::path> mirrored;   // crop -> mirrored-crop feature (optional)
  std::map<std::string, fs::path> conv_maps;  // layer -> [h, w, ch] map
  std::optional<fs::path> depth;
  std::optional<fs::path> guide;  // [rows, cols, 3] image in [0, 1]
};

/// Line-oriented text listing of a dataset:
///
///   # comment
///   manifest version=1 crops=C,UL,UR,DL,DR layers=pool2,conv4,conv5
///   record id=img0001 split=train depth=d/img0001.cdlt feat.C=f/img0001_C.cdlt ...
///
/// Record keys: id, split, depth, guide, feat.<crop>, featm.<crop>,
/// conv.<layer>. Tokens are whitespace separated; paths may not contain
/// spaces.
struct DatasetManifest {
  fs::path base_dir;
  std::vector<std::string> crop_names;
  std::vector<std::string> layer_names;
  std::vector<ManifestRecord> records;

  /// Unique ids, known splits, the same crop/layer keys on every train and
  /// test record, and (when check_files) every referenced file present.
  void validate(bool check_files = true) const;
  std::vector<const ManifestRecord*> split(const std::string& name) const;
  fs::path resolve(const fs::path& p) const { return p.is_absolute() ? p : base_dir / p; }
};

DatasetManifest read_manifest(const fs::path& path);
void write_manifest(const DatasetManifest& manifest, const fs::path& path);

/// A loaded example.
struct Example {
  std::string id;
  std::map<std::string, Eigen::VectorXd> features;
  std::map<std::string, Eigen::VectorXd> mirrored;
  std::vector<Tensor> conv_layers;  // in manifest layer order
  std::optional<DepthMap> depth;
  std::optional<Tensor> guide;

  HypercolumnField hypercolumns(Eigen::Index target_rows, Eigen::Index target_cols) const;
};

struct Dataset {
  std::vector<std::string> crop_names;
  std::vector<std::string> layer_names;
  std::vector<Example> train;
  std::vector<Example> test;
  std::vector<Example> centers;
};

Dataset load_dataset(const DatasetManifest& manifest);

/// Writes every tensor of the dataset under `dir` and a manifest.txt
/// pointing at them. Returns the manifest.
DatasetManifest write_dataset(const Dataset& data, const fs::path& dir);

}  // namespace cdl
