#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cdl/coupled_model.hpp"
#include "cdl/refinement.hpp"
#include "cdl/tensor.hpp"

namespace cdl {

/// Model file: a text header of "key value" lines, the line "end", then the
/// CDLT blobs named in the header ("blob <name> <bytes>") back to back.
///
///   cdl-model 1
///   kind ensemble
///   ...
///   blob C.B 1234
///   end
///   <CDLT bytes>...
struct Archive {
  std::string kind;
  std::vector<std::pair<std::string, std::string>> fields;
  std::vector<std::pair<std::string, Tensor>> blobs;

  void set(const std::string& key, const std::string& value) { fields.emplace_back(key, value); }
  void set(const std::string& key, double value);
  /// Throws FormatError when missing.
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  long long get_int(const std::string& key) const;
  const Tensor& blob(const std::string& name) const;
};

void write_archive(const Archive& a, const std::filesystem::path& path);
Archive read_archive(const std::filesystem::path& path);

/// Shortest decimal text that parses back to the same double.
std::string exact_text(double x);
double parse_double(const std::string& s);

void save_ensemble(const CropEnsemble& ensemble, const std::filesystem::path& path);
CropEnsemble load_ensemble(const std::filesystem::path& path);

void save_refinement(const RefinementModel& model, const std::filesystem::path& path);
RefinementModel load_refinement(const std::filesystem::path& path);

}  // namespace cdl
