#include "cdl/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "cdl/errors.hpp"

namespace cdl {

namespace {

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& items, char sep) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : std::string(1, sep)) + s;
  return out;
}

std::pair<std::string, std::string> key_value(const std::string& token, int line) {
  const auto eq = token.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw FormatError("manifest line " + std::to_string(line) + ": expected key=value, got '" + token + "'");
  }
  return {token.substr(0, eq), token.substr(eq + 1)};
}

const std::set<std::string> kSplits{"train", "test", "center"};

}  // namespace

void DatasetManifest::validate(bool check_files) const {
  if (crop_names.empty()) throw InputError("manifest: no crops declared");
  std::set<std::string> ids;
  for (const auto& r : records) {
    if (r.id.empty()) throw InputError("manifest: record without id");
    if (!ids.insert(r.id).second) throw InputError("manifest: duplicate id " + r.id);
    if (!kSplits.count(r.split)) throw InputError("manifest: record " + r.id + " has unknown split '" + r.split + "'");
    for (const auto& crop : crop_names) {
      if (!r.features.count(crop)) throw InputError("manifest: record " + r.id + " lacks feature for crop " + crop);
    }
    for (const auto& [crop, _] : r.features) {
      if (std::find(crop_names.begin(), crop_names.end(), crop) == crop_names.end()) {
        throw InputError("manifest: record " + r.id + " has undeclared crop " + crop);
      }
    }
    if (r.split != "center") {
      if (!r.depth) throw InputError("manifest: record " + r.id + " lacks a depth file");
      if (r.conv_maps.size() != layer_names.size()) {
        throw InputError("manifest: record " + r.id + " does not provide every declared layer");
      }
      for (const auto& layer : layer_names) {
        if (!r.conv_maps.count(layer)) throw InputError("manifest: record " + r.id + " lacks layer " + layer);
      }
    }
    if (check_files) {
      auto need = [&](const fs::path& p) {
        if (!fs::exists(resolve(p))) throw InputError("manifest: missing file " + resolve(p).string());
      };
      for (const auto& [_, p] : r.features) need(p);
      for (const auto& [_, p] : r.mirrored) need(p);
      for (const auto& [_, p] : r.conv_maps) need(p);
      if (r.depth) need(*r.depth);
      if (r.guide) need(*r.guide);
    }
  }
}

std::vector<const ManifestRecord*> DatasetManifest::split(const std::string& name) const {
  std::vector<const ManifestRecord*> out;
  for (const auto& r : records) {
    if (r.split == name) out.push_back(&r);
  }
  return out;
}

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  DatasetManifest m;
  m.base_dir = path.parent_path();
  bool header = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream tokens(line);
    std::string kind;
    if (!(tokens >> kind) || kind[0] == '#') continue;
    std::string tok;
    if (kind == "manifest") {
      while (tokens >> tok) {
        auto [k, v] = key_value(tok, lineno);
        if (k == "version") {
          if (v != "1") throw FormatError("manifest: unsupported version " + v);
        } else if (k == "crops") {
          m.crop_names = split_on(v, ',');
        } else if (k == "layers") {
          m.layer_names = split_on(v, ',');
        } else {
          throw FormatError("manifest line " + std::to_string(lineno) + ": unknown header key " + k);
        }
      }
      header = true;
    } else if (kind == "record") {
      if (!header) throw FormatError("manifest: record before header line");
      ManifestRecord r;
      while (tokens >> tok) {
        auto [k, v] = key_value(tok, lineno);
        if (k == "id") {
          r.id = v;
        } else if (k == "split") {
          r.split = v;
        } else if (k == "depth") {
          r.depth = v;
        } else if (k == "guide") {
          r.guide = v;
        } else if (k.rfind("feat.", 0) == 0) {
          r.features[k.substr(5)] = v;
        } else if (k.rfind("featm.", 0) == 0) {
          r.mirrored[k.substr(6)] = v;
        } else if (k.rfind("conv.", 0) == 0) {
          r.conv_maps[k.substr(5)] = v;
        } else {
          throw FormatError("manifest line " + std::to_string(lineno) + ": unknown record key " + k);
        }
      }
      m.records.push_back(std::move(r));
    } else {
      throw FormatError("manifest line " + std::to_string(lineno) + ": unknown line kind " + kind);
    }
  }
  if (!header) throw FormatError("manifest: missing header line");
  return m;
}

void write_manifest(const DatasetManifest& m, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest: " + path.string());
  out << "# coupled depth learning dataset manifest\n";
  out << "manifest version=1 crops=" << join(m.crop_names, ',');
  if (!m.layer_names.empty()) out << " layers=" << join(m.layer_names, ',');
  out << "\n";
  for (const auto& r : m.records) {
    out << "record id=" << r.id << " split=" << r.split;
    if (r.depth) out << " depth=" << r.depth->generic_string();
    if (r.guide) out << " guide=" << r.guide->generic_string();
    for (const auto& crop : m.crop_names) {
      if (auto it = r.features.find(crop); it != r.features.end()) {
        out << " feat." << crop << "=" << it->second.generic_string();
      }
      if (auto it = r.mirrored.find(crop); it != r.mirrored.end()) {
        out << " featm." << crop << "=" << it->second.generic_string();
      }
    }
    for (const auto& layer : m.layer_names) {
      if (auto it = r.conv_maps.find(layer); it != r.conv_maps.end()) {
        out << " conv." << layer << "=" << it->second.generic_string();
      }
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

HypercolumnField Example::hypercolumns(Eigen::Index target_rows, Eigen::Index target_cols) const {
  HypercolumnField field;
  field.layers = conv_layers;
  field.target_rows = target_rows;
  field.target_cols = target_cols;
  field.validate();
  return field;
}

Dataset load_dataset(const DatasetManifest& manifest) {
  manifest.validate(true);
  Dataset data;
  data.crop_names = manifest.crop_names;
  data.layer_names = manifest.layer_names;
  for (const auto& r : manifest.records) {
    Example ex;
    ex.id = r.id;
    for (const auto& [crop, p] : r.features) ex.features[crop] = read_tensor(manifest.resolve(p)).to_vector();
    for (const auto& [crop, p] : r.mirrored) ex.mirrored[crop] = read_tensor(manifest.resolve(p)).to_vector();
    for (const auto& layer : manifest.layer_names) {
      if (auto it = r.conv_maps.find(layer); it != r.conv_maps.end()) {
        ex.conv_layers.push_back(read_tensor(manifest.resolve(it->second)));
      }
    }
    if (r.depth) {
      ex.depth = depth_from_tensor(read_tensor(manifest.resolve(*r.depth)));
      validate_ground_truth(*ex.depth);
    }
    if (r.guide) ex.guide = read_tensor(manifest.resolve(*r.guide));
    if (r.split == "train") {
      data.train.push_back(std::move(ex));
    } else if (r.split == "test") {
      data.test.push_back(std::move(ex));
    } else {
      data.centers.push_back(std::move(ex));
    }
  }
  return data;
}

DatasetManifest write_dataset(const Dataset& data, const fs::path& dir) {
  fs::create_directories(dir / "tensors");
  DatasetManifest m;
  m.base_dir = dir;
  m.crop_names = data.crop_names;
  m.layer_names = data.layer_names;
  auto emit = [&](const std::vector<Example>& examples, const std::string& split) {
    for (const auto& ex : examples) {
      ManifestRecord r;
      r.id = ex.id;
      r.split = split;
      const fs::path stem = fs::path("tensors") / ex.id;
      auto put = [&](const Tensor& t, const std::string& suffix) {
        fs::path rel = stem;
        rel += "_" + suffix + ".cdlt";
        write_tensor(t, dir / rel);
        return rel;
      };
      for (const auto& [crop, f] : ex.features) r.features[crop] = put(Tensor::from_vector(f), "feat_" + crop);
      for (const auto& [crop, f] : ex.mirrored) r.mirrored[crop] = put(Tensor::from_vector(f), "featm_" + crop);
      for (std::size_t l = 0; l < ex.conv_layers.size(); ++l) {
        r.conv_maps[data.layer_names.at(l)] = put(ex.conv_layers[l], "conv_" + data.layer_names[l]);
      }
      if (ex.depth) r.depth = put(to_tensor(*ex.depth), "depth");
      if (ex.guide) r.guide = put(*ex.guide, "guide");
      m.records.push_back(std::move(r));
    }
  };
  emit(data.train, "train");
  emit(data.test, "test");
  emit(data.centers, "center");
  write_manifest(m, dir / "manifest.txt");
  return m;
}

}  // namespace cdl
