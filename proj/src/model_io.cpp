#include "cdl/model_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "cdl/errors.hpp"

namespace cdl {

std::string exact_text(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw FormatError("not a number: '" + s + "'");
  return x;
}

void Archive::set(const std::string& key, double value) { set(key, exact_text(value)); }

const std::string& Archive::get(const std::string& key) const {
  for (const auto& [k, v] : fields) {
    if (k == key) return v;
  }
  throw FormatError("model file: missing field " + key);
}

double Archive::get_double(const std::string& key) const { return parse_double(get(key)); }

long long Archive::get_int(const std::string& key) const {
  const std::string& s = get(key);
  long long x = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw FormatError("model file: field " + key + " is not an integer");
  }
  return x;
}

const Tensor& Archive::blob(const std::string& name) const {
  for (const auto& [n, t] : blobs) {
    if (n == name) return t;
  }
  throw FormatError("model file: missing blob " + name);
}

void write_archive(const Archive& a, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "cdl-model 1\n" << "kind " << a.kind << "\n";
  for (const auto& [k, v] : a.fields) {
    if (k.find_first_of(" \n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw InputError("model file: field " + k + " cannot be stored");
    }
    out << k << " " << v << "\n";
  }
  for (const auto& [n, t] : a.blobs) out << "blob " << n << " " << encoded_size(t) << "\n";
  out << "end\n";
  for (const auto& [n, t] : a.blobs) write_tensor(t, out);
  if (!out) throw IoError("write failed: " + path.string());
}

Archive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  auto fail = [&](const std::string& why) { return FormatError(path.string() + ": " + why); };
  std::string line;
  if (!std::getline(in, line) || line != "cdl-model 1") throw fail("not a model file");
  Archive a;
  std::vector<std::pair<std::string, std::size_t>> sizes;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    const auto sp = line.find(' ');
    if (sp == std::string::npos) throw fail("malformed header line '" + line + "'");
    const std::string key = line.substr(0, sp);
    const std::string value = line.substr(sp + 1);
    if (key == "kind") {
      a.kind = value;
    } else if (key == "blob") {
      std::istringstream ss(value);
      std::string name;
      std::size_t bytes = 0;
      if (!(ss >> name >> bytes)) throw fail("malformed blob line");
      sizes.emplace_back(name, bytes);
    } else {
      a.fields.emplace_back(key, value);
    }
  }
  if (!ended) throw fail("header not terminated");
  for (const auto& [name, bytes] : sizes) {
    std::string buf(bytes, '\0');
    if (!in.read(buf.data(), static_cast<std::streamsize>(bytes))) throw fail("truncated blob " + name);
    std::istringstream blob(buf);
    try {
      a.blobs.emplace_back(name, read_tensor(blob));
    } catch (const Error& e) {
      throw fail("blob " + name + ": " + e.what());
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw fail("trailing bytes");
  return a;
}

namespace {

void put_model(Archive& a, const std::string& p, const GlobalModel& m) {
  a.set(p + ".coarse_rows", std::to_string(m.coarse_rows));
  a.set(p + ".coarse_cols", std::to_string(m.coarse_cols));
  a.set(p + ".lambda_w", m.lambda_w);
  a.blobs.emplace_back(p + ".B", Tensor::from_matrix(m.dictionary.B));
  a.blobs.emplace_back(p + ".T", Tensor::from_matrix(m.regressor.T));
  a.blobs.emplace_back(p + ".centers", Tensor::from_matrix(m.bank.centers));
  a.blobs.emplace_back(p + ".sigmas", Tensor::from_vector(m.bank.sigmas));
  a.blobs.emplace_back(p + ".mean_depth", Tensor::from_matrix(m.mean_depth.depth));
}

GlobalModel get_model(const Archive& a, const std::string& p) {
  GlobalModel m;
  m.coarse_rows = a.get_int(p + ".coarse_rows");
  m.coarse_cols = a.get_int(p + ".coarse_cols");
  m.lambda_w = a.get_double(p + ".lambda_w");
  m.dictionary.B = a.blob(p + ".B").to_matrix();
  m.regressor.T = a.blob(p + ".T").to_matrix();
  m.bank.centers = a.blob(p + ".centers").to_matrix();
  m.bank.sigmas = a.blob(p + ".sigmas").to_vector();
  m.mean_depth = DepthMap(a.blob(p + ".mean_depth").to_matrix());
  return m;
}

std::vector<std::string> words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

}  // namespace

void save_ensemble(const CropEnsemble& e, const std::filesystem::path& path) {
  e.validate();
  Archive a;
  a.kind = "ensemble";
  std::string names;
  for (const auto& n : e.geometry.names) names += (names.empty() ? "" : " ") + n;
  a.set("crops", names);
  a.set("gamma", e.geometry.gamma);
  a.set("squared_distance", e.geometry.squared_distance ? "1" : "0");
  for (const auto& n : e.geometry.names) {
    const auto& c = e.geometry.centers.at(n);
    a.set("center." + n, exact_text(c(0)) + " " + exact_text(c(1)));
  }
  for (const auto& n : e.geometry.names) put_model(a, n, e.models.at(n));
  write_archive(a, path);
}

CropEnsemble load_ensemble(const std::filesystem::path& path) {
  const Archive a = read_archive(path);
  if (a.kind != "ensemble") throw FormatError(path.string() + ": not an ensemble model");
  CropEnsemble e;
  e.geometry.names = words(a.get("crops"));
  e.geometry.gamma = a.get_double("gamma");
  e.geometry.squared_distance = a.get("squared_distance") == "1";
  for (const auto& n : e.geometry.names) {
    const auto xy = words(a.get("center." + n));
    if (xy.size() != 2) throw FormatError(path.string() + ": bad center for crop " + n);
    e.geometry.centers[n] = Eigen::Vector2d(parse_double(xy[0]), parse_double(xy[1]));
    e.models[n] = get_model(a, n);
  }
  e.validate();
  return e;
}

void save_refinement(const RefinementModel& m, const std::filesystem::path& path) {
  m.validate();
  Archive a;
  a.kind = "refinement";
  a.set("pi_rows", std::to_string(m.pi_rows));
  a.set("pi_cols", std::to_string(m.pi_cols));
  a.set("blocks", std::to_string(m.blocks.size()));
  for (std::size_t b = 0; b < m.blocks.size(); ++b) {
    const auto& blk = m.blocks[b];
    const std::string p = "block" + std::to_string(b);
    a.set(p + ".rows", std::to_string(blk.rows.begin) + " " + std::to_string(blk.rows.end));
    a.blobs.emplace_back(p + ".t_up", Tensor::from_vector(blk.t_up));
    a.blobs.emplace_back(p + ".centers", Tensor::from_matrix(blk.bank.centers));
    a.blobs.emplace_back(p + ".nu", Tensor::from_vector(blk.bank.sigmas));
  }
  write_archive(a, path);
}

RefinementModel load_refinement(const std::filesystem::path& path) {
  const Archive a = read_archive(path);
  if (a.kind != "refinement") throw FormatError(path.string() + ": not a refinement model");
  RefinementModel m;
  m.pi_rows = a.get_int("pi_rows");
  m.pi_cols = a.get_int("pi_cols");
  const long long count = a.get_int("blocks");
  for (long long b = 0; b < count; ++b) {
    const std::string p = "block" + std::to_string(b);
    const auto range = words(a.get(p + ".rows"));
    if (range.size() != 2) throw FormatError(path.string() + ": bad row range for " + p);
    RefinementBlock blk;
    blk.rows = {std::stoll(range[0]), std::stoll(range[1])};
    blk.t_up = a.blob(p + ".t_up").to_vector();
    blk.bank.centers = a.blob(p + ".centers").to_matrix();
    blk.bank.sigmas = a.blob(p + ".nu").to_vector();
    m.blocks.push_back(std::move(blk));
  }
  m.validate();
  return m;
}

}  // namespace cdl
