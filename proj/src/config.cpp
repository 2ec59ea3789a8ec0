#include "cdl/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "cdl/errors.hpp"
#include "cdl/model_io.hpp"
#include "cdl/parallel.hpp"

namespace cdl {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw InputError("config: " + key + " expects an integer, got '" + v + "'");
}

double to_real(const std::string& key, const std::string& v) {
  try {
    return parse_double(v);
  } catch (const Error&) {
    throw InputError("config: " + key + " expects a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InputError("config: " + key + " expects true or false, got '" + v + "'");
}

std::string text(bool b) { return b ? "true" : "false"; }
std::string text(long long x) { return std::to_string(x); }
std::string text(double x) { return exact_text(x); }

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::filesystem::path&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define CDL_INT(expr)                                                                              \
  Field {                                                                                          \
    [](RunConfig& c, const std::string& v, const std::filesystem::path&) {                         \
      c.expr = static_cast<std::decay_t<decltype(c.expr)>>(to_int(#expr, v));                     \
    },                                                                                             \
        [](const RunConfig& c) { return text(static_cast<long long>(c.expr)); }                    \
  }
#define CDL_REAL(expr)                                                                             \
  Field {                                                                                          \
    [](RunConfig& c, const std::string& v, const std::filesystem::path&) { c.expr = to_real(#expr, v); }, \
        [](const RunConfig& c) { return text(static_cast<double>(c.expr)); }                       \
  }
#define CDL_BOOL(expr)                                                                             \
  Field {                                                                                          \
    [](RunConfig& c, const std::string& v, const std::filesystem::path&) { c.expr = to_bool(#expr, v); }, \
        [](const RunConfig& c) { return text(static_cast<bool>(c.expr)); }                         \
  }
#define CDL_OPT_REAL(expr)                                                                         \
  Field {                                                                                          \
    [](RunConfig& c, const std::string& v, const std::filesystem::path&) {                         \
      if (v == "auto") {                                                                           \
        c.expr.reset();                                                                            \
      } else {                                                                                     \
        c.expr = to_real(#expr, v);                                                                \
      }                                                                                            \
    },                                                                                             \
        [](const RunConfig& c) { return c.expr ? text(*c.expr) : std::string("auto"); }            \
  }
#define CDL_PATH(expr)                                                                             \
  Field {                                                                                          \
    [](RunConfig& c, const std::string& v, const std::filesystem::path& base) {                    \
      const std::filesystem::path p(v);                                                            \
      c.expr = v.empty() || p.is_absolute() || base.empty() ? p : base / p;                      \
    },                                                                                             \
        [](const RunConfig& c) { return c.expr.generic_string(); }                                 \
  }

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table{
      {"manifest", CDL_PATH(manifest)},
      {"out_dir", CDL_PATH(out_dir)},
      {"coarse_rows", CDL_INT(coarse_rows)},
      {"coarse_cols", CDL_INT(coarse_cols)},
      {"pi_rows", CDL_INT(pi_rows)},
      {"pi_cols", CDL_INT(pi_cols)},
      {"full_rows", CDL_INT(full_rows)},
      {"full_cols", CDL_INT(full_cols)},
      {"crop_size", CDL_INT(crop_size)},
      {"gamma", CDL_OPT_REAL(gamma)},
      {"merge_squared_distance", CDL_BOOL(merge_squared_distance)},
      {"normalize_features", CDL_BOOL(normalize_features)},
      {"mirrored_centers", CDL_BOOL(mirrored_centers)},
      {"colorize", CDL_BOOL(colorize)},
      {"cv_folds", CDL_INT(cv_folds)},
      {"threads", CDL_INT(threads)},
      {"train.m", CDL_INT(train.m)},
      {"train.lambda_w", CDL_OPT_REAL(train.lambda_w)},
      {"train.lambda_r", CDL_REAL(train.lambda_r)},
      {"train.lambda_T", CDL_REAL(train.lambda_T)},
      {"train.max_outer", CDL_INT(train.max_outer)},
      {"train.max_init", CDL_INT(train.max_init)},
      {"train.rel_tol", CDL_REAL(train.rel_tol)},
      {"train.seed", CDL_INT(train.seed)},
      {"lasso.tol", CDL_REAL(train.lasso_tol)},
      {"lasso.max_iter", CDL_INT(train.lasso_max_iter)},
      {"color.seed_penalty", CDL_REAL(color.seed_penalty)},
      {"color.neighborhood", CDL_INT(color.neighborhood)},
      {"color.variance_floor", CDL_REAL(color.variance_floor)},
      {"refine.n_centers", CDL_INT(refine.n_centers)},
      {"refine.lambda_t", CDL_REAL(refine.lambda_t)},
      {"refine.block_height", CDL_INT(refine.block_height)},
      {"refine.seed", CDL_INT(refine.seed)},
      {"refine.samples_per_block", CDL_INT(refine.samples_per_block)},
      {"refine.kmeans_max_iter", CDL_INT(refine.kmeans_max_iter)},
      {"refine.nu", CDL_OPT_REAL(refine.nu)},
      {"refine.single_model", CDL_BOOL(refine.single_model)},
      {"refine.use_global_feature", CDL_BOOL(refine.use_global_feature)},
      {"synth.n_train", CDL_INT(synth.n_train)},
      {"synth.n_test", CDL_INT(synth.n_test)},
      {"synth.p_low", CDL_INT(synth.p_low)},
      {"synth.m_true", CDL_INT(synth.m_true)},
      {"synth.feat_dim", CDL_INT(synth.feat_dim)},
      {"synth.sparsity", CDL_INT(synth.sparsity)},
      {"synth.noise_sigma", CDL_REAL(synth.noise_sigma)},
      {"synth.seed", CDL_INT(synth.seed)},
      {"synth.n_prototypes", CDL_INT(synth.n_prototypes)},
      {"synth.n_centers", CDL_INT(synth.n_centers)},
      {"synth.spread", CDL_REAL(synth.spread)},
      {"synth.crop_noise", CDL_REAL(synth.crop_noise)},
      {"synth.amplitude", CDL_REAL(synth.amplitude)},
      {"synth.local_amplitude", CDL_REAL(synth.local_amplitude)},
      {"synth.pi_factor", CDL_INT(synth.pi_factor)},
      {"synth.full_factor", CDL_INT(synth.full_factor)},
      {"synth.hyper_channels", CDL_INT(synth.hyper_channels)},
  };
  return table;
}

}  // namespace

void RunConfig::apply_profile(const std::string& name) {
  if (name == "indoor") {
    coarse_rows = 32, coarse_cols = 43, pi_rows = 128, pi_cols = 172, full_rows = 427, full_cols = 561;
    train.m = 48;
  } else if (name == "outdoor") {
    coarse_rows = 32, coarse_cols = 156, pi_rows = 64, pi_cols = 311, full_rows = 256, full_cols = 1242;
    train.m = 96;
  } else if (name != "custom") {
    throw InputError("config: unknown profile '" + name + "' (indoor, outdoor, custom)");
  }
  if (name != "custom") crop_size = 227;
  profile = name;
}

void RunConfig::validate() const {
  if (coarse_rows < 1 || coarse_cols < 1) throw InputError("config: coarse_rows and coarse_cols must be >= 1");
  if (pi_rows < 1 || pi_cols < 1) throw InputError("config: pi_rows and pi_cols must be >= 1");
  if (full_rows < 1 || full_cols < 1) throw InputError("config: full_rows and full_cols must be >= 1");
  if (crop_size < 1 || crop_size > std::min(full_rows, full_cols)) {
    throw InputError("config: crop_size must lie in [1, min(full_rows, full_cols)]");
  }
  if (gamma && !(*gamma > 0.0)) throw InputError("config: gamma must be > 0");
  if (cv_folds < 2) throw InputError("config: cv_folds must be >= 2");
  if (threads < 0) throw InputError("config: threads must be >= 0 (0 = all cores)");
  train.validate();
  color.validate();
  refine.validate();
}

int RunConfig::worker_threads() const { return threads > 0 ? threads : default_threads(); }

void RunConfig::set_seed(std::uint64_t seed) {
  train.seed = seed;
  refine.seed = seed;
  synth.seed = seed;
}

std::string RunConfig::canonical_text() const {
  std::ostringstream out;
  out << "profile = " << profile << "\n";
  for (const auto& [key, f] : fields()) out << key << " = " << f.get(*this) << "\n";
  return out.str();
}

RunConfig default_config() {
  RunConfig c;
  c.apply_profile("indoor");
  return c;
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir,
                       const std::optional<std::string>& profile) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::optional<std::string> file_profile;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InputError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "profile") {
      file_profile = value;
      continue;
    }
    if (!fields().count(key)) throw InputError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    entries.emplace_back(key, value);
  }
  RunConfig c;
  c.apply_profile(profile.value_or(file_profile.value_or("indoor")));
  for (const auto& [key, value] : entries) fields().at(key).set(c, value, base_dir);
  return c;
}

RunConfig load_config(const std::filesystem::path& path, const std::optional<std::string>& profile) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path(), profile);
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace cdl
