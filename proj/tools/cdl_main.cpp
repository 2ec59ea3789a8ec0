#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cdl/config.hpp"
#include "cdl/errors.hpp"
#include "cdl/manifest.hpp"
#include "cdl/metrics.hpp"
#include "cdl/model_io.hpp"
#include "cdl/pipeline.hpp"
#include "cdl/spatial.hpp"
#include "cdl/synthetic.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace cdl;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string profile;
  std::string record;
  std::string model;
  std::string refine_model;
  std::string pred;
  std::string split = "test";
  std::string mode = "coupled,uncoupled,direct_regression";
  std::string sizes = "2,4,8,16";
};

struct Run {
  std::string command;
  RunConfig cfg;
  std::vector<fs::path> artifacts;
};

RunConfig resolve_config(const Options& o) {
  std::optional<std::string> profile;
  if (!o.profile.empty()) profile = o.profile;
  RunConfig cfg;
  if (!o.config.empty()) {
    cfg = load_config(o.config, profile);
  } else {
    cfg = default_config();
    if (profile) cfg.apply_profile(*profile);
  }
  if (o.seed) cfg.set_seed(*o.seed);
  if (!o.out.empty()) cfg.out_dir = o.out;
  cfg.validate();
  return cfg;
}

void need_out(const RunConfig& cfg) {
  if (cfg.out_dir.empty()) throw InputError("no output directory (--out or out_dir)");
  if (fs::exists(cfg.out_dir) && !fs::is_directory(cfg.out_dir)) {
    throw IoError("output path " + cfg.out_dir.string() + " exists and is not a directory");
  }
}

void make_out(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
  const fs::path probe = dir / ".write_probe";
  {
    std::ofstream f(probe);
    if (!f) throw IoError("output directory " + dir.string() + " is not writable");
  }
  fs::remove(probe);
}

Dataset load_checked(const RunConfig& cfg) {
  if (cfg.manifest.empty()) throw InputError("config does not name a manifest");
  DatasetManifest m = read_manifest(cfg.manifest);
  m.validate(true);
  return load_dataset(m);
}

const std::vector<Example>& split_of(const Dataset& d, const std::string& split) {
  if (split == "train") return d.train;
  if (split == "test") return d.test;
  if (split == "center") return d.centers;
  throw InputError("unknown split '" + split + "' (train, test, center)");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

json report_json(const MetricReport& r) {
  return json{{"rmse", r.rmse},
              {"abs_rel", r.abs_rel},
              {"log10", r.log10},
              {"sc_inv", r.sc_inv},
              {"threshold_125", r.threshold_125},
              {"pixel_count", r.pixel_count},
              {"clamped", r.clamped}};
}

std::vector<Eigen::Index> parse_sizes(const std::string& s) {
  std::vector<Eigen::Index> out;
  std::stringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(tok, &used);
      if (used != tok.size() || v < 1) throw InputError("");
      out.push_back(static_cast<Eigen::Index>(v));
    } catch (const std::exception&) {
      throw InputError("--sizes expects positive integers separated by commas, got '" + s + "'");
    }
  }
  if (out.empty()) throw InputError("--sizes is empty");
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

fs::path default_model(const RunConfig& cfg, const std::string& given, const char* name) {
  const fs::path p = given.empty() ? cfg.out_dir / name : fs::path(given);
  if (!fs::is_regular_file(p)) throw InputError("model file not found: " + p.string());
  return p;
}

void write_predictions(const std::vector<std::pair<std::string, DepthMap>>& preds, const fs::path& dir, Run& run) {
  fs::create_directories(dir);
  for (const auto& [id, d] : preds) {
    const fs::path p = dir / (id + ".cdlt");
    write_tensor(to_tensor(d), p);
    run.artifacts.push_back(p);
  }
}

// Verbs ---------------------------------------------------------------------

void cmd_synth(const Options&, Run& run) {
  RunConfig& cfg = run.cfg;
  cfg.synth.validate();
  need_out(cfg);
  const SyntheticData syn = generate_synthetic(cfg.synth);
  make_out(cfg.out_dir);
  write_dataset(syn.dataset, cfg.out_dir);
  const GroundTruthBundle& t = syn.truth;
  std::ostringstream c;
  c << "# synthetic dataset, seed " << cfg.synth.seed << "\n"
    << "profile = custom\n"
    << "manifest = manifest.txt\n"
    << "coarse_rows = " << t.coarse_rows << "\ncoarse_cols = " << t.coarse_cols << "\n"
    << "pi_rows = " << t.pi_rows << "\npi_cols = " << t.pi_cols << "\n"
    << "full_rows = " << t.full_rows << "\nfull_cols = " << t.full_cols << "\n"
    << "crop_size = " << std::max<Eigen::Index>(1, std::min(t.full_rows, t.full_cols) / 2) << "\n"
    << "train.m = " << cfg.synth.m_true << "\n"
    << "train.seed = " << cfg.train.seed << "\nrefine.seed = " << cfg.refine.seed << "\n"
    << "synth.seed = " << cfg.synth.seed << "\n"
    << "refine.n_centers = 64\n";
  write_text(cfg.out_dir / "config.txt", c.str());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(cfg.out_dir)) {
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), cfg.out_dir));
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::cout << f.generic_string() << "  " << fs::file_size(cfg.out_dir / f) << "\n";
    run.artifacts.push_back(cfg.out_dir / f);
  }
}

void cmd_train_global(const Options&, Run& run) {
  const RunConfig& cfg = run.cfg;
  need_out(cfg);
  const Dataset data = load_checked(cfg);
  if (data.train.empty()) throw InputError("manifest has no training examples");
  make_out(cfg.out_dir);
  std::vector<const Example*> train;
  for (const auto& ex : data.train) train.push_back(&ex);
  const EnsembleTraining t = train_ensemble(data, train, cfg);
  const fs::path model = cfg.out_dir / "global_model.cdlm";
  save_ensemble(t.ensemble, model);
  json traces = json::object();
  for (const auto& crop : t.ensemble.geometry.names) {
    traces[crop] = {{"init", t.init_traces.at(crop)}, {"J", t.j_traces.at(crop)}};
  }
  const fs::path trace_file = cfg.out_dir / "traces.json";
  write_text(trace_file, traces.dump(2) + "\n");
  run.artifacts = {model, trace_file};
}

void cmd_infer(const Options& o, Run& run) {
  const RunConfig& cfg = run.cfg;
  need_out(cfg);
  const fs::path model_path = default_model(cfg, o.model, "global_model.cdlm");
  const CropEnsemble ensemble = load_ensemble(model_path);
  const Dataset data = load_checked(cfg);
  const auto& examples = split_of(data, o.split);
  make_out(cfg.out_dir);
  std::vector<std::pair<std::string, DepthMap>> preds;
  for (const auto& ex : examples) preds.emplace_back(ex.id, global_full(ensemble, ex, cfg));
  write_predictions(preds, cfg.out_dir / "pred_global", run);
}

void cmd_train_refine(const Options&, Run& run) {
  const RunConfig& cfg = run.cfg;
  need_out(cfg);
  const Dataset data = load_checked(cfg);
  if (data.train.empty()) throw InputError("manifest has no training examples");
  make_out(cfg.out_dir);
  const RefinementTraining t = train_refinement_stage(data, cfg);
  const fs::path model = cfg.out_dir / "refine_model.cdlm";
  save_refinement(t.model, model);
  std::ostringstream folds;
  for (const auto& [id, fold] : t.plan.assignment) folds << id << " " << fold << "\n";
  const fs::path fold_file = cfg.out_dir / "folds.txt";
  write_text(fold_file, folds.str());
  run.artifacts = {model, fold_file};
}

void cmd_infer_refine(const Options& o, Run& run) {
  const RunConfig& cfg = run.cfg;
  need_out(cfg);
  const CropEnsemble ensemble = load_ensemble(default_model(cfg, o.model, "global_model.cdlm"));
  const RefinementModel refine = load_refinement(default_model(cfg, o.refine_model, "refine_model.cdlm"));
  if (refine.pi_rows != cfg.pi_rows || refine.pi_cols != cfg.pi_cols) {
    throw InputError("refinement model grid does not match pi_rows x pi_cols of the config");
  }
  const Dataset data = load_checked(cfg);
  const auto& examples = split_of(data, o.split);
  make_out(cfg.out_dir);
  std::vector<std::pair<std::string, DepthMap>> preds;
  for (const auto& ex : examples) preds.emplace_back(ex.id, refined_full(ensemble, refine, ex, cfg));
  write_predictions(preds, cfg.out_dir / "pred_refined", run);
}

void cmd_eval(const Options& o, Run& run) {
  const RunConfig& cfg = run.cfg;
  need_out(cfg);
  if (o.pred.empty()) throw InputError("eval needs --pred DIR");
  const Dataset data = load_checked(cfg);
  const auto& examples = split_of(data, o.split);
  std::vector<std::string> missing;
  std::vector<std::pair<const Example*, DepthMap>> pairs;
  for (const auto& ex : examples) {
    if (!ex.depth) {
      missing.push_back(ex.id + " (no ground truth)");
      continue;
    }
    const fs::path p = fs::path(o.pred) / (ex.id + ".cdlt");
    if (!fs::is_regular_file(p)) {
      missing.push_back(ex.id);
      continue;
    }
    pairs.emplace_back(&ex, depth_from_tensor(read_tensor(p)));
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += "\n  " + id;
    throw InputError("eval: missing prediction/ground-truth pairs:" + list);
  }
  if (pairs.empty()) throw InputError("eval: split '" + o.split + "' is empty");
  make_out(cfg.out_dir);
  MetricAccumulator pooled;
  json per = json::object();
  for (const auto& [ex, pred] : pairs) {
    MetricAccumulator one;
    one.add(resize_bilinear(pred, ex->depth->rows(), ex->depth->cols()), *ex->depth);
    per[ex->id] = report_json(one.report());
    pooled.merge(one);
  }
  const json report{{"split", o.split}, {"aggregate", report_json(pooled.report())}, {"examples", per}};
  const fs::path file = cfg.out_dir / "eval.json";
  write_text(file, report.dump(2) + "\n");
  std::cout << format_report(pooled.report());
  run.artifacts = {file};
}

void cmd_ablate(const Options& o, Run& run) {
  const RunConfig& cfg = run.cfg;
  need_out(cfg);
  std::vector<AblationMode> modes;
  for (const auto& m : split_list(o.mode)) modes.push_back(parse_ablation_mode(m));
  if (modes.empty()) throw InputError("--mode is empty");
  const Dataset data = load_checked(cfg);
  if (data.train.empty() || data.test.empty()) throw InputError("ablation needs train and test examples");
  make_out(cfg.out_dir);
  json out = json::object();
  std::ostringstream table;
  table << "mode rmse abs_rel log10 sc_inv threshold_125\n";
  for (const AblationMode mode : modes) {
    const AblationResult r = run_ablation(data, mode, cfg);
    out[to_string(mode)] = report_json(r.report);
    table << to_string(mode) << " " << exact_text(r.report.rmse) << " " << exact_text(r.report.abs_rel) << " "
          << exact_text(r.report.log10) << " " << exact_text(r.report.sc_inv) << " "
          << exact_text(r.report.threshold_125) << "\n";
  }
  const fs::path file = cfg.out_dir / "ablation.json";
  write_text(file, out.dump(2) + "\n");
  std::cout << table.str();
  run.artifacts = {file};
}

void cmd_sweep(const Options& o, Run& run) {
  const RunConfig& cfg = run.cfg;
  need_out(cfg);
  const std::vector<Eigen::Index> sizes = parse_sizes(o.sizes);
  const Dataset data = load_checked(cfg);
  if (data.train.empty()) throw InputError("manifest has no training examples");
  std::vector<DepthMap> depths;
  for (const auto& ex : data.train) {
    if (!ex.depth) throw InputError("example " + ex.id + " has no depth map");
    depths.push_back(resize_bilinear(*ex.depth, cfg.coarse_rows, cfg.coarse_cols));
  }
  make_out(cfg.out_dir);
  const auto points = dict_size_sweep(depths, sizes, cfg.train);
  json arr = json::array();
  for (const auto& p : points) {
    arr.push_back({{"m", p.m}, {"rmse", p.rmse}});
    std::cout << "m=" << p.m << " rmse=" << exact_text(p.rmse) << "\n";
  }
  const fs::path file = cfg.out_dir / "sweep.json";
  write_text(file, arr.dump(2) + "\n");
  run.artifacts = {file};
}

json run_record(const Run& run, double seconds, int status) {
  json artifacts = json::array();
  for (const auto& a : run.artifacts) artifacts.push_back(a.generic_string());
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(run.cfg.canonical_text())));
  return json{{"command", run.command},
              {"status", status},
              {"config_hash", hash},
              {"seeds", {{"train", run.cfg.train.seed}, {"refine", run.cfg.refine.seed}, {"synth", run.cfg.synth.seed}}},
              {"wall_time_s", seconds},
              {"artifacts", artifacts}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coupled depth-basis learning pipeline"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Config file (key = value lines)")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Replace every seed in the config");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--profile", o.profile, "indoor, outdoor or custom")
        ->check(CLI::IsMember({"indoor", "outdoor", "custom"}));
    sub->add_option("--record", o.record, "Also write the run record to this file");
  };

  using Verb = void (*)(const Options&, Run&);
  std::vector<std::pair<CLI::App*, Verb>> verbs;
  auto verb = [&](const char* name, const char* help, Verb fn) {
    CLI::App* sub = app.add_subcommand(name, help);
    common(sub);
    verbs.emplace_back(sub, fn);
    return sub;
  };
  verb("synth", "Write a synthetic dataset (manifest, tensors, config.txt)", cmd_synth);
  verb("train-global", "Train the per-crop global models", cmd_train_global);
  auto* infer = verb("infer", "Global depth predictions at full resolution", cmd_infer);
  infer->add_option("--model", o.model, "Global model file (default OUT/global_model.cdlm)");
  infer->add_option("--split", o.split, "Split to predict");
  verb("train-refine", "Cross-validated refinement training", cmd_train_refine);
  auto* infer_refine = verb("infer-refine", "Refined depth predictions at full resolution", cmd_infer_refine);
  infer_refine->add_option("--model", o.model, "Global model file (default OUT/global_model.cdlm)");
  infer_refine->add_option("--refine-model", o.refine_model, "Refinement model (default OUT/refine_model.cdlm)");
  infer_refine->add_option("--split", o.split, "Split to predict");
  auto* eval = verb("eval", "Evaluate predictions against ground truth", cmd_eval);
  eval->add_option("--pred", o.pred, "Directory of <id>.cdlt predictions")->required();
  eval->add_option("--split", o.split, "Split to evaluate");
  auto* ablate = verb("ablate", "Compare coupled, uncoupled and direct-regression global models", cmd_ablate);
  ablate->add_option("--mode", o.mode, "Comma-separated modes: coupled, uncoupled, direct_regression");
  auto* sweep = verb("sweep-dict", "Reconstruction RMSE against dictionary size", cmd_sweep);
  sweep->add_option("--sizes", o.sizes, "Ascending comma-separated dictionary sizes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  Run run;
  int status = 0;
  const auto start = std::chrono::steady_clock::now();
  try {
    for (const auto& [sub, fn] : verbs) {
      if (!sub->parsed()) continue;
      run.command = sub->get_name();
      run.cfg = resolve_config(o);
      fn(o, run);
    }
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (!e.trace().empty()) {
      std::cerr << "objective trace:";
      for (double v : e.trace()) std::cerr << " " << exact_text(v);
      std::cerr << "\n";
    }
    status = 2;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    status = 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    status = 1;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const json record = run_record(run, seconds, status);
  std::cout << record.dump() << "\n";
  if (!o.record.empty()) {
    try {
      write_text(o.record, record.dump(2) + "\n");
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      if (status == 0) status = 1;
    }
  }
  return status;
}
