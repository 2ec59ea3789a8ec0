#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

Run cli(const std::string& args) {
  const std::string cmd = std::string(CDL_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::array<char, 4096> buf{};
  while (const std::size_t n = std::fread(buf.data(), 1, buf.size(), p)) r.output.append(buf.data(), n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path root() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / ("cdl_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

// Small synthetic dataset shared by the cases below.
const fs::path& dataset() {
  static const fs::path ds = [] {
    const fs::path cfg = root() / "small.cfg";
    write(cfg, "synth.n_train = 12\nsynth.n_test = 3\nsynth.n_centers = 4\n");
    const fs::path d = root() / "ds";
    const Run r = cli("synth --config " + cfg.string() + " --seed 3 --out " + d.string());
    REQUIRE_MESSAGE(r.code == 0, r.output);
    std::ofstream(d / "config.txt", std::ios::app) << "train.m = 4\ntrain.max_outer = 3\n";
    return d;
  }();
  return ds;
}

std::string conf() { return " --config " + (dataset() / "config.txt").string(); }

std::vector<std::string> test_ids() {
  std::vector<std::string> ids;
  std::ifstream in(dataset() / "manifest.txt");
  std::string line;
  while (std::getline(in, line)) {
    if (line.find("split=test") == std::string::npos) continue;
    const auto a = line.find("id=") + 3;
    ids.push_back(line.substr(a, line.find(' ', a) - a));
  }
  return ids;
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(cli("").code != 0);
  CHECK(cli("frobnicate").code == 1);
  CHECK(cli("eval --out " + (root() / "x").string()).code == 1);
}

TEST_CASE("an invalid synthetic spec names the offending field") {
  const fs::path cfg = root() / "bad.cfg";
  write(cfg, "synth.n_train = 0\n");
  const fs::path out = root() / "bad_out";
  const Run r = cli("synth --config " + cfg.string() + " --out " + out.string());
  CHECK(r.code == 1);
  CHECK(r.output.find("n_train") != std::string::npos);
  CHECK(!fs::exists(out));
}

TEST_CASE("synth is deterministic and emits a run record") {
  const fs::path cfg = root() / "small.cfg";
  dataset();
  const fs::path again = root() / "ds_again";
  const fs::path rec = root() / "record.json";
  const Run r = cli("synth --config " + cfg.string() + " --seed 3 --out " + again.string() + " --record " + rec.string());
  REQUIRE(r.code == 0);
  for (const auto& e : fs::recursive_directory_iterator(dataset())) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), dataset());
    if (rel == "config.txt") continue;
    CHECK_MESSAGE(slurp(e.path()) == slurp(again / rel), rel.string());
  }
  const auto j = nlohmann::json::parse(slurp(rec));
  CHECK(j.at("command") == "synth");
  CHECK(j.at("status") == 0);
  CHECK(j.contains("config_hash"));
}

TEST_CASE("a missing input fails before anything is written") {
  const fs::path broken = root() / "broken";
  fs::create_directories(broken);
  for (const auto& e : fs::directory_iterator(dataset())) {
    fs::copy(e.path(), broken / e.path().filename(), fs::copy_options::recursive);
  }
  fs::remove(broken / "tensors" / "train0001_feat_C.cdlt");
  const fs::path out = root() / "never";
  const Run r = cli("train-global --config " + (broken / "config.txt").string() + " --out " + out.string());
  CHECK(r.code == 1);
  CHECK(r.output.find("train0001_feat_C") != std::string::npos);
  CHECK(!fs::exists(out));
}

TEST_CASE("eval scores copied ground truth as exact") {
  const fs::path pred = root() / "gt_pred";
  fs::create_directories(pred);
  const auto ids = test_ids();
  REQUIRE(ids.size() == 3);
  for (const auto& id : ids) fs::copy_file(dataset() / "tensors" / (id + "_depth.cdlt"), pred / (id + ".cdlt"));
  const fs::path out = root() / "eval_gt";
  const Run r = cli("eval" + conf() + " --pred " + pred.string() + " --out " + out.string());
  REQUIRE_MESSAGE(r.code == 0, r.output);
  const auto j = nlohmann::json::parse(slurp(out / "eval.json"));
  const auto& m = j.at("aggregate");
  CHECK(m.at("rmse").get<double>() == 0.0);
  CHECK(m.at("threshold_125").get<double>() == 1.0);

  fs::remove(pred / (ids.front() + ".cdlt"));
  const Run missing = cli("eval" + conf() + " --pred " + pred.string() + " --out " + (root() / "eval_missing").string());
  CHECK(missing.code == 1);
  CHECK(missing.output.find(ids.front()) != std::string::npos);
}

TEST_CASE("train, infer and eval end to end") {
  const fs::path out = root() / "run";
  Run r = cli("train-global" + conf() + " --out " + out.string());
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(fs::exists(out / "global_model.cdlm"));
  CHECK(fs::exists(out / "traces.json"));
  r = cli("infer" + conf() + " --out " + out.string());
  REQUIRE_MESSAGE(r.code == 0, r.output);
  for (const auto& id : test_ids()) CHECK(fs::exists(out / "pred_global" / (id + ".cdlt")));
  r = cli("eval" + conf() + " --pred " + (out / "pred_global").string() + " --out " + out.string());
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(r.output.find("rmse") != std::string::npos);
  const auto traces = nlohmann::json::parse(slurp(out / "traces.json"));
  CHECK(!traces.empty());
}
