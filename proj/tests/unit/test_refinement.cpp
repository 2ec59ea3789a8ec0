#include <doctest.h>

#include <random>
#include <set>

#include "cdl/errors.hpp"
#include "cdl/refinement.hpp"
#include "oracles.hpp"

using namespace cdl;

namespace {

Tensor random_layer(std::mt19937_64& rng, std::uint64_t h, std::uint64_t w, std::uint64_t ch) {
  Tensor t({h, w, ch});
  for (auto& v : t.data()) v = static_cast<float>(oracle::uniform(rng, -1, 1));
  return t;
}

std::vector<RefinementExample> make_examples(std::mt19937_64& rng, int n, Eigen::Index rows, Eigen::Index cols) {
  std::vector<RefinementExample> out;
  for (int i = 0; i < n; ++i) {
    RefinementExample ex;
    ex.hyper.layers = {random_layer(rng, 4, 5, 3), random_layer(rng, 2, 3, 2)};
    ex.hyper.target_rows = rows;
    ex.hyper.target_cols = cols;
    ex.global = DepthMap(Grid(oracle::gaussian(rng, rows, cols).array() + 3.0));
    Grid target = 1.1 * ex.global.depth;
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) target(r, c) += 0.2 * hypercolumn_at(ex.hyper, r, c)(0);
    }
    ex.target = DepthMap(target);
    out.push_back(std::move(ex));
  }
  return out;
}

RefinementConfig small_config() {
  RefinementConfig cfg;
  cfg.n_centers = 6;
  cfg.samples_per_block = 200;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST_CASE("row blocks cover the grid exactly") {
  for (Eigen::Index rows : {1, 7, 8, 9, 16, 50, 61}) {
    for (Eigen::Index h : {0, 1, 3, 8, 100}) {
      const auto blocks = block_partition(rows, h);
      REQUIRE(!blocks.empty());
      CHECK(blocks.front().begin == 0);
      CHECK(blocks.back().end == rows);
      for (std::size_t i = 0; i < blocks.size(); ++i) {
        CHECK(blocks[i].end > blocks[i].begin);
        if (i > 0) CHECK(blocks[i].begin == blocks[i - 1].end);
      }
    }
  }
  for (Eigen::Index rows : {8, 12, 20, 23, 64, 127}) CHECK(block_partition(rows, 0).size() == 8);
  CHECK(block_partition(5, 0).size() == 5);
  CHECK(block_partition(20, 0).back().begin == 14);
  CHECK(block_partition(70, 0).back().end - block_partition(70, 0).back().begin == 14);
}

TEST_CASE("local ridge solution zeroes the gradient") {
  std::mt19937_64 rng(61);
  const Eigen::Index dim = 7;
  LocalRidge acc(dim);
  Eigen::MatrixXd F_all(dim, 0);
  Eigen::VectorXd y_all(0);
  for (int chunk = 0; chunk < 3; ++chunk) {
    Eigen::MatrixXd F = oracle::gaussian(rng, dim, 20);
    F.row(0).setOnes();
    const Eigen::VectorXd y = oracle::gaussian(rng, 20, 1);
    acc.add(F, y);
    F_all.conservativeResize(dim, F_all.cols() + 20);
    F_all.rightCols(20) = F;
    y_all.conservativeResize(y_all.size() + 20);
    y_all.tail(20) = y;
  }
  CHECK(acc.count() == 60);
  CHECK((acc.gram() - F_all * F_all.transpose()).cwiseAbs().maxCoeff() < 1e-10);
  const double lt = 0.3;
  const Eigen::VectorXd t = acc.solve(lt, true);
  CHECK(acc.gradient(t, lt, true).norm() < 1e-9 * (1.0 + t.norm()));
  Eigen::VectorXd direct_grad = -2.0 * F_all * (y_all - F_all.transpose() * t);
  direct_grad.tail(dim - 2) += 2.0 * lt * t.tail(dim - 2);
  CHECK(direct_grad.norm() < 1e-8);

  const Eigen::VectorXd t0 = acc.solve(lt, false);
  CHECK(t0(1) == 0.0);
  const Eigen::VectorXd g0 = acc.gradient(t0, lt, false);
  CHECK(g0(0) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(g0.tail(dim - 2).norm() < 1e-8);
}

TEST_CASE("local feature layout") {
  CenterBank bank = CenterBank::with_heuristic_sigma((Eigen::MatrixXd(2, 2) << 0, 0, 1, 1).finished());
  const Eigen::VectorXd f = build_local_feature(Eigen::Vector2d(0, 0), 2.5, bank);
  REQUIRE(f.size() == 4);
  CHECK(f(0) == 1.0);
  CHECK(f(1) == 2.5);
  CHECK(f(2) == doctest::Approx(1.0));
  CHECK(f.tail(2) == rbf_vector(Eigen::Vector2d(0, 0), bank));
}

TEST_CASE("training is deterministic and improves on the raw global estimate") {
  std::mt19937_64 rng(62);
  const auto train = make_examples(rng, 4, 16, 10);
  RefinementConfig cfg = small_config();
  const RefinementModel a = train_refinement(train, cfg, 16, 10);
  cfg.threads = 3;
  const RefinementModel b = train_refinement(train, cfg, 16, 10);
  REQUIRE(a.blocks.size() == b.blocks.size());
  CHECK(a.blocks.size() == 8);
  for (std::size_t i = 0; i < a.blocks.size(); ++i) {
    CHECK(a.blocks[i].t_up == b.blocks[i].t_up);
    CHECK(a.blocks[i].bank.centers == b.blocks[i].bank.centers);
  }
  CHECK_NOTHROW(a.validate());
  double raw = 0.0, refined = 0.0;
  for (const auto& ex : train) {
    const DepthMap p = predict_intermediate(a, ex.hyper, ex.global);
    raw += (ex.global.depth - ex.target.depth).squaredNorm();
    refined += (p.depth - ex.target.depth).squaredNorm();
  }
  CHECK(refined < 0.5 * raw);
  CHECK(&a.block_for_row(0) == &a.blocks.front());
  CHECK(&a.block_for_row(15) == &a.blocks.back());
}

TEST_CASE("dropping the global feature keeps its coefficient at zero") {
  std::mt19937_64 rng(63);
  const auto train = make_examples(rng, 3, 8, 6);
  RefinementConfig cfg = small_config();
  cfg.use_global_feature = false;
  cfg.block_height = 4;
  const RefinementModel m = train_refinement(train, cfg, 8, 6);
  CHECK(m.blocks.size() == 2);
  for (const auto& b : m.blocks) CHECK(b.t_up(1) == 0.0);
}

TEST_CASE("single model shares one regressor") {
  std::mt19937_64 rng(64);
  const auto train = make_examples(rng, 3, 8, 6);
  RefinementConfig cfg = small_config();
  cfg.single_model = true;
  const RefinementModel m = train_refinement(train, cfg, 8, 6);
  for (const auto& b : m.blocks) CHECK(b.t_up == m.blocks.front().t_up);
}

TEST_CASE("fold plans") {
  std::vector<std::string> ids;
  for (int i = 0; i < 23; ++i) ids.push_back("id" + std::to_string(i));
  const FoldPlan p = make_fold_plan(ids, 5, 9);
  CHECK_NOTHROW(p.validate());
  CHECK(p.assignment.size() == ids.size());
  std::set<std::string> seen;
  for (int f = 0; f < 5; ++f) {
    const auto mem = p.members(f);
    CHECK((mem.size() == 4 || mem.size() == 5));
    seen.insert(mem.begin(), mem.end());
  }
  CHECK(seen.size() == ids.size());
  CHECK(make_fold_plan(ids, 5, 9).assignment == p.assignment);
  CHECK(make_fold_plan(ids, 5, 10).assignment != p.assignment);
  CHECK_THROWS_AS(make_fold_plan(ids, 1, 0), InputError);
  CHECK_THROWS_AS(make_fold_plan({"a", "b"}, 3, 0), InputError);
}

TEST_CASE("config and model validation") {
  RefinementConfig cfg;
  cfg.n_centers = 0;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg = RefinementConfig{};
  cfg.lambda_t = -1.0;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  RefinementModel m;
  CHECK_THROWS(m.validate());
}
