#include <doctest.h>

#include "cdl/errors.hpp"
#include "cdl/synthetic.hpp"

using namespace cdl;

TEST_CASE("spec validation names the offending field") {
  auto message = [](SynthSpec s) {
    try {
      s.validate();
    } catch (const InputError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  SynthSpec s;
  s.sparsity = s.m_true + 1;
  CHECK(message(s).find("sparsity") != std::string::npos);
  s = SynthSpec{};
  s.m_true = s.p_low + 1;
  CHECK(message(s).find("m_true") != std::string::npos);
  s = SynthSpec{};
  s.noise_sigma = -1.0;
  CHECK(message(s).find("noise_sigma") != std::string::npos);
  CHECK(message(SynthSpec{}).empty());
}

TEST_CASE("coarse grid factorizes p_low") {
  SynthSpec s;
  const auto [r, c] = s.coarse_shape();
  CHECK(r * c == s.p_low);
  s.p_low = 13;
  const auto [r2, c2] = s.coarse_shape();
  CHECK(r2 * c2 == 13);
}

TEST_CASE("generation is a pure function of the spec") {
  SynthSpec s;
  s.n_train = 8;
  s.n_test = 4;
  const SyntheticData a = generate_synthetic(s), b = generate_synthetic(s);
  CHECK(a.truth.B == b.truth.B);
  CHECK(a.truth.coarse_train == b.truth.coarse_train);
  CHECK(a.dataset.train[3].depth->depth == b.dataset.train[3].depth->depth);
  CHECK(a.dataset.test[1].features.at("UL") == b.dataset.test[1].features.at("UL"));
  s.seed = 1;
  CHECK(generate_synthetic(s).truth.coarse_train != a.truth.coarse_train);
}

TEST_CASE("noiseless data is exactly base plus basis times true weights") {
  SynthSpec s;
  s.noise_sigma = 0.0;
  const SyntheticData syn = generate_synthetic(s);
  const GroundTruthBundle& t = syn.truth;
  const Eigen::MatrixXd rebuilt = (t.B * t.W_train).colwise() + t.base;
  CHECK((rebuilt - t.coarse_train).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(t.B.colwise().norm().maxCoeff() == doctest::Approx(1.0));
  CHECK(t.W_train.minCoeff() >= 0.0);
  CHECK(t.T.minCoeff() >= 0.0);
}

TEST_CASE("shapes, splits and positivity") {
  SynthSpec s;
  s.n_train = 10;
  s.n_test = 5;
  const SyntheticData syn = generate_synthetic(s);
  CHECK(syn.dataset.train.size() == 10);
  CHECK(syn.dataset.test.size() == 5);
  CHECK(syn.dataset.centers.size() == static_cast<std::size_t>(s.n_centers));
  CHECK(syn.dataset.crop_names.size() == 5);
  for (const auto& ex : syn.dataset.train) {
    REQUIRE(ex.depth);
    CHECK(ex.depth->rows() == syn.truth.full_rows);
    CHECK(ex.depth->cols() == syn.truth.full_cols);
    CHECK(ex.depth->depth.minCoeff() > 0.0);
    CHECK(ex.features.size() == 5);
    CHECK(ex.features.at("C").size() == s.feat_dim);
    CHECK(ex.conv_layers.size() == syn.dataset.layer_names.size());
    REQUIRE(ex.guide);
    CHECK(ex.guide->dims() == std::vector<std::uint64_t>{static_cast<std::uint64_t>(syn.truth.full_rows),
                                                         static_cast<std::uint64_t>(syn.truth.full_cols), 3});
  }
  CHECK(syn.truth.coarse_rows * syn.truth.coarse_cols == s.p_low);
}
