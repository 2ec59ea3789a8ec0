#include <doctest.h>

#include <random>

#include "cdl/errors.hpp"
#include "cdl/kernel.hpp"
#include "oracles.hpp"

using namespace cdl;

TEST_CASE("rbf vector follows the Gaussian formula") {
  std::mt19937_64 rng(21);
  CenterBank bank{oracle::gaussian(rng, 5, 3), Eigen::VectorXd::LinSpaced(5, 0.5, 2.5)};
  const Eigen::VectorXd f = oracle::gaussian(rng, 3, 1);
  const Eigen::VectorXd phi = rbf_vector(f, bank);
  for (Eigen::Index j = 0; j < 5; ++j) {
    const double d2 = (f - bank.centers.row(j).transpose()).squaredNorm();
    CHECK(phi(j) == doctest::Approx(std::exp(-d2 / (2 * bank.sigmas(j) * bank.sigmas(j)))));
  }
  CHECK(rbf_vector(bank.centers.row(2).transpose(), bank)(2) == 1.0);

  const Eigen::MatrixXd F = oracle::gaussian(rng, 3, 4);
  const Eigen::MatrixXd Phi = rbf_matrix(F, bank);
  for (Eigen::Index i = 0; i < 4; ++i) CHECK((Phi.col(i) - rbf_vector(F.col(i), bank)).norm() < 1e-15);
  CHECK(Phi.minCoeff() > 0.0);
  CHECK(Phi.maxCoeff() <= 1.0);
}

TEST_CASE("sigma heuristic is half the diameter") {
  Eigen::MatrixXd c(3, 2);
  c << 0, 0, 3, 4, 1, 1;
  CHECK(sigma_heuristic(c) == doctest::Approx(2.5));
  const CenterBank bank = CenterBank::with_heuristic_sigma(c);
  CHECK(bank.sigmas.size() == 3);
  CHECK(bank.sigmas.maxCoeff() == doctest::Approx(2.5));
}

TEST_CASE("bank validation") {
  CenterBank bank{Eigen::MatrixXd::Zero(2, 3), Eigen::VectorXd::Ones(3)};
  CHECK_THROWS_AS(bank.validate(), InputError);
  bank.sigmas = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(bank.validate(), InputError);
}

TEST_CASE("k-means is deterministic and descends") {
  std::mt19937_64 rng(22);
  Eigen::MatrixXd pts(90, 2);
  for (int i = 0; i < 90; ++i) {
    const double cx = (i % 3) * 10.0;
    pts.row(i) << cx + oracle::uniform(rng, -1, 1), oracle::uniform(rng, -1, 1);
  }
  const KMeansResult a = kmeans(pts, 3, 5), b = kmeans(pts, 3, 5);
  CHECK(a.centroids == b.centroids);
  for (std::size_t k = 1; k < a.inertia_trace.size(); ++k) {
    CHECK(a.inertia_trace[k] <= a.inertia_trace[k - 1] + 1e-9);
  }
  Eigen::VectorXd xs = a.centroids.col(0);
  std::sort(xs.data(), xs.data() + xs.size());
  CHECK(xs(0) == doctest::Approx(0.0).epsilon(0.5));
  CHECK(xs(1) == doctest::Approx(10.0).epsilon(0.05));
  CHECK(xs(2) == doctest::Approx(20.0).epsilon(0.05));
}

TEST_CASE("k-means with one cluster per point has zero inertia") {
  std::mt19937_64 rng(23);
  const Eigen::MatrixXd pts = oracle::gaussian(rng, 6, 3);
  const KMeansResult r = kmeans(pts, 6, 1);
  CHECK(r.inertia_trace.back() == doctest::Approx(0.0));
  CHECK_THROWS_AS(kmeans(pts, 7, 1), InputError);
}

TEST_CASE("pixel-center coordinate mapping") {
  CHECK(source_coordinate(3, 10, 10) == 3.0);
  CHECK(source_coordinate(0, 4, 2) == doctest::Approx(0.0));
  CHECK(source_coordinate(1, 4, 2) == doctest::Approx(0.25));
  CHECK(source_coordinate(3, 4, 2) == doctest::Approx(1.0));
}

TEST_CASE("hypercolumns concatenate bilinear samples of each layer") {
  Tensor a({2, 2, 1}, {0.f, 1.f, 2.f, 3.f});
  Tensor b({1, 1, 2}, {5.f, 7.f});
  const HypercolumnField field{{a, b}, 4, 4};
  CHECK(field.channels() == 3);
  const Eigen::VectorXd h = hypercolumn_at(field, 0, 0);
  REQUIRE(h.size() == 3);
  CHECK(h(0) == doctest::Approx(0.0));
  CHECK(h(1) == 5.0);
  CHECK(h(2) == 7.0);
  CHECK(hypercolumn_at(field, 3, 3)(0) == doctest::Approx(3.0));
  CHECK(hypercolumn_at(field, 1, 1)(0) == doctest::Approx(0.75));
  const HypercolumnField same{{a}, 2, 2};
  CHECK(hypercolumn_at(same, 1, 0)(0) == 2.0);
}
