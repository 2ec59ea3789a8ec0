#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cdl/coupled_model.hpp"
#include "cdl/depth_map.hpp"
#include "cdl/metrics.hpp"

// Slow, independent reference implementations used only by the tests.
namespace cdl::oracle {

/// Accelerated projected gradient for min ||a - C w||^2 + lambda 1'w, w >= 0.
Eigen::VectorXd nn_lasso(const Eigen::MatrixXd& C, const Eigen::VectorXd& a, double lambda,
                         int max_iter = 200000, double tol = 1e-12);

/// Accelerated projected gradient for min ||D - B W||_F^2 with every column
/// of B in the unit ball. Columns whose row of W is zero stay at zero.
Eigen::MatrixXd dictionary(const Eigen::MatrixXd& D, const Eigen::MatrixXd& W, int max_iter = 200000,
                           double tol = 1e-13);

/// Accelerated gradient descent on lambda_r ||W - T Phi||^2 + lambda_T ||T||^2.
Eigen::MatrixXd ridge(const Eigen::MatrixXd& W, const Eigen::MatrixXd& Phi, double lambda_r,
                      double lambda_T, int max_iter = 200000, double tol = 1e-13);

double ridge_objective(const Eigen::MatrixXd& T, const Eigen::MatrixXd& W, const Eigen::MatrixXd& Phi,
                       double lambda_r, double lambda_T);

/// J written out term by term with explicit loops.
double objective_J(const Eigen::MatrixXd& B, const Eigen::MatrixXd& W, const Eigen::MatrixXd& T,
                   const Eigen::MatrixXd& D, const Eigen::MatrixXd& Phi, const Regularization& reg);

/// Two-pass metrics over an explicit pixel list, long double accumulation.
MetricReport metrics(const std::vector<std::pair<double, double>>& pred_gt);

/// Bilinear resize straight from the pixel-center mapping formula.
Grid bilinear(const Grid& src, Eigen::Index rows, Eigen::Index cols);

Eigen::MatrixXd gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0);
double uniform(std::mt19937_64& rng, double lo, double hi);
Eigen::Index uniform_int(std::mt19937_64& rng, Eigen::Index lo, Eigen::Index hi);

}  // namespace cdl::oracle
