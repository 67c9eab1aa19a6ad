// SPDX-License-Identifier: Apache-2.0
//
// mimoloc: multipath-component localization toolkit for massive MIMO-OFDM CSI
// Copyright (C) 2026 The mimoloc authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include "mimoloc/common.hpp"

#include <Eigen/Dense>

#include <stdexcept>

namespace mimoloc
{

/// exp(-||a - b||^2 / s^2)
double gaussian_kernel(const Eigen::VectorXd &a, const Eigen::VectorXd &b, double scale);

/// Row-wise squared Euclidean distances between the rows of `a` and `b`.
Eigen::MatrixXd squared_distances(const Eigen::MatrixXd &a, const Eigen::MatrixXd &b);

struct SvrParams
{
    double C = 1.0;
    double epsilon = 0.1;
    double kernel_scale = 1.0;
    double tolerance = 1e-3; // maximal KKT violation at exit
    long max_iterations = 0; // 0: automatic, max(10^7, 100 n)
};

struct SvrFit
{
    Eigen::VectorXd beta; // alpha - alpha*, one per training point
    double bias = 0.0;
    double objective = 0.0; // dual objective in minimisation form
    long iterations = 0;
};

class SolverDidNotConverge : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/*
 Dual objective 0.5 beta' K beta - y' beta + epsilon |beta|_1, minimised over
 sum(beta) = 0 and |beta_i| <= C.
*/
double svr_dual_objective(const Eigen::MatrixXd &kernel, const Eigen::VectorXd &y, const Eigen::VectorXd &beta,
                          double epsilon);

/// SMO on a precomputed kernel matrix.
SvrFit solve_svr_dual(const Eigen::MatrixXd &kernel, const Eigen::VectorXd &y, const SvrParams &params);

/// Kernel expansion f(x) = sum_i beta_i k(x_i, x) + b over the support vectors.
struct SvrRegressor
{
    Eigen::MatrixXd support_vectors; // one row per support vector
    Eigen::VectorXd coefficients;
    double bias = 0.0;
    double kernel_scale = 1.0;

    double predict(const Eigen::VectorXd &x) const;
    Eigen::VectorXd predict(const Eigen::MatrixXd &rows) const;
};

/// Trains on rows of `x`; constant targets give a model without support vectors.
SvrRegressor train_regressor(const Eigen::MatrixXd &x, const Eigen::VectorXd &y, const SvrParams &params);

} // namespace mimoloc
