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

#include "mimoloc/svr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace mimoloc
{

double gaussian_kernel(const Eigen::VectorXd &a, const Eigen::VectorXd &b, double scale)
{
    return std::exp(-(a - b).squaredNorm() / (scale * scale));
}

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd &a, const Eigen::MatrixXd &b)
{
    if (a.cols() != b.cols())
        throw InvalidInput("feature dimensions differ");
    const Eigen::VectorXd na = a.rowwise().squaredNorm();
    const Eigen::VectorXd nb = b.rowwise().squaredNorm();
    Eigen::MatrixXd d = -2.0 * a * b.transpose();
    d.colwise() += na;
    d.rowwise() += nb.transpose();
    return d.cwiseMax(0.0);
}

double svr_dual_objective(const Eigen::MatrixXd &kernel, const Eigen::VectorXd &y, const Eigen::VectorXd &beta,
                          double epsilon)
{
    return 0.5 * beta.dot(kernel * beta) - y.dot(beta) + epsilon * beta.lpNorm<1>();
}

/*
 LIBSVM's formulation: 2n variables a_t in [0, C], t < n carry label +1
 (alpha), t >= n carry -1 (alpha*). Q_st = y_s y_t K(s mod n, t mod n),
 p = [eps - y; eps + y], constraint sum y_t a_t = 0. Working pairs come from
 the second-order selection rule.
*/
SvrFit solve_svr_dual(const Eigen::MatrixXd &kernel, const Eigen::VectorXd &y, const SvrParams &params)
{
    const Eigen::Index n = y.size();
    if (n < 1 || kernel.rows() != n || kernel.cols() != n)
        throw InvalidInput("kernel and target sizes differ");
    if (!(params.C > 0.0) || !(params.epsilon >= 0.0) || !(params.tolerance > 0.0))
        throw InvalidInput("SVR needs C > 0, epsilon >= 0 and a positive tolerance");

    const Eigen::Index l = 2 * n;
    const double C = params.C;
    constexpr double tau = 1e-12;
    auto sign = [n](Eigen::Index t) { return t < n ? 1.0 : -1.0; };
    auto idx = [n](Eigen::Index t) { return t < n ? t : t - n; };
    auto Q = [&](Eigen::Index s, Eigen::Index t) { return sign(s) * sign(t) * kernel(idx(s), idx(t)); };

    std::vector<double> alpha(static_cast<std::size_t>(l), 0.0);
    std::vector<double> grad(static_cast<std::size_t>(l), 0.0);
    for (Eigen::Index t = 0; t < n; ++t)
    {
        grad[std::size_t(t)] = params.epsilon - y[t];
        grad[std::size_t(t + n)] = params.epsilon + y[t];
    }
    auto is_upper = [&](Eigen::Index t) { return alpha[std::size_t(t)] >= C; };
    auto is_lower = [&](Eigen::Index t) { return alpha[std::size_t(t)] <= 0.0; };

    const long max_iter = params.max_iterations > 0 ? params.max_iterations : std::max<long>(10'000'000, 100 * long(n));
    long iter = 0;
    for (; iter < max_iter; ++iter)
    {
        // i: maximal violating index in I_up
        double gmax = -std::numeric_limits<double>::infinity();
        Eigen::Index i = -1;
        for (Eigen::Index t = 0; t < l; ++t)
        {
            const double yt = sign(t);
            const bool up = yt > 0 ? !is_upper(t) : !is_lower(t);
            if (up && -yt * grad[std::size_t(t)] >= gmax)
            {
                gmax = -yt * grad[std::size_t(t)];
                i = t;
            }
        }
        double gmin = std::numeric_limits<double>::infinity();
        Eigen::Index j = -1;
        double obj_min = std::numeric_limits<double>::infinity();
        for (Eigen::Index t = 0; t < l; ++t)
        {
            const double yt = sign(t);
            const bool low = yt > 0 ? !is_lower(t) : !is_upper(t);
            if (!low)
                continue;
            const double v = -yt * grad[std::size_t(t)];
            gmin = std::min(gmin, v);
            if (i >= 0 && v < gmax)
            {
                const double b = gmax - v;
                double a = kernel(idx(i), idx(i)) + kernel(idx(t), idx(t)) - 2.0 * sign(i) * yt * Q(i, t);
                if (a <= 0.0)
                    a = tau;
                const double o = -(b * b) / a;
                if (o <= obj_min)
                {
                    obj_min = o;
                    j = t;
                }
            }
        }
        if (i < 0 || j < 0 || gmax - gmin < params.tolerance)
            break;

        // two-variable subproblem, as in LIBSVM
        const std::size_t si = std::size_t(i), sj = std::size_t(j);
        const double yi = sign(i), yj = sign(j);
        const double qii = kernel(idx(i), idx(i)), qjj = kernel(idx(j), idx(j)), qij = Q(i, j);
        const double old_ai = alpha[si], old_aj = alpha[sj];
        if (yi != yj)
        {
            double quad = qii + qjj + 2.0 * qij;
            if (quad <= 0.0)
                quad = tau;
            const double delta = (-grad[si] - grad[sj]) / quad;
            const double diff = alpha[si] - alpha[sj];
            alpha[si] += delta;
            alpha[sj] += delta;
            if (diff > 0.0)
            {
                if (alpha[sj] < 0.0)
                {
                    alpha[sj] = 0.0;
                    alpha[si] = diff;
                }
            }
            else if (alpha[si] < 0.0)
            {
                alpha[si] = 0.0;
                alpha[sj] = -diff;
            }
            if (diff > 0.0)
            {
                if (alpha[si] > C)
                {
                    alpha[si] = C;
                    alpha[sj] = C - diff;
                }
            }
            else if (alpha[sj] > C)
            {
                alpha[sj] = C;
                alpha[si] = C + diff;
            }
        }
        else
        {
            double quad = qii + qjj - 2.0 * qij;
            if (quad <= 0.0)
                quad = tau;
            const double delta = (grad[si] - grad[sj]) / quad;
            const double sum = alpha[si] + alpha[sj];
            alpha[si] -= delta;
            alpha[sj] += delta;
            if (sum > C)
            {
                if (alpha[si] > C)
                {
                    alpha[si] = C;
                    alpha[sj] = sum - C;
                }
            }
            else if (alpha[sj] < 0.0)
            {
                alpha[sj] = 0.0;
                alpha[si] = sum;
            }
            if (sum > C)
            {
                if (alpha[sj] > C)
                {
                    alpha[sj] = C;
                    alpha[si] = sum - C;
                }
            }
            else if (alpha[si] < 0.0)
            {
                alpha[si] = 0.0;
                alpha[sj] = sum;
            }
        }

        const double dai = alpha[si] - old_ai, daj = alpha[sj] - old_aj;
        for (Eigen::Index t = 0; t < l; ++t)
            grad[std::size_t(t)] += Q(t, i) * dai + Q(t, j) * daj;
    }
    if (iter >= max_iter)
        throw SolverDidNotConverge("SMO reached its iteration limit");

    // rho from free variables, else the midpoint of the feasible interval
    double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
    long free = 0;
    for (Eigen::Index t = 0; t < l; ++t)
    {
        const double yg = sign(t) * grad[std::size_t(t)];
        if (is_upper(t))
        {
            if (sign(t) < 0)
                ub = std::min(ub, yg);
            else
                lb = std::max(lb, yg);
        }
        else if (is_lower(t))
        {
            if (sign(t) > 0)
                ub = std::min(ub, yg);
            else
                lb = std::max(lb, yg);
        }
        else
        {
            ++free;
            sum_free += yg;
        }
    }
    const double rho = free > 0 ? sum_free / double(free) : 0.5 * (ub + lb);

    SvrFit fit;
    fit.beta.resize(n);
    for (Eigen::Index t = 0; t < n; ++t)
        fit.beta[t] = alpha[std::size_t(t)] - alpha[std::size_t(t + n)];
    fit.bias = -rho;
    fit.objective = svr_dual_objective(kernel, y, fit.beta, params.epsilon);
    fit.iterations = iter;
    return fit;
}

double SvrRegressor::predict(const Eigen::VectorXd &x) const
{
    double f = bias;
    for (Eigen::Index i = 0; i < support_vectors.rows(); ++i)
        f += coefficients[i] * std::exp(-(support_vectors.row(i).transpose() - x).squaredNorm() /
                                        (kernel_scale * kernel_scale));
    return f;
}

Eigen::VectorXd SvrRegressor::predict(const Eigen::MatrixXd &rows) const
{
    Eigen::VectorXd out = Eigen::VectorXd::Constant(rows.rows(), bias);
    if (support_vectors.rows() == 0)
        return out;
    const Eigen::MatrixXd k =
        (-squared_distances(rows, support_vectors) / (kernel_scale * kernel_scale)).array().exp().matrix();
    out += k * coefficients;
    return out;
}

SvrRegressor train_regressor(const Eigen::MatrixXd &x, const Eigen::VectorXd &y, const SvrParams &params)
{
    if (x.rows() != y.size() || x.rows() < 1)
        throw InvalidInput("training features and targets differ in count");
    if (!(params.kernel_scale > 0.0))
        throw InvalidInput("kernel scale must be positive");
    SvrRegressor model;
    model.kernel_scale = params.kernel_scale;
    model.support_vectors.resize(0, x.cols());
    if ((y.array() == y[0]).all())
    {
        model.bias = y[0];
        return model;
    }

    const Eigen::MatrixXd kernel =
        (-squared_distances(x, x) / (params.kernel_scale * params.kernel_scale)).array().exp().matrix();
    const SvrFit fit = solve_svr_dual(kernel, y, params);

    std::vector<Eigen::Index> sv;
    for (Eigen::Index i = 0; i < fit.beta.size(); ++i)
        if (fit.beta[i] != 0.0)
            sv.push_back(i);
    model.support_vectors.resize(Eigen::Index(sv.size()), x.cols());
    model.coefficients.resize(Eigen::Index(sv.size()));
    for (std::size_t k = 0; k < sv.size(); ++k)
    {
        model.support_vectors.row(Eigen::Index(k)) = x.row(sv[k]);
        model.coefficients[Eigen::Index(k)] = fit.beta[sv[k]];
    }
    model.bias = fit.bias;
    return model;
}

} // namespace mimoloc
