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

#include <doctest.h>

#include <limits>
#include <random>

using namespace mimoloc;

namespace
{
Eigen::MatrixXd kernel_of(const Eigen::MatrixXd &x, double scale)
{
    return (-squared_distances(x, x) / (scale * scale)).array().exp().matrix();
}

/*
 Exhaustive oracle for tiny instances. Every variable is either at a bound
 (-C, 0, C) or free with a fixed sign; on each such face the problem is an
 equality-constrained QP solved exactly. The best feasible face point is the
 global minimum because the optimum is stationary on its own face.
*/
double enumerate_optimum(const Eigen::MatrixXd &K, const Eigen::VectorXd &y, double C, double eps)
{
    const int n = int(y.size());
    int total = 1;
    for (int i = 0; i < n; ++i)
        total *= 5;
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> state(std::size_t(n), 0);
    for (int code = 0; code < total; ++code)
    {
        int c = code;
        std::vector<int> free;
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(n);
        Eigen::VectorXd sign = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < n; ++i)
        {
            state[std::size_t(i)] = c % 5;
            c /= 5;
            switch (state[std::size_t(i)])
            {
            case 0: beta[i] = -C; break;
            case 1: sign[i] = -1; free.push_back(i); break;
            case 2: beta[i] = 0; break;
            case 3: sign[i] = 1; free.push_back(i); break;
            case 4: beta[i] = C; break;
            }
        }
        const int m = int(free.size());
        if (m == 0)
        {
            if (std::abs(beta.sum()) < 1e-12)
                best = std::min(best, svr_dual_objective(K, y, beta, eps));
            continue;
        }
        // [K_FF 1; 1' 0] [b_F; nu] = [y_F - eps s_F - K_FB b_B; -sum b_B]
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m + 1, m + 1);
        Eigen::VectorXd rhs(m + 1);
        const Eigen::VectorXd fixed_part = K * beta;
        for (int a = 0; a < m; ++a)
        {
            for (int b = 0; b < m; ++b)
                A(a, b) = K(free[std::size_t(a)], free[std::size_t(b)]);
            A(a, m) = 1.0;
            A(m, a) = 1.0;
            rhs[a] = y[free[std::size_t(a)]] - eps * sign[free[std::size_t(a)]] - fixed_part[free[std::size_t(a)]];
        }
        rhs[m] = -beta.sum();
        const Eigen::VectorXd sol = A.fullPivLu().solve(rhs);
        if (!(A * sol).isApprox(rhs, 1e-10))
            continue;
        bool ok = true;
        for (int a = 0; a < m && ok; ++a)
        {
            const double v = sol[a];
            const int i = free[std::size_t(a)];
            ok = v * sign[i] >= -1e-12 && std::abs(v) <= C + 1e-12;
            beta[i] = v;
        }
        if (ok)
            best = std::min(best, svr_dual_objective(K, y, beta, eps));
    }
    return best;
}

struct Instance
{
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
};

Instance random_instance(int n, int d, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Instance in{Eigen::MatrixXd(n, d), Eigen::VectorXd(n)};
    for (int i = 0; i < n; ++i)
    {
        for (int j = 0; j < d; ++j)
            in.x(i, j) = g(rng);
        in.y[i] = std::sin(in.x(i, 0)) + 0.3 * g(rng);
    }
    return in;
}
} // namespace

TEST_CASE("squared distances and kernel")
{
    Eigen::MatrixXd a(2, 2), b(1, 2);
    a << 0, 0, 3, 4;
    b << 0, 0;
    const auto d = squared_distances(a, b);
    CHECK(d(0, 0) == 0.0);
    CHECK(d(1, 0) == doctest::Approx(25.0));
    CHECK(gaussian_kernel(a.row(1).transpose(), b.row(0).transpose(), 5.0) == doctest::Approx(std::exp(-1.0)));
    CHECK_THROWS_AS(squared_distances(a, Eigen::MatrixXd(1, 3)), InvalidInput);
}

TEST_CASE("SMO matches the exhaustive oracle on small instances")
{
    for (std::uint64_t seed = 1; seed <= 12; ++seed)
    {
        const auto in = random_instance(6, 2, seed);
        for (double C : {0.3, 2.0, 50.0})
        {
            const auto K = kernel_of(in.x, 1.2);
            SvrParams p;
            p.C = C;
            p.epsilon = 0.05;
            p.tolerance = 1e-10;
            const auto fit = solve_svr_dual(K, in.y, p);
            const double oracle = enumerate_optimum(K, in.y, C, p.epsilon);
            CHECK(std::abs(fit.objective - oracle) <= 1e-8 * std::max(1.0, std::abs(oracle)));
            CHECK(std::abs(fit.beta.sum()) < 1e-10);
            CHECK(fit.beta.cwiseAbs().maxCoeff() <= C + 1e-12);
        }
    }
}

TEST_CASE("epsilon tube holds at the solution")
{
    const auto in = random_instance(20, 3, 99);
    SvrParams p;
    p.C = 5.0;
    p.epsilon = 0.1;
    p.tolerance = 1e-9;
    const auto K = kernel_of(in.x, 1.5);
    const auto fit = solve_svr_dual(K, in.y, p);
    const Eigen::VectorXd f = K * fit.beta + Eigen::VectorXd::Constant(20, fit.bias);
    for (Eigen::Index i = 0; i < 20; ++i)
    {
        const double r = f[i] - in.y[i];
        const double b = fit.beta[i];
        if (std::abs(b) < p.C - 1e-9)
            CHECK(std::abs(r) <= p.epsilon + 1e-6);
        if (std::abs(b) > 1e-9 && std::abs(b) < p.C - 1e-9)
            CHECK(std::abs(r) == doctest::Approx(p.epsilon).epsilon(1e-5));
        if (b > 1e-9)
            CHECK(r <= -p.epsilon + 1e-6); // pulled up from below
        if (b < -1e-9)
            CHECK(r >= p.epsilon - 1e-6);
    }
}

TEST_CASE("constant targets give a bias-only model")
{
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(10, 3);
    const auto m = train_regressor(x, Eigen::VectorXd::Constant(10, 3.0), SvrParams{});
    CHECK(m.support_vectors.rows() == 0);
    CHECK(m.predict(Eigen::VectorXd(Eigen::VectorXd::Random(3))) == 3.0);
    CHECK(m.predict(x).isApproxToConstant(3.0));
}

TEST_CASE("noise-free line stays inside the tube at training points")
{
    Eigen::MatrixXd x(15, 1);
    Eigen::VectorXd y(15);
    for (int i = 0; i < 15; ++i)
    {
        x(i, 0) = -1.0 + 2.0 * i / 14.0;
        y[i] = 0.7 * x(i, 0) + 0.2;
    }
    SvrParams p;
    p.C = 1e3;
    p.epsilon = 0.01;
    p.kernel_scale = 1.0;
    p.tolerance = 1e-10;
    const auto m = train_regressor(x, y, p);
    for (int i = 0; i < 15; ++i)
        CHECK(std::abs(m.predict(Eigen::VectorXd(x.row(i).transpose())) - y[i]) <= p.epsilon + 1e-6);
}

TEST_CASE("invalid inputs")
{
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 2);
    CHECK_THROWS_AS(train_regressor(x, Eigen::VectorXd::Zero(3), SvrParams{}), InvalidInput);
    SvrParams bad;
    bad.kernel_scale = 0.0;
    CHECK_THROWS_AS(train_regressor(x, Eigen::VectorXd::Random(4), bad), InvalidInput);
    SvrParams negative;
    negative.C = -1.0;
    CHECK_THROWS_AS(solve_svr_dual(Eigen::MatrixXd::Identity(4, 4), Eigen::VectorXd::Random(4), negative),
                    InvalidInput);
}
