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

#include "mimoloc/geo_baselines.hpp"

#include <cmath>
#include <vector>

namespace mimoloc
{

namespace
{
double condition_number(const Eigen::MatrixXd &a)
{
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    const auto &s = svd.singularValues();
    if (s.size() == 0 || s[s.size() - 1] <= 0.0)
        return std::numeric_limits<double>::infinity();
    return s[0] / s[s.size() - 1];
}
} // namespace

PositionFix triangulate_aoa(std::span<const AnchorObservation> observations, double max_condition)
{
    std::vector<const AnchorObservation *> obs;
    for (const auto &o : observations)
        if (o.aoa)
            obs.push_back(&o);
    if (obs.size() < 2)
        throw InvalidInput("triangulation needs at least two bearings");

    // Each bearing line satisfies n . x = n . p with n the line normal.
    Eigen::MatrixXd a(Eigen::Index(obs.size()), 2);
    Eigen::VectorXd b(Eigen::Index(obs.size()));
    for (std::size_t i = 0; i < obs.size(); ++i)
    {
        const double beta = obs[i]->bearing();
        const Eigen::Vector2d n(-std::sin(beta), std::cos(beta));
        a.row(Eigen::Index(i)) = n.transpose();
        b[Eigen::Index(i)] = n.dot(obs[i]->position);
    }
    if (condition_number(a) > max_condition)
        throw DegenerateGeometry("bearings are (nearly) parallel");

    PositionFix fix;
    fix.position = a.colPivHouseholderQr().solve(b);
    fix.residual = std::sqrt((a * fix.position - b).squaredNorm() / double(obs.size()));
    return fix;
}

PositionFix trilaterate(std::span<const AnchorObservation> observations, double max_condition)
{
    std::vector<const AnchorObservation *> obs;
    for (const auto &o : observations)
        if (o.range)
        {
            if (!(*o.range > 0.0))
                throw InvalidInput("ranges must be positive");
            obs.push_back(&o);
        }
    if (obs.size() < 3)
        throw InvalidInput("trilateration needs at least three ranges");

    // |x - p_i|^2 - |x - p_0|^2 = r_i^2 - r_0^2  =>  2 (p_0 - p_i) . x = r_i^2 - r_0^2 - |p_i|^2 + |p_0|^2
    const Eigen::Vector2d p0 = obs[0]->position;
    const double r0 = *obs[0]->range;
    const auto rows = Eigen::Index(obs.size() - 1);
    Eigen::MatrixXd a(rows, 2);
    Eigen::VectorXd b(rows);
    for (Eigen::Index i = 0; i < rows; ++i)
    {
        const auto &o = *obs[std::size_t(i) + 1];
        a.row(i) = 2.0 * (p0 - o.position).transpose();
        b[i] = (*o.range) * (*o.range) - r0 * r0 - o.position.squaredNorm() + p0.squaredNorm();
    }
    if (condition_number(a) > max_condition)
        throw DegenerateGeometry("anchors are (nearly) collinear");

    Eigen::Vector2d x = a.colPivHouseholderQr().solve(b);

    // One Gauss-Newton pass on the range residuals.
    const auto n = Eigen::Index(obs.size());
    Eigen::MatrixXd j(n, 2);
    Eigen::VectorXd f(n);
    for (Eigen::Index i = 0; i < n; ++i)
    {
        const Eigen::Vector2d d = x - obs[std::size_t(i)]->position;
        const double dist = d.norm();
        f[i] = dist - *obs[std::size_t(i)]->range;
        j.row(i) = dist > 0.0 ? Eigen::RowVector2d(d.transpose() / dist) : Eigen::RowVector2d::Zero();
    }
    if (condition_number(j) < max_condition)
        x -= j.colPivHouseholderQr().solve(f);

    PositionFix fix;
    fix.position = x;
    double ss = 0.0;
    for (const auto *o : obs)
    {
        const double e = (x - o->position).norm() - *o->range;
        ss += e * e;
    }
    fix.residual = std::sqrt(ss / double(obs.size()));
    return fix;
}

RangeEstimate amp_to_range(double amp_db, const PathLossModel &model)
{
    if (!(model.exponent > 0.0) || !(model.reference_distance > 0.0))
        throw InvalidInput("invalid path-loss model");
    RangeEstimate out;
    out.range = model.reference_distance * std::pow(10.0, (model.reference_db - amp_db) / (10.0 * model.exponent));
    if (out.range < model.min_range)
    {
        out.range = model.min_range;
        out.clamped = true;
    }
    return out;
}

PathLossModel fit_path_loss(std::span<const double> amp_db, std::span<const double> ranges, double exponent)
{
    if (amp_db.size() != ranges.size() || amp_db.empty())
        throw InvalidInput("path-loss fit needs matching, nonempty inputs");
    PathLossModel m;
    m.exponent = exponent;
    double sum = 0.0;
    for (std::size_t i = 0; i < amp_db.size(); ++i)
    {
        if (!(ranges[i] > 0.0))
            throw InvalidInput("ranges must be positive");
        sum += amp_db[i] + 10.0 * exponent * std::log10(ranges[i]);
    }
    m.reference_db = sum / double(amp_db.size());
    return m;
}

} // namespace mimoloc
