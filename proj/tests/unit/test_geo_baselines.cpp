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

#include "mimoloc/array_geometry.hpp"
#include "mimoloc/geo_baselines.hpp"

#include <doctest.h>

#include <random>

using namespace mimoloc;

namespace
{
AnchorObservation bearing(Eigen::Vector2d at, double orientation, double aoa)
{
    AnchorObservation o;
    o.position = at;
    o.orientation = orientation;
    o.aoa = aoa;
    return o;
}

AnchorObservation ranged(Eigen::Vector2d at, double r)
{
    AnchorObservation o;
    o.position = at;
    o.range = r;
    return o;
}
} // namespace

TEST_CASE("two symmetric bearings")
{
    std::vector<AnchorObservation> obs = {bearing({0, 0}, 0.0, kPi / 4), bearing({3, 0}, 0.0, 3 * kPi / 4)};
    const auto fix = triangulate_aoa(obs);
    CHECK(fix.position.x() == doctest::Approx(1.5));
    CHECK(fix.position.y() == doctest::Approx(1.5));
}

TEST_CASE("exact bearings from the DIS panels")
{
    const auto dis = ArrayTopology::standard(ArrayKind::DIS);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.2, 2.8);
    for (int trial = 0; trial < 20; ++trial)
    {
        const Eigen::Vector2d p(u(rng), u(rng));
        std::vector<AnchorObservation> obs;
        for (std::size_t k = 0; k < dis.panels().size(); ++k)
        {
            const auto sub = whole_panel(dis, k);
            const Eigen::Vector2d c = sub.phase_center().head<2>();
            const double yaw = sub.panel.yaw;
            const Eigen::Vector2d v = p - c;
            obs.push_back(bearing(c, yaw, wrap_phase(std::atan2(v.y(), v.x()) - yaw)));
        }
        CHECK((triangulate_aoa(obs).position - p).norm() < 1e-9);
    }
}

TEST_CASE("parallel bearings are degenerate")
{
    std::vector<AnchorObservation> obs = {bearing({0, 0}, 0.0, 0.3), bearing({0, 1}, 0.0, 0.3)};
    CHECK_THROWS_AS(triangulate_aoa(obs), DegenerateGeometry);
    CHECK_THROWS_AS(triangulate_aoa(std::vector<AnchorObservation>{bearing({0, 0}, 0, 0)}), InvalidInput);
}

TEST_CASE("three exact ranges")
{
    std::vector<AnchorObservation> obs = {ranged({0, 0}, std::sqrt(2.0)), ranged({3, 0}, std::sqrt(5.0)),
                                          ranged({0, 3}, std::sqrt(5.0))};
    const auto fix = trilaterate(obs);
    CHECK(fix.position.x() == doctest::Approx(1.0));
    CHECK(fix.position.y() == doctest::Approx(1.0));
}

TEST_CASE("eight exact ranges")
{
    const auto dis = ArrayTopology::standard(ArrayKind::DIS);
    const Eigen::Vector2d p(1.3, 2.1);
    std::vector<AnchorObservation> obs;
    for (std::size_t k = 0; k < 8; ++k)
    {
        const Eigen::Vector2d a = whole_panel(dis, k).reference_position().head<2>();
        obs.push_back(ranged(a, (p - a).norm()));
    }
    const auto fix = trilaterate(obs);
    CHECK((fix.position - p).norm() < 1e-9);
    CHECK(fix.residual < 1e-9);
}

TEST_CASE("one nanosecond ToF error is about 30 cm")
{
    const Eigen::Vector2d p(1.5, 1.5);
    const std::vector<Eigen::Vector2d> anchors = {{0, 0}, {3, 0}, {0, 3}, {3, 3}};
    std::vector<AnchorObservation> obs;
    for (const auto &a : anchors)
        obs.push_back(ranged(a, (p - a).norm() + kSpeedOfLight * 1e-9));
    obs[1].range = (p - anchors[1]).norm();
    obs[3].range = (p - anchors[3]).norm();
    const double err = (trilaterate(obs).position - p).norm();
    CHECK(kSpeedOfLight * 1e-9 == doctest::Approx(0.2998).epsilon(1e-3));
    CHECK(err > 0.1);
    CHECK(err < 0.6);
}

TEST_CASE("amplitude to range")
{
    PathLossModel m;
    m.reference_db = -30.0;
    CHECK(amp_to_range(-30.0, m).range == doctest::Approx(1.0));
    CHECK(amp_to_range(-50.0, m).range == doctest::Approx(10.0));
    // 1 dB error at 3 m
    const double at3 = -30.0 - 20.0 * std::log10(3.0);
    CHECK(amp_to_range(at3, m).range == doctest::Approx(3.0));
    CHECK(amp_to_range(at3 - 1.0, m).range - 3.0 == doctest::Approx(0.3661).epsilon(1e-3));
    const auto close = amp_to_range(40.0, m);
    CHECK(close.clamped);
    CHECK(close.range == m.min_range);
}

TEST_CASE("path-loss fit recovers the reference")
{
    const std::vector<double> r = {0.5, 1.0, 2.0, 4.0};
    std::vector<double> a;
    for (double x : r)
        a.push_back(-42.0 - 20.0 * std::log10(x));
    CHECK(fit_path_loss(a, r).reference_db == doctest::Approx(-42.0));
}
