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

#include "mimoloc/channel_sim.hpp"

#include <doctest.h>

using namespace mimoloc;

namespace
{
SubArray ula8()
{
    static const auto topo = ArrayTopology::ula(8, 0.07, 2.61e9);
    return whole_panel(topo, 0);
}
} // namespace

TEST_CASE("subcarrier grid is evenly spaced and increasing")
{
    const auto f = subcarrier_grid();
    REQUIRE(f.size() == 100);
    for (Eigen::Index k = 1; k < f.size(); ++k)
        CHECK(f[k] - f[k - 1] == doctest::Approx(0.2e6).epsilon(1e-9));
    CHECK(0.5 * (f[0] + f[99]) == doctest::Approx(2.61e9));
    CHECK_THROWS_AS(subcarrier_grid(2.61e9, 20e6, 0), InvalidInput);
}

TEST_CASE("unit path at broadside with zero delay is all ones")
{
    const auto f = subcarrier_grid();
    MultipathComponent p;
    const auto csi = synthesize_csi(ula8(), {p}, f);
    CHECK((csi.values.array() - cdouble(1.0, 0.0)).abs().maxCoeff() < 1e-12);
}

TEST_CASE("50 ns delay rotates one full turn over 20 MHz")
{
    const auto f = subcarrier_grid();
    MultipathComponent p;
    p.delay = 50e-9;
    const auto csi = synthesize_csi(ula8(), {p}, f);
    double total = 0.0;
    for (Eigen::Index k = 1; k < f.size(); ++k)
    {
        const double step = std::arg(csi.values(0, k) * std::conj(csi.values(0, k - 1)));
        CHECK(step == doctest::Approx(-2.0 * kPi * 0.2e6 * 50e-9).epsilon(1e-9));
        total += step;
    }
    // 100 subcarriers spaced 200 kHz: the full 20 MHz span is 100 steps
    CHECK(total * 100.0 / 99.0 == doctest::Approx(-2.0 * kPi).epsilon(1e-9));
}

TEST_CASE("two paths with opposite steering phases add per element")
{
    const auto f = subcarrier_grid();
    const auto sub = ula8();
    MultipathComponent a, b;
    a.azimuth = 0.4;
    b.azimuth = -0.4;
    const auto csi = synthesize_csi(sub, {a, b}, f);
    const auto sa = steering_vector(sub, a.direction());
    const auto sb = steering_vector(sub, b.direction());
    for (Eigen::Index m = 0; m < 8; ++m)
    {
        CHECK(std::abs(csi.values(m, 0) - (sa[m] + sb[m])) < 1e-12);
        CHECK(std::abs(sa[m] - std::conj(sb[m])) < 1e-12);
    }
}

TEST_CASE("zero impairments leave the CSI bit-for-bit unchanged")
{
    const auto f = subcarrier_grid();
    MultipathComponent p;
    p.azimuth = 0.3;
    p.delay = 17e-9;
    const auto clean = synthesize_csi(ula8(), {p}, f);
    const auto out = apply_impairments(clean, ImpairmentParams{}, 5);
    CHECK(out.values == clean.values);
}

TEST_CASE("zero gain mismatch removes the IQ term")
{
    for (int n = 1; n <= 100; ++n)
        CHECK(iq_imbalance_phase(n, 0.0, 0.02, 0.3) == 0.0);
    CHECK(iq_imbalance_phase(7, 0.1, 0.02, 0.3) != 0.0);
}

TEST_CASE("symbol timing offset adds a linear phase ramp")
{
    const auto f = subcarrier_grid();
    MultipathComponent p;
    const auto clean = synthesize_csi(ula8(), {p}, f);
    ImpairmentParams imp;
    imp.sto_samples = 25;
    const auto out = apply_impairments(clean, imp, 1);
    for (Eigen::Index k = 1; k < f.size(); ++k)
    {
        const double a = std::arg(clean.values(3, k) * std::conj(out.values(3, k)));
        const double b = std::arg(clean.values(3, k - 1) * std::conj(out.values(3, k - 1)));
        CHECK(wrap_phase(a - b) == doctest::Approx(2.0 * kPi * 25.0 / 100.0).epsilon(1e-9));
    }
}

TEST_CASE("impairment noise is seeded")
{
    const auto f = subcarrier_grid();
    MultipathComponent p;
    const auto clean = synthesize_csi(ula8(), {p}, f);
    ImpairmentParams imp;
    imp.noise_std = 0.1;
    CHECK(apply_impairments(clean, imp, 9).values == apply_impairments(clean, imp, 9).values);
    CHECK(apply_impairments(clean, imp, 9).values != apply_impairments(clean, imp, 10).values);
    imp.antenna_offsets = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS(apply_impairments(clean, imp, 1), InvalidInput);
}

TEST_CASE("grid datasets")
{
    const auto topo = ArrayTopology::standard(ArrayKind::DIS);
    const Rect area{{0, 0}, {3, 3}};
    const Rect region{{0.875, 0.875}, {2.125, 2.125}};
    const auto f = subcarrier_grid(2.61e9, 20e6, 8);

    SUBCASE("6x6 at 25 cm pitch")
    {
        const auto pts = grid_points(GridSpec{region, 6});
        REQUIRE(pts.size() == 36);
        CHECK((pts[1] - pts[0]).norm() == doctest::Approx(0.25));
        const auto ds = generate_grid_dataset(area, GridSpec{region, 6}, topo, {}, std::nullopt, {}, f, 1);
        CHECK(ds.size() == 36);
        CHECK(ds.samples.front().antennas() == 64);
    }
    SUBCASE("2x2 gives the corners")
    {
        const auto pts = grid_points(GridSpec{region, 2});
        REQUIRE(pts.size() == 4);
        CHECK(pts.front() == region.min);
        CHECK(pts.back() == region.max);
    }
    SUBCASE("51x51 at 2.5 cm pitch")
    {
        const auto pts = grid_points(GridSpec{region, 51});
        REQUIRE(pts.size() == 2601);
        CHECK((pts[1] - pts[0]).norm() == doctest::Approx(0.025));
    }
    SUBCASE("region outside the area is rejected")
    {
        CHECK_THROWS_AS(generate_grid_dataset(area, GridSpec{Rect{{-1, 0}, {1, 1}}, 3}, topo, {}, std::nullopt, {},
                                              f, 1),
                        InvalidInput);
    }
}

TEST_CASE("SNR sets the per-sample noise level")
{
    const auto topo = ArrayTopology::standard(ArrayKind::DIS);
    const auto f = subcarrier_grid(2.61e9, 20e6, 16);
    const std::vector<Eigen::Vector2d> pts = {{1.0, 1.2}};
    const auto ds = generate_point_dataset(pts, topo, {}, 20.0, {}, f, 3);
    const auto clean = synthesize_geometric(topo, ds.ue_position(0), Scene{}, f);
    const double power = clean.values.cwiseAbs2().mean();
    CHECK(ds.noise_std[0] * ds.noise_std[0] == doctest::Approx(power / 100.0).epsilon(1e-9));
}

TEST_CASE("geometric LoS matches free space")
{
    const auto topo = ArrayTopology::ula(4, 0.07, 2.61e9, {0, 0, 1}, kPi / 2);
    const auto f = subcarrier_grid(2.61e9, 20e6, 4);
    const Eigen::Vector3d ue(0.5, 2.0, 0.4);
    const auto csi = los_response(topo, ue, f);
    for (Eigen::Index m = 0; m < 4; ++m)
    {
        const double r = (topo.element_position(std::size_t(m)) - ue).norm();
        const cdouble want = topo.wavelength() / (4 * kPi * r) * std::polar(1.0, -2 * kPi * f[2] * r / kSpeedOfLight);
        CHECK(std::abs(csi.values(m, 2) - want) < 1e-12 * std::abs(want));
    }
    Scene scene;
    scene.ground_reflection = cdouble(-0.4, 0.0);
    CHECK((synthesize_geometric(topo, ue, scene, f).values - csi.values).norm() > 0.0);
}
