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
#include "mimoloc/parallel.hpp"

#include <random>

namespace mimoloc
{

CsiMatrix CsiMatrix::select_rows(std::span<const std::size_t> rows) const
{
    CsiMatrix out;
    out.frequencies = frequencies;
    out.values.resize(Eigen::Index(rows.size()), values.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
    {
        if (Eigen::Index(rows[i]) >= values.rows())
            throw InvalidInput("row index out of range");
        out.values.row(Eigen::Index(i)) = values.row(Eigen::Index(rows[i]));
    }
    return out;
}

Eigen::VectorXd subcarrier_grid(double centre, double bandwidth, int count)
{
    if (count < 1 || !(bandwidth > 0.0) || !(centre > 0.0))
        throw InvalidInput("invalid subcarrier grid");
    const double df = bandwidth / count;
    Eigen::VectorXd f(count);
    for (int k = 0; k < count; ++k)
        f[k] = centre + (k - 0.5 * (count - 1)) * df;
    return f;
}

CsiMatrix synthesize_csi(const SubArray &sub, const PathSet &paths, const Eigen::VectorXd &frequencies)
{
    if (frequencies.size() == 0)
        throw InvalidInput("empty frequency grid");
    CsiMatrix out;
    out.frequencies = frequencies;
    out.values = Eigen::MatrixXcd::Zero(Eigen::Index(sub.size()), frequencies.size());
    for (const auto &path : paths)
    {
        if (path.delay < 0.0)
            throw InvalidInput("path delay must be non-negative");
        if (sub.is_planar() && !path.elevation)
            throw InvalidInput("planar sub-arrays need an elevation for every path");
        const Eigen::VectorXcd a = steering_vector(sub, path.direction());
        Eigen::RowVectorXcd b(frequencies.size());
        for (Eigen::Index k = 0; k < frequencies.size(); ++k)
            b[k] = std::polar(1.0, -2.0 * kPi * frequencies[k] * path.delay);
        out.values.noalias() += path.amplitude * (a * b);
    }
    return out;
}

CsiMatrix synthesize_csi(const ArrayTopology &topo, const PathSet &paths, const Eigen::VectorXd &frequencies)
{
    if (topo.panels().size() != 1)
        throw InvalidInput("far-field synthesis over a whole topology needs a single panel");
    return synthesize_csi(whole_panel(topo, 0), paths, frequencies);
}

double iq_imbalance_phase(int n, double gain_mismatch, double time_offset, double phase_mismatch)
{
    return std::atan(gain_mismatch * std::sin(n * time_offset + phase_mismatch) / std::cos(n * time_offset));
}

double ImpairmentParams::phase_error(Eigen::Index antenna, int n, int n_sub) const
{
    const double sto = 2.0 * kPi * double(n) * double(sto_samples) / double(n_sub);
    const double xi = antenna_offsets.size() > 0 ? antenna_offsets[antenna] : 0.0;
    return sfo_slope * n + sto + iq_imbalance_phase(n, iq_gain, iq_time_offset, iq_phase) + cpo + xi;
}

CsiMatrix apply_impairments(const CsiMatrix &clean, const ImpairmentParams &imp, std::uint64_t seed)
{
    const Eigen::Index nr = clean.antennas();
    const Eigen::Index nk = clean.subcarriers();
    if (imp.antenna_offsets.size() != 0 && imp.antenna_offsets.size() != nr)
        throw InvalidInput("antenna offset count does not match the CSI antenna count");
    if (clean.frequencies.size() != nk)
        throw InvalidInput("frequency grid does not match the CSI subcarrier count");
    if (imp.noise_std < 0.0)
        throw InvalidInput("noise std must be non-negative");

    CsiMatrix out = clean;
    for (Eigen::Index m = 0; m < nr; ++m)
        for (Eigen::Index k = 0; k < nk; ++k)
        {
            const double phi = imp.phase_error(m, int(k + 1), int(nk));
            if (phi != 0.0)
                out.values(m, k) *= std::polar(1.0, -phi);
        }

    if (imp.noise_std > 0.0)
    {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss(0.0, imp.noise_std / std::sqrt(2.0));
        for (Eigen::Index m = 0; m < nr; ++m)
            for (Eigen::Index k = 0; k < nk; ++k)
            {
                const double re = gauss(rng);
                const double im = gauss(rng);
                out.values(m, k) += cdouble(re, im);
            }
    }
    return out;
}

CsiMatrix synthesize_geometric(const ArrayTopology &topo, const Eigen::Vector3d &ue, const Scene &scene,
                               const Eigen::VectorXd &frequencies)
{
    if (frequencies.size() == 0)
        throw InvalidInput("empty frequency grid");
    const double lambda = topo.wavelength();
    CsiMatrix out;
    out.frequencies = frequencies;
    out.values.resize(Eigen::Index(topo.size()), frequencies.size());

    auto add_path = [&](Eigen::Index m, cdouble gain, double length) {
        const double tau = length / kSpeedOfLight;
        for (Eigen::Index k = 0; k < frequencies.size(); ++k)
            out.values(m, k) += gain * std::polar(1.0, -2.0 * kPi * frequencies[k] * tau);
    };

    for (std::size_t m = 0; m < topo.size(); ++m)
    {
        const auto row = Eigen::Index(m);
        out.values.row(row).setZero();
        const Eigen::Vector3d p = topo.element_position(m);
        const double r = (p - ue).norm();
        if (!(r > 0.0))
            throw InvalidInput("UE coincides with an antenna element");
        add_path(row, lambda / (4.0 * kPi * r), r);
        for (const auto &s : scene.scatterers)
        {
            const double len = (s.position - ue).norm() + (p - s.position).norm();
            add_path(row, s.reflection * lambda / (4.0 * kPi * len), len);
        }
        if (scene.ground_reflection)
        {
            const double len = (p - Eigen::Vector3d(ue.x(), ue.y(), -ue.z())).norm();
            add_path(row, *scene.ground_reflection * lambda / (4.0 * kPi * len), len);
        }
    }
    return out;
}

CsiMatrix los_response(const ArrayTopology &topo, const Eigen::Vector3d &ue, const Eigen::VectorXd &frequencies)
{
    return synthesize_geometric(topo, ue, Scene{ue.z(), {}, std::nullopt}, frequencies);
}

bool Rect::contains(const Rect &other) const
{
    return contains(other.min) && contains(other.max);
}

bool Rect::contains(const Eigen::Vector2d &p) const
{
    constexpr double tol = 1e-12;
    return p.x() >= min.x() - tol && p.x() <= max.x() + tol && p.y() >= min.y() - tol && p.y() <= max.y() + tol;
}

std::vector<Eigen::Vector2d> grid_points(const GridSpec &grid)
{
    if (grid.n < 2)
        throw InvalidInput("grid needs at least 2 x 2 points");
    const Eigen::Vector2d step = (grid.region.max - grid.region.min) / double(grid.n - 1);
    std::vector<Eigen::Vector2d> pts;
    pts.reserve(std::size_t(grid.n) * std::size_t(grid.n));
    for (int iy = 0; iy < grid.n; ++iy)
        for (int ix = 0; ix < grid.n; ++ix)
            pts.emplace_back(grid.region.min.x() + ix * step.x(), grid.region.min.y() + iy * step.y());
    return pts;
}

LabeledDataset generate_point_dataset(const std::vector<Eigen::Vector2d> &points, const ArrayTopology &topo,
                                      const ImpairmentParams &imp, std::optional<double> snr_db, const Scene &scene,
                                      const Eigen::VectorXd &frequencies, std::uint64_t seed)
{
    LabeledDataset ds;
    ds.topology = topo;
    ds.frequencies = frequencies;
    ds.ue_height = scene.ue_height;
    ds.positions = points;
    ds.samples.resize(points.size());
    ds.noise_std.resize(points.size());

    parallel_for(points.size(), [&](std::size_t i) {
        const Eigen::Vector3d ue(points[i].x(), points[i].y(), scene.ue_height);
        const CsiMatrix clean = synthesize_geometric(topo, ue, scene, frequencies);
        ImpairmentParams local = imp;
        if (snr_db)
        {
            const double signal = clean.values.cwiseAbs2().mean();
            local.noise_std = std::sqrt(signal / std::pow(10.0, *snr_db / 10.0));
        }
        ds.noise_std[i] = local.noise_std;
        ds.samples[i] = apply_impairments(clean, local, mix_seed(seed, i));
    });
    return ds;
}

LabeledDataset generate_grid_dataset(const Rect &area, const GridSpec &grid, const ArrayTopology &topo,
                                     const ImpairmentParams &imp, std::optional<double> snr_db, const Scene &scene,
                                     const Eigen::VectorXd &frequencies, std::uint64_t seed)
{
    if (!area.contains(grid.region))
        throw InvalidInput("grid region lies outside the target area");
    return generate_point_dataset(grid_points(grid), topo, imp, snr_db, scene, frequencies, seed);
}

} // namespace mimoloc
