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

#include "mimoloc/array_geometry.hpp"
#include "mimoloc/multipath.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace mimoloc
{

/// Channel frequency response, antennas x subcarriers.
struct CsiMatrix
{
    Eigen::MatrixXcd values;
    Eigen::VectorXd frequencies; // [Hz], strictly increasing and evenly spaced

    Eigen::Index antennas() const { return values.rows(); }
    Eigen::Index subcarriers() const { return values.cols(); }

    CsiMatrix select_rows(std::span<const std::size_t> rows) const;
};

/// `count` evenly spaced subcarriers, spacing bandwidth/count, centred on `centre`.
Eigen::VectorXd subcarrier_grid(double centre = 2.61e9, double bandwidth = 20e6, int count = 100);

/// Sum over paths of alpha * steering(dir) * exp(-j 2 pi f tau) on the sub-array elements.
CsiMatrix synthesize_csi(const SubArray &sub, const PathSet &paths, const Eigen::VectorXd &frequencies);

/// Same for a single-panel topology (ULA or URA); DIS has no common frame and is rejected.
CsiMatrix synthesize_csi(const ArrayTopology &topo, const PathSet &paths, const Eigen::VectorXd &frequencies);

/// Phase shift of the front-end IQ imbalance at 1-based subcarrier index n.
double iq_imbalance_phase(int n, double gain_mismatch, double time_offset, double phase_mismatch);

/// Synchronisation and hardware phase errors plus additive noise.
struct ImpairmentParams
{
    double sfo_slope = 0.0;        // [rad / subcarrier index]
    int sto_samples = 0;           // symbol timing offset [samples]
    double iq_gain = 0.0;          // epsilon_g
    double iq_phase = 0.0;         // epsilon_p [rad]
    double iq_time_offset = 0.0;   // varsigma_t [rad / subcarrier index]
    double cpo = 0.0;              // common carrier phase offset [rad]
    Eigen::VectorXd antenna_offsets; // per-antenna phase [rad]; empty means zero
    double noise_std = 0.0;        // complex noise std, E|w|^2 = noise_std^2

    /// Total error phase at antenna m (0-based) and subcarrier n (1-based) for a grid of n_sub carriers.
    double phase_error(Eigen::Index antenna, int n, int n_sub) const;
};

/// Applies phase errors and circularly symmetric complex Gaussian noise. Deterministic for a given seed.
CsiMatrix apply_impairments(const CsiMatrix &clean, const ImpairmentParams &imp, std::uint64_t seed);

/// Point scatterer producing a single-bounce path UE -> scatterer -> element.
struct Scatterer
{
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    cdouble reflection{0.5, 0.0};
};

struct Scene
{
    double ue_height = 0.4; // [m]
    std::vector<Scatterer> scatterers;
    // Specular floor at z = 0: an image source at (x, y, -z) scaled by this coefficient.
    std::optional<cdouble> ground_reflection;
};

/*
 Spherical-wavefront synthesis from geometry: the LoS path uses the exact
 distance to every element with free-space amplitude lambda / (4 pi r);
 each scatterer adds reflection * lambda / (4 pi (d1 + d2)) with delay (d1 + d2) / c,
 and a ground reflection adds the mirrored UE's path scaled by its coefficient.
*/
CsiMatrix synthesize_geometric(const ArrayTopology &topo, const Eigen::Vector3d &ue, const Scene &scene,
                               const Eigen::VectorXd &frequencies);

/// Noiseless LoS-only response, the model removed before calibration.
CsiMatrix los_response(const ArrayTopology &topo, const Eigen::Vector3d &ue, const Eigen::VectorXd &frequencies);

struct Rect
{
    Eigen::Vector2d min = Eigen::Vector2d::Zero();
    Eigen::Vector2d max = Eigen::Vector2d::Zero();

    bool contains(const Rect &other) const;
    bool contains(const Eigen::Vector2d &p) const;
};

struct GridSpec
{
    Rect region; // grid corners
    int n = 2;   // n x n points, pitch (max - min) / (n - 1)
};

/// Impaired CSI plus ground truth for a set of UE positions.
struct LabeledDataset
{
    ArrayTopology topology = ArrayTopology::standard(ArrayKind::DIS);
    Eigen::VectorXd frequencies;
    std::vector<CsiMatrix> samples;
    std::vector<Eigen::Vector2d> positions;
    std::vector<double> noise_std; // per sample, linear amplitude
    double ue_height = 0.4;

    std::size_t size() const { return samples.size(); }
    Eigen::Vector3d ue_position(std::size_t i) const { return {positions[i].x(), positions[i].y(), ue_height}; }
};

/// Row-major grid points (x fastest).
std::vector<Eigen::Vector2d> grid_points(const GridSpec &grid);

/*
 One impaired sample per point. When `snr_db` is set, the noise std of each
 sample is chosen so that mean |H_clean|^2 / noise_std^2 equals the SNR;
 otherwise imp.noise_std is used. Sample i uses seed mix_seed(seed, i).
*/
LabeledDataset generate_point_dataset(const std::vector<Eigen::Vector2d> &points, const ArrayTopology &topo,
                                      const ImpairmentParams &imp, std::optional<double> snr_db, const Scene &scene,
                                      const Eigen::VectorXd &frequencies, std::uint64_t seed);

LabeledDataset generate_grid_dataset(const Rect &area, const GridSpec &grid, const ArrayTopology &topo,
                                     const ImpairmentParams &imp, std::optional<double> snr_db, const Scene &scene,
                                     const Eigen::VectorXd &frequencies, std::uint64_t seed);

} // namespace mimoloc
