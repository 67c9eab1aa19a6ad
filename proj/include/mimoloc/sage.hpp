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

#include "mimoloc/channel_sim.hpp"
#include "mimoloc/multipath.hpp"

#include <optional>
#include <stdexcept>

namespace mimoloc
{

struct SageConfig
{
    int max_paths = 5;
    double stop_dynamic_range_db = 30.0;
    double delay_step = 12.5e-9; // coarse; 1 / (4 * 20 MHz)
    double delay_min = 0.0;
    double delay_max = 400e-9;
    int refinement_levels = 2;  // each level divides the delay step by 4
    double angle_step = deg2rad(1.0);
    double fine_angle_step = deg2rad(0.1);
    double local_angle_window = deg2rad(10.0); // 2-D M-step search half-width
    // Search half-width for azimuth and elevation. Unset: the grating-lobe-free
    // field of view asin(min(1, lambda / (2 d))) of the sub-array.
    std::optional<double> angle_limit;
    int em_cycles = 10;
    bool continuous_refinement = true; // golden-section polish after the finest grid

    double fine_delay_step() const;
    void validate() const;
};

class NoLineOfSight : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Half-width of the angle search used for `sub`.
double angle_limit(const SubArray &sub, const SageConfig &cfg);

/// Single-path contribution alpha * a(Omega) * b(tau)^T on the sub-array.
Eigen::MatrixXcd path_contribution(const SubArray &sub, const MultipathComponent &path,
                                   const Eigen::VectorXd &frequencies);

/// Sum of all path contributions.
CsiMatrix reconstruct(const SubArray &sub, const PathSet &paths, const Eigen::VectorXd &frequencies);

/// Correlation-based start for one path. nullopt when the residual is identically zero.
std::optional<MultipathComponent> initialize_mpc(const CsiMatrix &residual, const SubArray &sub,
                                                 const SageConfig &cfg = {});

/// CSI minus every component except `l` (0-based).
CsiMatrix expectation_step(const CsiMatrix &csi, const SubArray &sub, const PathSet &components, std::size_t l);

/// Coordinate-wise refresh of one component against its residual. The projected power never decreases.
MultipathComponent maximization_step(const CsiMatrix &residual, const SubArray &sub,
                                     const MultipathComponent &current, const SageConfig &cfg = {});

/// Successive extraction with the dynamic-range stopping rule; sorted by descending power.
PathSet sage_extract(const CsiMatrix &csi, const SubArray &sub, const SageConfig &cfg = {});

/// Earliest component among those within `window_db` of the strongest.
MultipathComponent select_los(const PathSet &components, double window_db = 6.0);

} // namespace mimoloc
