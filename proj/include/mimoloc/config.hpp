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
#include "mimoloc/channel_sim.hpp"
#include "mimoloc/fingerprint.hpp"
#include "mimoloc/sage.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mimoloc
{

/*
 Everything one pipeline run needs. Loaded from an INI file whose sections
 mirror the modules ([topology], [scene], [impairments], [calibration],
 [subarray], [sage], [fingerprint], [data], [run]); every key is optional and
 the defaults below are what an empty file means.
*/
struct ExperimentConfig
{
    // [topology]
    ArrayKind kind = ArrayKind::DIS;
    std::optional<std::filesystem::path> topology_file; // JSON descriptor, overrides kind
    std::size_t antennas = 0;                           // 0: all elements

    // [scene]
    Rect area{{0.0, 0.0}, {3.0, 3.0}};
    Rect region{{0.875, 0.875}, {2.125, 2.125}}; // fingerprint grid corners
    double ue_height = 0.4;
    int train_grid = 11;
    int test_points = 200; // uniform random UE positions inside the region
    std::vector<Scatterer> scatterers;
    int random_scatterers = 0; // additional seeded point scatterers around the area
    double scatterer_reflection = 0.3;
    std::optional<double> ground_reflection;

    // [impairments]
    ImpairmentParams impairments{0.05, 0, 0.1, 0.3, 0.02, 1.0, {}, 0.0};
    double antenna_offset_spread = kPi; // xi drawn uniformly from (-spread, spread]
    std::optional<double> snr_db = 20.0;  // unset: noiseless

    // [calibration]
    bool calibrate = true;
    int calibration_grid = 8;

    // [subarray]; zero means the default for the array kind
    WindowShape window{0, 0};
    WindowShape stride{1, 1};

    // [sage]
    SageConfig sage = [] {
        SageConfig c;
        c.max_paths = 1;
        return c;
    }();

    // [fingerprint]
    std::vector<MetricScheme> schemes = {MetricScheme::parse("AMP"), MetricScheme::parse("AOA"),
                                         MetricScheme::parse("TOF"), MetricScheme::parse("AMP+AOA+TOF")};
    SearchBudget search;
    bool baselines = true;
    bool effective_snr = true;

    // [data]: when set, samples are read from dataset files instead of simulated
    std::optional<std::filesystem::path> train_file;
    std::optional<std::filesystem::path> test_file;
    std::optional<std::filesystem::path> calibration_file;

    // [run]
    std::uint64_t seed = 1;
    std::filesystem::path out = "results";

    /// Canonical INI text with every value spelled out; its hash identifies the run.
    std::string to_ini() const;
    void validate() const;
};

ExperimentConfig parse_config(std::istream &in);
std::uint64_t parse_seed(const std::string &text);
ExperimentConfig load_config(const std::filesystem::path &path);

} // namespace mimoloc
