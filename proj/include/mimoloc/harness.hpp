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

#include "mimoloc/config.hpp"
#include "mimoloc/csi_calib.hpp"
#include "mimoloc/fingerprint.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mimoloc
{

/// Failure of one pipeline stage, optionally pinned to a sample.
class StageError : public std::runtime_error
{
public:
    StageError(std::string stage, std::optional<std::size_t> sample, const std::string &what);
    const std::string &stage() const { return stage_; }
    std::optional<std::size_t> sample() const { return sample_; }

private:
    std::string stage_;
    std::optional<std::size_t> sample_;
};

ArrayTopology build_topology(const ExperimentConfig &cfg);
Scene build_scene(const ExperimentConfig &cfg);
/// Configured impairments with the per-antenna offsets drawn from the run seed.
ImpairmentParams build_impairments(const ExperimentConfig &cfg, std::size_t antennas);
std::vector<SubArray> build_subarrays(const ExperimentConfig &cfg, const ArrayTopology &topo);

struct Datasets
{
    LabeledDataset train;
    LabeledDataset test;
    std::optional<LabeledDataset> calibration;
    ImpairmentParams impairments; // ground truth for simulated runs
};

/// Simulated from the scene, or read from [data] files when configured.
Datasets prepare_datasets(const ExperimentConfig &cfg);

/// Calibration on the reference set (the training set when no separate one exists).
std::optional<CalibrationSolution> run_calibration(const ExperimentConfig &cfg, const Datasets &data);

struct Extraction
{
    std::vector<std::vector<PathSet>> paths; // [sample][sub-array]
    std::vector<std::vector<std::optional<MultipathComponent>>> los;
    std::vector<std::size_t> incomplete; // samples with a sub-array lacking any component
};

Extraction extract_dataset(const LabeledDataset &data, const std::vector<SubArray> &subarrays,
                           const std::optional<CalibrationSolution> &calibration, const SageConfig &cfg);

struct MethodResult
{
    std::string method; // scheme text or a baseline name
    ErrorReport report;
    std::size_t failures = 0; // test samples the method could not locate
};

struct ReportBundle
{
    std::vector<MethodResult> results;
    std::optional<CalibrationSolution> calibration;
    std::vector<std::string> warnings;
    std::vector<std::filesystem::path> files; // relative to the output directory
    std::size_t dropped_train = 0;
    std::size_t dropped_test = 0;

    const MethodResult *find(const std::string &method) const;
};

inline constexpr const char *kTriangulation = "triangulation";
inline constexpr const char *kTofTrilateration = "trilateration_tof";
inline constexpr const char *kAmpTrilateration = "trilateration_amp";

/// generate/ingest -> calibrate -> partition -> extract -> select LoS -> features -> train -> evaluate.
ReportBundle run_pipeline(const ExperimentConfig &cfg);

enum class SweepAxis
{
    Antennas,
    GridSize,
    Snr,
    Scheme,
    Topology
};

SweepAxis sweep_axis_from_string(const std::string &name);
const char *to_string(SweepAxis axis);

struct SweepResult
{
    std::vector<std::pair<std::string, ReportBundle>> runs;
    std::vector<std::string> warnings;
};

/// One run per value under <out>/<axis>_<value>, plus summary.csv and manifest.json in <out>.
SweepResult sweep(const ExperimentConfig &cfg, SweepAxis axis, const std::vector<std::string> &values);

// Single stages for the command-line verbs. Each writes into cfg.out with a manifest.
std::vector<std::filesystem::path> generate_stage(const ExperimentConfig &cfg);
std::vector<std::filesystem::path> ingest_stage(const ExperimentConfig &cfg, const std::filesystem::path &input);
std::vector<std::filesystem::path> calibrate_stage(const ExperimentConfig &cfg);
std::vector<std::filesystem::path> extract_stage(const ExperimentConfig &cfg);
std::vector<std::filesystem::path> train_stage(const ExperimentConfig &cfg);

std::string sha256_hex(const std::filesystem::path &file);
std::string sha256_hex_string(const std::string &data);

} // namespace mimoloc
