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

#include <filesystem>
#include <iosfwd>

namespace mimoloc
{

/*
 Dataset file (also the ingestion format for recorded CSI):

   line 1   JSON header terminated by '\n' (no embedded newlines):
            {"format": "mimoloc-csi-dataset", "version": 1, "topology": {...},
             "frequencies": [...], "sample_count": S, "antennas": N_r,
             "subcarriers": N_k, "ground_truth_columns": ["x", "y"],
             "ue_height": h, "noise_std": [...]}
   payload  S records; each record is N_r * N_k complex values as little-endian
            float32 (real, imag) pairs, antenna-major then subcarrier, followed
            by the ground truth (x, y) as little-endian float64.

 "noise_std" is optional on ingestion; when missing, samples are assumed noise
 normalised (std 1).
*/
inline constexpr const char *kDatasetFormat = "mimoloc-csi-dataset";
inline constexpr int kDatasetVersion = 1;

void write_dataset(std::ostream &os, const LabeledDataset &ds);
LabeledDataset read_dataset(std::istream &is);

void write_dataset(const std::filesystem::path &path, const LabeledDataset &ds);
LabeledDataset read_dataset(const std::filesystem::path &path);

namespace detail
{
void put_f32le(std::ostream &os, float v);
void put_f64le(std::ostream &os, double v);
float get_f32le(std::istream &is);
double get_f64le(std::istream &is);
} // namespace detail

} // namespace mimoloc
