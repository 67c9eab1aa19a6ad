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

#include "mimoloc/multipath.hpp"
#include "mimoloc/svr.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mimoloc
{

/// Nonempty subset of {AMP, AOA, TOF}. Text form joins the members with '+', e.g. "AMP+TOF".
struct MetricScheme
{
    bool amp = false;
    bool aoa = false;
    bool tof = false;

    static MetricScheme parse(const std::string &text);
    std::string to_string() const;
    bool empty() const { return !amp && !aoa && !tof; }
    bool operator==(const MetricScheme &) const = default;
};

struct FeatureLayout
{
    std::size_t subarrays = 0;
    int angles_per_subarray = 1; // 2 when elevation is resolved
    MetricScheme scheme;

    std::size_t per_subarray() const;
    std::size_t dimension() const { return subarrays * per_subarray(); }
    /// "s<k>.<metric>" names in feature order.
    std::vector<std::string> names() const;
    bool operator==(const FeatureLayout &) const = default;
};

class IncompleteSample : public InvalidInput
{
public:
    IncompleteSample(const std::string &what, std::size_t subarray) : InvalidInput(what), subarray_(subarray) {}
    std::size_t subarray() const { return subarray_; }

private:
    std::size_t subarray_;
};

/*
 Sub-arrays in partition order; within each: AMP as 20 log10 |alpha| [dB],
 AoA azimuth then elevation [rad], ToF [ns]. A missing LoS component raises
 IncompleteSample.
*/
Eigen::VectorXd build_features(const std::vector<std::optional<MultipathComponent>> &los, const FeatureLayout &layout);

struct SearchBudget
{
    int trials = 60;
    int folds = 5;
    std::size_t max_search_samples = 600; // hyper-parameter search runs on a seeded subsample
    double c_min = 1e-1, c_max = 1e3;
    double scale_min = 1e-2, scale_max = 1e2;       // times sqrt(feature count)
    double epsilon_min = 1e-3, epsilon_max = 1e-1; // times target standard deviation
    double tolerance = 1e-3;
    std::uint64_t seed = 0;
};

struct TrainingMetadata
{
    std::string grid; // e.g. "11x11"
    std::string topology;
    std::size_t samples = 0;
    double train_mae_x = 0.0;
    double train_mae_y = 0.0;
    double cv_mae_x = 0.0;
    double cv_mae_y = 0.0;
};

struct FingerprintModel
{
    FeatureLayout layout;
    Eigen::VectorXd feature_mean;
    Eigen::VectorXd feature_std;
    SvrRegressor x;
    SvrRegressor y;
    SvrParams params_x;
    SvrParams params_y;
    TrainingMetadata meta;
};

/// Rows of `features` are samples; `positions` is samples x 2.
FingerprintModel train_fingerprint(const Eigen::MatrixXd &features, const Eigen::MatrixXd &positions,
                                   const FeatureLayout &layout, const SearchBudget &budget = {});

Eigen::Vector2d predict(const FingerprintModel &model, const Eigen::VectorXd &features);
Eigen::MatrixXd predict(const FingerprintModel &model, const Eigen::MatrixXd &features);

struct ErrorReport
{
    double mae = 0.0;
    double median = 0.0;
    double p90 = 0.0;
    double p95 = 0.0;
    std::vector<double> errors;                     // per test sample, input order
    std::vector<std::pair<double, double>> cdf;     // sorted (error, cumulative fraction)
};

/// Aggregates Euclidean errors; percentiles interpolate linearly between order statistics.
ErrorReport error_report(const std::vector<double> &errors);
ErrorReport evaluate(const Eigen::MatrixXd &predicted, const Eigen::MatrixXd &truth);
ErrorReport evaluate(const FingerprintModel &model, const Eigen::MatrixXd &features, const Eigen::MatrixXd &truth);

inline constexpr const char *kModelFormat = "mimoloc-fingerprint-model";
inline constexpr int kModelVersion = 1;

void save_model(const FingerprintModel &model, std::ostream &out);
void save_model(const FingerprintModel &model, const std::filesystem::path &path);
FingerprintModel load_model(std::istream &in);
FingerprintModel load_model(const std::filesystem::path &path);

} // namespace mimoloc
