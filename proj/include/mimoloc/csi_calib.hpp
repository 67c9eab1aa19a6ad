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

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace mimoloc
{

/// Frequency-domain error model: IQ imbalance + linear SFO/STO slope + common phase.
struct FrequencyCalibration
{
    double iq_gain = 0.0;        // epsilon_g
    double iq_time_offset = 0.0; // varsigma_t [rad / subcarrier index]
    double iq_phase = 0.0;       // epsilon_p [rad]
    double slope = 0.0;          // SFO + STO [rad / subcarrier index]
    double cpo = 0.0;            // eta [rad]

    /// Modelled phase error at 1-based subcarrier index n.
    double phase(int n) const;

    /*
     The model is invariant under (g, s, p) -> (-g, s, p + pi), (g, s + pi, p) and
     (g, s, p) -> (g, -s, pi - p), and the slope and cpo are only defined modulo
     2 pi. The canonical representative has g >= 0, s in [0, pi/2] and every
     angle wrapped to (-pi, pi].
    */
    FrequencyCalibration canonical() const;
};

struct CalibrationSolution
{
    FrequencyCalibration frequency;
    Eigen::VectorXd antenna_offsets; // xi per antenna [rad], (-pi, pi]
    double fit_residual_rms = 0.0;   // [rad]
    bool iq_unidentifiable = false;  // gain mismatch ~ 0: time offset and phase mismatch are arbitrary
    std::optional<int> sto_peak;     // diagnostic PDP peak index

    static CalibrationSolution zero(Eigen::Index antennas);
    static CalibrationSolution from_impairments(const ImpairmentParams &imp, int subcarriers, Eigen::Index antennas);

    /// Total modelled error phase at antenna m (0-based) and subcarrier n (1-based).
    double phase(Eigen::Index antenna, int n) const;

    nlohmann::json to_json() const;
    static CalibrationSolution from_json(const nlohmann::json &j);
};

/*
 Residual phase after removing a known LoS response. Per sample an
 antennas x subcarriers matrix wrapped to (-pi, pi]; entries where either the
 measurement or the model has zero magnitude are NaN and excluded from `mean`.
 `mean` is the circular mean over antennas and samples per subcarrier.
*/
struct ResidualPhase
{
    Eigen::VectorXd mean;
    std::vector<Eigen::MatrixXd> samples;
    std::size_t excluded = 0;
};

ResidualPhase residual_phase(std::span<const CsiMatrix> measured, std::span<const CsiMatrix> models);

ResidualPhase residual_phase_after_los_removal(std::span<const CsiMatrix> measured,
                                               std::span<const Eigen::Vector3d> tx_positions,
                                               const ArrayTopology &topo);

/// Mode over rows and packets of the PDP argmax, excluding the zero-delay bin. Ties go to the smaller index.
int estimate_sto_peak(std::span<const CsiMatrix> batch);

struct LmSettings
{
    double initial_damping = 1e-3;
    double damping_factor = 10.0;
    double step_tolerance = 1e-10;
    int max_iterations = 200;
    bool multi_start = true;
};

struct FrequencyFit
{
    FrequencyCalibration params; // canonical
    double residual_rms = 0.0;
    int iterations = 0;
    bool converged = false;
    bool iq_unidentifiable = false;
    std::vector<double> objective_trace; // objective after each accepted step of the selected start
};

class CalibrationDidNotConverge : public std::runtime_error
{
public:
    CalibrationDidNotConverge(const std::string &what, FrequencyFit best)
        : std::runtime_error(what), best_(std::move(best))
    {
    }
    const FrequencyFit &best() const { return best_; }

private:
    FrequencyFit best_;
};

/// Levenberg-Marquardt fit of the frequency-domain error model to the mean residual phase.
FrequencyFit fit_frequency_calibration(const Eigen::VectorXd &mean_residual, const LmSettings &settings = {},
                                       std::optional<int> sto_hint = std::nullopt);

/// Residual phase left after removing the fitted frequency model (per sample).
std::vector<Eigen::MatrixXd> antenna_residuals(const ResidualPhase &residual, const FrequencyCalibration &freq);

class LowConfidenceOffsets : public std::runtime_error
{
public:
    LowConfidenceOffsets(const std::string &what, std::vector<Eigen::Index> antennas, Eigen::VectorXd estimate)
        : std::runtime_error(what), antennas_(std::move(antennas)), estimate_(std::move(estimate))
    {
    }
    const std::vector<Eigen::Index> &antennas() const { return antennas_; }
    const Eigen::VectorXd &estimate() const { return estimate_; }

private:
    std::vector<Eigen::Index> antennas_;
    Eigen::VectorXd estimate_;
};

inline constexpr std::size_t kMinReferenceSamples = 64;

/*
 Per-antenna circular mean of exp(j residual) over reference points and
 subcarriers. Needs at least kMinReferenceSamples reference points; an antenna
 whose mean resultant length falls below `min_resultant` raises LowConfidenceOffsets.
*/
Eigen::VectorXd estimate_antenna_offsets(std::span<const Eigen::MatrixXd> residuals, double min_resultant = 0.05);

/// Multiplies every entry by the conjugate of the modelled error phasor. Magnitudes are untouched.
CsiMatrix apply_calibration(const CsiMatrix &raw, const CalibrationSolution &sol);

/// Both calibration stages on a set of reference points with known UE positions.
CalibrationSolution calibrate(std::span<const CsiMatrix> measured, std::span<const Eigen::Vector3d> tx_positions,
                              const ArrayTopology &topo, const LmSettings &settings = {});

} // namespace mimoloc
