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

#include <span>
#include <vector>

namespace mimoloc
{

/// Upper tail of the standard normal distribution.
double q_function(double x);
long double q_function(long double x);

/// Inverse of q_function on (0, 1); bracketed Newton refinement to full precision.
double q_inverse(double p);
long double q_inverse(long double p);

struct EffectiveSnr
{
    std::vector<double> per_subcarrier_ber;
    double mean_ber = 0.0;
    double gamma_eff = 0.0; // linear; +inf when the mean BER underflows to zero
    bool infinite = false;

    double gamma_eff_db() const { return db10(gamma_eff); }
};

/*
 QPSK effective SNR of one CSI snapshot: per subcarrier BER = Q(sqrt(sum_r |H|^2 / noise_variance)),
 averaged over subcarriers and mapped back through (Q^-1(mean BER))^2. The
 noise variance hook rescales un-normalised recordings; synthetic datasets pass
 noise_std^2.
*/
EffectiveSnr effective_snr(const CsiMatrix &csi, double noise_variance = 1.0);

/// Same, restricted to a subset of antennas (per-sub-array variant).
EffectiveSnr effective_snr(const CsiMatrix &csi, std::span<const std::size_t> antennas, double noise_variance = 1.0);

} // namespace mimoloc
