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

#include "mimoloc/link_metrics.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace mimoloc
{

namespace
{
template <typename T>
T q_impl(T x)
{
    using std::erfc;
    using std::sqrt;
    return T(0.5) * erfc(x / sqrt(T(2)));
}

// Solves log Q(x) = log p for p <= 1/2 (so x >= 0) with Newton steps kept inside
// a shrinking bracket; falls back to bisection whenever Newton leaves it.
template <typename T>
T q_inverse_upper(T p)
{
    using std::abs;
    using std::exp;
    using std::log;
    using std::sqrt;

    const T log_p = log(p);
    T lo = 0, hi = 1;
    while (log(q_impl(hi)) > log_p)
    {
        lo = hi;
        hi *= 2;
        if (hi > T(80))
            break;
    }

    T x = std::min(hi, std::max(lo, sqrt(T(-2) * log_p)));
    const T inv_sqrt_2pi = T(1) / sqrt(T(2) * T(kPi));
    for (int it = 0; it < 200; ++it)
    {
        const T q = q_impl(x);
        const T g = log(q) - log_p;
        if (g > 0)
            lo = x;
        else
            hi = x;
        const T pdf = inv_sqrt_2pi * exp(-x * x / 2);
        const T slope = -pdf / q; // d log Q / dx
        T next = x - g / slope;
        if (!(next > lo && next < hi))
            next = (lo + hi) / 2;
        if (abs(next - x) <= std::numeric_limits<T>::epsilon() * std::max(T(1), abs(x)) || hi - lo <= std::numeric_limits<T>::epsilon() * std::max(T(1), hi))
            return next;
        x = next;
    }
    return x;
}

template <typename T>
T q_inverse_impl(T p)
{
    if (!(p > T(0) && p < T(1)))
        throw InvalidInput("Q^-1 is defined on (0, 1)");
    if (p == T(0.5))
        return T(0);
    if (p > T(0.5))
        return -q_inverse_upper(T(1) - p); // exact for p >= 1/2
    return q_inverse_upper(p);
}
} // namespace

double q_function(double x) { return q_impl(x); }
long double q_function(long double x) { return q_impl(x); }
double q_inverse(double p) { return q_inverse_impl(p); }
long double q_inverse(long double p) { return q_inverse_impl(p); }

EffectiveSnr effective_snr(const CsiMatrix &csi, std::span<const std::size_t> antennas, double noise_variance)
{
    if (!(noise_variance > 0.0))
        throw InvalidInput("noise variance must be positive");
    if (antennas.empty())
        throw InvalidInput("effective SNR needs at least one antenna");

    EffectiveSnr out;
    const Eigen::Index nk = csi.subcarriers();
    out.per_subcarrier_ber.resize(std::size_t(nk));
    double total_power = 0.0;
    for (Eigen::Index k = 0; k < nk; ++k)
    {
        double s = 0.0;
        for (std::size_t m : antennas)
        {
            if (Eigen::Index(m) >= csi.antennas())
                throw InvalidInput("antenna index out of range");
            s += std::norm(csi.values(Eigen::Index(m), k));
        }
        s /= noise_variance;
        total_power += s;
        out.per_subcarrier_ber[std::size_t(k)] = q_function(std::sqrt(s));
    }
    if (!(total_power > 0.0))
        throw InvalidInput("effective SNR of an all-zero CSI matrix");

    out.mean_ber = std::accumulate(out.per_subcarrier_ber.begin(), out.per_subcarrier_ber.end(), 0.0) / double(nk);
    if (out.mean_ber <= 0.0)
    {
        out.infinite = true;
        out.gamma_eff = std::numeric_limits<double>::infinity();
        return out;
    }
    const double x = q_inverse(out.mean_ber);
    out.gamma_eff = x * x;
    return out;
}

EffectiveSnr effective_snr(const CsiMatrix &csi, double noise_variance)
{
    std::vector<std::size_t> all(std::size_t(csi.antennas()));
    std::iota(all.begin(), all.end(), std::size_t{0});
    return effective_snr(csi, all, noise_variance);
}

} // namespace mimoloc
