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

#include "mimoloc/csi_calib.hpp"

#include <nlohmann/json.hpp>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace mimoloc
{

double FrequencyCalibration::phase(int n) const
{
    return iq_imbalance_phase(n, iq_gain, iq_time_offset, iq_phase) + slope * n + cpo;
}

FrequencyCalibration FrequencyCalibration::canonical() const
{
    FrequencyCalibration c = *this;
    if (c.iq_gain < 0.0)
    {
        c.iq_gain = -c.iq_gain;
        c.iq_phase += kPi;
    }
    // time offset has period pi; fold it into [0, pi/2]
    c.iq_time_offset = std::remainder(c.iq_time_offset, kPi);
    if (c.iq_time_offset < 0.0)
    {
        c.iq_time_offset = -c.iq_time_offset;
        c.iq_phase = kPi - c.iq_phase;
    }
    c.iq_phase = wrap_phase(c.iq_phase);
    c.slope = wrap_phase(c.slope);
    c.cpo = wrap_phase(c.cpo);
    return c;
}

CalibrationSolution CalibrationSolution::zero(Eigen::Index antennas)
{
    CalibrationSolution s;
    s.antenna_offsets = Eigen::VectorXd::Zero(antennas);
    return s;
}

CalibrationSolution CalibrationSolution::from_impairments(const ImpairmentParams &imp, int subcarriers,
                                                          Eigen::Index antennas)
{
    CalibrationSolution s;
    s.frequency.iq_gain = imp.iq_gain;
    s.frequency.iq_time_offset = imp.iq_time_offset;
    s.frequency.iq_phase = imp.iq_phase;
    s.frequency.slope = imp.sfo_slope + 2.0 * kPi * imp.sto_samples / subcarriers;
    s.frequency.cpo = imp.cpo;
    s.antenna_offsets = imp.antenna_offsets.size() ? imp.antenna_offsets : Eigen::VectorXd::Zero(antennas);
    return s;
}

double CalibrationSolution::phase(Eigen::Index antenna, int n) const
{
    return frequency.phase(n) + (antenna_offsets.size() ? antenna_offsets[antenna] : 0.0);
}

nlohmann::json CalibrationSolution::to_json() const
{
    nlohmann::json j;
    j["iq_gain"] = frequency.iq_gain;
    j["iq_time_offset"] = frequency.iq_time_offset;
    j["iq_phase"] = frequency.iq_phase;
    j["slope"] = frequency.slope;
    j["cpo"] = frequency.cpo;
    j["antenna_offsets"] = std::vector<double>(antenna_offsets.data(), antenna_offsets.data() + antenna_offsets.size());
    j["fit_residual_rms"] = fit_residual_rms;
    j["iq_unidentifiable"] = iq_unidentifiable;
    if (sto_peak)
        j["sto_peak"] = *sto_peak;
    return j;
}

CalibrationSolution CalibrationSolution::from_json(const nlohmann::json &j)
{
    try
    {
        CalibrationSolution s;
        s.frequency.iq_gain = j.at("iq_gain").get<double>();
        s.frequency.iq_time_offset = j.at("iq_time_offset").get<double>();
        s.frequency.iq_phase = j.at("iq_phase").get<double>();
        s.frequency.slope = j.at("slope").get<double>();
        s.frequency.cpo = j.at("cpo").get<double>();
        const auto xi = j.at("antenna_offsets").get<std::vector<double>>();
        s.antenna_offsets = Eigen::Map<const Eigen::VectorXd>(xi.data(), Eigen::Index(xi.size()));
        s.fit_residual_rms = j.value("fit_residual_rms", 0.0);
        s.iq_unidentifiable = j.value("iq_unidentifiable", false);
        if (j.contains("sto_peak"))
            s.sto_peak = j["sto_peak"].get<int>();
        return s;
    }
    catch (const nlohmann::json::exception &e)
    {
        throw InvalidInput(std::string("malformed calibration solution: ") + e.what());
    }
}

ResidualPhase residual_phase(std::span<const CsiMatrix> measured, std::span<const CsiMatrix> models)
{
    if (measured.empty() || measured.size() != models.size())
        throw InvalidInput("residual phase needs matching, nonempty measurement and model batches");
    const Eigen::Index nr = measured.front().antennas();
    const Eigen::Index nk = measured.front().subcarriers();

    ResidualPhase out;
    Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(nk);
    out.samples.reserve(measured.size());
    for (std::size_t s = 0; s < measured.size(); ++s)
    {
        const auto &h = measured[s].values;
        const auto &g = models[s].values;
        if (h.rows() != nr || h.cols() != nk || g.rows() != nr || g.cols() != nk)
            throw InvalidInput("CSI dimensions differ within the batch");
        Eigen::MatrixXd r(nr, nk);
        for (Eigen::Index m = 0; m < nr; ++m)
            for (Eigen::Index k = 0; k < nk; ++k)
            {
                const cdouble z = h(m, k) * std::conj(g(m, k));
                if (!(std::abs(z) > 0.0) || !std::isfinite(std::abs(z)))
                {
                    r(m, k) = std::numeric_limits<double>::quiet_NaN();
                    ++out.excluded;
                    continue;
                }
                r(m, k) = std::arg(z);
                acc[k] += z / std::abs(z);
            }
        out.samples.push_back(std::move(r));
    }
    out.mean.resize(nk);
    for (Eigen::Index k = 0; k < nk; ++k)
        out.mean[k] = std::abs(acc[k]) > 0.0 ? std::arg(acc[k]) : 0.0;
    return out;
}

ResidualPhase residual_phase_after_los_removal(std::span<const CsiMatrix> measured,
                                               std::span<const Eigen::Vector3d> tx_positions,
                                               const ArrayTopology &topo)
{
    if (measured.size() != tx_positions.size())
        throw InvalidInput("one transmitter position per CSI sample is required");
    std::vector<CsiMatrix> models;
    models.reserve(measured.size());
    for (std::size_t s = 0; s < measured.size(); ++s)
        models.push_back(los_response(topo, tx_positions[s], measured[s].frequencies));
    return residual_phase(measured, models);
}

int estimate_sto_peak(std::span<const CsiMatrix> batch)
{
    if (batch.empty())
        throw InvalidInput("STO estimation needs at least one CSI sample");

    Eigen::FFT<double> fft;
    std::map<int, std::size_t> votes;
    std::vector<std::complex<double>> row, impulse;
    for (const auto &csi : batch)
    {
        const Eigen::Index nk = csi.subcarriers();
        if (nk < 2)
            throw InvalidInput("STO estimation needs at least two subcarriers");
        row.resize(std::size_t(nk));
        for (Eigen::Index m = 0; m < csi.antennas(); ++m)
        {
            for (Eigen::Index k = 0; k < nk; ++k)
                row[std::size_t(k)] = csi.values(m, k);
            fft.inv(impulse, row);
            int best = 1;
            for (int n = 2; n < int(nk); ++n)
                if (std::norm(impulse[std::size_t(n)]) > std::norm(impulse[std::size_t(best)]))
                    best = n;
            ++votes[best];
        }
    }
    // std::map iterates in ascending bin order, so the first maximum is the smallest bin
    int mode = votes.begin()->first;
    std::size_t count = 0;
    for (const auto &[bin, c] : votes)
        if (c > count)
        {
            mode = bin;
            count = c;
        }
    return mode;
}

namespace
{
using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat5 = Eigen::Matrix<double, 5, 5>;

/*
 LM works in (a, b, s, slope, cpo) with a = g cos(p), b = g sin(p), where the IQ
 term reads atan(a tan(n s) + b). That form is linear in (a, b) inside the
 arctangent and straightens the valley that (g, p) bends for small g.
*/
FrequencyCalibration from_vec(const Vec5 &p)
{
    return FrequencyCalibration{std::hypot(p[0], p[1]), p[2], std::atan2(p[1], p[0]), p[3], p[4]};
}

// Wrapped residuals r_n = wrap(theta_n - model_n) and their Jacobian dr/dp.
double evaluate(const Eigen::VectorXd &theta, const Vec5 &p, Eigen::VectorXd *r, Eigen::MatrixXd *jac)
{
    const auto nk = theta.size();
    const double a = p[0], b = p[1], st = p[2];
    const FrequencyCalibration model = from_vec(p);
    double obj = 0.0;
    for (Eigen::Index k = 0; k < nk; ++k)
    {
        const int n = int(k + 1);
        const double res = wrap_phase(theta[k] - model.phase(n));
        obj += res * res;
        if (r)
            (*r)[k] = res;
        if (jac)
        {
            const double c = std::cos(n * st), s = std::sin(n * st);
            const double v = a * s + b * c;
            const double denom = c * c + v * v;
            double d_a = 0.0, d_b = 0.0, d_time = 0.0;
            if (denom > 0.0)
            {
                d_a = s * c / denom;
                d_b = c * c / denom;
                d_time = a * n / denom;
            }
            jac->row(k) << -d_a, -d_b, -d_time, -double(n), -1.0;
        }
    }
    return obj;
}

struct LmRun
{
    Vec5 p = Vec5::Zero();
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> trace;
};

LmRun levenberg_marquardt(const Eigen::VectorXd &theta, Vec5 p, const LmSettings &cfg)
{
    const auto nk = theta.size();
    Eigen::VectorXd r(nk), r_try(nk);
    Eigen::MatrixXd jac(nk, 5);

    LmRun run;
    double lambda = cfg.initial_damping;
    double obj = evaluate(theta, p, &r, &jac);
    run.trace.push_back(obj);
    for (int it = 0; it < cfg.max_iterations; ++it)
    {
        run.iterations = it + 1;
        if (obj == 0.0)
        {
            run.converged = true;
            break;
        }
        // QR on [J; sqrt(lambda) I] rather than the normal equations: J'J is nearly
        // singular when the gain mismatch is small.
        Eigen::MatrixXd aug(nk + 5, 5);
        aug.topRows(nk) = jac;
        aug.bottomRows(5) = std::sqrt(lambda) * Mat5::Identity();
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nk + 5);
        rhs.head(nk) = -r;
        const Vec5 step = aug.colPivHouseholderQr().solve(rhs);
        if (!step.allFinite())
            break;
        if (step.norm() < cfg.step_tolerance)
        {
            run.converged = true;
            break;
        }
        const Vec5 candidate = p + step;
        const double obj_try = evaluate(theta, candidate, &r_try, nullptr);
        if (obj_try < obj)
        {
            p = candidate;
            obj = evaluate(theta, p, &r, &jac);
            run.trace.push_back(obj);
            lambda = std::max(lambda / cfg.damping_factor, 1e-15);
        }
        else
        {
            lambda *= cfg.damping_factor;
            if (lambda > 1e16)
            {
                run.converged = true; // no descent direction left at machine precision
                break;
            }
        }
    }
    run.p = p;
    run.objective = obj;
    return run;
}

// Least-squares line through the unwrapped phase: returns {slope, intercept} in 1-based index n.
std::pair<double, double> line_fit(const Eigen::VectorXd &theta)
{
    const auto nk = theta.size();
    Eigen::VectorXd u(nk);
    u[0] = theta[0];
    for (Eigen::Index k = 1; k < nk; ++k)
        u[k] = u[k - 1] + wrap_phase(theta[k] - theta[k - 1]);
    double sn = 0, su = 0, snn = 0, snu = 0;
    for (Eigen::Index k = 0; k < nk; ++k)
    {
        const double n = double(k + 1);
        sn += n;
        su += u[k];
        snn += n * n;
        snu += n * u[k];
    }
    const double cnt = double(nk);
    const double slope = (cnt * snu - sn * su) / (cnt * snn - sn * sn);
    return {slope, (su - slope * sn) / cnt};
}

/*
 The IQ term has poles where cos(n s) = 0 and LM cannot drag a pole across a
 subcarrier index, so starts must already place the poles correctly. Time
 offsets are screened on a grid fine enough to move the last pole by under
 half an index; for each (time offset, phase mismatch) pair the slope and cpo
 that best explain the remainder come from a zero-padded FFT peak.
*/
std::vector<Vec5> screen_starts(const Eigen::VectorXd &theta, std::size_t keep = 12)
{
    const auto nk = theta.size();
    constexpr int pad = 1024;
    constexpr double gain0 = 0.1;
    std::vector<double> offsets{0.0};
    for (double s = kPi / (4.0 * double(nk)); s < kPi / 2.0; s *= 1.0 + 1.0 / (2.0 * double(nk)))
        offsets.push_back(s);

    struct Scored
    {
        double score;
        Vec5 p;
    };
    std::vector<Scored> scored;
    Eigen::FFT<double> fft;
    std::vector<cdouble> r(pad), spec;
    for (double st : offsets)
        for (int q = 0; q < 8; ++q)
        {
            const double ep = -kPi + kPi / 4.0 * (q + 1);
            std::fill(r.begin(), r.end(), cdouble{0.0, 0.0});
            for (Eigen::Index k = 0; k < nk; ++k)
                r[std::size_t(k)] = std::polar(1.0, theta[k] - iq_imbalance_phase(int(k + 1), gain0, st, ep));
            fft.fwd(spec, r);
            std::size_t peak = 0;
            for (std::size_t m = 1; m < spec.size(); ++m)
                if (std::norm(spec[m]) > std::norm(spec[peak]))
                    peak = m;
            const double slope = wrap_phase(2.0 * kPi * double(peak) / pad);
            cdouble acc{0.0, 0.0};
            for (Eigen::Index k = 0; k < nk; ++k)
                acc += r[std::size_t(k)] * std::polar(1.0, -slope * double(k + 1));
            Vec5 p;
            p << gain0 * std::cos(ep), gain0 * std::sin(ep), st, slope, std::arg(acc);
            scored.push_back({std::abs(spec[peak]), p});
        }
    const std::size_t n = std::min(keep, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + std::ptrdiff_t(n), scored.end(),
                      [](const Scored &a, const Scored &b) { return a.score > b.score; });
    std::vector<Vec5> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(scored[i].p);
    return out;
}
} // namespace

FrequencyFit fit_frequency_calibration(const Eigen::VectorXd &mean_residual, const LmSettings &settings,
                                       std::optional<int> sto_hint)
{
    const auto nk = mean_residual.size();
    if (nk < 5)
        throw InvalidInput("frequency calibration needs at least 5 subcarriers");
    if (!mean_residual.allFinite())
        throw InvalidInput("mean residual phase contains non-finite entries");

    const auto [slope0, icpt0] = line_fit(mean_residual);
    std::vector<Vec5> starts;
    {
        Vec5 p;
        p << 0.1, 0.0, kPi / double(nk), slope0, icpt0;
        starts.push_back(p);
    }
    if (settings.multi_start)
    {
        for (const auto &p : screen_starts(mean_residual))
            starts.push_back(p);
        if (sto_hint)
        {
            Vec5 p;
            p << 0.1, 0.0, kPi / double(nk), 2.0 * kPi * (*sto_hint) / double(nk), icpt0;
            starts.push_back(p);
        }
    }

    LmRun best;
    best.objective = std::numeric_limits<double>::infinity();
    for (const auto &p0 : starts)
    {
        LmRun run = levenberg_marquardt(mean_residual, p0, settings);
        if (run.objective < best.objective)
            best = std::move(run);
    }

    FrequencyFit fit;
    fit.params = from_vec(best.p);
    // An IQ term that is constant across subcarriers (s ~ 0 mod pi) is only a
    // phase offset; fold it into the cpo so the zero-gain solution is reported.
    {
        Eigen::VectorXd z(nk);
        for (Eigen::Index k = 0; k < nk; ++k)
            z[k] = iq_imbalance_phase(int(k + 1), fit.params.iq_gain, fit.params.iq_time_offset, fit.params.iq_phase);
        if ((z.array() - z.mean()).abs().maxCoeff() < 1e-9)
        {
            fit.params.cpo += z.mean();
            fit.params.iq_gain = fit.params.iq_time_offset = fit.params.iq_phase = 0.0;
        }
    }
    fit.params = fit.params.canonical();
    fit.residual_rms = std::sqrt(best.objective / double(nk));
    fit.iterations = best.iterations;
    fit.converged = best.converged;
    fit.objective_trace = std::move(best.trace);
    fit.iq_unidentifiable = std::abs(fit.params.iq_gain) < 1e-6;
    if (!fit.converged)
        throw CalibrationDidNotConverge("frequency calibration did not converge", fit);
    return fit;
}

std::vector<Eigen::MatrixXd> antenna_residuals(const ResidualPhase &residual, const FrequencyCalibration &freq)
{
    std::vector<Eigen::MatrixXd> out;
    out.reserve(residual.samples.size());
    for (const auto &r : residual.samples)
    {
        Eigen::MatrixXd d(r.rows(), r.cols());
        for (Eigen::Index k = 0; k < r.cols(); ++k)
        {
            const double model = freq.phase(int(k + 1));
            for (Eigen::Index m = 0; m < r.rows(); ++m)
                d(m, k) = std::isnan(r(m, k)) ? r(m, k) : wrap_phase(r(m, k) - model);
        }
        out.push_back(std::move(d));
    }
    return out;
}

Eigen::VectorXd estimate_antenna_offsets(std::span<const Eigen::MatrixXd> residuals, double min_resultant)
{
    if (residuals.size() < kMinReferenceSamples)
        throw InvalidInput("antenna calibration needs at least 64 reference samples");
    const Eigen::Index nr = residuals.front().rows();

    Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(nr);
    Eigen::VectorXd count = Eigen::VectorXd::Zero(nr);
    for (const auto &r : residuals)
    {
        if (r.rows() != nr)
            throw InvalidInput("residual antenna counts differ");
        for (Eigen::Index m = 0; m < nr; ++m)
            for (Eigen::Index k = 0; k < r.cols(); ++k)
                if (!std::isnan(r(m, k)))
                {
                    acc[m] += std::polar(1.0, r(m, k));
                    count[m] += 1.0;
                }
    }

    Eigen::VectorXd xi(nr);
    std::vector<Eigen::Index> weak;
    for (Eigen::Index m = 0; m < nr; ++m)
    {
        const double resultant = count[m] > 0 ? std::abs(acc[m]) / count[m] : 0.0;
        xi[m] = resultant > 0.0 ? std::arg(acc[m]) : 0.0;
        if (resultant < min_resultant)
            weak.push_back(m);
    }
    if (!weak.empty())
        throw LowConfidenceOffsets("incoherent residual phase on " + std::to_string(weak.size()) + " antenna(s)",
                                   std::move(weak), xi);
    return xi;
}

CsiMatrix apply_calibration(const CsiMatrix &raw, const CalibrationSolution &sol)
{
    if (sol.antenna_offsets.size() != 0 && sol.antenna_offsets.size() != raw.antennas())
        throw InvalidInput("calibration antenna count does not match the CSI");
    CsiMatrix out = raw;
    for (Eigen::Index k = 0; k < raw.subcarriers(); ++k)
    {
        const double common = sol.frequency.phase(int(k + 1));
        for (Eigen::Index m = 0; m < raw.antennas(); ++m)
        {
            const double phi = common + (sol.antenna_offsets.size() ? sol.antenna_offsets[m] : 0.0);
            if (phi != 0.0)
                out.values(m, k) *= std::polar(1.0, phi);
        }
    }
    return out;
}

CalibrationSolution calibrate(std::span<const CsiMatrix> measured, std::span<const Eigen::Vector3d> tx_positions,
                              const ArrayTopology &topo, const LmSettings &settings)
{
    // The impairment multiplies by exp(-j phi), so the LoS-removed residual is -phi.
    // Both stages fit the error phase itself.
    ResidualPhase residual = residual_phase_after_los_removal(measured, tx_positions, topo);
    residual.mean = -residual.mean;
    for (auto &r : residual.samples)
        r = -r;
    const int sto = estimate_sto_peak(measured);
    const FrequencyFit fit = fit_frequency_calibration(residual.mean, settings, sto);
    const auto psi = antenna_residuals(residual, fit.params);

    CalibrationSolution sol;
    sol.frequency = fit.params;
    sol.antenna_offsets = estimate_antenna_offsets(psi);
    sol.fit_residual_rms = fit.residual_rms;
    sol.iq_unidentifiable = fit.iq_unidentifiable;
    sol.sto_peak = sto;
    return sol;
}

} // namespace mimoloc
