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

#include "mimoloc/sage.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace mimoloc
{

double SageConfig::fine_delay_step() const
{
    return delay_step / std::pow(4.0, refinement_levels);
}

void SageConfig::validate() const
{
    if (max_paths < 1)
        throw InvalidInput("max_paths must be at least 1");
    if (!(stop_dynamic_range_db > 0.0))
        throw InvalidInput("stop dynamic range must be positive");
    if (!(delay_step > 0.0) || !(delay_max >= delay_min) || delay_min < 0.0)
        throw InvalidInput("delay grid is empty");
    if (!(angle_step > 0.0) || !(fine_angle_step > 0.0))
        throw InvalidInput("angle grid is empty");
    if (refinement_levels < 0 || em_cycles < 0)
        throw InvalidInput("refinement levels and EM cycles must be non-negative");
}

double angle_limit(const SubArray &sub, const SageConfig &cfg)
{
    if (cfg.angle_limit)
        return std::clamp(*cfg.angle_limit, cfg.angle_step, kPi / 2.0);
    if (sub.spacing <= 0.0)
        return kPi / 2.0;
    return std::asin(std::min(1.0, sub.wavelength / (2.0 * sub.spacing)));
}

namespace
{

// Matched-filter kernels on one sub-array: steering phasors from the local
// offsets and delay phasors from the absolute subcarrier frequencies.
class PathModel
{
public:
    PathModel(const SubArray &sub, const Eigen::VectorXd &frequencies)
        : planar_(sub.is_planar()), freqs_(frequencies), wavenumber_(2.0 * kPi / sub.wavelength)
    {
        if (sub.size() == 0)
            throw InvalidInput("empty sub-array");
        offsets_.resize(Eigen::Index(sub.size()), 3);
        for (std::size_t m = 0; m < sub.size(); ++m)
            offsets_.row(Eigen::Index(m)) = sub.local_offsets[m].transpose();
    }

    bool planar() const { return planar_; }
    Eigen::Index antennas() const { return offsets_.rows(); }
    Eigen::Index subcarriers() const { return freqs_.size(); }

    Eigen::VectorXcd steering(double az, double el) const
    {
        const Eigen::Vector3d omega = Direction{az, planar_ ? std::optional<double>(el) : std::nullopt}.local_vector();
        const Eigen::VectorXd phase = wavenumber_ * (offsets_ * omega);
        Eigen::VectorXcd a(phase.size());
        for (Eigen::Index m = 0; m < phase.size(); ++m)
            a[m] = std::polar(1.0, phase[m]);
        return a;
    }

    Eigen::VectorXcd delay(double tau) const
    {
        Eigen::VectorXcd b(freqs_.size());
        for (Eigen::Index k = 0; k < freqs_.size(); ++k)
            b[k] = std::polar(1.0, -2.0 * kPi * freqs_[k] * tau);
        return b;
    }

    // |sum_k y_k conj(b_k(tau))|^2 for a beamformed row y = a^H X
    double delay_power(const Eigen::RowVectorXcd &y, double tau) const
    {
        cdouble z{0.0, 0.0};
        for (Eigen::Index k = 0; k < freqs_.size(); ++k)
            z += y[k] * std::polar(1.0, 2.0 * kPi * freqs_[k] * tau);
        return std::norm(z);
    }

    // |a(Omega)^H v|^2 for a delay-filtered column v = X conj(b)
    double angle_power(const Eigen::VectorXcd &v, double az, double el) const
    {
        return std::norm(steering(az, el).dot(v));
    }

    double projected_power(const Eigen::MatrixXcd &x, const MultipathComponent &p) const
    {
        const Eigen::VectorXcd a = steering(p.azimuth, p.elevation.value_or(0.0));
        const Eigen::VectorXcd b = delay(p.delay);
        return std::norm(a.dot(x * b.conjugate()));
    }

    cdouble amplitude(const Eigen::MatrixXcd &x, const MultipathComponent &p) const
    {
        const Eigen::VectorXcd a = steering(p.azimuth, p.elevation.value_or(0.0));
        const Eigen::VectorXcd b = delay(p.delay);
        return a.dot(x * b.conjugate()) / double(antennas() * subcarriers());
    }

private:
    bool planar_;
    Eigen::MatrixXd offsets_;
    Eigen::VectorXd freqs_;
    double wavenumber_;
};

// Maximum over the multiples of `step` inside [lo, hi] (first maximum wins). Anchoring
// the grid at zero makes a halved step produce a superset of the points.
double grid_argmax(const std::function<double(double)> &f, double lo, double hi, double step)
{
    lo = std::ceil(lo / step - 1e-9) * step;
    if (lo > hi)
        return std::clamp(0.5 * (lo + hi), hi, lo);
    const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
    double best_x = lo;
    double best_v = -1.0;
    for (long i = 0; i <= n; ++i)
    {
        const double x = lo + double(i) * step;
        const double v = f(x);
        if (v > best_v)
        {
            best_v = v;
            best_x = x;
        }
    }
    return best_x;
}

double golden_max(const std::function<double(double)> &f, double lo, double hi, double tol)
{
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol)
    {
        if (fc > fd)
        {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        }
        else
        {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

// Polished maximum near a grid point; the grid point is kept unless the polish beats it.
double polish(const std::function<double(double)> &f, double x, double step, double lo, double hi)
{
    const double y = golden_max(f, std::max(lo, x - step), std::min(hi, x + step), step * 1e-6);
    return f(y) > f(x) ? y : x;
}

double search_delay(const std::function<double(double)> &f, const SageConfig &cfg)
{
    double step = cfg.delay_step;
    double tau = grid_argmax(f, cfg.delay_min, cfg.delay_max, step);
    for (int level = 0; level < cfg.refinement_levels; ++level)
    {
        const double fine = step / 4.0;
        tau = grid_argmax(f, std::max(cfg.delay_min, tau - step), std::min(cfg.delay_max, tau + step) + 1e-18, fine);
        step = fine;
    }
    if (cfg.continuous_refinement)
        tau = polish(f, tau, step, cfg.delay_min, cfg.delay_max);
    return tau;
}

double search_azimuth(const std::function<double(double)> &f, double lo, double hi, const SageConfig &cfg)
{
    double az = grid_argmax(f, lo, hi + 1e-12, cfg.angle_step);
    az = grid_argmax(f, std::max(lo, az - cfg.angle_step), std::min(hi, az + cfg.angle_step) + 1e-12,
                     cfg.fine_angle_step);
    if (cfg.continuous_refinement)
        az = polish(f, az, cfg.fine_angle_step, lo, hi);
    return az;
}

struct Angles
{
    double az = 0.0;
    double el = 0.0;
};

Angles search_planar(const PathModel &model, const Eigen::VectorXcd &v, double az_lo, double az_hi, double el_lo,
                     double el_hi, const SageConfig &cfg)
{
    auto grid2 = [&](double alo, double ahi, double elo, double ehi, double step) {
        alo = std::ceil(alo / step - 1e-9) * step;
        elo = std::ceil(elo / step - 1e-9) * step;
        Angles best{alo, elo};
        double best_v = -1.0;
        const auto na = static_cast<long>(std::floor((ahi - alo) / step + 1e-9));
        const auto ne = static_cast<long>(std::floor((ehi - elo) / step + 1e-9));
        for (long i = 0; i <= na; ++i)
            for (long j = 0; j <= ne; ++j)
            {
                const double a = alo + double(i) * step, e = elo + double(j) * step;
                const double p = model.angle_power(v, a, e);
                if (p > best_v)
                {
                    best_v = p;
                    best = {a, e};
                }
            }
        return best;
    };
    Angles best = grid2(az_lo, az_hi, el_lo, el_hi, cfg.angle_step);
    best = grid2(std::max(az_lo, best.az - cfg.angle_step), std::min(az_hi, best.az + cfg.angle_step),
                 std::max(el_lo, best.el - cfg.angle_step), std::min(el_hi, best.el + cfg.angle_step),
                 cfg.fine_angle_step);
    if (cfg.continuous_refinement)
    {
        for (int round = 0; round < 4; ++round)
        {
            best.az = polish([&](double a) { return model.angle_power(v, a, best.el); }, best.az,
                             cfg.fine_angle_step, az_lo, az_hi);
            best.el = polish([&](double e) { return model.angle_power(v, best.az, e); }, best.el,
                             cfg.fine_angle_step, el_lo, el_hi);
        }
    }
    return best;
}

void check_dims(const CsiMatrix &csi, const SubArray &sub)
{
    if (csi.antennas() != Eigen::Index(sub.size()))
        throw InvalidInput("CSI rows do not match the sub-array size");
    if (csi.frequencies.size() != csi.subcarriers() || csi.subcarriers() == 0)
        throw InvalidInput("CSI frequency grid does not match its columns");
}

} // namespace

Eigen::MatrixXcd path_contribution(const SubArray &sub, const MultipathComponent &path,
                                   const Eigen::VectorXd &frequencies)
{
    const PathModel model(sub, frequencies);
    const Eigen::VectorXcd a = model.steering(path.azimuth, path.elevation.value_or(0.0));
    const Eigen::VectorXcd b = model.delay(path.delay);
    return path.amplitude * (a * b.transpose());
}

CsiMatrix reconstruct(const SubArray &sub, const PathSet &paths, const Eigen::VectorXd &frequencies)
{
    CsiMatrix out;
    out.frequencies = frequencies;
    out.values = Eigen::MatrixXcd::Zero(Eigen::Index(sub.size()), frequencies.size());
    for (const auto &p : paths)
        if (!p.dead && p.amplitude != cdouble{0.0, 0.0})
            out.values += path_contribution(sub, p, frequencies);
    return out;
}

std::optional<MultipathComponent> initialize_mpc(const CsiMatrix &residual, const SubArray &sub, const SageConfig &cfg)
{
    cfg.validate();
    check_dims(residual, sub);
    const Eigen::MatrixXcd &x = residual.values;
    if (x.squaredNorm() == 0.0)
        return std::nullopt;
    const PathModel model(sub, residual.frequencies);

    // Delay: power delay profile summed over antennas, so no angle is needed yet.
    auto pdp = [&](double tau) {
        const Eigen::VectorXcd e = model.delay(tau).conjugate();
        return (x * e).squaredNorm();
    };
    MultipathComponent p;
    p.delay = search_delay(pdp, cfg);

    // Direction: beamforming spectrum at that delay.
    const double lim = angle_limit(sub, cfg);
    const Eigen::VectorXcd v = x * model.delay(p.delay).conjugate();
    if (model.planar())
    {
        const Angles a = search_planar(model, v, -lim, lim, -lim, lim, cfg);
        p.azimuth = a.az;
        p.elevation = a.el;
    }
    else
    {
        p.azimuth = search_azimuth([&](double az) { return model.angle_power(v, az, 0.0); }, -lim, lim, cfg);
    }

    // Delay again, now coherently along the beam.
    const Eigen::RowVectorXcd y = model.steering(p.azimuth, p.elevation.value_or(0.0)).adjoint() * x;
    p.delay = search_delay([&](double tau) { return model.delay_power(y, tau); }, cfg);
    p.amplitude = model.amplitude(x, p);
    return p;
}

CsiMatrix expectation_step(const CsiMatrix &csi, const SubArray &sub, const PathSet &components, std::size_t l)
{
    check_dims(csi, sub);
    CsiMatrix out = csi;
    for (std::size_t i = 0; i < components.size(); ++i)
        if (i != l && !components[i].dead && components[i].amplitude != cdouble{0.0, 0.0})
            out.values -= path_contribution(sub, components[i], csi.frequencies);
    return out;
}

MultipathComponent maximization_step(const CsiMatrix &residual, const SubArray &sub,
                                     const MultipathComponent &current, const SageConfig &cfg)
{
    cfg.validate();
    check_dims(residual, sub);
    const Eigen::MatrixXcd &x = residual.values;
    MultipathComponent next = current;
    if (x.squaredNorm() == 0.0)
    {
        next.amplitude = {0.0, 0.0};
        next.dead = true;
        return next;
    }
    const PathModel model(sub, residual.frequencies);
    if (model.planar() && !next.elevation)
        next.elevation = 0.0;

    const Eigen::RowVectorXcd y = model.steering(next.azimuth, next.elevation.value_or(0.0)).adjoint() * x;
    next.delay = search_delay([&](double tau) { return model.delay_power(y, tau); }, cfg);

    const double lim = angle_limit(sub, cfg);
    const Eigen::VectorXcd v = x * model.delay(next.delay).conjugate();
    if (model.planar())
    {
        const double w = cfg.local_angle_window;
        const Angles a = search_planar(model, v, std::max(-lim, next.azimuth - w), std::min(lim, next.azimuth + w),
                                       std::max(-lim, *next.elevation - w), std::min(lim, *next.elevation + w), cfg);
        next.azimuth = a.az;
        next.elevation = a.el;
    }
    else
    {
        next.azimuth = search_azimuth([&](double az) { return model.angle_power(v, az, 0.0); }, -lim, lim, cfg);
    }

    MultipathComponent keep = current;
    if (model.planar() && !keep.elevation)
        keep.elevation = 0.0;
    if (model.projected_power(x, next) < model.projected_power(x, keep))
        next = keep;
    next.amplitude = model.amplitude(x, next);
    next.dead = false;
    return next;
}

PathSet sage_extract(const CsiMatrix &csi, const SubArray &sub, const SageConfig &cfg)
{
    cfg.validate();
    check_dims(csi, sub);
    const double angle_tol = cfg.fine_angle_step;
    const double delay_tol = cfg.fine_delay_step();
    const double stop_ratio = std::pow(10.0, -cfg.stop_dynamic_range_db / 10.0);

    PathSet paths;
    while (int(paths.size()) < cfg.max_paths)
    {
        const CsiMatrix residual = expectation_step(csi, sub, paths, paths.size());
        const auto init = initialize_mpc(residual, sub, cfg);
        if (!init)
            break;
        double strongest = 0.0;
        for (const auto &p : paths)
            strongest = std::max(strongest, p.power());
        if (!paths.empty() && init->power() <= strongest * stop_ratio)
            break;
        paths.push_back(*init);

        for (int cycle = 0; cycle < cfg.em_cycles; ++cycle)
        {
            bool moved = false;
            for (std::size_t l = 0; l < paths.size(); ++l)
            {
                const CsiMatrix r = expectation_step(csi, sub, paths, l);
                const MultipathComponent updated = maximization_step(r, sub, paths[l], cfg);
                const double d_el = (updated.elevation && paths[l].elevation)
                                        ? std::abs(*updated.elevation - *paths[l].elevation)
                                        : 0.0;
                if (std::abs(updated.azimuth - paths[l].azimuth) > angle_tol || d_el > angle_tol ||
                    std::abs(updated.delay - paths[l].delay) > delay_tol)
                    moved = true;
                paths[l] = updated;
            }
            if (!moved)
                break;
        }
    }

    std::erase_if(paths, [](const MultipathComponent &p) { return p.dead || p.power() == 0.0; });
    std::stable_sort(paths.begin(), paths.end(),
                     [](const MultipathComponent &a, const MultipathComponent &b) { return a.power() > b.power(); });
    if (!paths.empty())
    {
        const double peak = paths.front().power();
        for (auto &p : paths)
            p.power_db = db10(p.power() / peak);
    }
    return paths;
}

MultipathComponent select_los(const PathSet &components, double window_db)
{
    if (components.empty())
        throw NoLineOfSight("no multipath components to choose a line-of-sight path from");
    double peak = 0.0;
    for (const auto &c : components)
        peak = std::max(peak, c.power());
    const double floor = peak * std::pow(10.0, -window_db / 10.0);
    const MultipathComponent *best = nullptr;
    for (const auto &c : components)
        if (c.power() >= floor && (!best || c.delay < best->delay))
            best = &c;
    return *best;
}

} // namespace mimoloc
