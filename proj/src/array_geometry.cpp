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

#include "mimoloc/array_geometry.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

namespace mimoloc
{

const char *to_string(ArrayKind kind)
{
    switch (kind)
    {
    case ArrayKind::ULA:
        return "ULA";
    case ArrayKind::DIS:
        return "DIS";
    case ArrayKind::URA:
        return "URA";
    }
    return "?";
}

ArrayKind array_kind_from_string(const std::string &name)
{
    if (name == "ULA" || name == "ula")
        return ArrayKind::ULA;
    if (name == "DIS" || name == "dis")
        return ArrayKind::DIS;
    if (name == "URA" || name == "ura")
        return ArrayKind::URA;
    throw InvalidInput("unknown array kind '" + name + "'");
}

Eigen::Vector3d Panel::boresight() const
{
    return {std::cos(yaw), std::sin(yaw), 0.0};
}

Eigen::Vector3d Panel::axis() const
{
    return {std::sin(yaw), -std::cos(yaw), 0.0};
}

Eigen::Vector3d Direction::local_vector() const
{
    const double el = elevation.value_or(0.0);
    return {std::cos(el) * std::cos(azimuth), -std::cos(el) * std::sin(azimuth), std::sin(el)};
}

ArrayTopology::ArrayTopology(ArrayKind kind, double spacing, double carrier_frequency, std::vector<Panel> panels)
    : kind_(kind), spacing_(spacing), carrier_frequency_(carrier_frequency), panels_(std::move(panels))
{
    if (!(spacing_ > 0.0))
        throw InvalidInput("element spacing must be positive");
    if (!(carrier_frequency_ > 0.0))
        throw InvalidInput("carrier frequency must be positive");
    if (panels_.empty())
        throw InvalidInput("topology needs at least one panel");
    if (kind_ != ArrayKind::DIS && panels_.size() != 1)
        throw InvalidInput("ULA and URA topologies consist of exactly one panel");

    n_elements_ = 0;
    for (auto &p : panels_)
    {
        if (p.rows < 1 || p.cols < 1)
            throw InvalidInput("panel dimensions must be positive");
        if (kind_ != ArrayKind::URA && p.rows != 1)
            throw InvalidInput("linear panels have a single row");
        p.first_element = n_elements_;
        n_elements_ += p.size();
    }
}

ArrayTopology ArrayTopology::ula(int elements, double spacing, double carrier_frequency, const Eigen::Vector3d &origin,
                                 double yaw)
{
    return ArrayTopology(ArrayKind::ULA, spacing, carrier_frequency, {Panel{origin, yaw, 1, elements, 0}});
}

ArrayTopology ArrayTopology::ura(int rows, int cols, double spacing, double carrier_frequency,
                                 const Eigen::Vector3d &origin, double yaw)
{
    return ArrayTopology(ArrayKind::URA, spacing, carrier_frequency, {Panel{origin, yaw, rows, cols, 0}});
}

ArrayTopology ArrayTopology::dis(const std::vector<std::pair<Eigen::Vector3d, double>> &panel_poses,
                                 int elements_per_panel, double spacing, double carrier_frequency)
{
    std::vector<Panel> panels;
    for (const auto &[origin, yaw] : panel_poses)
        panels.push_back(Panel{origin, yaw, 1, elements_per_panel, 0});
    return ArrayTopology(ArrayKind::DIS, spacing, carrier_frequency, std::move(panels));
}

namespace
{
// Origin of a panel whose horizontal centre is `centre`.
Eigen::Vector3d centred_origin(const Eigen::Vector3d &centre, double yaw, int cols, double spacing)
{
    Panel p;
    p.yaw = yaw;
    return centre - 0.5 * (cols - 1) * spacing * p.axis();
}
} // namespace

ArrayTopology ArrayTopology::standard(ArrayKind kind)
{
    constexpr double d = 0.07;
    constexpr double fc = 2.61e9;
    constexpr double side = 3.0;
    constexpr double offset = 0.5;
    const double north = kPi / 2.0; // boresight +y for arrays on the y = -offset side

    switch (kind)
    {
    case ArrayKind::ULA:
        return ula(64, d, fc, centred_origin({side / 2, -offset, 1.0}, north, 64, d), north);
    case ArrayKind::URA:
        return ura(8, 8, d, fc, centred_origin({side / 2, -offset, 0.79}, north, 8, d), north);
    case ArrayKind::DIS:
    {
        // Two inward-facing panels per side, counter-clockwise from the south side.
        std::vector<std::pair<Eigen::Vector3d, double>> poses;
        const double q1 = side / 4, q3 = 3 * side / 4;
        const std::vector<std::pair<Eigen::Vector3d, double>> centres = {
            {{q1, -offset, 1.0}, north},          {{q3, -offset, 1.0}, north},
            {{side + offset, q1, 1.0}, kPi},      {{side + offset, q3, 1.0}, kPi},
            {{q3, side + offset, 1.0}, -north},   {{q1, side + offset, 1.0}, -north},
            {{-offset, q3, 1.0}, 0.0},            {{-offset, q1, 1.0}, 0.0},
        };
        for (const auto &[c, yaw] : centres)
            poses.emplace_back(centred_origin(c, yaw, 8, d), yaw);
        return dis(poses, 8, d, fc);
    }
    }
    throw InvalidInput("unknown array kind");
}

std::size_t ArrayTopology::panel_of(std::size_t element) const
{
    if (element >= n_elements_)
        throw InvalidInput("element index out of range");
    for (std::size_t p = 0; p < panels_.size(); ++p)
        if (element < panels_[p].first_element + panels_[p].size())
            return p;
    return panels_.size() - 1;
}

Eigen::Vector3d ArrayTopology::element_position(std::size_t element) const
{
    const Panel &p = panels_[panel_of(element)];
    const std::size_t local = element - p.first_element;
    const double r = double(local / std::size_t(p.cols));
    const double c = double(local % std::size_t(p.cols));
    return p.origin + c * spacing_ * p.axis() + r * spacing_ * p.up();
}

std::vector<Eigen::Vector3d> ArrayTopology::element_positions() const
{
    std::vector<Eigen::Vector3d> out;
    out.reserve(n_elements_);
    for (std::size_t i = 0; i < n_elements_; ++i)
        out.push_back(element_position(i));
    return out;
}

ArrayTopology ArrayTopology::reduced(std::size_t count) const
{
    if (count == 0 || count > n_elements_)
        throw InvalidInput("reduced element count out of range");

    switch (kind_)
    {
    case ArrayKind::ULA:
    {
        Panel p = panels_.front();
        p.cols = int(count);
        return ArrayTopology(kind_, spacing_, carrier_frequency_, {p});
    }
    case ArrayKind::DIS:
    {
        std::vector<Panel> kept;
        std::size_t n = 0;
        for (const auto &p : panels_)
        {
            if (n + p.size() > count)
                break;
            kept.push_back(p);
            n += p.size();
        }
        if (n != count)
            throw InvalidInput("DIS reductions must keep whole panels");
        return ArrayTopology(kind_, spacing_, carrier_frequency_, std::move(kept));
    }
    case ArrayKind::URA:
    {
        const auto k = int(std::lround(std::sqrt(double(count))));
        const Panel &full = panels_.front();
        if (std::size_t(k) * std::size_t(k) != count || k > full.rows || k > full.cols)
            throw InvalidInput("URA reductions keep a square k x k block");
        Panel p = full;
        p.rows = k;
        p.cols = k;
        return ArrayTopology(kind_, spacing_, carrier_frequency_, {p});
    }
    }
    throw InvalidInput("unknown array kind");
}

nlohmann::json ArrayTopology::to_json() const
{
    nlohmann::json j;
    j["kind"] = to_string(kind_);
    j["spacing"] = spacing_;
    j["carrier_frequency"] = carrier_frequency_;
    auto panels = nlohmann::json::array();
    for (const auto &p : panels_)
        panels.push_back({{"origin", {p.origin.x(), p.origin.y(), p.origin.z()}},
                          {"yaw", p.yaw},
                          {"rows", p.rows},
                          {"cols", p.cols}});
    j["panels"] = panels;
    return j;
}

ArrayTopology ArrayTopology::from_json(const nlohmann::json &j)
{
    try
    {
        const ArrayKind kind = array_kind_from_string(j.at("kind").get<std::string>());
        const double spacing = j.at("spacing").get<double>();
        const double fc = j.at("carrier_frequency").get<double>();

        // Shorthand: {"kind": "ULA", "elements": 64} or {"kind": "URA", "rows": 8, "cols": 8}
        // without explicit panels places the array at the standard deployment.
        if (!j.contains("panels"))
        {
            ArrayTopology std_topo = standard(kind);
            std::vector<Panel> panels = std_topo.panels();
            if (kind == ArrayKind::ULA)
                panels.front().cols = j.value("elements", panels.front().cols);
            if (kind == ArrayKind::URA)
            {
                panels.front().rows = j.value("rows", panels.front().rows);
                panels.front().cols = j.value("cols", panels.front().cols);
            }
            if (kind == ArrayKind::DIS)
                for (auto &p : panels)
                    p.cols = j.value("elements_per_panel", p.cols);
            return ArrayTopology(kind, spacing, fc, std::move(panels));
        }

        std::vector<Panel> panels;
        for (const auto &pj : j.at("panels"))
        {
            Panel p;
            const auto o = pj.at("origin").get<std::vector<double>>();
            if (o.size() != 3)
                throw InvalidInput("panel origin needs three coordinates");
            p.origin = {o[0], o[1], o[2]};
            p.yaw = pj.value("yaw", 0.0);
            p.rows = pj.value("rows", 1);
            p.cols = pj.at("cols").get<int>();
            panels.push_back(p);
        }
        return ArrayTopology(kind, spacing, fc, std::move(panels));
    }
    catch (const nlohmann::json::exception &e)
    {
        throw InvalidInput(std::string("malformed topology descriptor: ") + e.what());
    }
}

Eigen::Vector3d SubArray::phase_center() const
{
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    for (const auto &p : positions)
        c += p;
    return c / double(positions.size());
}

Eigen::VectorXcd steering_vector(const SubArray &sub, const Direction &dir)
{
    if (sub.size() == 0)
        throw InvalidInput("steering vector of an empty sub-array");
    if (!(sub.wavelength > 0.0))
        throw InvalidInput("wavelength must be positive");

    const Eigen::Vector3d omega = dir.local_vector();
    const double k = 2.0 * kPi / sub.wavelength;
    Eigen::VectorXcd a(Eigen::Index(sub.size()));
    for (std::size_t m = 0; m < sub.size(); ++m)
        a[Eigen::Index(m)] = std::polar(1.0, k * sub.local_offsets[m].dot(omega));
    return a;
}

double rayleigh_distance(double aperture, double wavelength)
{
    if (!(wavelength > 0.0))
        throw InvalidInput("wavelength must be positive");
    if (aperture < 0.0)
        throw InvalidInput("aperture must be non-negative");
    return 2.0 * aperture * aperture / wavelength;
}

namespace
{
SubArray make_window(const ArrayTopology &topo, std::size_t panel_index, int row0, int col0, int rows, int cols)
{
    const Panel &p = topo.panels()[panel_index];
    SubArray s;
    s.panel = p;
    s.panel_index = panel_index;
    s.rows = rows;
    s.cols = cols;
    s.spacing = topo.spacing();
    s.wavelength = topo.wavelength();
    s.aperture = double(std::max(rows, cols)) * topo.spacing();
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
        {
            const std::size_t idx = p.first_element + std::size_t(row0 + r) * std::size_t(p.cols) + std::size_t(col0 + c);
            s.element_indices.push_back(idx);
            s.local_offsets.emplace_back(0.0, c * topo.spacing(), r * topo.spacing());
            s.positions.push_back(topo.element_position(idx));
        }
    return s;
}
} // namespace

std::vector<SubArray> partition_sliding(const ArrayTopology &topo, WindowShape window, WindowShape stride)
{
    if (window.rows < 1 || window.cols < 1)
        throw InvalidInput("window dimensions must be positive");
    if (stride.rows < 1 || stride.cols < 1)
        throw InvalidInput("stride must be at least one");

    std::vector<SubArray> out;
    for (std::size_t pi = 0; pi < topo.panels().size(); ++pi)
    {
        const Panel &p = topo.panels()[pi];
        if (window.rows > p.rows || window.cols > p.cols)
            throw InvalidInput("window larger than the array panel");
        for (int r0 = 0; r0 + window.rows <= p.rows; r0 += stride.rows)
            for (int c0 = 0; c0 + window.cols <= p.cols; c0 += stride.cols)
                out.push_back(make_window(topo, pi, r0, c0, window.rows, window.cols));
    }
    return out;
}

SubArray whole_panel(const ArrayTopology &topo, std::size_t panel_index)
{
    if (panel_index >= topo.panels().size())
        throw InvalidInput("panel index out of range");
    const Panel &p = topo.panels()[panel_index];
    return make_window(topo, panel_index, 0, 0, p.rows, p.cols);
}

Direction direction_towards(const SubArray &sub, const Eigen::Vector3d &point, const Eigen::Vector3d &origin)
{
    const Eigen::Vector3d v = point - origin;
    const double b = v.dot(sub.panel.boresight());
    const double a = v.dot(sub.panel.axis());
    const double u = v.dot(sub.panel.up());
    Direction d;
    d.azimuth = std::atan2(-a, b);
    if (sub.is_planar())
        d.elevation = std::atan2(u, std::hypot(a, b));
    return d;
}

} // namespace mimoloc
