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

#include "mimoloc/common.hpp"

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <vector>

namespace mimoloc
{

enum class ArrayKind
{
    ULA,
    DIS,
    URA
};

const char *to_string(ArrayKind kind);
ArrayKind array_kind_from_string(const std::string &name);

/*
 One planar panel of regularly spaced elements.

 Every panel carries a local frame (boresight, axis, up):
   - boresight: horizontal unit vector pointing into the served area
   - axis:      horizontal unit vector along increasing column index; it is the
                boresight rotated clockwise by 90 degrees (seen from above)
   - up:        global z
 Element (r, c) sits at origin + c*d*axis + r*d*up, so (0, 0) is the first element.
*/
struct Panel
{
    Eigen::Vector3d origin = Eigen::Vector3d::Zero(); // global position of element (0, 0)
    double yaw = 0.0;                                 // boresight azimuth in the global x-y plane [rad]
    int rows = 1;
    int cols = 1;
    std::size_t first_element = 0; // global index of element (0, 0)

    Eigen::Vector3d boresight() const;
    Eigen::Vector3d axis() const;
    Eigen::Vector3d up() const { return Eigen::Vector3d::UnitZ(); }
    std::size_t size() const { return std::size_t(rows) * std::size_t(cols); }
};

/*
 Direction of arrival in a panel's local frame.

 azimuth is measured in the horizontal plane from boresight, positive towards
 the side opposite to increasing element index; elevation is measured from the
 horizontal plane, positive upwards. The unit vector expressed in
 (boresight, axis, up) coordinates is

     [cos(el) cos(az), -cos(el) sin(az), sin(el)]

 which reduces the linear-array steering phase to -2*pi*d/lambda*(m-1)*sin(az)
 for horizontal arrivals. For 1-D arrays the elevation is absent.
*/
struct Direction
{
    double azimuth = 0.0;
    std::optional<double> elevation;

    Eigen::Vector3d local_vector() const;
};

/// Antenna array made of one (ULA, URA) or several (DIS) panels.
class ArrayTopology
{
public:
    ArrayTopology(ArrayKind kind, double spacing, double carrier_frequency, std::vector<Panel> panels);

    static ArrayTopology ula(int elements, double spacing, double carrier_frequency,
                             const Eigen::Vector3d &origin = Eigen::Vector3d::Zero(), double yaw = 0.0);
    static ArrayTopology ura(int rows, int cols, double spacing, double carrier_frequency,
                             const Eigen::Vector3d &origin = Eigen::Vector3d::Zero(), double yaw = 0.0);
    static ArrayTopology dis(const std::vector<std::pair<Eigen::Vector3d, double>> &panel_poses, int elements_per_panel,
                             double spacing, double carrier_frequency);

    // Deployment used throughout the experiments: 64 elements at 7 cm spacing and
    // 2.61 GHz around a 3 m x 3 m area with corner (0, 0). ULA and URA sit on the
    // y = -0.5 m side, the eight DIS panels surround the area 0.5 m outside it.
    static ArrayTopology standard(ArrayKind kind);

    static ArrayTopology from_json(const nlohmann::json &j);
    nlohmann::json to_json() const;

    ArrayKind kind() const { return kind_; }
    double spacing() const { return spacing_; }
    double carrier_frequency() const { return carrier_frequency_; }
    double wavelength() const { return kSpeedOfLight / carrier_frequency_; }
    const std::vector<Panel> &panels() const { return panels_; }
    std::size_t size() const { return n_elements_; }
    bool is_planar() const { return kind_ == ArrayKind::URA; }

    std::size_t panel_of(std::size_t element) const;
    Eigen::Vector3d element_position(std::size_t element) const;
    std::vector<Eigen::Vector3d> element_positions() const;

    // Keeps the first `count` elements in CSI order (ULA: prefix, DIS: whole
    // panels). For URA, `count` must be a square k*k and the lower-left k x k
    // block is kept.
    ArrayTopology reduced(std::size_t count) const;

private:
    ArrayKind kind_;
    double spacing_;
    double carrier_frequency_;
    std::vector<Panel> panels_;
    std::size_t n_elements_ = 0;
};

/*
 A window of elements inside one panel. Self-contained value type: it carries
 the geometry needed for steering so it can outlive its parent topology.
*/
struct SubArray
{
    std::vector<std::size_t> element_indices;   // indices into the parent topology
    std::vector<Eigen::Vector3d> local_offsets; // (boresight, axis, up) offsets from the first element
    std::vector<Eigen::Vector3d> positions;     // global element positions
    Panel panel;                                // frame of the owning panel
    std::size_t panel_index = 0;
    int rows = 1;
    int cols = 1;
    double spacing = 0.0;
    double wavelength = 0.0;
    double aperture = 0.0; // (elements along the longest dimension) * spacing

    std::size_t size() const { return element_indices.size(); }
    bool is_planar() const { return rows > 1 && cols > 1; }
    Eigen::Vector3d reference_position() const { return positions.front(); }
    Eigen::Vector3d phase_center() const;
};

struct WindowShape
{
    int rows = 1;
    int cols = 1;
};

/// Per-element unit phasors exp(j 2pi/lambda <offset, direction>), first element at phase 0.
Eigen::VectorXcd steering_vector(const SubArray &sub, const Direction &dir);

/// Far-field boundary 2 D^2 / lambda.
double rayleigh_distance(double aperture, double wavelength);

/// Successive windows slid over every panel; ordered by panel, then row start, then column start.
std::vector<SubArray> partition_sliding(const ArrayTopology &topo, WindowShape window, WindowShape stride = {1, 1});

/// The whole panel as a single sub-array.
SubArray whole_panel(const ArrayTopology &topo, std::size_t panel_index);

/// Geometric direction from `origin` (a point on the sub-array) to `point`, in the panel frame.
Direction direction_towards(const SubArray &sub, const Eigen::Vector3d &point, const Eigen::Vector3d &origin);

} // namespace mimoloc
