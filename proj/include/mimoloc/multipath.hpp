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

#include "mimoloc/array_geometry.hpp"

#include <optional>
#include <vector>

namespace mimoloc
{

/// One specular propagation path: complex amplitude, direction of arrival and time of flight.
struct MultipathComponent
{
    cdouble amplitude{1.0, 0.0};
    double azimuth = 0.0;            // [rad], panel frame
    std::optional<double> elevation; // [rad], absent for 1-D arrays
    double delay = 0.0;              // [s]
    double power_db = 0.0;           // relative to the strongest extracted path
    bool dead = false;               // set by the extractor when the residual vanished

    Direction direction() const { return Direction{azimuth, elevation}; }
    double power() const { return std::norm(amplitude); }
};

using PathSet = std::vector<MultipathComponent>;

} // namespace mimoloc
