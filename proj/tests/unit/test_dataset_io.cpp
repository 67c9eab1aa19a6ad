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

#include "mimoloc/dataset_io.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <sstream>

using namespace mimoloc;

namespace
{
LabeledDataset small()
{
    const auto topo = ArrayTopology::standard(ArrayKind::DIS);
    const auto f = subcarrier_grid(2.61e9, 20e6, 10);
    ImpairmentParams imp;
    imp.cpo = 0.4;
    return generate_point_dataset({{1.0, 1.0}, {2.0, 1.5}, {1.25, 2.5}}, topo, imp, 15.0, {}, f, 4);
}
} // namespace

TEST_CASE("dataset round trip keeps float32 precision")
{
    const auto ds = small();
    std::stringstream ss;
    write_dataset(ss, ds);
    const auto back = read_dataset(ss);
    REQUIRE(back.size() == ds.size());
    CHECK(back.topology.size() == 64);
    CHECK(back.ue_height == ds.ue_height);
    CHECK(back.frequencies == ds.frequencies);
    for (std::size_t i = 0; i < ds.size(); ++i)
    {
        CHECK(back.positions[i] == ds.positions[i]);
        CHECK(back.noise_std[i] == ds.noise_std[i]);
        const double scale = ds.samples[i].values.cwiseAbs().maxCoeff();
        CHECK((back.samples[i].values - ds.samples[i].values).cwiseAbs().maxCoeff() <= 1e-6 * scale);
    }
}

TEST_CASE("header is one JSON line with the format tag")
{
    std::stringstream ss;
    write_dataset(ss, small());
    std::string line;
    std::getline(ss, line);
    const auto h = nlohmann::json::parse(line);
    CHECK(h["format"] == kDatasetFormat);
    CHECK(h["version"] == kDatasetVersion);
    CHECK(h["sample_count"] == 3);
    CHECK(h["antennas"] == 64);
    CHECK(h["subcarriers"] == 10);
}

TEST_CASE("truncated and foreign files are rejected")
{
    std::stringstream ss;
    write_dataset(ss, small());
    const std::string full = ss.str();
    std::stringstream cut(full.substr(0, full.size() - 9));
    CHECK_THROWS_AS(read_dataset(cut), InvalidInput);
    std::stringstream junk("{\"format\": \"other\"}\n");
    CHECK_THROWS_AS(read_dataset(junk), InvalidInput);
    std::stringstream empty;
    CHECK_THROWS_AS(read_dataset(empty), InvalidInput);
}

TEST_CASE("noise std is optional on ingestion")
{
    std::stringstream ss;
    write_dataset(ss, small());
    std::string line;
    std::getline(ss, line);
    auto h = nlohmann::json::parse(line);
    h.erase("noise_std");
    std::stringstream edited;
    edited << h.dump() << '\n' << ss.rdbuf();
    const auto back = read_dataset(edited);
    REQUIRE(back.noise_std.size() == 3);
    CHECK(back.noise_std[0] == 1.0);
}

TEST_CASE("little-endian helpers")
{
    std::stringstream ss;
    detail::put_f64le(ss, -1.5);
    detail::put_f32le(ss, 0.25f);
    const std::string bytes = ss.str();
    REQUIRE(bytes.size() == 12);
    CHECK(static_cast<unsigned char>(bytes[7]) == 0xBF);
    CHECK(detail::get_f64le(ss) == -1.5);
    CHECK(detail::get_f32le(ss) == 0.25f);
}
