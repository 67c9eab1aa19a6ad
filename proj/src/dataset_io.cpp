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

#include <nlohmann/json.hpp>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace mimoloc
{

namespace detail
{
namespace
{
template <typename Uint>
void put_le(std::ostream &os, Uint u)
{
    std::array<char, sizeof(Uint)> bytes{};
    for (std::size_t i = 0; i < sizeof(Uint); ++i)
        bytes[i] = char((u >> (8 * i)) & 0xFF);
    os.write(bytes.data(), bytes.size());
}

template <typename Uint>
Uint get_le(std::istream &is)
{
    std::array<unsigned char, sizeof(Uint)> bytes{};
    if (!is.read(reinterpret_cast<char *>(bytes.data()), bytes.size()))
        throw InvalidInput("truncated dataset payload");
    Uint u = 0;
    for (std::size_t i = 0; i < sizeof(Uint); ++i)
        u |= Uint(bytes[i]) << (8 * i);
    return u;
}
} // namespace

void put_f32le(std::ostream &os, float v) { put_le(os, std::bit_cast<std::uint32_t>(v)); }
void put_f64le(std::ostream &os, double v) { put_le(os, std::bit_cast<std::uint64_t>(v)); }
float get_f32le(std::istream &is) { return std::bit_cast<float>(get_le<std::uint32_t>(is)); }
double get_f64le(std::istream &is) { return std::bit_cast<double>(get_le<std::uint64_t>(is)); }
} // namespace detail

void write_dataset(std::ostream &os, const LabeledDataset &ds)
{
    if (ds.samples.size() != ds.positions.size())
        throw InvalidInput("sample and ground-truth counts differ");
    const Eigen::Index nr = Eigen::Index(ds.topology.size());
    const Eigen::Index nk = ds.frequencies.size();

    nlohmann::json h;
    h["format"] = kDatasetFormat;
    h["version"] = kDatasetVersion;
    h["topology"] = ds.topology.to_json();
    h["frequencies"] = std::vector<double>(ds.frequencies.data(), ds.frequencies.data() + nk);
    h["sample_count"] = ds.samples.size();
    h["antennas"] = nr;
    h["subcarriers"] = nk;
    h["ground_truth_columns"] = {"x", "y"};
    h["ue_height"] = ds.ue_height;
    if (!ds.noise_std.empty())
        h["noise_std"] = ds.noise_std;
    os << h.dump() << '\n';

    for (std::size_t s = 0; s < ds.samples.size(); ++s)
    {
        const auto &v = ds.samples[s].values;
        if (v.rows() != nr || v.cols() != nk)
            throw InvalidInput("sample dimensions do not match the header");
        for (Eigen::Index m = 0; m < nr; ++m)
            for (Eigen::Index k = 0; k < nk; ++k)
            {
                detail::put_f32le(os, float(v(m, k).real()));
                detail::put_f32le(os, float(v(m, k).imag()));
            }
        detail::put_f64le(os, ds.positions[s].x());
        detail::put_f64le(os, ds.positions[s].y());
    }
    if (!os)
        throw std::runtime_error("failed writing dataset");
}

LabeledDataset read_dataset(std::istream &is)
{
    std::string line;
    if (!std::getline(is, line))
        throw InvalidInput("missing dataset header");
    nlohmann::json h;
    try
    {
        h = nlohmann::json::parse(line);
    }
    catch (const nlohmann::json::exception &e)
    {
        throw InvalidInput(std::string("malformed dataset header: ") + e.what());
    }
    if (h.value("format", std::string()) != kDatasetFormat)
        throw InvalidInput("not a mimoloc CSI dataset");
    if (h.value("version", 0) != kDatasetVersion)
        throw InvalidInput("unsupported dataset version");

    LabeledDataset ds;
    ds.topology = ArrayTopology::from_json(h.at("topology"));
    const auto f = h.at("frequencies").get<std::vector<double>>();
    ds.frequencies = Eigen::Map<const Eigen::VectorXd>(f.data(), Eigen::Index(f.size()));
    const auto count = h.at("sample_count").get<std::size_t>();
    const auto nr = h.at("antennas").get<Eigen::Index>();
    const auto nk = h.at("subcarriers").get<Eigen::Index>();
    if (nr != Eigen::Index(ds.topology.size()) || nk != ds.frequencies.size())
        throw InvalidInput("header dimensions disagree with topology or frequency grid");
    for (Eigen::Index k = 1; k < nk; ++k)
        if (!(ds.frequencies[k] > ds.frequencies[k - 1]))
            throw InvalidInput("frequencies must be strictly increasing");
    ds.ue_height = h.value("ue_height", 0.4);
    ds.noise_std = h.contains("noise_std") ? h["noise_std"].get<std::vector<double>>() : std::vector<double>(count, 1.0);
    if (ds.noise_std.size() != count)
        throw InvalidInput("noise_std length differs from sample_count");

    ds.samples.resize(count);
    ds.positions.resize(count);
    for (std::size_t s = 0; s < count; ++s)
    {
        CsiMatrix &c = ds.samples[s];
        c.frequencies = ds.frequencies;
        c.values.resize(nr, nk);
        for (Eigen::Index m = 0; m < nr; ++m)
            for (Eigen::Index k = 0; k < nk; ++k)
            {
                const float re = detail::get_f32le(is);
                const float im = detail::get_f32le(is);
                c.values(m, k) = cdouble(re, im);
            }
        const double x = detail::get_f64le(is);
        const double y = detail::get_f64le(is);
        ds.positions[s] = {x, y};
    }
    return ds;
}

void write_dataset(const std::filesystem::path &path, const LabeledDataset &ds)
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_dataset(os, ds);
}

LabeledDataset read_dataset(const std::filesystem::path &path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw InvalidInput("cannot open dataset " + path.string());
    return read_dataset(is);
}

} // namespace mimoloc
