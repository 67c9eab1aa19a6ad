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

#include "mimoloc/config.hpp"

#include "mimoloc/csi_calib.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace mimoloc
{

namespace
{

namespace pt = boost::property_tree;

std::string trim(std::string s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string &s, char sep)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep))
    {
        item = trim(item);
        if (!item.empty())
            out.push_back(item);
    }
    return out;
}

bool is_unset(const std::string &v)
{
    std::string l = v;
    std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return char(std::tolower(c)); });
    return l.empty() || l == "none" || l == "off" || l == "inf";
}

double to_double(const std::string &key, const std::string &v)
{
    try
    {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (trim(v.substr(pos)).empty())
            return d;
    }
    catch (const std::exception &)
    {
    }
    throw InvalidInput(fmt::format("config key '{}': '{}' is not a number", key, v));
}

std::vector<double> to_doubles(const std::string &key, const std::string &v, std::size_t count)
{
    std::vector<double> out;
    for (const auto &t : split(v, ','))
        out.push_back(to_double(key, t));
    if (out.size() != count)
        throw InvalidInput(fmt::format("config key '{}' needs {} comma-separated numbers", key, count));
    return out;
}

class Reader
{
public:
    explicit Reader(const pt::ptree &tree) : tree_(tree) {}

    std::optional<std::string> raw(const std::string &key) const
    {
        seen_.insert(key);
        if (auto v = tree_.get_optional<std::string>(pt::ptree::path_type(key, '.')))
            return trim(*v);
        return std::nullopt;
    }
    double number(const std::string &key, double def) const
    {
        const auto v = raw(key);
        return v ? to_double(key, *v) : def;
    }
    long integer(const std::string &key, long def) const
    {
        const auto v = raw(key);
        if (!v)
            return def;
        const double d = to_double(key, *v);
        if (d != std::floor(d))
            throw InvalidInput(fmt::format("config key '{}' must be an integer", key));
        return long(d);
    }
    bool boolean(const std::string &key, bool def) const
    {
        const auto v = raw(key);
        if (!v)
            return def;
        if (*v == "true" || *v == "yes" || *v == "1" || *v == "on")
            return true;
        if (*v == "false" || *v == "no" || *v == "0" || *v == "off")
            return false;
        throw InvalidInput(fmt::format("config key '{}': '{}' is not a boolean", key, *v));
    }
    std::optional<double> optional_number(const std::string &key, std::optional<double> def) const
    {
        const auto v = raw(key);
        if (!v)
            return def;
        if (is_unset(*v))
            return std::nullopt;
        return to_double(key, *v);
    }

    // A misspelt key would otherwise fall back to its default without notice.
    void reject_unknown() const
    {
        for (const auto &[section, keys] : tree_)
        {
            if (keys.empty() && !keys.data().empty())
                throw InvalidInput(fmt::format("config key '{}' lies outside any section", section));
            for (const auto &kv : keys)
            {
                const std::string key = section + "." + kv.first;
                if (!seen_.count(key))
                    throw InvalidInput(fmt::format("unknown config key '{}'", key));
            }
        }
    }

private:
    const pt::ptree &tree_;
    mutable std::set<std::string> seen_;
};

Rect parse_rect(const std::string &key, const std::string &v)
{
    const auto d = to_doubles(key, v, 4);
    return Rect{{d[0], d[1]}, {d[2], d[3]}};
}

WindowShape parse_window(const std::string &key, const std::string &v)
{
    const auto parts = split(v, 'x');
    if (parts.size() == 1)
        return {1, int(to_double(key, parts[0]))};
    if (parts.size() == 2)
        return {int(to_double(key, parts[0])), int(to_double(key, parts[1]))};
    throw InvalidInput(fmt::format("config key '{}' must look like 8 or 6x6", key));
}

std::string num(double v)
{
    return fmt::format("{:.17g}", v);
}

// Values stored in other units; 15 digits make the write/read cycle a fixed point.
std::string unit(double v)
{
    return fmt::format("{:.15g}", v);
}

} // namespace

std::uint64_t parse_seed(const std::string &text)
{
    const std::string t = trim(text);
    if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos)
        throw InvalidInput("seed must be an unsigned 64-bit integer, got '" + text + "'");
    try
    {
        return std::stoull(t);
    }
    catch (const std::out_of_range &)
    {
        throw InvalidInput("seed does not fit in 64 bits: '" + text + "'");
    }
}

ExperimentConfig parse_config(std::istream &in)
{
    pt::ptree tree;
    try
    {
        pt::read_ini(in, tree);
    }
    catch (const pt::ini_parser_error &e)
    {
        throw InvalidInput(std::string("malformed config: ") + e.what());
    }
    const Reader r(tree);
    ExperimentConfig c;

    if (auto v = r.raw("topology.kind"))
        c.kind = array_kind_from_string(*v);
    if (auto v = r.raw("topology.file"); v && !is_unset(*v))
        c.topology_file = *v;
    c.antennas = std::size_t(r.integer("topology.antennas", long(c.antennas)));

    if (auto v = r.raw("scene.area"))
        c.area = parse_rect("scene.area", *v);
    if (auto v = r.raw("scene.region"))
        c.region = parse_rect("scene.region", *v);
    c.ue_height = r.number("scene.ue_height", c.ue_height);
    c.train_grid = int(r.integer("scene.train_grid", c.train_grid));
    c.test_points = int(r.integer("scene.test_points", c.test_points));
    if (auto v = r.raw("scene.scatterers"))
        for (const auto &entry : split(*v, ';'))
        {
            const auto d = to_doubles("scene.scatterers", entry, 5);
            c.scatterers.push_back({{d[0], d[1], d[2]}, {d[3], d[4]}});
        }
    c.random_scatterers = int(r.integer("scene.random_scatterers", c.random_scatterers));
    c.scatterer_reflection = r.number("scene.scatterer_reflection", c.scatterer_reflection);
    c.ground_reflection = r.optional_number("scene.ground_reflection", c.ground_reflection);

    auto &imp = c.impairments;
    imp.sfo_slope = r.number("impairments.sfo_slope", imp.sfo_slope);
    imp.sto_samples = int(r.integer("impairments.sto_samples", imp.sto_samples));
    imp.iq_gain = r.number("impairments.iq_gain", imp.iq_gain);
    imp.iq_phase = r.number("impairments.iq_phase", imp.iq_phase);
    imp.iq_time_offset = r.number("impairments.iq_time_offset", imp.iq_time_offset);
    imp.cpo = r.number("impairments.cpo", imp.cpo);
    c.antenna_offset_spread = r.number("impairments.antenna_offset_spread", c.antenna_offset_spread);
    c.snr_db = r.optional_number("impairments.snr_db", c.snr_db);

    c.calibrate = r.boolean("calibration.enabled", c.calibrate);
    c.calibration_grid = int(r.integer("calibration.grid", c.calibration_grid));

    if (auto v = r.raw("subarray.window"))
        c.window = parse_window("subarray.window", *v);
    if (auto v = r.raw("subarray.stride"))
        c.stride = parse_window("subarray.stride", *v);

    auto &s = c.sage;
    s.max_paths = int(r.integer("sage.max_paths", s.max_paths));
    s.stop_dynamic_range_db = r.number("sage.stop_dynamic_range_db", s.stop_dynamic_range_db);
    s.delay_step = r.number("sage.delay_step_ns", s.delay_step * 1e9) * 1e-9;
    s.delay_min = r.number("sage.delay_min_ns", s.delay_min * 1e9) * 1e-9;
    s.delay_max = r.number("sage.delay_max_ns", s.delay_max * 1e9) * 1e-9;
    s.refinement_levels = int(r.integer("sage.refinement_levels", s.refinement_levels));
    s.angle_step = deg2rad(r.number("sage.angle_step_deg", rad2deg(s.angle_step)));
    s.fine_angle_step = deg2rad(r.number("sage.fine_angle_step_deg", rad2deg(s.fine_angle_step)));
    s.local_angle_window = deg2rad(r.number("sage.local_angle_window_deg", rad2deg(s.local_angle_window)));
    if (auto lim = r.optional_number("sage.angle_limit_deg", std::nullopt))
        s.angle_limit = deg2rad(*lim);
    s.em_cycles = int(r.integer("sage.em_cycles", s.em_cycles));
    s.continuous_refinement = r.boolean("sage.continuous_refinement", s.continuous_refinement);

    if (auto v = r.raw("fingerprint.schemes"))
    {
        c.schemes.clear();
        for (const auto &t : split(*v, ','))
            c.schemes.push_back(MetricScheme::parse(t));
    }
    auto &b = c.search;
    b.trials = int(r.integer("fingerprint.trials", b.trials));
    b.folds = int(r.integer("fingerprint.folds", b.folds));
    b.max_search_samples = std::size_t(r.integer("fingerprint.max_search_samples", long(b.max_search_samples)));
    b.c_min = r.number("fingerprint.c_min", b.c_min);
    b.c_max = r.number("fingerprint.c_max", b.c_max);
    b.scale_min = r.number("fingerprint.scale_min", b.scale_min);
    b.scale_max = r.number("fingerprint.scale_max", b.scale_max);
    b.epsilon_min = r.number("fingerprint.epsilon_min", b.epsilon_min);
    b.epsilon_max = r.number("fingerprint.epsilon_max", b.epsilon_max);
    b.tolerance = r.number("fingerprint.tolerance", b.tolerance);
    c.baselines = r.boolean("fingerprint.baselines", c.baselines);
    c.effective_snr = r.boolean("fingerprint.effective_snr", c.effective_snr);

    if (auto v = r.raw("data.train"); v && !is_unset(*v))
        c.train_file = *v;
    if (auto v = r.raw("data.test"); v && !is_unset(*v))
        c.test_file = *v;
    if (auto v = r.raw("data.calibration"); v && !is_unset(*v))
        c.calibration_file = *v;

    if (auto v = r.raw("run.seed"))
        c.seed = parse_seed(*v);
    if (auto v = r.raw("run.out"))
        c.out = *v;
    r.reject_unknown();
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in)
        throw InvalidInput("cannot open config " + path.string());
    ExperimentConfig c = parse_config(in);
    // data and topology paths are relative to the config file
    const auto base = path.parent_path();
    for (auto *p : {&c.topology_file, &c.train_file, &c.test_file, &c.calibration_file})
        if (*p && p->value().is_relative())
            *p = base / p->value();
    return c;
}

void ExperimentConfig::validate() const
{
    if (!area.contains(region))
        throw InvalidInput("scene.region must lie inside scene.area");
    if (train_grid < 2)
        throw InvalidInput("scene.train_grid must be at least 2");
    if (test_points < 1 && !test_file)
        throw InvalidInput("scene.test_points must be positive");
    if (calibrate && calibration_grid * calibration_grid < int(kMinReferenceSamples) && !calibration_file)
        throw InvalidInput("calibration.grid must give at least 64 reference points");
    if (schemes.empty())
        throw InvalidInput("fingerprint.schemes is empty");
    if (window.rows < 0 || window.cols < 0 || stride.rows < 1 || stride.cols < 1)
        throw InvalidInput("sub-array window and stride must be positive");
    if (random_scatterers < 0)
        throw InvalidInput("scene.random_scatterers must be non-negative");
    sage.validate();
}

std::string ExperimentConfig::to_ini() const
{
    std::string o;
    auto line = [&](const std::string &k, const std::string &v) { o += k + " = " + v + "\n"; };
    auto opt = [](const std::optional<double> &v) { return v ? num(*v) : std::string("none"); };
    auto path = [](const std::optional<std::filesystem::path> &p) { return p ? p->generic_string() : "none"; };
    auto rect = [](const Rect &r) {
        return fmt::format("{}, {}, {}, {}", num(r.min.x()), num(r.min.y()), num(r.max.x()), num(r.max.y()));
    };

    o += "[topology]\n";
    line("kind", to_string(kind));
    line("file", path(topology_file));
    line("antennas", std::to_string(antennas));

    o += "\n[scene]\n";
    line("area", rect(area));
    line("region", rect(region));
    line("ue_height", num(ue_height));
    line("train_grid", std::to_string(train_grid));
    line("test_points", std::to_string(test_points));
    std::string sc;
    for (const auto &s : scatterers)
        sc += fmt::format("{}{}, {}, {}, {}, {}", sc.empty() ? "" : "; ", num(s.position.x()), num(s.position.y()),
                          num(s.position.z()), num(s.reflection.real()), num(s.reflection.imag()));
    line("scatterers", sc);
    line("random_scatterers", std::to_string(random_scatterers));
    line("scatterer_reflection", num(scatterer_reflection));
    line("ground_reflection", opt(ground_reflection));

    o += "\n[impairments]\n";
    line("sfo_slope", num(impairments.sfo_slope));
    line("sto_samples", std::to_string(impairments.sto_samples));
    line("iq_gain", num(impairments.iq_gain));
    line("iq_phase", num(impairments.iq_phase));
    line("iq_time_offset", num(impairments.iq_time_offset));
    line("cpo", num(impairments.cpo));
    line("antenna_offset_spread", num(antenna_offset_spread));
    line("snr_db", opt(snr_db));

    o += "\n[calibration]\n";
    line("enabled", calibrate ? "true" : "false");
    line("grid", std::to_string(calibration_grid));

    o += "\n[subarray]\n";
    line("window", fmt::format("{}x{}", window.rows, window.cols));
    line("stride", fmt::format("{}x{}", stride.rows, stride.cols));

    o += "\n[sage]\n";
    line("max_paths", std::to_string(sage.max_paths));
    line("stop_dynamic_range_db", num(sage.stop_dynamic_range_db));
    line("delay_step_ns", unit(sage.delay_step * 1e9));
    line("delay_min_ns", unit(sage.delay_min * 1e9));
    line("delay_max_ns", unit(sage.delay_max * 1e9));
    line("refinement_levels", std::to_string(sage.refinement_levels));
    line("angle_step_deg", unit(rad2deg(sage.angle_step)));
    line("fine_angle_step_deg", unit(rad2deg(sage.fine_angle_step)));
    line("local_angle_window_deg", unit(rad2deg(sage.local_angle_window)));
    line("angle_limit_deg", sage.angle_limit ? unit(rad2deg(*sage.angle_limit)) : "none");
    line("em_cycles", std::to_string(sage.em_cycles));
    line("continuous_refinement", sage.continuous_refinement ? "true" : "false");

    o += "\n[fingerprint]\n";
    std::string schemes_text;
    for (const auto &s : schemes)
        schemes_text += (schemes_text.empty() ? "" : ", ") + s.to_string();
    line("schemes", schemes_text);
    line("trials", std::to_string(search.trials));
    line("folds", std::to_string(search.folds));
    line("max_search_samples", std::to_string(search.max_search_samples));
    line("c_min", num(search.c_min));
    line("c_max", num(search.c_max));
    line("scale_min", num(search.scale_min));
    line("scale_max", num(search.scale_max));
    line("epsilon_min", num(search.epsilon_min));
    line("epsilon_max", num(search.epsilon_max));
    line("tolerance", num(search.tolerance));
    line("baselines", baselines ? "true" : "false");
    line("effective_snr", effective_snr ? "true" : "false");

    o += "\n[data]\n";
    line("train", path(train_file));
    line("test", path(test_file));
    line("calibration", path(calibration_file));

    o += "\n[run]\n";
    line("seed", std::to_string(seed));
    line("out", out.generic_string());
    return o;
}

} // namespace mimoloc
