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

// mimoloc: experiment runner. Every verb reads the same INI config; --seed and
// --out override the [run] section.

#include "mimoloc/harness.hpp"

#include <CLI11.hpp>
#include <fmt/core.h>

#include <iostream>

using namespace mimoloc;

namespace
{

struct Common
{
    std::string config;
    std::string seed;
    std::string out;
};

void add_common(CLI::App *cmd, Common &c)
{
    cmd->add_option("--config", c.config, "experiment config (INI)")->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "run seed (u64), overrides run.seed");
    cmd->add_option("--out", c.out, "output directory, overrides run.out");
}

ExperimentConfig load(const Common &c)
{
    ExperimentConfig cfg;
    try
    {
        if (!c.config.empty())
            cfg = load_config(c.config);
        if (!c.seed.empty())
            cfg.seed = parse_seed(c.seed);
        if (!c.out.empty())
            cfg.out = c.out;
        cfg.validate();
    }
    catch (const std::exception &e)
    {
        throw StageError("config", std::nullopt, e.what());
    }
    return cfg;
}

void list(const std::filesystem::path &root, const std::vector<std::filesystem::path> &files)
{
    for (const auto &f : files)
        fmt::print("{}\n", (root / f).string());
}

void print_results(const ReportBundle &b)
{
    fmt::print("{:<20} {:>10} {:>10} {:>10} {:>10} {:>8}\n", "method", "mae_m", "median_m", "p90_m", "p95_m",
               "failed");
    for (const auto &r : b.results)
        fmt::print("{:<20} {:>10.4f} {:>10.4f} {:>10.4f} {:>10.4f} {:>8}\n", r.method, r.report.mae,
                   r.report.median, r.report.p90, r.report.p95, r.failures);
    for (const auto &w : b.warnings)
        fmt::print(stderr, "warning: {}\n", w);
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"MIMO CSI fingerprint localization experiments"};
    app.require_subcommand(1);

    Common common;
    std::string input, axis;
    std::vector<std::string> values;

    auto *generate = app.add_subcommand("generate", "simulate train/test/calibration datasets");
    auto *ingest = app.add_subcommand("ingest", "validate and import a binary dataset");
    auto *calibrate = app.add_subcommand("calibrate", "estimate the CSI phase calibration");
    auto *extract = app.add_subcommand("extract", "run SAGE and write MPC tables");
    auto *train = app.add_subcommand("train", "train fingerprint models");
    auto *evaluate = app.add_subcommand("evaluate", "full pipeline with error tables and CDFs");
    auto *sweep_cmd = app.add_subcommand("sweep", "repeat the pipeline over one config axis");
    for (auto *cmd : {generate, ingest, calibrate, extract, train, evaluate, sweep_cmd})
        add_common(cmd, common);
    ingest->add_option("--input", input, "dataset file")->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("--axis", axis, "antennas, grid_size, snr, scheme or topology")->required();
    sweep_cmd->add_option("--values", values, "axis values")->required()->delimiter(',');

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        return app.exit(e);
    }

    try
    {
        const ExperimentConfig cfg = load(common);
        if (generate->parsed())
            list(cfg.out, generate_stage(cfg));
        else if (ingest->parsed())
            list(cfg.out, ingest_stage(cfg, input));
        else if (calibrate->parsed())
            list(cfg.out, calibrate_stage(cfg));
        else if (extract->parsed())
            list(cfg.out, extract_stage(cfg));
        else if (train->parsed())
            list(cfg.out, train_stage(cfg));
        else if (evaluate->parsed())
            print_results(run_pipeline(cfg));
        else if (sweep_cmd->parsed())
        {
            SweepAxis a;
            try
            {
                a = sweep_axis_from_string(axis);
            }
            catch (const std::exception &e)
            {
                throw StageError("sweep", std::nullopt, e.what());
            }
            const SweepResult r = sweep(cfg, a, values);
            for (const auto &[value, bundle] : r.runs)
            {
                fmt::print("== {} = {}\n", axis, value);
                print_results(bundle);
            }
            for (const auto &w : r.warnings)
                fmt::print(stderr, "warning: {}\n", w);
        }
    }
    catch (const StageError &e)
    {
        fmt::print(stderr, "error: {}\n", e.what());
        return 2;
    }
    catch (const std::exception &e)
    {
        fmt::print(stderr, "error: [internal] {}\n", e.what());
        return 3;
    }
    return 0;
}
