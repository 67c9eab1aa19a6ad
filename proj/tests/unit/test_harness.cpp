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
#include "mimoloc/harness.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

using namespace mimoloc;
namespace fs = std::filesystem;

namespace
{
fs::path scratch(const std::string &name)
{
    const fs::path p = fs::temp_directory_path() / ("mimoloc_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path &p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines(const fs::path &p)
{
    std::vector<std::string> out;
    std::istringstream in(slurp(p));
    for (std::string l; std::getline(in, l);)
        out.push_back(l);
    return out;
}

// Small but complete run: 4x4 grid, a handful of test points, short search.
ExperimentConfig small_config(const std::string &name)
{
    ExperimentConfig c;
    c.train_grid = 4;
    c.test_points = 6;
    c.schemes = {MetricScheme::parse("AOA"), MetricScheme::parse("AMP+TOF")};
    c.search.trials = 6;
    c.search.folds = 3;
    c.out = scratch(name);
    return c;
}

ExperimentConfig parse(const std::string &text)
{
    std::istringstream in(text);
    return parse_config(in);
}
} // namespace

TEST_CASE("empty config means defaults")
{
    const auto c = parse("");
    CHECK(c.kind == ArrayKind::DIS);
    CHECK(c.train_grid == 11);
    CHECK(c.seed == 1);
    CHECK(c.snr_db == 20.0);
    CHECK(c.schemes.size() == 4);
}

TEST_CASE("config keys")
{
    const auto c = parse(R"(
[topology]
kind = ULA
antennas = 32
[scene]
region = 1, 1, 2, 2
train_grid = 6
scatterers = 4, 1, 1.5, 0.3, 0; -1, 2, 1, 0, 0.2
ground_reflection = -0.4
[impairments]
snr_db = none
sto_samples = 3
[subarray]
window = 6x6
stride = 2
[sage]
delay_step_ns = 10
angle_step_deg = 2
[fingerprint]
schemes = AOA, AMP+TOF
trials = 9
[run]
seed = 18446744073709551615
out = elsewhere
)");
    CHECK(c.kind == ArrayKind::ULA);
    CHECK(c.antennas == 32);
    CHECK(c.region.min == Eigen::Vector2d(1, 1));
    CHECK(c.train_grid == 6);
    REQUIRE(c.scatterers.size() == 2);
    CHECK(c.scatterers[1].reflection == cdouble(0, 0.2));
    CHECK(c.ground_reflection == -0.4);
    CHECK_FALSE(c.snr_db);
    CHECK(c.impairments.sto_samples == 3);
    CHECK(c.window.rows == 6);
    CHECK(c.stride.rows == 1);
    CHECK(c.stride.cols == 2);
    CHECK(c.sage.delay_step == doctest::Approx(10e-9));
    CHECK(c.sage.angle_step == doctest::Approx(deg2rad(2.0)));
    CHECK(c.schemes.size() == 2);
    CHECK(c.search.trials == 9);
    CHECK(c.seed == 18446744073709551615ULL);
    CHECK(c.out == "elsewhere");
}

TEST_CASE("canonical INI round trip")
{
    auto c = parse("[scene]\nground_reflection = -0.25\nrandom_scatterers = 3\n[run]\nseed = 77\n");
    const std::string ini = c.to_ini();
    const auto back = parse(ini);
    CHECK(back.to_ini() == ini);
    CHECK(back.seed == 77);
}

TEST_CASE("bad configs are rejected")
{
    CHECK_THROWS_AS(parse("[scene]\ntrain_grid = 1\n"), InvalidInput);
    CHECK_THROWS_AS(parse("[scene]\ntrain_grid = 2.5\n"), InvalidInput);
    CHECK_THROWS_AS(parse("[scene]\nregion = 0, 0, 5, 5\n"), InvalidInput);
    CHECK_THROWS_AS(parse("[scene]\ntrian_grid = 6\n"), InvalidInput);
    CHECK_THROWS_AS(parse("[topology]\nkind = hexagon\n"), InvalidInput);
    CHECK_THROWS_AS(parse("[fingerprint]\nschemes = RSSI\n"), InvalidInput);
    CHECK_THROWS_AS(parse("[calibration]\ngrid = 7\n"), InvalidInput);
    CHECK_THROWS_AS(parse("[run]\nseed = -3\n"), InvalidInput);
    CHECK_THROWS_AS(parse("[run]\nseed = 1e3\n"), InvalidInput);
    CHECK_THROWS_AS(parse("[run]\nseed = 18446744073709551616\n"), InvalidInput);
    CHECK_THROWS_AS(load_config("/nonexistent/config.ini"), InvalidInput);
}

TEST_CASE("derived building blocks")
{
    ExperimentConfig c;
    c.random_scatterers = 6;
    const Scene a = build_scene(c), b = build_scene(c);
    REQUIRE(a.scatterers.size() == 6);
    for (std::size_t i = 0; i < 6; ++i)
    {
        CHECK(a.scatterers[i].position == b.scatterers[i].position);
        CHECK(std::abs(a.scatterers[i].reflection) == doctest::Approx(0.3));
        CHECK_FALSE(c.area.contains(Eigen::Vector2d(a.scatterers[i].position.head<2>())));
    }
    const auto imp = build_impairments(c, 64);
    CHECK(imp.antenna_offsets.size() == 64);
    CHECK(imp.antenna_offsets.cwiseAbs().maxCoeff() <= kPi);

    CHECK(build_subarrays(c, build_topology(c)).size() == 8);
    c.kind = ArrayKind::ULA;
    CHECK(build_subarrays(c, build_topology(c)).size() == 57);
    c.kind = ArrayKind::URA;
    CHECK(build_subarrays(c, build_topology(c)).size() == 9);
    c.antennas = 16;
    const auto small = build_subarrays(c, build_topology(c));
    CHECK(small.size() == 9);
    CHECK(small.front().size() == 4);
}

TEST_CASE("pipeline writes the full report")
{
    const auto cfg = small_config("pipeline");
    const ReportBundle b = run_pipeline(cfg);
    for (const char *m : {"AOA", "AMP+TOF", kTriangulation, kTofTrilateration, kAmpTrilateration})
    {
        INFO(m);
        REQUIRE(b.find(m));
        CHECK(b.find(m)->report.errors.size() + b.find(m)->failures == 6);
    }
    REQUIRE(b.calibration);

    const auto table = lines(cfg.out / "errors.csv");
    REQUIRE(table.size() == 6);
    CHECK(table[0] == "method,grid,train_samples,test_samples,failures,mae_m,median_m,p90_m,p95_m");
    CHECK(table[1].rfind("AOA,4x4,16,", 0) == 0);

    const auto mpc = lines(cfg.out / "mpc_test.csv");
    CHECK(mpc[0] == "sample_id,subarray_id,path_index,power_db,azimuth_deg,elevation_deg,tof_ns");
    CHECK(mpc.size() == 1 + 6 * 8);

    const auto cdf = lines(cfg.out / "cdf_aoa.csv");
    REQUIRE(cdf.size() == 7);
    double prev_e = -1.0, prev_f = -1.0;
    for (std::size_t i = 1; i < cdf.size(); ++i)
    {
        const auto comma = cdf[i].find(',');
        const double e = std::stod(cdf[i].substr(0, comma)), f = std::stod(cdf[i].substr(comma + 1));
        CHECK(e >= prev_e);
        CHECK(f >= prev_f);
        prev_e = e;
        prev_f = f;
    }
    CHECK(prev_f == 1.0);

    const auto manifest = nlohmann::json::parse(slurp(cfg.out / "manifest.json"));
    CHECK(manifest["seed"] == cfg.seed);
    CHECK(manifest["config_sha256"] == sha256_hex_string(cfg.to_ini()));
    std::size_t listed = 0;
    for (const auto &f : manifest["files"])
    {
        CHECK(f["sha256"] == sha256_hex(cfg.out / f["path"].get<std::string>()));
        ++listed;
    }
    for (const auto &entry : fs::directory_iterator(cfg.out))
        if (entry.path().filename() != "manifest.json")
            CHECK(std::any_of(manifest["files"].begin(), manifest["files"].end(), [&](const auto &f) {
                return f["path"] == entry.path().filename().string();
            }));
    CHECK(listed + 1 == b.files.size());

    const auto model = load_model(cfg.out / "model_amp_tof.bin");
    CHECK(model.layout.scheme == MetricScheme::parse("AMP+TOF"));
    CHECK(model.meta.grid == "4x4");
}

TEST_CASE("same seed, same bytes")
{
    auto a = small_config("det_a"), b = small_config("det_b");
    a.schemes = b.schemes = {MetricScheme::parse("AOA")};
    run_pipeline(a);
    run_pipeline(b);
    for (const char *f : {"errors.csv", "cdf_aoa.csv", "mpc_train.csv", "predictions_aoa.csv", "model_aoa.bin"})
        CHECK(slurp(a.out / f) == slurp(b.out / f));
    auto c = small_config("det_c");
    c.schemes = a.schemes;
    c.seed = 2;
    run_pipeline(c);
    CHECK(slurp(a.out / "mpc_train.csv") != slurp(c.out / "mpc_train.csv"));
}

TEST_CASE("sha256 known answer")
{
    CHECK(sha256_hex_string("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("stages and ingestion")
{
    auto cfg = small_config("stages");
    cfg.schemes = {MetricScheme::parse("AOA")};
    const auto generated = generate_stage(cfg);
    CHECK(fs::exists(cfg.out / "train.bin"));
    CHECK(fs::exists(cfg.out / "calibration.bin"));
    CHECK(fs::exists(cfg.out / "manifest.json"));

    auto ing = cfg;
    ing.out = scratch("ingest");
    ingest_stage(ing, cfg.out / "train.bin");
    const auto summary = nlohmann::json::parse(slurp(ing.out / "summary.json"));
    CHECK(summary["samples"] == 16);

    // the generated files feed a file-driven run
    auto fromfiles = small_config("fromfiles");
    fromfiles.schemes = cfg.schemes;
    fromfiles.baselines = false;
    fromfiles.train_file = cfg.out / "train.bin";
    fromfiles.test_file = cfg.out / "test.bin";
    fromfiles.calibration_file = cfg.out / "calibration.bin";
    const auto b = run_pipeline(fromfiles);
    REQUIRE(b.find("AOA"));
    auto direct = small_config("direct");
    direct.schemes = cfg.schemes;
    direct.baselines = false;
    const auto d = run_pipeline(direct);
    // float32 storage perturbs the samples slightly; results should still agree closely
    CHECK(b.find("AOA")->report.mae == doctest::Approx(d.find("AOA")->report.mae).epsilon(0.2));

    // a single file splits into grid and off-grid samples
    auto single = fromfiles;
    single.out = scratch("single");
    single.test_file.reset();
    single.train_grid = 2;
    single.region = cfg.region;
    const Datasets split = prepare_datasets(single);
    CHECK(split.train.size() == 4);
    CHECK(split.test.size() == 12);

    CHECK(fs::exists(calibrate_stage(cfg).empty() ? fs::path() : cfg.out / "calibration.json"));
    extract_stage(cfg);
    CHECK(lines(cfg.out / "mpc_train.csv").size() == 1 + 16 * 8);
    train_stage(cfg);
    CHECK(fs::exists(cfg.out / "model_aoa.bin"));
}

TEST_CASE("stage errors name the stage")
{
    auto cfg = small_config("missing");
    cfg.train_file = "/nonexistent/train.bin";
    try
    {
        run_pipeline(cfg);
        FAIL("expected StageError");
    }
    catch (const StageError &e)
    {
        CHECK(e.stage() == "generate");
        CHECK(std::string(e.what()).rfind("[generate]", 0) == 0);
    }
    // partial outputs stay on disk
    CHECK(fs::exists(cfg.out / "config.ini"));
}

TEST_CASE("sweep skips invalid values and writes a summary")
{
    auto cfg = small_config("sweep");
    cfg.kind = ArrayKind::URA;
    cfg.schemes = {MetricScheme::parse("AOA")};
    cfg.baselines = false;
    const auto r = sweep(cfg, SweepAxis::Antennas, {"16", "20", "36"});
    REQUIRE(r.runs.size() == 2);
    CHECK(r.runs[0].first == "16");
    CHECK_FALSE(r.warnings.empty());
    const auto summary = lines(cfg.out / "summary.csv");
    CHECK(summary[0] == "antennas,method,mae_m,median_m,p90_m,p95_m,failures,trend_violation");
    CHECK(summary.size() == 3);
    const auto manifest = nlohmann::json::parse(slurp(cfg.out / "manifest.json"));
    CHECK(manifest["skipped"] == std::vector<std::string>{"20"});
    CHECK(fs::exists(cfg.out / "antennas_16" / "errors.csv"));

    CHECK(sweep_axis_from_string("grid_size") == SweepAxis::GridSize);
    CHECK_THROWS_AS(sweep_axis_from_string("colour"), InvalidInput);
}
