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

#include "mimoloc/harness.hpp"

#include "mimoloc/dataset_io.hpp"
#include "mimoloc/geo_baselines.hpp"
#include "mimoloc/link_metrics.hpp"
#include "mimoloc/parallel.hpp"

#include <fmt/core.h>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

namespace mimoloc
{

namespace fs = std::filesystem;

StageError::StageError(std::string stage, std::optional<std::size_t> sample, const std::string &what)
    : std::runtime_error(sample ? fmt::format("[{}] sample {}: {}", stage, *sample, what)
                                : fmt::format("[{}] {}", stage, what)),
      stage_(std::move(stage)), sample_(sample)
{
}

const MethodResult *ReportBundle::find(const std::string &method) const
{
    for (const auto &r : results)
        if (r.method == method)
            return &r;
    return nullptr;
}

namespace
{

// Seed slots; every random quantity of a run derives from (run seed, slot).
enum SeedSlot : std::uint64_t
{
    kTrainSeed = 1,
    kTestSeed = 2,
    kCalibrationSeed = 3,
    kOffsetSeed = 4,
    kTestPointSeed = 5,
    kSearchSeed = 6,
    kScattererSeed = 7,
};

double unit(std::mt19937_64 &rng)
{
    return double(rng() >> 11) * 0x1.0p-53;
}

std::string g9(double v)
{
    return fmt::format("{:.9g}", v);
}

std::string file_tag(const std::string &method)
{
    std::string s = method;
    std::replace(s.begin(), s.end(), '+', '_');
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return char(std::tolower(c)); });
    return s;
}

template <typename Fn>
auto stage(const char *name, Fn &&fn)
{
    try
    {
        return fn();
    }
    catch (const StageError &)
    {
        throw;
    }
    catch (const std::exception &e)
    {
        throw StageError(name, std::nullopt, e.what());
    }
}

class OutputDir
{
public:
    explicit OutputDir(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

    const fs::path &root() const { return root_; }

    void write(const std::string &name, const std::string &content)
    {
        std::ofstream out(root_ / name, std::ios::binary);
        if (!out)
            throw std::runtime_error("cannot write " + (root_ / name).string());
        out << content;
        if (!out)
            throw std::runtime_error("failed writing " + (root_ / name).string());
        add(name);
    }

    void add(const std::string &name)
    {
        if (std::find(files_.begin(), files_.end(), fs::path(name)) == files_.end())
            files_.emplace_back(name);
    }

    const std::vector<fs::path> &files() const { return files_; }

    // manifest.json: every file above with its hash, plus the run description
    void manifest(const ExperimentConfig &cfg, const std::string &verb, nlohmann::json extra = nlohmann::json::object())
    {
        nlohmann::json m;
        m["format"] = "mimoloc-manifest";
        m["version"] = 1;
        m["verb"] = verb;
        m["seed"] = cfg.seed;
        m["derived_seeds"] = {{"train", mix_seed(cfg.seed, kTrainSeed)},
                              {"test", mix_seed(cfg.seed, kTestSeed)},
                              {"calibration", mix_seed(cfg.seed, kCalibrationSeed)},
                              {"antenna_offsets", mix_seed(cfg.seed, kOffsetSeed)},
                              {"test_points", mix_seed(cfg.seed, kTestPointSeed)},
                              {"search", mix_seed(cfg.seed, kSearchSeed)},
                              {"scatterers", mix_seed(cfg.seed, kScattererSeed)}};
        m["config_sha256"] = sha256_hex_string(cfg.to_ini());
        nlohmann::json files = nlohmann::json::array();
        for (const auto &f : files_)
            files.push_back({{"path", f.generic_string()},
                             {"sha256", sha256_hex(root_ / f)},
                             {"bytes", fs::file_size(root_ / f)}});
        m["files"] = files;
        for (auto &[k, v] : extra.items())
            m[k] = v;
        std::ofstream out(root_ / "manifest.json", std::ios::binary);
        out << m.dump(2) << '\n';
        if (!out)
            throw std::runtime_error("failed writing manifest");
    }

private:
    fs::path root_;
    std::vector<fs::path> files_;
};

WindowShape default_window(const ExperimentConfig &cfg, const ArrayTopology &topo)
{
    if (cfg.window.rows > 0 && cfg.window.cols > 0)
        return cfg.window;
    const Panel &p = topo.panels().front();
    switch (topo.kind())
    {
    case ArrayKind::ULA:
        return {1, std::min(8, p.cols)};
    case ArrayKind::URA:
    {
        const int k = std::max(2, std::min(p.rows, p.cols) - 2);
        return {std::min(k, p.rows), std::min(k, p.cols)};
    }
    case ArrayKind::DIS:
        break;
    }
    return {p.rows, p.cols};
}

std::string mpc_csv(const Extraction &ex)
{
    std::string s = "sample_id,subarray_id,path_index,power_db,azimuth_deg,elevation_deg,tof_ns\n";
    for (std::size_t i = 0; i < ex.paths.size(); ++i)
        for (std::size_t a = 0; a < ex.paths[i].size(); ++a)
            for (std::size_t l = 0; l < ex.paths[i][a].size(); ++l)
            {
                const auto &p = ex.paths[i][a][l];
                s += fmt::format("{},{},{},{},{},{},{}\n", i, a, l, g9(p.power_db), g9(rad2deg(p.azimuth)),
                                 p.elevation ? g9(rad2deg(*p.elevation)) : std::string(), g9(p.delay * 1e9));
            }
    return s;
}

FeatureLayout layout_for(const std::vector<SubArray> &subs, const MetricScheme &scheme)
{
    return FeatureLayout{subs.size(), subs.front().is_planar() ? 2 : 1, scheme};
}

// Feature rows for the complete samples; `kept` receives their indices.
Eigen::MatrixXd feature_matrix(const Extraction &ex, const FeatureLayout &layout, std::vector<std::size_t> &kept)
{
    kept.clear();
    std::vector<Eigen::VectorXd> rows;
    for (std::size_t i = 0; i < ex.los.size(); ++i)
    {
        try
        {
            rows.push_back(build_features(ex.los[i], layout));
            kept.push_back(i);
        }
        catch (const IncompleteSample &)
        {
            // dropped; counted by the caller through `kept`
        }
    }
    Eigen::MatrixXd m(Eigen::Index(rows.size()), Eigen::Index(layout.dimension()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        m.row(Eigen::Index(r)) = rows[r].transpose();
    return m;
}

Eigen::MatrixXd positions_of(const LabeledDataset &d, const std::vector<std::size_t> &idx)
{
    Eigen::MatrixXd p(Eigen::Index(idx.size()), 2);
    for (std::size_t r = 0; r < idx.size(); ++r)
        p.row(Eigen::Index(r)) = d.positions[idx[r]].transpose();
    return p;
}

std::string grid_label(int n)
{
    return fmt::format("{}x{}", n, n);
}

double horizontal(double slant, double dz)
{
    return std::sqrt(std::max(0.0, slant * slant - dz * dz));
}

struct BaselineOutcome
{
    std::vector<double> errors;
    std::size_t failures = 0;
    std::vector<std::optional<Eigen::Vector2d>> fixes;
};

std::vector<MethodResult> run_baselines(const std::vector<SubArray> &subs, const LabeledDataset &train,
                                        const Extraction &train_ex, const LabeledDataset &test,
                                        const Extraction &test_ex, std::vector<std::string> &warnings,
                                        std::map<std::string, BaselineOutcome> &outcomes)
{
    const std::size_t S = subs.size();
    const double ue_z = test.ue_height;

    // Log-distance model per sub-array, fitted on the training LoS amplitudes.
    std::vector<std::optional<PathLossModel>> loss(S);
    for (std::size_t s = 0; s < S; ++s)
    {
        std::vector<double> amp, range;
        for (std::size_t i = 0; i < train_ex.los.size(); ++i)
            if (train_ex.los[i][s])
            {
                amp.push_back(db20(std::abs(train_ex.los[i][s]->amplitude)));
                range.push_back((train.ue_position(i) - subs[s].phase_center()).norm());
            }
        if (!amp.empty())
            loss[s] = fit_path_loss(amp, range);
    }

    BaselineOutcome tri, tof, amp;
    for (std::size_t i = 0; i < test_ex.los.size(); ++i)
    {
        const auto &los = test_ex.los[i];
        std::vector<AnchorObservation> bearing, ranged, amped;
        std::vector<std::size_t> bearing_sub;
        for (std::size_t s = 0; s < S; ++s)
        {
            if (!los[s])
                continue;
            const auto &c = *los[s];
            const Eigen::Vector3d pc = subs[s].phase_center();
            const Eigen::Vector3d ref = subs[s].reference_position();
            AnchorObservation b;
            b.position = pc.head<2>();
            b.orientation = subs[s].panel.yaw;
            b.aoa = c.azimuth;
            bearing.push_back(b);
            bearing_sub.push_back(s);

            AnchorObservation r;
            r.position = ref.head<2>();
            r.range = horizontal(c.delay * kSpeedOfLight, ref.z() - ue_z);
            ranged.push_back(r);

            if (loss[s])
            {
                AnchorObservation a;
                a.position = pc.head<2>();
                a.range = horizontal(amp_to_range(db20(std::abs(c.amplitude)), *loss[s]).range, pc.z() - ue_z);
                amped.push_back(a);
            }
        }

        auto record = [&](BaselineOutcome &out, auto &&solve) {
            try
            {
                const Eigen::Vector2d p = solve();
                out.errors.push_back((p - test.positions[i]).norm());
                out.fixes.emplace_back(p);
            }
            catch (const std::exception &)
            {
                ++out.failures;
                out.fixes.emplace_back(std::nullopt);
            }
        };
        record(tri, [&]() -> Eigen::Vector2d {
            PositionFix fix = triangulate_aoa(bearing);
            // A linear array measures the cone angle: sin(phi) = cos(el) sin(az). Undo it
            // with the elevation implied by the first fix and the known heights.
            bool corrected = false;
            for (std::size_t k = 0; k < bearing.size(); ++k)
            {
                const SubArray &sub = subs[bearing_sub[k]];
                if (sub.is_planar())
                    continue;
                const Eigen::Vector3d pc = sub.phase_center();
                const double rh = (fix.position - pc.head<2>()).norm();
                const double el = std::atan2(pc.z() - ue_z, rh);
                const double s = std::sin(los[bearing_sub[k]]->azimuth);
                bearing[k].aoa = std::asin(std::clamp(s / std::cos(el), -1.0, 1.0));
                corrected = true;
            }
            if (corrected)
                fix = triangulate_aoa(bearing);
            return fix.position;
        });
        record(tof, [&]() { return trilaterate(ranged).position; });
        record(amp, [&]() { return trilaterate(amped).position; });
    }

    std::vector<MethodResult> out;
    auto emit = [&](const char *name, BaselineOutcome &o) {
        if (o.errors.empty())
        {
            warnings.push_back(fmt::format("{}: no test sample could be located", name));
            return;
        }
        if (o.failures)
            warnings.push_back(fmt::format("{}: {} test samples had degenerate geometry", name, o.failures));
        out.push_back({name, error_report(o.errors), o.failures});
        outcomes[name] = o;
    };
    emit(kTriangulation, tri);
    emit(kTofTrilateration, tof);
    emit(kAmpTrilateration, amp);
    return out;
}

std::string cdf_csv(const ErrorReport &r)
{
    std::string s = "error_m,cumulative_fraction\n";
    for (const auto &[e, f] : r.cdf)
        s += g9(e) + "," + g9(f) + "\n";
    return s;
}

std::string errors_header()
{
    return "method,grid,train_samples,test_samples,failures,mae_m,median_m,p90_m,p95_m\n";
}

std::string errors_row(const MethodResult &r, const std::string &grid, std::size_t train_n)
{
    return fmt::format("{},{},{},{},{},{},{},{},{}\n", r.method, grid, train_n, r.report.errors.size(), r.failures,
                       g9(r.report.mae), g9(r.report.median), g9(r.report.p90), g9(r.report.p95));
}

LabeledDataset subset(const LabeledDataset &d, const std::vector<std::size_t> &idx)
{
    LabeledDataset out;
    out.topology = d.topology;
    out.frequencies = d.frequencies;
    out.ue_height = d.ue_height;
    for (std::size_t i : idx)
    {
        out.samples.push_back(d.samples[i]);
        out.positions.push_back(d.positions[i]);
        out.noise_std.push_back(i < d.noise_std.size() ? d.noise_std[i] : 1.0);
    }
    return out;
}

} // namespace

ArrayTopology build_topology(const ExperimentConfig &cfg)
{
    ArrayTopology topo = ArrayTopology::standard(cfg.kind);
    if (cfg.topology_file)
    {
        std::ifstream in(*cfg.topology_file);
        if (!in)
            throw InvalidInput("cannot open topology file " + cfg.topology_file->string());
        try
        {
            topo = ArrayTopology::from_json(nlohmann::json::parse(in));
        }
        catch (const nlohmann::json::exception &e)
        {
            throw InvalidInput(std::string("malformed topology file: ") + e.what());
        }
    }
    if (cfg.antennas > 0 && cfg.antennas != topo.size())
        topo = topo.reduced(cfg.antennas);
    return topo;
}

Scene build_scene(const ExperimentConfig &cfg)
{
    Scene scene;
    scene.ue_height = cfg.ue_height;
    scene.scatterers = cfg.scatterers;
    scene.ground_reflection = cfg.ground_reflection ? std::optional<cdouble>(cdouble{*cfg.ground_reflection, 0.0})
                                                    : std::nullopt;
    // Seeded point scatterers on a ring 1.2 m outside the area, cycling through the sides.
    std::mt19937_64 rng(mix_seed(cfg.seed, kScattererSeed));
    const Eigen::Vector2d lo = cfg.area.min.array() - 1.2, hi = cfg.area.max.array() + 1.2;
    for (int k = 0; k < cfg.random_scatterers; ++k)
    {
        const double t = unit(rng), along = unit(rng), z = 1.0 + unit(rng);
        Eigen::Vector3d p;
        switch (k % 4)
        {
        case 0:
            p = {lo.x() + along * (hi.x() - lo.x()), lo.y(), z};
            break;
        case 1:
            p = {hi.x(), lo.y() + along * (hi.y() - lo.y()), z};
            break;
        case 2:
            p = {lo.x() + along * (hi.x() - lo.x()), hi.y(), z};
            break;
        default:
            p = {lo.x(), lo.y() + along * (hi.y() - lo.y()), z};
            break;
        }
        scene.scatterers.push_back({p, std::polar(cfg.scatterer_reflection, 2.0 * kPi * t)});
    }
    return scene;
}

ImpairmentParams build_impairments(const ExperimentConfig &cfg, std::size_t antennas)
{
    ImpairmentParams imp = cfg.impairments;
    imp.antenna_offsets = Eigen::VectorXd::Zero(Eigen::Index(antennas));
    if (cfg.antenna_offset_spread > 0.0)
    {
        std::mt19937_64 rng(mix_seed(cfg.seed, kOffsetSeed));
        for (Eigen::Index m = 0; m < imp.antenna_offsets.size(); ++m)
            imp.antenna_offsets[m] = wrap_phase(cfg.antenna_offset_spread * (2.0 * unit(rng) - 1.0));
    }
    return imp;
}

std::vector<SubArray> build_subarrays(const ExperimentConfig &cfg, const ArrayTopology &topo)
{
    if (topo.kind() == ArrayKind::DIS && cfg.window.rows == 0)
    {
        std::vector<SubArray> subs;
        for (std::size_t p = 0; p < topo.panels().size(); ++p)
            subs.push_back(whole_panel(topo, p));
        return subs;
    }
    return partition_sliding(topo, default_window(cfg, topo), cfg.stride);
}

Datasets prepare_datasets(const ExperimentConfig &cfg)
{
    Datasets d;
    if (cfg.train_file)
    {
        d.train = read_dataset(*cfg.train_file);
        if (cfg.test_file)
            d.test = read_dataset(*cfg.test_file);
        else
        {
            // training = samples on the configured grid, test = everything else
            const auto grid = grid_points(GridSpec{cfg.region, cfg.train_grid});
            std::vector<std::size_t> on, off;
            for (std::size_t i = 0; i < d.train.size(); ++i)
            {
                const bool hit = std::any_of(grid.begin(), grid.end(), [&](const Eigen::Vector2d &g) {
                    return (g - d.train.positions[i]).norm() < 1e-6;
                });
                (hit ? on : off).push_back(i);
            }
            LabeledDataset all = d.train;
            d.train = subset(all, on);
            d.test = subset(all, off);
        }
        if (cfg.calibration_file)
            d.calibration = read_dataset(*cfg.calibration_file);
        if (d.train.size() < 2 || d.test.size() < 1)
            throw InvalidInput("ingested data needs at least two training and one test sample");
        return d;
    }

    const ArrayTopology topo = build_topology(cfg);
    const Scene scene = build_scene(cfg);
    d.impairments = build_impairments(cfg, topo.size());
    const Eigen::VectorXd f = subcarrier_grid(topo.carrier_frequency());
    d.train = generate_grid_dataset(cfg.area, GridSpec{cfg.region, cfg.train_grid}, topo, d.impairments, cfg.snr_db,
                                    scene, f, mix_seed(cfg.seed, kTrainSeed));
    std::mt19937_64 rng(mix_seed(cfg.seed, kTestPointSeed));
    std::vector<Eigen::Vector2d> pts;
    const Eigen::Vector2d span = cfg.region.max - cfg.region.min;
    for (int i = 0; i < cfg.test_points; ++i)
    {
        const double u = unit(rng), v = unit(rng);
        pts.emplace_back(cfg.region.min.x() + u * span.x(), cfg.region.min.y() + v * span.y());
    }
    d.test = generate_point_dataset(pts, topo, d.impairments, cfg.snr_db, scene, f, mix_seed(cfg.seed, kTestSeed));
    if (cfg.calibrate)
        d.calibration = generate_grid_dataset(cfg.area, GridSpec{cfg.region, cfg.calibration_grid}, topo,
                                              d.impairments, cfg.snr_db, scene, f,
                                              mix_seed(cfg.seed, kCalibrationSeed));
    return d;
}

std::optional<CalibrationSolution> run_calibration(const ExperimentConfig &cfg, const Datasets &data)
{
    if (!cfg.calibrate)
        return std::nullopt;
    const LabeledDataset &ref = data.calibration ? *data.calibration : data.train;
    std::vector<Eigen::Vector3d> tx;
    for (std::size_t i = 0; i < ref.size(); ++i)
        tx.push_back(ref.ue_position(i));
    return calibrate(ref.samples, tx, ref.topology);
}

Extraction extract_dataset(const LabeledDataset &data, const std::vector<SubArray> &subarrays,
                           const std::optional<CalibrationSolution> &calibration, const SageConfig &cfg)
{
    Extraction ex;
    ex.paths.resize(data.size());
    ex.los.resize(data.size());
    std::vector<std::vector<std::size_t>> rows;
    for (const auto &s : subarrays)
        rows.push_back(s.element_indices);
    parallel_for(data.size(), [&](std::size_t i) {
        try
        {
            const CsiMatrix csi = calibration ? apply_calibration(data.samples[i], *calibration) : data.samples[i];
            ex.paths[i].resize(subarrays.size());
            ex.los[i].resize(subarrays.size());
            for (std::size_t s = 0; s < subarrays.size(); ++s)
            {
                ex.paths[i][s] = sage_extract(csi.select_rows(rows[s]), subarrays[s], cfg);
                if (!ex.paths[i][s].empty())
                    ex.los[i][s] = select_los(ex.paths[i][s]);
            }
        }
        catch (const std::exception &e)
        {
            throw StageError("extract", i, e.what());
        }
    });
    for (std::size_t i = 0; i < data.size(); ++i)
        if (std::any_of(ex.los[i].begin(), ex.los[i].end(), [](const auto &c) { return !c; }))
            ex.incomplete.push_back(i);
    return ex;
}

ReportBundle run_pipeline(const ExperimentConfig &cfg)
{
    cfg.validate();
    ReportBundle bundle;
    OutputDir out(cfg.out);
    out.write("config.ini", cfg.to_ini());

    const Datasets data = stage("generate", [&] { return prepare_datasets(cfg); });
    const ArrayTopology &topo = data.train.topology;
    bundle.calibration = stage("calibrate", [&] { return run_calibration(cfg, data); });
    if (bundle.calibration)
        out.write("calibration.json", bundle.calibration->to_json().dump(2) + "\n");

    const auto subs = stage("partition", [&] { return build_subarrays(cfg, topo); });
    const Extraction train_ex = extract_dataset(data.train, subs, bundle.calibration, cfg.sage);
    const Extraction test_ex = extract_dataset(data.test, subs, bundle.calibration, cfg.sage);
    out.write("mpc_train.csv", mpc_csv(train_ex));
    out.write("mpc_test.csv", mpc_csv(test_ex));
    bundle.dropped_train = train_ex.incomplete.size();
    bundle.dropped_test = test_ex.incomplete.size();
    for (std::size_t i : train_ex.incomplete)
        bundle.warnings.push_back(fmt::format("training sample {} dropped: a sub-array has no component", i));
    for (std::size_t i : test_ex.incomplete)
        bundle.warnings.push_back(fmt::format("test sample {} dropped: a sub-array has no component", i));

    const std::string grid = cfg.train_file && !cfg.test_file ? grid_label(cfg.train_grid)
                             : cfg.train_file                 ? std::string("file")
                                                              : grid_label(cfg.train_grid);
    std::string table = errors_header();
    std::string predictions;
    for (const auto &scheme : cfg.schemes)
    {
        const std::string name = scheme.to_string();
        const FeatureLayout layout = layout_for(subs, scheme);
        std::vector<std::size_t> train_idx, test_idx;
        const Eigen::MatrixXd xtr = feature_matrix(train_ex, layout, train_idx);
        const Eigen::MatrixXd xte = feature_matrix(test_ex, layout, test_idx);
        if (train_idx.size() < 2 || test_idx.empty())
            throw StageError("train", std::nullopt, name + ": not enough complete samples");
        SearchBudget budget = cfg.search;
        budget.seed = mix_seed(cfg.seed, kSearchSeed);
        FingerprintModel model =
            stage("train", [&] { return train_fingerprint(xtr, positions_of(data.train, train_idx), layout, budget); });
        model.meta.grid = grid;
        model.meta.topology = to_string(topo.kind());
        const std::string tag = file_tag(name);
        {
            std::ostringstream bin;
            save_model(model, bin);
            out.write("model_" + tag + ".bin", bin.str());
        }
        const Eigen::MatrixXd truth = positions_of(data.test, test_idx);
        const Eigen::MatrixXd pred = predict(model, xte);
        MethodResult r{name, evaluate(pred, truth), data.test.size() - test_idx.size()};
        std::string pcsv = "sample_id,x_true_m,y_true_m,x_pred_m,y_pred_m,error_m\n";
        for (Eigen::Index k = 0; k < pred.rows(); ++k)
            pcsv += fmt::format("{},{},{},{},{},{}\n", test_idx[std::size_t(k)], g9(truth(k, 0)), g9(truth(k, 1)),
                                g9(pred(k, 0)), g9(pred(k, 1)), g9(r.report.errors[std::size_t(k)]));
        out.write("predictions_" + tag + ".csv", pcsv);
        out.write("cdf_" + tag + ".csv", cdf_csv(r.report));
        table += errors_row(r, grid, train_idx.size());
        bundle.results.push_back(std::move(r));
    }

    if (cfg.baselines)
    {
        std::map<std::string, BaselineOutcome> outcomes;
        auto base = stage("baselines", [&] {
            return run_baselines(subs, data.train, train_ex, data.test, test_ex, bundle.warnings, outcomes);
        });
        for (auto &r : base)
        {
            out.write("cdf_" + file_tag(r.method) + ".csv", cdf_csv(r.report));
            table += errors_row(r, grid, data.train.size());
            bundle.results.push_back(std::move(r));
        }
    }
    out.write("errors.csv", table);

    if (cfg.effective_snr)
    {
        std::string s = "sample_id,noise_std,gamma_eff_db,mean_ber";
        for (std::size_t k = 0; k < subs.size(); ++k)
            s += fmt::format(",gamma_eff_db_s{}", k);
        s += "\n";
        bool any = false;
        for (std::size_t i = 0; i < data.test.size(); ++i)
        {
            const double sigma = i < data.test.noise_std.size() ? data.test.noise_std[i] : 0.0;
            if (!(sigma > 0.0))
                continue;
            any = true;
            const EffectiveSnr all = effective_snr(data.test.samples[i], sigma * sigma);
            s += fmt::format("{},{},{},{}", i, g9(sigma), all.infinite ? "inf" : g9(all.gamma_eff_db()),
                             g9(all.mean_ber));
            for (const auto &sub : subs)
            {
                const EffectiveSnr part = effective_snr(data.test.samples[i], sub.element_indices, sigma * sigma);
                s += "," + (part.infinite ? std::string("inf") : g9(part.gamma_eff_db()));
            }
            s += "\n";
        }
        if (any)
            out.write("link_metrics.csv", s);
        else
            bundle.warnings.push_back("effective SNR skipped: noiseless samples have no noise variance");
    }

    out.manifest(cfg, "evaluate",
                 {{"warnings", bundle.warnings},
                  {"dropped_samples", {{"train", bundle.dropped_train}, {"test", bundle.dropped_test}}},
                  {"train_samples", data.train.size()},
                  {"test_samples", data.test.size()},
                  {"test_split", cfg.test_file || !cfg.train_file ? "separate test set"
                                                                   : "samples off the training grid"}});
    bundle.files = out.files();
    bundle.files.emplace_back("manifest.json");
    return bundle;
}

SweepAxis sweep_axis_from_string(const std::string &name)
{
    if (name == "antennas")
        return SweepAxis::Antennas;
    if (name == "grid_size" || name == "grid")
        return SweepAxis::GridSize;
    if (name == "snr")
        return SweepAxis::Snr;
    if (name == "scheme")
        return SweepAxis::Scheme;
    if (name == "topology")
        return SweepAxis::Topology;
    throw InvalidInput("unknown sweep axis '" + name + "' (antennas, grid_size, snr, scheme, topology)");
}

const char *to_string(SweepAxis axis)
{
    switch (axis)
    {
    case SweepAxis::Antennas:
        return "antennas";
    case SweepAxis::GridSize:
        return "grid_size";
    case SweepAxis::Snr:
        return "snr";
    case SweepAxis::Scheme:
        return "scheme";
    case SweepAxis::Topology:
        return "topology";
    }
    return "?";
}

namespace
{

// Applies one sweep value; throws InvalidInput when the value does not fit the config.
ExperimentConfig with_value(const ExperimentConfig &base, SweepAxis axis, const std::string &value)
{
    ExperimentConfig c = base;
    auto integer = [&]() {
        std::size_t pos = 0;
        long v = 0;
        try
        {
            v = std::stol(value, &pos);
        }
        catch (const std::exception &)
        {
            pos = 0;
        }
        if (pos == 0 || pos != value.size())
            throw InvalidInput("'" + value + "' is not an integer");
        return v;
    };
    switch (axis)
    {
    case SweepAxis::Antennas:
    {
        const long n = integer();
        if (n < 1)
            throw InvalidInput("antenna count must be positive");
        const ArrayTopology full = build_topology([&] {
            ExperimentConfig t = base;
            t.antennas = 0;
            return t;
        }());
        if (std::size_t(n) > full.size())
            throw InvalidInput(fmt::format("{} antennas exceed the {}-element array", n, full.size()));
        c.antennas = std::size_t(n);
        const ArrayTopology reduced = build_topology(c); // validates divisibility / squareness
        build_subarrays(c, reduced);                     // and that the window still fits
        break;
    }
    case SweepAxis::GridSize:
        c.train_grid = int(integer());
        break;
    case SweepAxis::Snr:
        if (value == "inf" || value == "none")
            c.snr_db = std::nullopt;
        else
        {
            std::size_t pos = 0;
            c.snr_db = std::stod(value, &pos);
            if (pos != value.size())
                throw InvalidInput("'" + value + "' is not a number");
        }
        break;
    case SweepAxis::Scheme:
        c.schemes = {MetricScheme::parse(value)};
        break;
    case SweepAxis::Topology:
        c.kind = array_kind_from_string(value);
        c.topology_file.reset();
        c.antennas = 0;
        c.window = {0, 0};
        break;
    }
    c.validate();
    return c;
}

} // namespace

SweepResult sweep(const ExperimentConfig &cfg, SweepAxis axis, const std::vector<std::string> &values)
{
    SweepResult result;
    OutputDir out(cfg.out);
    std::string summary = fmt::format("{},method,mae_m,median_m,p90_m,p95_m,failures,trend_violation\n",
                                      to_string(axis));
    std::map<std::string, std::vector<std::pair<double, double>>> trend; // method -> (value, mae)
    std::vector<std::string> skipped;
    std::vector<std::tuple<std::string, std::string, MethodResult>> rows;
    for (const auto &value : values)
    {
        ExperimentConfig c;
        try
        {
            c = with_value(cfg, axis, value);
        }
        catch (const std::exception &e)
        {
            const std::string w = fmt::format("value '{}' skipped: {}", value, e.what());
            fmt::print(stderr, "warning: {}\n", w);
            result.warnings.push_back(w);
            skipped.push_back(value);
            continue;
        }
        const std::string sub = fmt::format("{}_{}", to_string(axis), file_tag(value));
        c.out = cfg.out / sub;
        ReportBundle b = run_pipeline(c);
        for (const auto &r : b.results)
            rows.emplace_back(value, r.method, r);
        result.runs.emplace_back(value, std::move(b));
    }
    // Error should not grow with more antennas or denser training grids.
    const bool ordered = axis == SweepAxis::Antennas || axis == SweepAxis::GridSize;
    std::map<std::string, double> last;
    for (const auto &[value, method, r] : rows)
    {
        bool violation = false;
        if (ordered)
        {
            if (auto it = last.find(method); it != last.end() && r.report.mae > it->second)
            {
                violation = true;
                result.warnings.push_back(
                    fmt::format("{}: MAE rises to {} m at {} = {}", method, g9(r.report.mae), to_string(axis), value));
            }
            last[method] = r.report.mae;
        }
        summary += fmt::format("{},{},{},{},{},{},{},{}\n", value, method, g9(r.report.mae), g9(r.report.median),
                               g9(r.report.p90), g9(r.report.p95), r.failures, violation ? 1 : 0);
    }
    out.write("summary.csv", summary);
    for (const auto &[value, b] : result.runs)
        for (const auto &f : b.files)
            out.add((fs::path(fmt::format("{}_{}", to_string(axis), file_tag(value))) / f).generic_string());
    out.manifest(cfg, "sweep",
                 {{"axis", to_string(axis)}, {"values", values}, {"skipped", skipped}, {"warnings", result.warnings}});
    return result;
}

std::vector<fs::path> generate_stage(const ExperimentConfig &cfg)
{
    OutputDir out(cfg.out);
    out.write("config.ini", cfg.to_ini());
    const Datasets d = stage("generate", [&] { return prepare_datasets(cfg); });
    write_dataset(out.root() / "train.bin", d.train);
    out.add("train.bin");
    write_dataset(out.root() / "test.bin", d.test);
    out.add("test.bin");
    if (d.calibration)
    {
        write_dataset(out.root() / "calibration.bin", *d.calibration);
        out.add("calibration.bin");
    }
    if (!cfg.train_file)
    {
        const CalibrationSolution truth = CalibrationSolution::from_impairments(
            d.impairments, int(d.train.frequencies.size()), Eigen::Index(d.train.topology.size()));
        out.write("impairments_truth.json", truth.to_json().dump(2) + "\n");
    }
    out.manifest(cfg, "generate");
    auto files = out.files();
    files.emplace_back("manifest.json");
    return files;
}

std::vector<fs::path> ingest_stage(const ExperimentConfig &cfg, const fs::path &input)
{
    OutputDir out(cfg.out);
    const LabeledDataset d = stage("ingest", [&] { return read_dataset(input); });
    if (d.size() == 0)
        throw StageError("ingest", std::nullopt, "dataset holds no samples");
    Eigen::Vector2d lo = d.positions.front(), hi = lo;
    for (const auto &p : d.positions)
    {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    nlohmann::json summary = {{"source", input.generic_string()},
                              {"samples", d.size()},
                              {"antennas", d.topology.size()},
                              {"subcarriers", d.frequencies.size()},
                              {"topology", to_string(d.topology.kind())},
                              {"ue_height", d.ue_height},
                              {"position_min", {lo.x(), lo.y()}},
                              {"position_max", {hi.x(), hi.y()}}};
    write_dataset(out.root() / "dataset.bin", d);
    out.add("dataset.bin");
    out.write("summary.json", summary.dump(2) + "\n");
    out.manifest(cfg, "ingest", {{"source_sha256", sha256_hex(input)}});
    auto files = out.files();
    files.emplace_back("manifest.json");
    return files;
}

std::vector<fs::path> calibrate_stage(const ExperimentConfig &cfg)
{
    if (!cfg.calibrate)
        throw StageError("calibrate", std::nullopt, "calibration is disabled in the config");
    OutputDir out(cfg.out);
    out.write("config.ini", cfg.to_ini());
    const Datasets d = stage("generate", [&] { return prepare_datasets(cfg); });
    const auto sol = stage("calibrate", [&] { return run_calibration(cfg, d); });
    out.write("calibration.json", sol->to_json().dump(2) + "\n");
    out.manifest(cfg, "calibrate");
    auto files = out.files();
    files.emplace_back("manifest.json");
    return files;
}

std::vector<fs::path> extract_stage(const ExperimentConfig &cfg)
{
    OutputDir out(cfg.out);
    out.write("config.ini", cfg.to_ini());
    const Datasets d = stage("generate", [&] { return prepare_datasets(cfg); });
    const auto sol = stage("calibrate", [&] { return run_calibration(cfg, d); });
    if (sol)
        out.write("calibration.json", sol->to_json().dump(2) + "\n");
    const auto subs = stage("partition", [&] { return build_subarrays(cfg, d.train.topology); });
    out.write("mpc_train.csv", mpc_csv(extract_dataset(d.train, subs, sol, cfg.sage)));
    out.write("mpc_test.csv", mpc_csv(extract_dataset(d.test, subs, sol, cfg.sage)));
    out.manifest(cfg, "extract");
    auto files = out.files();
    files.emplace_back("manifest.json");
    return files;
}

std::vector<fs::path> train_stage(const ExperimentConfig &cfg)
{
    OutputDir out(cfg.out);
    out.write("config.ini", cfg.to_ini());
    const Datasets d = stage("generate", [&] { return prepare_datasets(cfg); });
    const auto sol = stage("calibrate", [&] { return run_calibration(cfg, d); });
    const auto subs = stage("partition", [&] { return build_subarrays(cfg, d.train.topology); });
    const Extraction ex = extract_dataset(d.train, subs, sol, cfg.sage);
    for (const auto &scheme : cfg.schemes)
    {
        const FeatureLayout layout = layout_for(subs, scheme);
        std::vector<std::size_t> idx;
        const Eigen::MatrixXd x = feature_matrix(ex, layout, idx);
        SearchBudget budget = cfg.search;
        budget.seed = mix_seed(cfg.seed, kSearchSeed);
        FingerprintModel model =
            stage("train", [&] { return train_fingerprint(x, positions_of(d.train, idx), layout, budget); });
        model.meta.grid = grid_label(cfg.train_grid);
        model.meta.topology = to_string(d.train.topology.kind());
        std::ostringstream bin;
        save_model(model, bin);
        out.write("model_" + file_tag(scheme.to_string()) + ".bin", bin.str());
    }
    out.manifest(cfg, "train");
    auto files = out.files();
    files.emplace_back("manifest.json");
    return files;
}

std::string sha256_hex_string(const std::string &data)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 failed");
    std::string hex;
    for (unsigned int i = 0; i < len; ++i)
        hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

std::string sha256_hex(const fs::path &file)
{
    std::ifstream in(file, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot hash " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return sha256_hex_string(ss.str());
}

} // namespace mimoloc
