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

#include "mimoloc/fingerprint.hpp"
#include "mimoloc/harness.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace mimoloc;

namespace
{
std::vector<std::optional<MultipathComponent>> components(std::size_t n, bool planar)
{
    std::vector<std::optional<MultipathComponent>> los(n);
    for (std::size_t s = 0; s < n; ++s)
    {
        MultipathComponent c;
        c.amplitude = 0.01 * double(s + 1);
        c.azimuth = 0.1 * double(s);
        if (planar)
            c.elevation = -0.05 * double(s);
        c.delay = 1e-9 * double(s + 3);
        los[s] = c;
    }
    return los;
}

// smooth synthetic field: position -> features
Eigen::MatrixXd field(const Eigen::MatrixXd &pos)
{
    Eigen::MatrixXd f(pos.rows(), 3);
    for (Eigen::Index i = 0; i < pos.rows(); ++i)
    {
        const double x = pos(i, 0), y = pos(i, 1);
        f(i, 0) = x + 0.2 * std::sin(2.0 * y);
        f(i, 1) = y + 0.2 * std::cos(2.0 * x);
        f(i, 2) = std::hypot(x - 1.5, y - 1.5);
    }
    return f;
}

Eigen::MatrixXd grid(int n, double lo, double hi)
{
    Eigen::MatrixXd p(n * n, 2);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            p.row(i * n + j) << lo + (hi - lo) * j / (n - 1), lo + (hi - lo) * i / (n - 1);
    return p;
}

SearchBudget quick()
{
    SearchBudget b;
    b.trials = 20;
    b.seed = 3;
    return b;
}
} // namespace

TEST_CASE("metric schemes")
{
    CHECK(MetricScheme::parse("AMP+TOF") == MetricScheme{true, false, true});
    CHECK(MetricScheme::parse(" aoa ").to_string() == "AOA");
    CHECK(MetricScheme::parse("TOF+AMP+AOA").to_string() == "AMP+AOA+TOF");
    CHECK_THROWS_AS(MetricScheme::parse("RSSI"), InvalidInput);
    CHECK_THROWS_AS(MetricScheme::parse(""), InvalidInput);
}

TEST_CASE("feature dimensions")
{
    CHECK(FeatureLayout{8, 1, MetricScheme::parse("AOA")}.dimension() == 8);
    CHECK(FeatureLayout{9, 2, MetricScheme::parse("AMP+AOA+TOF")}.dimension() == 36);
    CHECK(FeatureLayout{57, 1, MetricScheme::parse("TOF")}.dimension() == 57);
    CHECK(FeatureLayout{2, 2, MetricScheme::parse("AMP+AOA")}.names().size() == 6);
}

TEST_CASE("feature layout and units")
{
    const FeatureLayout layout{3, 2, MetricScheme::parse("AMP+AOA+TOF")};
    const auto f = build_features(components(3, true), layout);
    REQUIRE(f.size() == 12);
    CHECK(f[0] == doctest::Approx(db20(0.01)));
    CHECK(f[1] == doctest::Approx(0.0));
    CHECK(f[2] == doctest::Approx(0.0));
    CHECK(f[3] == doctest::Approx(3.0));
    CHECK(f[5] == doctest::Approx(0.1));
    CHECK(f[6] == doctest::Approx(-0.05));

    auto missing = components(3, true);
    missing[1].reset();
    try
    {
        build_features(missing, layout);
        FAIL("expected IncompleteSample");
    }
    catch (const IncompleteSample &e)
    {
        CHECK(e.subarray() == 1);
    }
}

TEST_CASE("error statistics")
{
    const auto r = error_report({0.01, 0.02, 0.03, 0.04});
    CHECK(r.median == doctest::Approx(0.025));
    CHECK(r.mae == doctest::Approx(0.025));
    CHECK(r.cdf.back().second == 1.0);

    Eigen::MatrixXd truth = grid(3, 0, 1);
    const auto zero = evaluate(truth, truth);
    CHECK(zero.mae == 0.0);
    CHECK(zero.median == 0.0);
    CHECK(zero.p95 == 0.0);
    CHECK_THROWS_AS(evaluate(truth, Eigen::MatrixXd(2, 2)), InvalidInput);
}

TEST_CASE("constant targets predict the constant")
{
    const Eigen::MatrixXd pos = Eigen::MatrixXd::Constant(16, 2, 3.0);
    const Eigen::MatrixXd feat = field(grid(4, 0.5, 2.5));
    const auto m = train_fingerprint(feat, pos, FeatureLayout{3, 1, MetricScheme::parse("AOA")}, quick());
    CHECK(m.x.support_vectors.rows() == 0);
    const Eigen::Vector2d p = predict(m, Eigen::VectorXd(feat.row(5).transpose()));
    CHECK(p.x() == 3.0);
    CHECK(p.y() == 3.0);
}

TEST_CASE("interpolation between grid points stays in the bounding box")
{
    const Eigen::MatrixXd pos = grid(6, 0.5, 2.5);
    const auto m = train_fingerprint(field(pos), pos, FeatureLayout{3, 1, MetricScheme::parse("AOA")}, quick());
    CHECK(m.meta.samples == 36);

    // support vectors sit inside the tube around their targets
    const Eigen::MatrixXd fitted = predict(m, field(pos));
    CHECK((fitted - pos).cwiseAbs().maxCoeff() < 0.05);

    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> cell(0, 4);
    int inside = 0;
    for (int t = 0; t < 100; ++t)
    {
        const int i = cell(rng), j = cell(rng);
        const Eigen::RowVector2d a = pos.row(i * 6 + j), b = pos.row((i + 1) * 6 + j + 1);
        Eigen::MatrixXd mid(1, 2);
        mid.row(0) = 0.5 * (a + b);
        const Eigen::RowVector2d p = predict(m, field(mid)).row(0);
        const double tol = 1e-9;
        inside += p.x() >= a.x() - tol && p.x() <= b.x() + tol && p.y() >= a.y() - tol && p.y() <= b.y() + tol;
    }
    CHECK(inside >= 95);
}

TEST_CASE("model file round trip")
{
    const Eigen::MatrixXd pos = grid(5, 0.5, 2.5);
    auto m = train_fingerprint(field(pos), pos, FeatureLayout{3, 1, MetricScheme::parse("AOA")}, quick());
    m.meta.grid = "5x5";
    std::stringstream ss;
    save_model(m, ss);
    const auto back = load_model(ss);
    CHECK(back.layout == m.layout);
    CHECK(back.meta.grid == "5x5");
    const Eigen::MatrixXd probe = field(grid(4, 0.7, 2.2));
    CHECK(predict(back, probe) == predict(m, probe));

    std::stringstream bad("{\"format\": \"something-else\", \"version\": 1}\n");
    CHECK_THROWS_AS(load_model(bad), InvalidInput);
    std::string text = ss.str();
    std::stringstream cut(text.substr(0, text.size() - 5));
    CHECK_THROWS_AS(load_model(cut), InvalidInput);
}

TEST_CASE("noiseless DIS scene, 6x6 training, AOA scheme")
{
    ExperimentConfig cfg;
    cfg.impairments = ImpairmentParams{};
    cfg.antenna_offset_spread = 0.0;
    cfg.snr_db.reset();
    cfg.calibrate = false;
    cfg.train_grid = 6;
    cfg.test_points = 30;
    const Datasets d = prepare_datasets(cfg);
    const auto subs = build_subarrays(cfg, d.train.topology);
    REQUIRE(subs.size() == 8);
    const auto tr = extract_dataset(d.train, subs, std::nullopt, cfg.sage);
    const auto te = extract_dataset(d.test, subs, std::nullopt, cfg.sage);
    REQUIRE(tr.incomplete.empty());
    REQUIRE(te.incomplete.empty());

    const FeatureLayout layout{8, 1, MetricScheme::parse("AOA")};
    Eigen::MatrixXd xtr(36, 8), ptr(36, 2), xte(30, 8), pte(30, 2);
    for (int i = 0; i < 36; ++i)
    {
        xtr.row(i) = build_features(tr.los[std::size_t(i)], layout).transpose();
        ptr.row(i) = d.train.positions[std::size_t(i)].transpose();
    }
    for (int i = 0; i < 30; ++i)
    {
        xte.row(i) = build_features(te.los[std::size_t(i)], layout).transpose();
        pte.row(i) = d.test.positions[std::size_t(i)].transpose();
    }
    const auto model = train_fingerprint(xtr, ptr, layout, quick());
    const auto report = evaluate(model, xte, pte);
    CHECK(report.mae <= 0.10);
    CHECK(report.median <= report.p90);
    CHECK(report.p90 <= report.p95);
    for (std::size_t i = 1; i < report.cdf.size(); ++i)
    {
        CHECK(report.cdf[i].first >= report.cdf[i - 1].first);
        CHECK(report.cdf[i].second >= report.cdf[i - 1].second);
    }
}
