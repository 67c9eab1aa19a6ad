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

#include "mimoloc/dataset_io.hpp"
#include "mimoloc/parallel.hpp"

#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace mimoloc
{

MetricScheme MetricScheme::parse(const std::string &text)
{
    MetricScheme s;
    std::stringstream ss(text);
    std::string token;
    while (std::getline(ss, token, '+'))
    {
        std::string t;
        for (char c : token)
            if (!std::isspace(static_cast<unsigned char>(c)))
                t.push_back(char(std::toupper(static_cast<unsigned char>(c))));
        if (t == "AMP")
            s.amp = true;
        else if (t == "AOA")
            s.aoa = true;
        else if (t == "TOF")
            s.tof = true;
        else
            throw InvalidInput("unknown metric '" + token + "' (expected AMP, AOA or TOF)");
    }
    if (s.empty())
        throw InvalidInput("metric scheme must name at least one metric");
    return s;
}

std::string MetricScheme::to_string() const
{
    std::string out;
    auto add = [&](bool on, const char *name) {
        if (!on)
            return;
        if (!out.empty())
            out += '+';
        out += name;
    };
    add(amp, "AMP");
    add(aoa, "AOA");
    add(tof, "TOF");
    return out;
}

std::size_t FeatureLayout::per_subarray() const
{
    return (scheme.amp ? 1u : 0u) + (scheme.aoa ? std::size_t(angles_per_subarray) : 0u) + (scheme.tof ? 1u : 0u);
}

std::vector<std::string> FeatureLayout::names() const
{
    std::vector<std::string> out;
    for (std::size_t s = 0; s < subarrays; ++s)
    {
        if (scheme.amp)
            out.push_back(fmt::format("s{}.amp_db", s));
        if (scheme.aoa)
        {
            out.push_back(fmt::format("s{}.azimuth_rad", s));
            if (angles_per_subarray == 2)
                out.push_back(fmt::format("s{}.elevation_rad", s));
        }
        if (scheme.tof)
            out.push_back(fmt::format("s{}.tof_ns", s));
    }
    return out;
}

Eigen::VectorXd build_features(const std::vector<std::optional<MultipathComponent>> &los, const FeatureLayout &layout)
{
    if (layout.scheme.empty())
        throw InvalidInput("metric scheme is empty");
    if (layout.angles_per_subarray != 1 && layout.angles_per_subarray != 2)
        throw InvalidInput("angles per sub-array must be 1 or 2");
    if (los.size() != layout.subarrays)
        throw InvalidInput(fmt::format("expected {} sub-array components, got {}", layout.subarrays, los.size()));

    Eigen::VectorXd f(Eigen::Index(layout.dimension()));
    Eigen::Index k = 0;
    for (std::size_t s = 0; s < los.size(); ++s)
    {
        if (!los[s])
            throw IncompleteSample(fmt::format("no line-of-sight component for sub-array {}", s), s);
        const auto &c = *los[s];
        if (layout.scheme.amp)
            f[k++] = db20(std::abs(c.amplitude));
        if (layout.scheme.aoa)
        {
            f[k++] = c.azimuth;
            if (layout.angles_per_subarray == 2)
            {
                if (!c.elevation)
                    throw IncompleteSample(fmt::format("sub-array {} has no elevation estimate", s), s);
                f[k++] = *c.elevation;
            }
        }
        if (layout.scheme.tof)
            f[k++] = c.delay * 1e9;
    }
    if (!f.allFinite())
        throw InvalidInput("non-finite feature value");
    return f;
}

namespace
{

double unit_draw(std::mt19937_64 &rng)
{
    return double(rng() >> 11) * 0x1.0p-53;
}

double log_uniform(std::mt19937_64 &rng, double lo, double hi)
{
    return std::exp(std::log(lo) + unit_draw(rng) * (std::log(hi) - std::log(lo)));
}

std::vector<Eigen::Index> shuffled(Eigen::Index n, std::uint64_t seed)
{
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index(0));
    std::mt19937_64 rng(seed);
    // Fisher-Yates with our own draw so the order is identical across standard libraries
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[std::size_t(unit_draw(rng) * double(i))]);
    return idx;
}

double population_std(const Eigen::VectorXd &v)
{
    return std::sqrt((v.array() - v.mean()).square().mean());
}

struct Trial
{
    double C = 1.0, scale = 1.0, eps_rel = 0.01;
    double cv_x = std::numeric_limits<double>::infinity();
    double cv_y = std::numeric_limits<double>::infinity();
};

// Mean absolute held-out error of one coordinate under k-fold CV.
double cross_validate(const Eigen::MatrixXd &kernel, const Eigen::VectorXd &target, const std::vector<int> &fold,
                      int folds, const SvrParams &params)
{
    double total = 0.0;
    for (int f = 0; f < folds; ++f)
    {
        std::vector<Eigen::Index> train, test;
        for (std::size_t i = 0; i < fold.size(); ++i)
            (fold[i] == f ? test : train).push_back(Eigen::Index(i));
        if (test.empty() || train.empty())
            continue;
        const Eigen::VectorXd yt = target(train);
        double bias;
        Eigen::VectorXd beta;
        if ((yt.array() == yt[0]).all())
        {
            bias = yt[0];
            beta = Eigen::VectorXd::Zero(Eigen::Index(train.size()));
        }
        else
        {
            const SvrFit fit = solve_svr_dual(kernel(train, train), yt, params);
            bias = fit.bias;
            beta = fit.beta;
        }
        const Eigen::VectorXd pred = (kernel(test, train) * beta).array() + bias;
        total += (pred - target(test)).cwiseAbs().sum();
    }
    return total / double(fold.size());
}

} // namespace

FingerprintModel train_fingerprint(const Eigen::MatrixXd &features, const Eigen::MatrixXd &positions,
                                   const FeatureLayout &layout, const SearchBudget &budget)
{
    const Eigen::Index n = features.rows();
    if (positions.rows() != n || positions.cols() != 2)
        throw InvalidInput("positions must be a samples x 2 matrix");
    if (std::size_t(features.cols()) != layout.dimension())
        throw InvalidInput(fmt::format("feature dimension {} does not match the layout ({})", features.cols(),
                                       layout.dimension()));
    if (n < 2)
        throw InvalidInput("training needs at least two samples");
    if (!features.allFinite() || !positions.allFinite())
        throw InvalidInput("training data contains non-finite values");
    if (budget.trials < 1 || budget.folds < 2)
        throw InvalidInput("search budget needs at least one trial and two folds");

    FingerprintModel model;
    model.layout = layout;
    model.feature_mean = features.colwise().mean().transpose();
    model.feature_std.resize(features.cols());
    for (Eigen::Index d = 0; d < features.cols(); ++d)
    {
        const double s = population_std(features.col(d));
        model.feature_std[d] = s > 0.0 ? s : 1.0;
    }
    const Eigen::MatrixXd z = (features.rowwise() - model.feature_mean.transpose()).array().rowwise() /
                              model.feature_std.transpose().array();
    model.meta.samples = std::size_t(n);

    // Seeded subsample and fold assignment for the search.
    std::vector<Eigen::Index> sub = shuffled(n, budget.seed);
    if (sub.size() > budget.max_search_samples)
        sub.resize(std::max<std::size_t>(budget.max_search_samples, 2));
    const int folds = std::min<int>(budget.folds, int(sub.size()));
    std::vector<int> fold(sub.size());
    for (std::size_t i = 0; i < sub.size(); ++i)
        fold[i] = int(i % std::size_t(folds));
    const Eigen::MatrixXd zs = z(sub, Eigen::all);
    const Eigen::VectorXd xs = positions(sub, 0), ys = positions(sub, 1);
    const Eigen::MatrixXd d2 = squared_distances(zs, zs);
    const double sx = population_std(xs), sy = population_std(ys);
    const double feat_scale = std::sqrt(double(features.cols()));

    std::vector<Trial> trials(std::size_t(budget.trials));
    std::mt19937_64 rng(budget.seed ^ 0x5eedf00dULL);
    for (auto &t : trials)
    {
        t.C = log_uniform(rng, budget.c_min, budget.c_max);
        t.scale = log_uniform(rng, budget.scale_min, budget.scale_max) * feat_scale;
        t.eps_rel = log_uniform(rng, budget.epsilon_min, budget.epsilon_max);
    }
    parallel_for(trials.size(), [&](std::size_t i) {
        Trial &t = trials[i];
        const Eigen::MatrixXd kernel = (-d2 / (t.scale * t.scale)).array().exp().matrix();
        SvrParams p{t.C, 0.0, t.scale, budget.tolerance, 0};
        try
        {
            p.epsilon = t.eps_rel * sx;
            t.cv_x = cross_validate(kernel, xs, fold, folds, p);
            p.epsilon = t.eps_rel * sy;
            t.cv_y = cross_validate(kernel, ys, fold, folds, p);
        }
        catch (const SolverDidNotConverge &)
        {
            // left at +inf: this trial cannot win
        }
    });

    auto best = [&](auto member) {
        std::size_t b = 0;
        for (std::size_t i = 1; i < trials.size(); ++i)
            if (trials[i].*member < trials[b].*member)
                b = i;
        return b;
    };
    const Trial &bx = trials[best(&Trial::cv_x)];
    const Trial &by = trials[best(&Trial::cv_y)];
    if (!std::isfinite(bx.cv_x) || !std::isfinite(by.cv_y))
        throw SolverDidNotConverge("no hyper-parameter trial converged");

    model.params_x = SvrParams{bx.C, bx.eps_rel * population_std(positions.col(0)), bx.scale, budget.tolerance, 0};
    model.params_y = SvrParams{by.C, by.eps_rel * population_std(positions.col(1)), by.scale, budget.tolerance, 0};
    model.meta.cv_mae_x = bx.cv_x;
    model.meta.cv_mae_y = by.cv_y;
    for (int c = 0; c < 2; ++c)
    {
        const Eigen::VectorXd target = positions.col(c);
        if ((target.array() == target[0]).all())
            fmt::print(stderr, "warning: {} targets are all identical; using a constant predictor\n", c ? "y" : "x");
    }
    model.x = train_regressor(z, positions.col(0), model.params_x);
    model.y = train_regressor(z, positions.col(1), model.params_y);
    model.meta.train_mae_x = (model.x.predict(z) - positions.col(0)).cwiseAbs().mean();
    model.meta.train_mae_y = (model.y.predict(z) - positions.col(1)).cwiseAbs().mean();
    return model;
}

Eigen::MatrixXd predict(const FingerprintModel &model, const Eigen::MatrixXd &features)
{
    if (std::size_t(features.cols()) != model.layout.dimension() ||
        model.feature_mean.size() != features.cols())
        throw InvalidInput(fmt::format("feature layout mismatch: model expects {} values, got {}",
                                       model.layout.dimension(), features.cols()));
    const Eigen::MatrixXd z = (features.rowwise() - model.feature_mean.transpose()).array().rowwise() /
                              model.feature_std.transpose().array();
    Eigen::MatrixXd out(features.rows(), 2);
    out.col(0) = model.x.predict(z);
    out.col(1) = model.y.predict(z);
    return out;
}

Eigen::Vector2d predict(const FingerprintModel &model, const Eigen::VectorXd &features)
{
    return predict(model, Eigen::MatrixXd(features.transpose())).row(0).transpose();
}

ErrorReport error_report(const std::vector<double> &errors)
{
    ErrorReport r;
    r.errors = errors;
    if (errors.empty())
        return r;
    std::vector<double> sorted = errors;
    std::sort(sorted.begin(), sorted.end());
    const double n = double(sorted.size());
    r.mae = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
    auto pct = [&](double q) {
        const double pos = q * (n - 1.0);
        const auto lo = std::size_t(std::floor(pos));
        const auto hi = std::min(lo + 1, sorted.size() - 1);
        return sorted[lo] + (pos - double(lo)) * (sorted[hi] - sorted[lo]);
    };
    r.median = pct(0.5);
    r.p90 = pct(0.9);
    r.p95 = pct(0.95);
    for (std::size_t i = 0; i < sorted.size(); ++i)
        r.cdf.emplace_back(sorted[i], double(i + 1) / n);
    return r;
}

ErrorReport evaluate(const Eigen::MatrixXd &predicted, const Eigen::MatrixXd &truth)
{
    if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols())
        throw InvalidInput("prediction and truth shapes differ");
    std::vector<double> e(std::size_t(truth.rows()));
    for (Eigen::Index i = 0; i < truth.rows(); ++i)
        e[std::size_t(i)] = (predicted.row(i) - truth.row(i)).norm();
    return error_report(e);
}

ErrorReport evaluate(const FingerprintModel &model, const Eigen::MatrixXd &features, const Eigen::MatrixXd &truth)
{
    if (features.rows() == 0)
        throw InvalidInput("empty test set");
    return evaluate(predict(model, features), truth);
}

namespace
{

nlohmann::json params_json(const SvrParams &p)
{
    return {{"C", p.C}, {"epsilon", p.epsilon}, {"kernel_scale", p.kernel_scale}, {"tolerance", p.tolerance}};
}

SvrParams params_from(const nlohmann::json &j)
{
    return SvrParams{j.at("C").get<double>(), j.at("epsilon").get<double>(), j.at("kernel_scale").get<double>(),
                     j.at("tolerance").get<double>(), 0};
}

std::vector<double> to_vec(const Eigen::VectorXd &v)
{
    return {v.data(), v.data() + v.size()};
}

} // namespace

void save_model(const FingerprintModel &model, std::ostream &out)
{
    nlohmann::json h;
    h["format"] = kModelFormat;
    h["version"] = kModelVersion;
    h["scheme"] = model.layout.scheme.to_string();
    h["subarrays"] = model.layout.subarrays;
    h["angles_per_subarray"] = model.layout.angles_per_subarray;
    h["feature_names"] = model.layout.names();
    h["feature_mean"] = to_vec(model.feature_mean);
    h["feature_std"] = to_vec(model.feature_std);
    h["metadata"] = {{"grid", model.meta.grid},
                     {"topology", model.meta.topology},
                     {"samples", model.meta.samples},
                     {"train_mae_x", model.meta.train_mae_x},
                     {"train_mae_y", model.meta.train_mae_y},
                     {"cv_mae_x", model.meta.cv_mae_x},
                     {"cv_mae_y", model.meta.cv_mae_y}};
    nlohmann::json regs = nlohmann::json::array();
    for (const auto *r : {&model.x, &model.y})
    {
        const auto &p = r == &model.x ? model.params_x : model.params_y;
        regs.push_back({{"target", r == &model.x ? "x" : "y"},
                        {"bias", r->bias},
                        {"kernel_scale", r->kernel_scale},
                        {"support_vectors", r->support_vectors.rows()},
                        {"hyperparameters", params_json(p)}});
    }
    h["regressors"] = regs;
    h["binary_layout"] = "per regressor: support vectors row-major then coefficients, float64 little-endian";
    out << h.dump() << '\n';
    for (const auto *r : {&model.x, &model.y})
    {
        for (Eigen::Index i = 0; i < r->support_vectors.rows(); ++i)
            for (Eigen::Index d = 0; d < r->support_vectors.cols(); ++d)
                detail::put_f64le(out, r->support_vectors(i, d));
        for (Eigen::Index i = 0; i < r->coefficients.size(); ++i)
            detail::put_f64le(out, r->coefficients[i]);
    }
    if (!out)
        throw std::runtime_error("failed to write fingerprint model");
}

void save_model(const FingerprintModel &model, const std::filesystem::path &path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    save_model(model, out);
}

FingerprintModel load_model(std::istream &in)
{
    std::string line;
    if (!std::getline(in, line))
        throw InvalidInput("empty model file");
    FingerprintModel m;
    try
    {
        const auto h = nlohmann::json::parse(line);
        if (h.at("format").get<std::string>() != kModelFormat)
            throw InvalidInput("not a fingerprint model file");
        if (h.at("version").get<int>() != kModelVersion)
            throw InvalidInput("unsupported model version " + std::to_string(h.at("version").get<int>()));
        m.layout.scheme = MetricScheme::parse(h.at("scheme").get<std::string>());
        m.layout.subarrays = h.at("subarrays").get<std::size_t>();
        m.layout.angles_per_subarray = h.at("angles_per_subarray").get<int>();
        const auto mean = h.at("feature_mean").get<std::vector<double>>();
        const auto stdv = h.at("feature_std").get<std::vector<double>>();
        const auto dim = Eigen::Index(m.layout.dimension());
        if (Eigen::Index(mean.size()) != dim || Eigen::Index(stdv.size()) != dim)
            throw InvalidInput("normalization length does not match the layout");
        m.feature_mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), dim);
        m.feature_std = Eigen::Map<const Eigen::VectorXd>(stdv.data(), dim);
        const auto &md = h.at("metadata");
        m.meta.grid = md.value("grid", "");
        m.meta.topology = md.value("topology", "");
        m.meta.samples = md.value("samples", std::size_t(0));
        m.meta.train_mae_x = md.value("train_mae_x", 0.0);
        m.meta.train_mae_y = md.value("train_mae_y", 0.0);
        m.meta.cv_mae_x = md.value("cv_mae_x", 0.0);
        m.meta.cv_mae_y = md.value("cv_mae_y", 0.0);
        const auto &regs = h.at("regressors");
        if (regs.size() != 2)
            throw InvalidInput("model must hold two regressors");
        SvrRegressor *targets[2] = {&m.x, &m.y};
        SvrParams *params[2] = {&m.params_x, &m.params_y};
        for (int r = 0; r < 2; ++r)
        {
            targets[r]->bias = regs[r].at("bias").get<double>();
            targets[r]->kernel_scale = regs[r].at("kernel_scale").get<double>();
            const auto nsv = regs[r].at("support_vectors").get<Eigen::Index>();
            targets[r]->support_vectors.resize(nsv, dim);
            targets[r]->coefficients.resize(nsv);
            *params[r] = params_from(regs[r].at("hyperparameters"));
        }
    }
    catch (const nlohmann::json::exception &e)
    {
        throw InvalidInput(std::string("malformed model header: ") + e.what());
    }
    for (auto *r : {&m.x, &m.y})
    {
        for (Eigen::Index i = 0; i < r->support_vectors.rows(); ++i)
            for (Eigen::Index d = 0; d < r->support_vectors.cols(); ++d)
                r->support_vectors(i, d) = detail::get_f64le(in);
        for (Eigen::Index i = 0; i < r->coefficients.size(); ++i)
            r->coefficients[i] = detail::get_f64le(in);
    }
    if (!in)
        throw InvalidInput("truncated model file");
    return m;
}

FingerprintModel load_model(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InvalidInput("cannot open " + path.string());
    return load_model(in);
}

} // namespace mimoloc
