// Copyright 2026 The fairgen Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// End-to-end acceptance checks. One PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <spdlog/spdlog.h>

#include "fairgen/clip_filter.hpp"
#include "fairgen/embedder.hpp"
#include "fairgen/error.hpp"
#include "fairgen/eval_metrics.hpp"
#include "fairgen/experiment.hpp"
#include "fairgen/group_cluster.hpp"
#include "fairgen/group_data.hpp"
#include "fairgen/losses.hpp"
#include "fairgen/prompts.hpp"
#include "fairgen/training.hpp"

using namespace fairgen;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
};

std::string fmt(double v, int prec = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

// --- 1
Outcome cluster_rule() {
    Outcome o;
    o.require(cluster_count_rule(56) == 3, "k(56)=" + std::to_string(cluster_count_rule(56)));
    o.require(cluster_count_rule(1387) == 20, "k(1387)=" + std::to_string(cluster_count_rule(1387)));
    o.require(cluster_count_rule(103) == 5, "k(103)=" + std::to_string(cluster_count_rule(103)));
    if (o.pass) o.detail = "k(56)=3 k(1387)=20 k(103)=5";
    return o;
}

// --- 2
Outcome utk_split() {
    Outcome o;
    std::vector<DatasetItem> items;
    auto add = [&](const char* y, const char* a, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            DatasetItem it;
            it.id = std::string(y) + "-" + a + "-" + std::to_string(i);
            it.image_ref = it.id + ".jpg";
            it.class_label = y;
            it.bias_label = a;
            items.push_back(std::move(it));
        }
    };
    add("male", "adult", 400);
    add("male", "child", 2000);
    add("female", "adult", 8000);
    add("female", "child", 1500);
    const std::vector<std::string> classes{"male", "female"}, biases{"adult", "child"};
    GroupedDataset pool(std::move(items), classes, biases,
                        alignment_from_aligned_bias(classes, biases, {{"male", "child"}, {"female", "adult"}}));
    SplitSpec spec;
    spec.target_counts = {{{"male", "adult"}, 103}, {{"male", "child"}, 934}, {{"female", "adult"}, 5730},
                          {{"female", "child"}, 636}};
    spec.seed = 1;
    auto split = construct_biased_split(pool, spec);
    for (const auto& [g, n] : spec.target_counts) {
        o.require(split.group_size(g) == n, g.to_string() + "=" + std::to_string(split.group_size(g)));
    }
    auto ratio = compute_bias_ratio(split);
    for (const auto& [y, r] : ratio) o.require(std::abs(r - 0.90) <= 0.001, "ratio " + y + "=" + fmt(r));
    if (o.pass) o.detail = "103/934/5730/636, ratios male=" + fmt(ratio["male"]) + " female=" + fmt(ratio["female"]);
    return o;
}

// --- 3
Outcome prompt_catalog() {
    Outcome o;
    std::ifstream in(std::filesystem::path(FAIRGEN_GOLDEN_DIR) / "prompt_catalog.txt", std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    const auto golden = ss.str();
    const auto rendered = render_catalog();
    o.require(!golden.empty(), "golden file missing");
    o.require(rendered == golden, "catalog differs from golden file");
    if (o.pass) {
        o.detail = std::to_string(std::count(golden.begin(), golden.end(), '\n')) + " lines byte-identical";
    }
    return o;
}

// --- 4
double supcon_oracle(const Eigen::MatrixXd& f, const std::vector<int>& y, double tau) {
    const auto n = f.cols();
    std::vector<Eigen::VectorXd> z;
    for (Eigen::Index j = 0; j < n; ++j) z.push_back(f.col(j).normalized());
    double total = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
        std::vector<Eigen::Index> P, N;
        for (Eigen::Index k = 0; k < n; ++k) {
            if (k != j) (y[k] == y[j] ? P : N).push_back(k);
        }
        if (P.empty() || N.empty()) continue;
        double term = 0;
        for (auto p : P) {
            double den = 0;
            for (auto m : N) den += std::exp(z[j].dot(z[m]) / tau);
            term += std::log(std::exp(z[j].dot(z[p]) / tau) / den);
        }
        total -= term / double(P.size());
    }
    return total;
}

Outcome losses() {
    Outcome o;
    Eigen::MatrixXd p(2, 1);
    p << 0.5, 0.5;
    std::vector<int> l{0};
    o.require(std::abs(ce_loss(p, l) - std::log(2.0)) <= 1e-9, "ce uniform");

    std::mt19937_64 rng(42);
    std::normal_distribution<double> nd(0, 1);
    double worst_sc = 0;
    for (int t = 0; t < 100; ++t) {
        const int b = 2 + int(rng() % 15), d = 1 + int(rng() % 8), c = 2 + int(rng() % 3);
        Eigen::MatrixXd f = Eigen::MatrixXd::NullaryExpr(d, b, [&] { return nd(rng); });
        std::vector<int> y(b);
        for (auto& v : y) v = int(rng() % unsigned(c));
        worst_sc = std::max(worst_sc, std::abs(supcon_loss(f, y, 0.5).value - supcon_oracle(f, y, 0.5)));
    }
    o.require(worst_sc <= 1e-9, "supcon max diff " + std::to_string(worst_sc));

    double worst_grad = 0;
    const double h = 1e-5;
    for (int t = 0; t < 20; ++t) {
        const int b = 8, d = 4, c = 2;
        Eigen::MatrixXd logits = Eigen::MatrixXd::NullaryExpr(c, b, [&] { return nd(rng); });
        Eigen::MatrixXd feats = Eigen::MatrixXd::NullaryExpr(d, b, [&] { return nd(rng); });
        std::vector<int> y(b);
        for (int j = 0; j < b; ++j) y[j] = j % c;
        auto g = combined_loss(logits, feats, y, 0.5, 1.0);
        Eigen::MatrixXd nl(c, b), nf(d, b);
        for (Eigen::Index i = 0; i < logits.size(); ++i) {
            Eigen::MatrixXd a = logits, m = logits;
            a(i) += h;
            m(i) -= h;
            nl(i) = (combined_loss(a, feats, y, 0.5, 1.0).value - combined_loss(m, feats, y, 0.5, 1.0).value) / (2 * h);
        }
        for (Eigen::Index i = 0; i < feats.size(); ++i) {
            Eigen::MatrixXd a = feats, m = feats;
            a(i) += h;
            m(i) -= h;
            nf(i) = (combined_loss(logits, a, y, 0.5, 1.0).value - combined_loss(logits, m, y, 0.5, 1.0).value) / (2 * h);
        }
        worst_grad = std::max(worst_grad, (g.dlogits - nl).norm() / (g.dlogits.norm() + nl.norm()));
        worst_grad = std::max(worst_grad, (g.dfeatures - nf).norm() / (g.dfeatures.norm() + nf.norm()));
    }
    o.require(worst_grad < 1e-4, "gradient rel err " + std::to_string(worst_grad));
    if (o.pass) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "supcon max diff %.1e, gradient rel err %.1e", worst_sc, worst_grad);
        o.detail = buf;
    }
    return o;
}

// --- 5
Outcome filter() {
    Outcome o;
    std::mt19937_64 rng(5);
    int mismatches = 0;
    for (int t = 0; t < 1000; ++t) {
        const int n = 1 + int(rng() % 80);
        std::vector<ScoredCandidate> v;
        for (int i = 0; i < n; ++i) {
            ScoredCandidate c;
            c.item.id = "c" + std::to_string(i);
            c.item.class_label = "square";
            c.item.bias_label = "warm";
            c.clip_score = double(rng() % 20) / 20.0;
            v.push_back(c);
        }
        FilterConfig cfg;
        cfg.keep_fraction = 0.05 + 0.95 * double(rng() % 1000) / 999.0;
        auto sorted = v;
        std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
            return a.clip_score != b.clip_score ? a.clip_score > b.clip_score : a.item.id < b.item.id;
        });
        const std::size_t keep = retained_count(v.size(), cfg.keep_fraction);
        std::vector<std::string> want, got;
        for (std::size_t i = 0; i < keep; ++i) want.push_back(sorted[i].item.id);
        for (const auto& c : select_top_group(v, cfg)) got.push_back(c.item.id);
        std::sort(want.begin(), want.end());
        std::sort(got.begin(), got.end());
        mismatches += want != got;
    }
    o.require(mismatches == 0, std::to_string(mismatches) + " oracle mismatches");

    int violations = 0;
    std::uniform_real_distribution<double> u(-1, 1), a01(0, 1);
    for (int t = 0; t < 10000; ++t) {
        FilterConfig cfg;
        cfg.alpha = a01(rng);
        const double l = u(rng), c = u(rng), d = std::abs(u(rng));
        const double base = combined_score(l, c, cfg);
        violations += combined_score(l + d, c, cfg) < base;
        violations += combined_score(l, c + d, cfg) < base;
    }
    o.require(violations == 0, std::to_string(violations) + " monotonicity violations");
    if (o.pass) o.detail = "1000 sets match oracle, 10000 triples monotone";
    return o;
}

// --- 6
Outcome gdro() {
    Outcome o;
    const GroupKey a{"y", "a"}, b{"y", "b"};
    auto r = gdro_loss({{a, 1.0}, {b, 0.0}}, {{a, 0.5}, {b, 0.5}}, 1.0);
    const double e = std::exp(1.0);
    const double da = std::abs(r.weights[a] - e / (e + 1)), db = std::abs(r.weights[b] - 1 / (e + 1));
    o.require(da <= 1e-12 && db <= 1e-12, "weights " + fmt(r.weights[a], 15) + ", " + fmt(r.weights[b], 15));
    if (o.pass) o.detail = "q=(" + fmt(r.weights[a], 12) + ", " + fmt(r.weights[b], 12) + ")";
    return o;
}

// --- 7
Outcome frechet() {
    Outcome o;
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd(0, 1);
    std::vector<Embedding> set;
    for (int i = 0; i < 200; ++i) set.push_back(Eigen::VectorXd::NullaryExpr(6, [&] { return nd(rng); }));
    const double same = frechet_distance(set, set);
    o.require(std::abs(same) <= 1e-6, "identical sets " + std::to_string(same));

    Eigen::VectorXd m0(1), m1(1);
    m0 << 0;
    m1 << 1;
    const double shift = frechet_distance(GaussianStats{m0, Eigen::MatrixXd::Identity(1, 1)},
                                          GaussianStats{m1, Eigen::MatrixXd::Identity(1, 1)});
    o.require(std::abs(shift - 1.0) <= 1e-6, "1-D shift " + std::to_string(shift));

    const Eigen::VectorXd z = Eigen::VectorXd::Zero(2);
    const double diag = frechet_distance(GaussianStats{z, Eigen::Vector2d(1, 4).asDiagonal()},
                                         GaussianStats{z, Eigen::Vector2d(9, 1).asDiagonal()});
    o.require(std::abs(diag - 5.0) <= 1e-6, "diagonal " + std::to_string(diag));
    if (o.pass) o.detail = "0, 1, 5 within 1e-6";
    return o;
}

// --- 8
Outcome freeze() {
    Outcome o;
    ShapeWorldConfig world;
    world.n_train = 300;
    world.n_val = 20;
    world.n_test = 40;
    world.bias_ratio = 0.9;
    auto train = generate_shapeworld(world).filter_split(Split::train);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.learning_rate = 0.01;
    auto pre = stage1_pretrain(make_model(train, {}, 1), train, cfg).model;
    const auto h = pre.encoder_hash();
    o.require(stage2_finetune(pre, train, FinetuneVariant::llr_all, cfg).model.encoder_hash() == h, "LLR_all moved encoder");
    o.require(stage2_finetune(pre, train, FinetuneVariant::llr_b, cfg).model.encoder_hash() == h, "LLR_b moved encoder");
    o.require(stage2_finetune(pre, train, FinetuneVariant::ft_b, cfg).model.encoder_hash() != h, "FT_b kept encoder");
    if (o.pass) o.detail = "LLR_all/LLR_b unchanged, FT_b changed";
    return o;
}

// --- 9, 10, 11
struct SeedRuns {
    std::vector<double> values;
    double mean() const {
        double s = 0;
        for (double v : values) s += v;
        return values.empty() ? 0.0 : s / double(values.size());
    }
};

constexpr std::uint64_t kSeeds = 5;

RunResult run_row(const std::string& preset, const ExperimentConfig& base, std::uint64_t seed) {
    return run_in_memory(preset_rows(preset, base)[0].config, seed);
}

struct TrendRuns {
    SeedRuns erm, fitted, prior;
    std::vector<RunResult> fitted_runs, prior_runs;
};

TrendRuns trend_runs() {
    TrendRuns t;
    const auto base = default_config();
    for (std::uint64_t s = 0; s < kSeeds; ++s) {
        t.erm.values.push_back(run_row("erm", base, s).metrics.wga);
        t.fitted_runs.push_back(run_row("clustered", base, s));
        t.fitted.values.push_back(t.fitted_runs.back().metrics.wga);
        t.prior_runs.push_back(run_row("vanilla", base, s));
        t.prior.values.push_back(t.prior_runs.back().metrics.wga);
    }
    return t;
}

Outcome debias_trend(const TrendRuns& t) {
    Outcome o;
    const double erm = 100 * t.erm.mean(), fit = 100 * t.fitted.mean(), prior = 100 * t.prior.mean();
    o.require(fit >= erm + 10.0, "fitted WGA not 10 points above ERM");
    o.require(fit >= prior, "fitted WGA below global-prior vanilla");
    o.detail += (o.detail.empty() ? "" : "; ") + std::string("WGA ERM=") + fmt(erm, 2) + " fitted=" + fmt(fit, 2) +
                " prior=" + fmt(prior, 2);
    return o;
}

Outcome severe_trend() {
    Outcome o;
    auto base = default_config();
    base.toy.bias_ratio = 0.999;
    SeedRuns erm, gdro_only, pipe;
    for (std::uint64_t s = 0; s < kSeeds; ++s) {
        erm.values.push_back(run_row("erm", base, s).metrics.wga);
        gdro_only.values.push_back(run_row("gdro", base, s).metrics.wga);
        auto c = preset_rows("clustered", base)[0].config;
        c.severe = true;
        c.filter.mode = FilterMode::severe;
        pipe.values.push_back(run_in_memory(c, s).metrics.wga);
    }
    const double e = 100 * erm.mean(), g = 100 * gdro_only.mean(), p = 100 * pipe.mean();
    o.require(p >= e + 15.0, "pipeline not 15 points above ERM");
    o.require(p >= g + 15.0, "pipeline not 15 points above GDRO");
    o.detail += (o.detail.empty() ? "" : "; ") + std::string("WGA ERM=") + fmt(e, 2) + " GDRO=" + fmt(g, 2) +
                " pipeline=" + fmt(p, 2);
    return o;
}

Outcome distribution_order(const TrendRuns& t) {
    Outcome o;
    int ok_seeds = 0;
    for (std::size_t s = 0; s < t.fitted_runs.size(); ++s) {
        const auto& f = t.fitted_runs[s].distribution;
        const auto& p = t.prior_runs[s].distribution;
        bool ok = f.size() == 4 && p.size() == 4;
        for (const auto& [g, d] : f) {
            auto it = p.find(g);
            ok = ok && it != p.end() && d < it->second;
        }
        ok_seeds += ok;
    }
    o.require(ok_seeds == int(t.fitted_runs.size()), std::to_string(ok_seeds) + "/5 seeds ordered");
    if (o.pass) {
        const auto& f = t.fitted_runs[0].distribution;
        const auto& p = t.prior_runs[0].distribution;
        o.detail = "5/5 seeds, all 4 groups; seed 0:";
        for (const auto& [g, d] : f) o.detail += " " + g.to_string() + " " + fmt(d, 3) + "<" + fmt(p.at(g), 3);
    }
    return o;
}

// --- 12
Outcome sampler_uniformity() {
    Outcome o;
    std::vector<DatasetItem> items;
    const std::vector<std::pair<GroupKey, int>> sizes{
        {{"square", "warm"}, 950}, {{"square", "cool"}, 3}, {{"cross", "cool"}, 900}, {{"cross", "warm"}, 47}};
    int n = 0;
    for (const auto& [g, count] : sizes) {
        for (int i = 0; i < count; ++i) {
            DatasetItem it;
            it.id = "s" + std::to_string(n++);
            it.image_ref = it.id + ".png";
            it.class_label = g.class_label;
            it.bias_label = g.bias_label;
            items.push_back(std::move(it));
        }
    }
    ShapeWorldConfig w;
    GroupedDataset ds(std::move(items), w.classes, w.biases,
                      alignment_from_aligned_bias(w.classes, w.biases, w.aligned_bias));
    // batch 6 over 4 groups leaves 2 randomly assigned slots per batch
    const std::size_t batch = 6, draws = 10000;
    auto batches = group_uniform_batches(ds, batch, draws / batch + 1, 12);
    std::map<GroupKey, double> counts;
    std::size_t total = 0;
    for (const auto& b : batches) {
        for (auto i : b) {
            if (total == draws) break;
            counts[ds[i].group()] += 1;
            ++total;
        }
    }
    const double expected = double(total) / 4.0;
    double chi2 = 0;
    for (const auto& [g, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
    const double pval = boost::math::cdf(boost::math::complement(boost::math::chi_squared(3), chi2));
    o.require(counts.size() == 4, "missing groups");
    o.require(pval > 0.01, "p=" + fmt(pval));
    if (o.pass) o.detail = "chi2=" + fmt(chi2, 3) + " p=" + fmt(pval);
    return o;
}

}  // namespace

int main() {
    spdlog::set_level(spdlog::level::err);
    int failures = 0;
    auto report = [&](int id, const std::function<Outcome()>& check) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("error: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failures += !o.pass;
        std::printf("criterion %d: %s (%s) [%.1fs]\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
        std::fflush(stdout);
    };
    report(1, cluster_rule);
    report(2, utk_split);
    report(3, prompt_catalog);
    report(4, losses);
    report(5, filter);
    report(6, gdro);
    report(7, frechet);
    report(8, freeze);
    TrendRuns trend;
    std::string trend_error;
    const auto start = std::chrono::steady_clock::now();
    try {
        trend = trend_runs();
    } catch (const std::exception& e) {
        trend_error = e.what();
    }
    const double trend_secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("(trend runs: %llu seeds x 3 methods in %.1fs)\n", static_cast<unsigned long long>(kSeeds), trend_secs);
    auto from_trend = [&](auto fn) {
        return [&, fn] {
            if (!trend_error.empty()) throw std::runtime_error(trend_error);
            return fn(trend);
        };
    };
    report(9, from_trend(debias_trend));
    report(10, severe_trend);
    report(11, from_trend(distribution_order));
    report(12, sampler_uniformity);
    std::printf("%d of 12 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
