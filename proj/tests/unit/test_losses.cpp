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

#include <doctest.h>

#include <cmath>
#include <random>

#include "fairgen/losses.hpp"
#include "fairgen/model.hpp"

using namespace fairgen;

namespace {

// Direct transcription of the loss: loops over anchors, positives, negatives.
double supcon_oracle(const Eigen::MatrixXd& f, const std::vector<int>& y, double tau, bool standard = false) {
    const auto n = f.cols();
    std::vector<Eigen::VectorXd> z;
    for (Eigen::Index j = 0; j < n; ++j) z.push_back(f.col(j).normalized());
    double total = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
        std::vector<Eigen::Index> P, N;
        for (Eigen::Index k = 0; k < n; ++k) {
            if (k == j) continue;
            (y[k] == y[j] ? P : N).push_back(k);
        }
        if (P.empty() || N.empty()) continue;
        double term = 0;
        for (auto p : P) {
            double den = 0;
            for (auto m : N) den += std::exp(z[j].dot(z[m]) / tau);
            if (standard) {
                for (auto q : P) den += std::exp(z[j].dot(z[q]) / tau);
            }
            term += std::log(std::exp(z[j].dot(z[p]) / tau) / den);
        }
        total += -term / double(P.size());
    }
    return total;
}

double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const double scale = std::max(a.norm() + b.norm(), 1e-12);
    return (a - b).norm() / scale;
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("cross-entropy examples") {
    Eigen::MatrixXd p(2, 1);
    p << 0.5, 0.5;
    std::vector<int> l0{0}, l1{1};
    CHECK(std::abs(ce_loss(p, l0) - std::log(2.0)) < 1e-12);
    CHECK(std::abs(ce_loss(p, l1) - std::log(2.0)) < 1e-12);
    Eigen::MatrixXd one(2, 1);
    one << 1.0, 0.0;
    CHECK(ce_loss(one, l0) == 0.0);
    Eigen::MatrixXd two(2, 2);
    two << 0.9, 0.2, 0.1, 0.8;
    std::vector<int> lab{0, 1};
    CHECK(ce_loss(two, lab) == doctest::Approx(0.164252).epsilon(1e-6));
    CHECK(std::abs(ce_loss(two, lab) - (-std::log(0.9) - std::log(0.8)) / 2.0) < 1e-15);
}

TEST_CASE("cross-entropy clamps zero probability") {
    Eigen::MatrixXd p(2, 1);
    p << 1.0, 0.0;
    std::vector<int> l{1};
    CHECK(ce_loss(p, l) == doctest::Approx(-std::log(kProbabilityFloor)));
}

TEST_CASE("softmax columns sum to one") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0, 30);
    Eigen::MatrixXd logits = Eigen::MatrixXd::NullaryExpr(5, 20, [&] { return n(rng); });
    auto s = softmax(logits);
    for (Eigen::Index j = 0; j < s.cols(); ++j) CHECK(std::abs(s.col(j).sum() - 1.0) < 1e-9);
}

TEST_CASE("supcon hand examples") {
    Eigen::MatrixXd same = Eigen::MatrixXd::Ones(3, 4);
    std::vector<int> y{0, 0, 1, 1};
    CHECK(std::abs(supcon_loss(same, y, 1.0).value - 4.0 * std::log(2.0)) < 1e-12);

    Eigen::MatrixXd oned(1, 3);
    oned << 1, 1, -1;
    std::vector<int> y2{0, 0, 1};
    auto r = supcon_loss(oned, y2, 1.0);
    CHECK(std::abs(r.value - (-4.0)) < 1e-12);
    CHECK(r.anchors_used == 2);

    std::vector<int> single{0, 0, 0};
    CHECK(supcon_loss(oned, single, 1.0).value == 0.0);
    CHECK(supcon_loss(oned, single, 1.0).anchors_used == 0);
}

TEST_CASE("supcon equals the triple-loop oracle") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0, 1);
    std::uniform_int_distribution<int> bs(2, 16), dim(1, 8), cls(2, 4);
    std::uniform_real_distribution<double> tau(0.1, 2.0);
    for (int t = 0; t < 100; ++t) {
        const int b = bs(rng), d = dim(rng), c = cls(rng);
        Eigen::MatrixXd f = Eigen::MatrixXd::NullaryExpr(d, b, [&] { return n(rng); });
        std::vector<int> y(b);
        for (auto& v : y) v = int(rng() % unsigned(c));
        const double t0 = tau(rng);
        CHECK(std::abs(supcon_loss(f, y, t0).value - supcon_oracle(f, y, t0)) < 1e-9);
        CHECK(std::abs(supcon_loss(f, y, t0, SupConForm::standard).value - supcon_oracle(f, y, t0, true)) < 1e-9);
    }
}

TEST_CASE("combined loss gradients match finite differences") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0, 1);
    const double h = 1e-5;
    for (int t = 0; t < 30; ++t) {
        const int b = 6 + t % 7, d = 3 + t % 4, c = 2 + t % 3;
        Eigen::MatrixXd logits = Eigen::MatrixXd::NullaryExpr(c, b, [&] { return n(rng); });
        Eigen::MatrixXd feats = Eigen::MatrixXd::NullaryExpr(d, b, [&] { return n(rng); });
        std::vector<int> y(b);
        for (int j = 0; j < b; ++j) y[j] = j % c;
        const double beta = (t % 5) / 4.0;
        for (auto form : {SupConForm::negatives_only, SupConForm::standard}) {
            auto g = combined_loss(logits, feats, y, beta, 0.7, form);
            Eigen::MatrixXd nl(c, b), nf(d, b);
            for (Eigen::Index i = 0; i < logits.size(); ++i) {
                Eigen::MatrixXd p = logits, m = logits;
                p(i) += h;
                m(i) -= h;
                nl(i) = (combined_loss(p, feats, y, beta, 0.7, form).value -
                         combined_loss(m, feats, y, beta, 0.7, form).value) /
                        (2 * h);
            }
            for (Eigen::Index i = 0; i < feats.size(); ++i) {
                Eigen::MatrixXd p = feats, m = feats;
                p(i) += h;
                m(i) -= h;
                nf(i) = (combined_loss(logits, p, y, beta, 0.7, form).value -
                         combined_loss(logits, m, y, beta, 0.7, form).value) /
                        (2 * h);
            }
            CHECK(rel_err(g.dlogits, nl) < 1e-4);
            if (beta < 1.0) CHECK(rel_err(g.dfeatures, nf) < 1e-4);
        }
    }
}

TEST_CASE("combined loss endpoints and affinity in beta") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0, 1);
    Eigen::MatrixXd logits = Eigen::MatrixXd::NullaryExpr(2, 8, [&] { return n(rng); });
    Eigen::MatrixXd feats = Eigen::MatrixXd::NullaryExpr(4, 8, [&] { return n(rng); });
    std::vector<int> y{0, 1, 0, 1, 1, 0, 0, 1};
    const double ce = ce_loss(softmax(logits), y);
    const double sc = supcon_loss(feats, y, 1.0).value;
    CHECK(std::abs(combined_loss(logits, feats, y, 1.0, 1.0).value - ce) < 1e-12);
    CHECK(std::abs(combined_loss(logits, feats, y, 0.0, 1.0).value - sc) < 1e-12);
    for (double beta : {0.1, 0.5, 0.9}) {
        auto r = combined_loss(logits, feats, y, beta, 1.0);
        CHECK(std::abs(r.value - (beta * ce + (1 - beta) * sc)) < 1e-12);
    }
    CHECK_THROWS(combined_loss(logits, feats, y, 1.5, 1.0));
}

TEST_CASE("gdro closed forms") {
    const GroupKey a{"y", "a"}, b{"y", "b"};
    auto r = gdro_loss({{a, 1.0}, {b, 0.0}}, {{a, 0.5}, {b, 0.5}}, 1.0);
    const double e = std::exp(1.0);
    CHECK(std::abs(r.weights[a] - e / (e + 1)) < 1e-12);
    CHECK(std::abs(r.weights[b] - 1 / (e + 1)) < 1e-12);

    auto same = gdro_loss({{a, 0.4}, {b, 0.4}}, {{a, 0.3}, {b, 0.7}}, 2.0);
    CHECK(std::abs(same.weights[a] - 0.3) < 1e-12);
    CHECK(std::abs(same.loss - 0.4) < 1e-12);

    auto frozen = gdro_loss({{a, 1.0}, {b, 3.0}}, {{a, 0.25}, {b, 0.75}}, 0.0);
    CHECK(std::abs(frozen.weights[a] - 0.25) < 1e-12);
    CHECK(std::abs(frozen.loss - (0.25 + 2.25)) < 1e-12);
}

TEST_CASE("gdro weights stay a distribution") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 5);
    std::map<GroupKey, double> q{{{"a", "x"}, 0.25}, {{"a", "y"}, 0.25}, {{"b", "x"}, 0.25}, {{"b", "y"}, 0.25}};
    for (int t = 0; t < 1000; ++t) {
        std::map<GroupKey, double> losses;
        for (const auto& [g, w] : q) losses[g] = u(rng);
        q = gdro_loss(losses, q, 0.05).weights;
        double sum = 0;
        for (const auto& [g, w] : q) {
            CHECK(w >= 0.0);
            sum += w;
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
}

}  // TEST_SUITE
