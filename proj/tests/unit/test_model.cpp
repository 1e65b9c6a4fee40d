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

#include <random>

#include "fairgen/error.hpp"
#include "fairgen/model.hpp"
#include "test_support.hpp"

using namespace fairgen;

TEST_SUITE("model") {

TEST_CASE("shapes of a forward pass") {
    ClassifierModel m(12, {8, 4}, 3, 1);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(12, 5);
    auto f = m.forward(x);
    CHECK(f.activations.size() == 3);
    CHECK(f.features().rows() == 4);
    CHECK(f.logits.rows() == 3);
    CHECK(f.logits.cols() == 5);
    CHECK(m.feature_dim() == 4);
    CHECK(m.predict(x).size() == 5);
    CHECK((f.features().array() >= 0.0).all());
    CHECK_THROWS_AS(m.forward(Eigen::MatrixXd::Zero(11, 2)), Error);
}

TEST_CASE("serialization round trip") {
    ClassifierModel m(6, {5}, 2, 9);
    auto copy = ClassifierModel::deserialize(m.serialize());
    CHECK(copy == m);
    CHECK(copy.encoder_hash() == m.encoder_hash());
    CHECK(copy.head_hash() == m.head_hash());
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(6, 3);
    CHECK(copy.logits(x) == m.logits(x));

    fairgen::testing::TempDir dir;
    m.save(dir / "m.bin");
    CHECK(ClassifierModel::load(dir / "m.bin") == m);

    auto blob = m.serialize();
    CHECK_THROWS_AS(ClassifierModel::deserialize(blob.substr(0, blob.size() - 3)), Error);
    CHECK_THROWS_AS(ClassifierModel::deserialize(blob + "x"), Error);
    CHECK_THROWS_AS(ClassifierModel::deserialize("nonsense"), Error);
}

TEST_CASE("seeded initialization") {
    CHECK(ClassifierModel(6, {5}, 2, 9) == ClassifierModel(6, {5}, 2, 9));
    CHECK(!(ClassifierModel(6, {5}, 2, 9) == ClassifierModel(6, {5}, 2, 10)));
}

TEST_CASE("frozen encoder is untouched by sgd") {
    ClassifierModel m(6, {5, 4}, 2, 3);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(6, 8);
    auto fwd = m.forward(x);
    Eigen::MatrixXd dl = Eigen::MatrixXd::Ones(2, 8);
    Eigen::MatrixXd df = Eigen::MatrixXd::Ones(4, 8);
    auto grads = m.backward(fwd, dl, &df, true);
    const auto enc = m.encoder_hash(), head = m.head_hash();
    m.freeze_encoder(true);
    m.sgd_step(grads, 0.1, 0.01);
    CHECK(m.encoder_hash() == enc);
    CHECK(m.head_hash() != head);
    m.freeze_encoder(false);
    m.sgd_step(grads, 0.1, 0.01);
    CHECK(m.encoder_hash() != enc);
}

TEST_CASE("backward matches finite differences on a scalar objective") {
    ClassifierModel m(5, {4}, 3, 4);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 6);
    Eigen::MatrixXd wl = Eigen::MatrixXd::Random(3, 6);
    Eigen::MatrixXd wf = Eigen::MatrixXd::Random(4, 6);
    auto objective = [&](const ClassifierModel& mm) {
        auto f = mm.forward(x);
        return (f.logits.array() * wl.array()).sum() + (f.features().array() * wf.array()).sum();
    };
    auto grads = m.backward(m.forward(x), wl, &wf, true);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < m.encoder()[0].weight.size(); ++i) {
        ClassifierModel p = m, q = m;
        p.encoder()[0].weight(i) += h;
        q.encoder()[0].weight(i) -= h;
        CHECK(grads.encoder[0].weight(i) == doctest::Approx((objective(p) - objective(q)) / (2 * h)).epsilon(1e-5));
    }
    for (Eigen::Index i = 0; i < m.head().weight.size(); ++i) {
        ClassifierModel p = m, q = m;
        p.head().weight(i) += h;
        q.head().weight(i) -= h;
        CHECK(grads.head.weight(i) == doctest::Approx((objective(p) - objective(q)) / (2 * h)).epsilon(1e-5));
    }
}

TEST_CASE("softmax is stable and normalized") {
    Eigen::MatrixXd l(3, 2);
    l << 1000, -1000, 1001, 0, 999, 1;
    auto s = softmax(l);
    CHECK(s.allFinite());
    for (Eigen::Index j = 0; j < 2; ++j) CHECK(std::abs(s.col(j).sum() - 1.0) < 1e-12);
    CHECK(s(1, 0) > s(0, 0));
}

}  // TEST_SUITE
