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

#include "fairgen/embedder.hpp"
#include "fairgen/error.hpp"
#include "fairgen/shapeworld.hpp"
#include "test_support.hpp"

using namespace fairgen;

namespace {

Embedding vec(std::initializer_list<double> v) {
    Embedding e(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) e(i++) = x;
    return e;
}

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::config;
}

Image random_image(std::mt19937_64& rng) {
    Image img(16, 16, 3);
    std::uniform_real_distribution<double> u(0, 1);
    for (auto& p : img.pixels) p = u(rng);
    return img;
}

}  // namespace

TEST_SUITE("embedder") {

TEST_CASE("cosine similarity examples") {
    CHECK(cosine_similarity(vec({1, 2, 3}), vec({1, 2, 3})) == doctest::Approx(1.0));
    CHECK(cosine_similarity(vec({1, 0}), vec({0, 5})) == doctest::Approx(0.0));
    CHECK(cosine_similarity(vec({1, 2, 3}), vec({3, 2, 1})) == doctest::Approx(10.0 / 14.0).epsilon(1e-12));
    CHECK(kind_of([] { cosine_similarity(vec({0, 0}), vec({1, 1})); }) == ErrorKind::undefined_similarity);
    CHECK(kind_of([] { cosine_similarity(vec({1, 0}), vec({1, 1, 1})); }) == ErrorKind::dimension_mismatch);
}

TEST_CASE("cosine similarity ignores positive scaling") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0, 1);
    for (int t = 0; t < 200; ++t) {
        Embedding u(6), v(6);
        for (int i = 0; i < 6; ++i) {
            u(i) = n(rng);
            v(i) = n(rng);
        }
        const double s = std::exp(n(rng));
        const double c = cosine_similarity(u, v);
        CHECK(c >= -1.0);
        CHECK(c <= 1.0);
        CHECK(cosine_similarity(s * u, v) == doctest::Approx(c).epsilon(1e-12));
        CHECK(cosine_similarity(u, s * v) == doctest::Approx(c).epsilon(1e-12));
    }
}

TEST_CASE("group centroid") {
    std::vector<Embedding> one{vec({4, -1})};
    auto s = group_centroid(one, {"a", "b"});
    CHECK(s.count == 1);
    CHECK(s.centroid.isApprox(vec({4, -1})));

    std::vector<Embedding> two{vec({0, 0}), vec({2, 2})};
    CHECK(group_centroid(two, {"a", "b"}).centroid.isApprox(vec({1, 1})));

    std::vector<Embedding> none;
    CHECK(kind_of([&] { group_centroid(none, {"a", "b"}); }) == ErrorKind::empty_input);
}

TEST_CASE("centroid of gaussian samples is near the mean and order-free") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0, 1);
    const Embedding mu = vec({3, -2, 0.5, 10});
    std::vector<Embedding> pts;
    for (int i = 0; i < 1000; ++i) {
        Embedding e = mu;
        for (int k = 0; k < 4; ++k) e(k) += n(rng);
        pts.push_back(e);
    }
    auto c = group_centroid(pts, {"a", "b"}).centroid;
    for (int k = 0; k < 4; ++k) CHECK(std::abs(c(k) - mu(k)) < 0.1);
    std::shuffle(pts.begin(), pts.end(), rng);
    CHECK((group_centroid(pts, {"a", "b"}).centroid - c).norm() < 1e-12);
}

TEST_CASE("frechet closed forms") {
    GaussianStats a{vec({0}), Eigen::MatrixXd::Identity(1, 1)};
    GaussianStats b{vec({1}), Eigen::MatrixXd::Identity(1, 1)};
    CHECK(frechet_distance(a, b) == doctest::Approx(1.0).epsilon(1e-9));

    GaussianStats c{vec({0, 0}), Eigen::Vector2d(1, 4).asDiagonal()};
    GaussianStats d{vec({0, 0}), Eigen::Vector2d(9, 1).asDiagonal()};
    CHECK(std::abs(frechet_distance(c, d) - 5.0) < 1e-6);
    CHECK(std::abs(frechet_distance(c, c)) < 1e-6);
}

TEST_CASE("frechet on sample sets is symmetric and zero on identical sets") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0, 1);
    std::vector<Embedding> A, B;
    for (int i = 0; i < 60; ++i) {
        Embedding x(5), y(5);
        for (int k = 0; k < 5; ++k) {
            x(k) = n(rng);
            y(k) = 2.0 * n(rng) + 1.0;
        }
        A.push_back(x);
        B.push_back(y);
    }
    CHECK(std::abs(frechet_distance(A, A)) < 1e-6);
    const double ab = frechet_distance(A, B);
    CHECK(ab > 0.0);
    CHECK(ab == doctest::Approx(frechet_distance(B, A)).epsilon(1e-9));
    std::vector<Embedding> tiny{A[0]};
    CHECK(kind_of([&] { frechet_distance(tiny, B); }) == ErrorKind::empty_input);
}

TEST_CASE("frechet with rank-deficient covariances stays finite") {
    std::vector<Embedding> A, B;
    for (int i = 0; i < 4; ++i) {
        A.push_back(vec({double(i), 0, 0, 0, 0, 0}));
        B.push_back(vec({0, double(i), 0, 0, 0, 1}));
    }
    const double v = frechet_distance(A, B);
    CHECK(std::isfinite(v));
    CHECK(v >= 0.0);
}

TEST_CASE("toy backend is deterministic and unit norm") {
    auto backend = toy_backend(7, 32);
    std::mt19937_64 rng(4);
    for (int t = 0; t < 20; ++t) {
        auto img = random_image(rng);
        auto e1 = backend->embed_image(img);
        auto e2 = toy_backend(7, 32)->embed_image(img);
        CHECK(e1.size() == 32);
        CHECK((e1 - e2).norm() == 0.0);
        CHECK(std::abs(e1.norm() - 1.0) < 1e-9);
    }
    CHECK(std::abs(backend->embed_text("photo of a square").norm() - 1.0) < 1e-9);
    CHECK((backend->embed_text("photo of a square") - backend->embed_text("photo of a square")).norm() == 0.0);
    CHECK(kind_of([] { toy_backend(1, 1); }) == ErrorKind::config);
}

TEST_CASE("prompts sharing a class word are closer") {
    auto backend = toy_backend(7, 64);
    const std::vector<std::string> classes{"heron", "sparrow", "falcon", "gull", "wren"};
    const std::vector<std::string> fillers{"photo", "of", "a", "bright", "dim", "blue", "small", "tree", "lake", "sky"};
    std::mt19937_64 rng(5);
    auto context = [&] {
        std::string p;
        for (int i = 0; i < 3; ++i) p += fillers[rng() % fillers.size()] + " ";
        return p;
    };
    int wins = 0;
    for (int t = 0; t < 100; ++t) {
        const auto& c1 = classes[rng() % classes.size()];
        auto c2 = classes[rng() % classes.size()];
        while (c2 == c1) c2 = classes[rng() % classes.size()];
        const auto a = context(), b = context();
        const auto anchor = backend->embed_text(a + c1);
        const double same = cosine_similarity(anchor, backend->embed_text(b + c1));
        const double diff = cosine_similarity(anchor, backend->embed_text(b + c2));
        wins += same > diff;
    }
    CHECK(wins == 100);
}

TEST_CASE("registered concepts align images with their words") {
    auto world = fairgen::testing::small_world(1);
    auto backend = toy_backend(7, 128);
    register_shapeworld_concepts(*backend, world);
    auto ds = generate_shapeworld(world).filter_split(Split::test);
    int correct = 0;
    for (const auto& item : ds.items()) {
        auto e = backend->embed_image(item.image);
        const double sq = cosine_similarity(e, backend->embed_text("Photo of a square"));
        const double cr = cosine_similarity(e, backend->embed_text("Photo of a cross"));
        correct += (sq > cr) == (item.class_label == "square");
    }
    CHECK(double(correct) / double(ds.size()) > 0.9);
}

TEST_CASE("embeddings persist exactly") {
    fairgen::testing::TempDir tmp;
    std::map<std::string, Embedding> m{{"a", vec({0.1, 1.0 / 3.0, -2e-300})}, {"b", vec({1, 2, 3})}};
    save_embeddings(m, tmp / "e.json");
    auto back = load_embeddings(tmp / "e.json");
    REQUIRE(back.size() == 2);
    CHECK((back["a"] - m["a"]).norm() == 0.0);
    CHECK((back["b"] - m["b"]).norm() == 0.0);
}

}  // TEST_SUITE
