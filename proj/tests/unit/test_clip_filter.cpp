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

#include <algorithm>
#include <random>
#include <set>

#include "fairgen/clip_filter.hpp"
#include "fairgen/error.hpp"
#include "fairgen/oracle_generator.hpp"
#include "test_support.hpp"

using namespace fairgen;

namespace {

ScoredCandidate cand(const std::string& id, double score, const std::string& group = "square|warm") {
    ScoredCandidate c;
    auto g = GroupKey::parse(group);
    c.item.id = id;
    c.item.class_label = g.class_label;
    c.item.bias_label = g.bias_label;
    c.clip_label = score;
    c.clip_score = score;
    return c;
}

// brute force: full sort by (score desc, id asc), take the prefix
std::vector<std::string> oracle(std::vector<ScoredCandidate> v, double keep) {
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
        return a.clip_score != b.clip_score ? a.clip_score > b.clip_score : a.item.id < b.item.id;
    });
    std::size_t n = std::max<std::size_t>(1, std::size_t(std::floor(double(v.size()) * keep + 1e-9)));
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back(v[i].item.id);
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::vector<std::string> sorted_ids(const std::vector<ScoredCandidate>& v) {
    std::vector<std::string> ids;
    for (const auto& c : v) ids.push_back(c.item.id);
    std::sort(ids.begin(), ids.end());
    return ids;
}

}  // namespace

TEST_SUITE("clip_filter") {

TEST_CASE("combined score examples") {
    FilterConfig cfg;
    cfg.alpha = 1.0;
    CHECK(combined_score(0.3, 0.9, cfg) == doctest::Approx(0.3));
    cfg.alpha = 0.0;
    CHECK(combined_score(0.3, 0.9, cfg) == doctest::Approx(0.9));
    cfg.alpha = 0.5;
    CHECK(combined_score(0.3, 0.9, cfg) == doctest::Approx(0.6));
    CHECK_THROWS_AS(combined_score(0.3, std::nullopt, cfg), Error);
    cfg.mode = FilterMode::severe;
    CHECK(cfg.effective_alpha() == 1.0);
    CHECK(combined_score(0.3, std::nullopt, cfg) == doctest::Approx(0.3));
}

TEST_CASE("combined score is monotone in both arguments") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1, 1), a01(0, 1);
    for (int t = 0; t < 10000; ++t) {
        FilterConfig cfg;
        cfg.alpha = a01(rng);
        const double l = u(rng), c = u(rng), d = std::abs(u(rng));
        const double base = combined_score(l, c, cfg);
        CHECK(combined_score(l + d, c, cfg) >= base);
        CHECK(combined_score(l, c + d, cfg) >= base);
    }
}

TEST_CASE("retained counts") {
    CHECK(retained_count(5000, 0.75) == 3750);
    CHECK(retained_count(10, 1.0) == 10);
    CHECK(retained_count(3, 0.1) == 1);
    CHECK(retained_count(7, 0.5) == 3);
}

TEST_CASE("top half of a small set") {
    std::vector<ScoredCandidate> v{cand("a", 0.9), cand("b", 0.5), cand("c", 0.1), cand("d", 0.1)};
    FilterConfig cfg;
    cfg.keep_fraction = 0.5;
    auto kept = select_top_group(v, cfg);
    CHECK(sorted_ids(kept) == std::vector<std::string>{"a", "b"});
    cfg.keep_fraction = 1.0;
    CHECK(select_top_group(v, cfg).size() == 4);
    cfg.keep_fraction = 0.75;
    CHECK(sorted_ids(select_top_group(v, cfg)) == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("select_top equals the full-sort oracle") {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> size(1, 60), level(0, 9);
    std::uniform_real_distribution<double> keep(0.01, 1.0);
    for (int t = 0; t < 1000; ++t) {
        std::vector<ScoredCandidate> v;
        const int n = size(rng);
        for (int i = 0; i < n; ++i) v.push_back(cand("id" + std::to_string(rng() % 100000), 0.1 * level(rng)));
        // drop duplicate ids
        std::set<std::string> seen;
        v.erase(std::remove_if(v.begin(), v.end(), [&](const auto& c) { return !seen.insert(c.item.id).second; }), v.end());
        FilterConfig cfg;
        cfg.keep_fraction = keep(rng);
        auto kept = select_top_group(v, cfg);
        CHECK(sorted_ids(kept) == oracle(v, cfg.keep_fraction));
        double min_kept = 1e9;
        for (const auto& c : kept) min_kept = std::min(min_kept, c.clip_score);
        const auto kept_ids = sorted_ids(kept);
        for (const auto& c : v) {
            if (!std::binary_search(kept_ids.begin(), kept_ids.end(), c.item.id)) CHECK(c.clip_score <= min_kept);
        }
    }
}

TEST_CASE("groups are selected independently") {
    std::map<GroupKey, std::vector<ScoredCandidate>> a, b;
    for (int i = 0; i < 10; ++i) {
        a[{"square", "warm"}].push_back(cand("s" + std::to_string(i), 0.1 * i));
        a[{"cross", "cool"}].push_back(cand("c" + std::to_string(i), 0.05 * i, "cross|cool"));
    }
    b = a;
    std::reverse(b[{"cross", "cool"}].begin(), b[{"cross", "cool"}].end());
    b[{"cross", "cool"}].pop_back();
    FilterConfig cfg;
    auto ra = select_top(a, cfg), rb = select_top(b, cfg);
    CHECK(sorted_ids(ra[{"square", "warm"}]) == sorted_ids(rb[{"square", "warm"}]));
    CHECK(ra[{"square", "warm"}].size() == 7);

    a[{"cross", "cool"}].clear();
    try {
        select_top(a, cfg);
        FAIL("expected selection error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::selection);
    }
}

TEST_CASE("random selection is seeded and ignores scores") {
    std::vector<ScoredCandidate> v;
    for (int i = 0; i < 100; ++i) v.push_back(cand("r" + std::to_string(i), 0.01 * i));
    FilterConfig cfg;
    cfg.selection = SelectionMethod::random;
    cfg.keep_fraction = 0.5;
    cfg.seed = 3;
    auto a = select_top_group(v, cfg), b = select_top_group(v, cfg);
    CHECK(sorted_ids(a) == sorted_ids(b));
    CHECK(a.size() == 50);
    cfg.selection = SelectionMethod::score;
    CHECK(sorted_ids(a) != sorted_ids(select_top_group(v, cfg)));
}

TEST_CASE("label scores prefer the generated class") {
    ShapeWorldConfig world;
    world.seed = 4;
    auto train = generate_shapeworld(world).filter_split(Split::train);
    auto backend = toy_backend(7, 128);
    register_shapeworld_concepts(*backend, world);
    OracleGenerator gen(OracleFidelity::fitted, 5, world);
    int wins = 0, total = 0;
    for (const auto& g : train.groups()) {
        std::vector<Image> imgs;
        for (auto i : train.group_members(g)) imgs.push_back(train[i].image);
        auto prompt = render_prompts(DatasetId::shapeworld, Strategy::dreambooth_per_group, g, PromptMode::standard);
        auto handle = gen.fit(imgs, prompt);
        const std::string other = g.class_label == "square" ? "cross" : "square";
        auto samples = gen.sample(handle.get(), prompt, 50, {7.5, 50, 11});
        for (std::size_t t = 0; t < samples.size(); ++t) {
            DatasetItem item;
            item.id = "t" + std::to_string(t);
            item.class_label = g.class_label;
            item.bias_label = g.bias_label;
            item.set_inline_image(samples[t]);
            const double own = clip_label_score(item, g.class_label, *backend);
            CHECK(own >= -1.0);
            CHECK(own <= 1.0);
            CHECK(own == clip_label_score(item, g.class_label, *backend));
            wins += own > clip_label_score(item, other, *backend);
            ++total;
        }
    }
    CHECK(wins >= total * 95 / 100);
}

TEST_CASE("centroid scores") {
    auto backend = toy_backend(7, 16);
    DatasetItem item;
    item.id = "x";
    Image img(4, 4, 3);
    for (std::size_t i = 0; i < img.size(); ++i) img.pixels[i] = double(i % 7) / 7.0;
    item.set_inline_image(img);
    GroupEmbeddingStats stats{{"a", "b"}, backend->embed_image(img), 1};
    CHECK(clip_centroid_score(item, stats, *backend) == doctest::Approx(1.0));
    Embedding e = stats.centroid;
    Embedding ortho = Embedding::Zero(e.size());
    ortho(0) = -e(1);
    ortho(1) = e(0);
    stats.centroid = ortho;
    CHECK(std::abs(clip_centroid_score(item, stats, *backend)) < 1e-12);
    stats.centroid = Embedding::Zero(e.size());
    CHECK_THROWS_AS(clip_centroid_score(item, stats, *backend), Error);

    DatasetItem blank;
    blank.id = "blank";
    blank.image_ref = "missing.png";
    try {
        clip_label_score(blank, "a", *backend);
        FAIL("expected evaluation error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::evaluation);
    }
}

TEST_CASE("own-group real items score higher against their centroid") {
    auto world = fairgen::testing::small_world(6);
    auto train = generate_shapeworld(world).filter_split(Split::train);
    auto backend = toy_backend(7, 64);
    auto emb = embed_dataset(train, *backend);
    auto centroids = real_group_centroids(train, emb);
    const GroupKey a{"square", "warm"}, b{"cross", "cool"};
    double own = 0, other = 0;
    for (auto i : train.group_members(a)) {
        own += clip_centroid_score(train[i], centroids.at(a), *backend);
        other += clip_centroid_score(train[i], centroids.at(b), *backend);
    }
    CHECK(own > other);
}

TEST_CASE("scored manifest marks retained rows") {
    auto world = fairgen::testing::small_world(7);
    auto train = generate_shapeworld(world).filter_split(Split::train);
    auto backend = toy_backend(7, 32);
    register_shapeworld_concepts(*backend, world);
    auto centroids = real_group_centroids(train, embed_dataset(train, *backend));
    auto synth = train.with_items(std::vector<DatasetItem>(train.items().begin(), train.items().begin() + 40));
    FilterConfig cfg;
    auto scored = score_candidates(synth, centroids, *backend, cfg);
    auto kept = select_top(scored, cfg);
    auto filtered = filtered_dataset(synth, kept);
    std::size_t expect = 0;
    for (const auto& [g, v] : scored) expect += retained_count(v.size(), cfg.keep_fraction);
    CHECK(filtered.size() == expect);
    auto text = format_scored_manifest(synth, scored, kept);
    CHECK(text.find("clip_label") != std::string::npos);
    CHECK(text.find("clip_centroid") != std::string::npos);
    CHECK(text.find("clip_score") != std::string::npos);
    CHECK(text.find("retained") != std::string::npos);
}

}  // TEST_SUITE
