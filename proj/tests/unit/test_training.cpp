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
#include <limits>

#include "fairgen/error.hpp"
#include "fairgen/eval_metrics.hpp"
#include "fairgen/training.hpp"
#include "test_support.hpp"

using namespace fairgen;

namespace {

TrainConfig quick(int epochs = 2) {
    TrainConfig c;
    c.epochs = epochs;
    c.learning_rate = 0.01;
    c.batch_size = 32;
    c.seed = 1;
    return c;
}

GroupedDataset small_train(std::uint64_t seed = 0, double ratio = 0.9) {
    return generate_shapeworld(fairgen::testing::small_world(seed, ratio)).filter_split(Split::train);
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("input matrix is centered pixels") {
    auto ds = small_train();
    auto x = input_matrix(ds);
    CHECK(x.cols() == Eigen::Index(ds.size()));
    CHECK(x.rows() == Eigen::Index(ds[0].image.size()));
    CHECK(x(0, 0) == doctest::Approx(ds[0].image.pixels[0] - 0.5));
    auto y = class_indices(ds);
    CHECK(y[0] == ds.class_index(ds[0].class_label));
}

TEST_CASE("zero epochs leave the model unchanged") {
    auto ds = small_train();
    auto m = make_model(ds, {}, 3);
    auto r = stage1_pretrain(m, ds, quick(0));
    CHECK(r.model == m);
    CHECK(r.trajectory.empty());
}

TEST_CASE("training is deterministic") {
    auto ds = small_train();
    auto a = stage1_pretrain(make_model(ds, {}, 3), ds, quick());
    auto b = stage1_pretrain(make_model(ds, {}, 3), ds, quick());
    CHECK(a.model == b.model);
    CHECK(format_trajectory(a.trajectory) == format_trajectory(b.trajectory));
    CHECK(a.trajectory.size() == 2);
    auto c = erm_baseline(ds, {}, quick());
    CHECK(c.model == erm_baseline(ds, {}, quick()).model);
}

TEST_CASE("finetune variants honor the freeze contract") {
    auto ds = small_train();
    auto pre = stage1_pretrain(make_model(ds, {}, 3), ds, quick(1)).model;
    const auto enc = pre.encoder_hash();
    auto all = stage2_finetune(pre, ds, FinetuneVariant::llr_all, quick());
    CHECK(all.model.encoder_hash() == enc);
    CHECK(all.model.head_hash() != pre.head_hash());
    auto llrb = stage2_finetune(pre, ds, FinetuneVariant::llr_b, quick());
    CHECK(llrb.model.encoder_hash() == enc);
    auto ftb = stage2_finetune(pre, ds, FinetuneVariant::ft_b, quick());
    CHECK(ftb.model.encoder_hash() != enc);
}

TEST_CASE("gdro can keep the encoder fixed") {
    auto ds = small_train();
    auto m = make_model(ds, {}, 2);
    auto r = gdro_train(m, ds, quick(), {0.01}, false);
    CHECK(r.model.encoder_hash() == m.encoder_hash());
    auto full = gdro_baseline(ds, {}, quick(), {0.01});
    CHECK(full.model.num_classes() == 2);
}

TEST_CASE("balanced subsample") {
    auto ds = fairgen::testing::labeled_dataset(
        {{"square|warm", 40}, {"square|cool", 3}, {"cross|cool", 30}, {"cross|warm", 5}});
    auto b = balanced_subsample(ds, 2);
    for (const auto& g : ds.groups()) CHECK(b.group_size(g) == 3);
    auto c = balanced_subsample(ds, 2);
    CHECK(format_manifest(b) == format_manifest(c));
    auto empty = fairgen::testing::labeled_dataset({{"square|warm", 4}, {"square|cool", 0}, {"cross|cool", 2}});
    CHECK_THROWS_AS(balanced_subsample(empty, 0), Error);
}

TEST_CASE("erm on a balanced world has close WGA and AGA") {
    auto world = fairgen::testing::small_world(1, 0.5);
    world.n_train = 800;
    world.n_test = 400;
    auto ds = generate_shapeworld(world);
    auto train = ds.filter_split(Split::train);
    auto test = ds.filter_split(Split::test);
    auto cfg = quick(10);
    auto r = erm_baseline(train, {}, cfg);
    auto m = evaluate(r.model, test);
    CHECK(m.aga > 0.8);
    CHECK(m.aga - m.wga <= 0.05);
}

TEST_CASE("non-finite loss raises a numerical error") {
    auto ds = small_train();
    auto items = ds.items();
    auto img = items[0].image;
    img.pixels[0] = std::numeric_limits<double>::quiet_NaN();
    items[0].set_inline_image(img);
    auto bad = ds.with_items(items);
    try {
        erm_baseline(bad, {}, quick(1));
        FAIL("expected numerical error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::numerical);
    }
}

TEST_CASE("config validation") {
    auto c = quick();
    c.beta = 2;
    CHECK_THROWS_AS(c.validate(), Error);
    c = quick();
    c.tau = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = quick();
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    CHECK(parse_finetune_variant(to_string(FinetuneVariant::ft_b)) == FinetuneVariant::ft_b);
    CHECK_THROWS_AS(parse_finetune_variant("nope"), Error);
}

TEST_CASE("trajectory format") {
    std::vector<EpochRecord> t{{1, 0.5, 0.25, 0.375}};
    auto s = format_trajectory(t);
    CHECK(s.rfind("epoch,ce,supcon,total\n", 0) == 0);
    CHECK(s.find("1,0.5,0.25,0.375") != std::string::npos);
}

}  // TEST_SUITE
