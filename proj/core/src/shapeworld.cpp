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

#include "fairgen/shapeworld.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <tuple>

#include "fairgen/embedder.hpp"
#include "fairgen/error.hpp"
#include "fairgen/hash.hpp"

namespace fairgen {

std::vector<bool> shape_mask(ShapeKind kind, int image_size, int size, int stroke, int offset_row, int offset_col) {
    std::vector<bool> mask(std::size_t(image_size) * image_size, false);
    const int top = (image_size - size) / 2 + offset_row;
    const int left = (image_size - size) / 2 + offset_col;
    // frame border is half the stroke so both shapes cover similar area
    const int border = std::max(1, stroke / 2);
    const int band = (size - stroke) / 2;
    for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) {
            bool on = false;
            if (kind == ShapeKind::square) {
                on = r < border || c < border || r >= size - border || c >= size - border;
            } else {
                on = (r >= band && r < band + stroke) || (c >= band && c < band + stroke);
            }
            const int rr = top + r;
            const int cc = left + c;
            if (on && rr >= 0 && rr < image_size && cc >= 0 && cc < image_size) {
                mask[std::size_t(rr) * image_size + cc] = true;
            }
        }
    }
    return mask;
}

Image render_shape_image(const RenderParams& p, std::mt19937_64& rng) {
    Image img(p.image_size, p.image_size, 3);
    auto mask = shape_mask(p.kind, p.image_size, p.size, p.stroke, p.offset_row, p.offset_col);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int r = 0; r < p.image_size; ++r) {
        for (int c = 0; c < p.image_size; ++c) {
            const bool on = mask[std::size_t(r) * p.image_size + c];
            for (int ch = 0; ch < 3; ++ch) {
                double v = on ? p.shape_color[ch] : p.background[ch];
                if (p.noise_sigma > 0) v += p.noise_sigma * noise(rng);
                img.at(r, c, ch) = v;
            }
        }
    }
    return img;
}

ShapeKind shape_kind_for(std::string_view class_label) {
    if (class_label == "square") return ShapeKind::square;
    if (class_label == "cross") return ShapeKind::cross;
    throw Error(ErrorKind::config, "unknown shape class '" + std::string(class_label) + "'");
}

Image sample_shapeworld_image(const ShapeWorldConfig& cfg, const GroupKey& group, std::mt19937_64& rng) {
    auto pal = cfg.palettes.find(group.bias_label);
    if (pal == cfg.palettes.end()) throw Error(ErrorKind::config, "no palette for '" + group.bias_label + "'");
    std::uniform_real_distribution<double> jitter(-1.0, 1.0);
    std::uniform_int_distribution<int> shift(-cfg.shape.max_shift, cfg.shape.max_shift);
    RenderParams p;
    p.kind = shape_kind_for(group.class_label);
    p.image_size = cfg.image_size;
    p.size = cfg.shape.size;
    p.stroke = cfg.shape.stroke;
    for (int ch = 0; ch < 3; ++ch) {
        p.background[ch] = pal->second[ch] + cfg.palette_jitter * jitter(rng);
        p.shape_color[ch] = cfg.shape.color[ch] + cfg.shape.color_jitter * jitter(rng);
    }
    p.noise_sigma = cfg.noise_sigma;
    p.offset_row = shift(rng);
    p.offset_col = shift(rng);
    return render_shape_image(p, rng);
}

namespace {

std::map<GroupKey, std::size_t> split_counts(const ShapeWorldConfig& cfg, std::size_t n, bool balanced) {
    std::map<GroupKey, std::size_t> counts;
    const std::size_t per_class = n / cfg.classes.size();
    for (const auto& y : cfg.classes) {
        if (balanced) {
            for (const auto& a : cfg.biases) counts[{y, a}] = per_class / cfg.biases.size();
            continue;
        }
        const std::string& aligned = cfg.aligned_bias.at(y);
        std::size_t conflicting = static_cast<std::size_t>(std::llround(double(per_class) * (1.0 - cfg.bias_ratio)));
        if (cfg.bias_ratio < 1.0) conflicting = std::max<std::size_t>(conflicting, cfg.biases.size() - 1);
        counts[{y, aligned}] = per_class - conflicting;
        const std::size_t others = cfg.biases.size() - 1;
        std::size_t i = 0;
        for (const auto& a : cfg.biases) {
            if (a == aligned) continue;
            counts[{y, a}] = conflicting / others + (i < conflicting % others ? 1 : 0);
            ++i;
        }
    }
    return counts;
}

}  // namespace

GroupedDataset generate_shapeworld(const ShapeWorldConfig& cfg) {
    if (cfg.classes.empty() || cfg.biases.size() < 2) throw Error(ErrorKind::config, "shapeworld needs classes and >= 2 biases");
    if (cfg.bias_ratio <= 0.0 || cfg.bias_ratio > 1.0) throw Error(ErrorKind::config, "bias_ratio must lie in (0, 1]");
    std::vector<DatasetItem> items;
    const std::tuple<Split, std::size_t, bool> splits[] = {
        {Split::train, cfg.n_train, false}, {Split::val, cfg.n_val, false}, {Split::test, cfg.n_test, true}};
    for (const auto& [split, n, balanced] : splits) {
        std::mt19937_64 rng(mix64(cfg.seed ^ (0x5eedULL + static_cast<std::uint64_t>(split))));
        std::size_t counter = 0;
        for (const auto& y : cfg.classes) {
            for (const auto& a : cfg.biases) {
                const std::size_t count = split_counts(cfg, n, balanced).at({y, a});
                for (std::size_t i = 0; i < count; ++i) {
                    DatasetItem item;
                    char id[48];
                    std::snprintf(id, sizeof id, "sw-%s-%06zu", std::string(to_string(split)).c_str(), counter++);
                    item.id = id;
                    item.class_label = y;
                    item.bias_label = a;
                    item.split = split;
                    item.set_inline_image(sample_shapeworld_image(cfg, {y, a}, rng));
                    items.push_back(std::move(item));
                }
            }
        }
    }
    return GroupedDataset(std::move(items), cfg.classes, cfg.biases,
                          alignment_from_aligned_bias(cfg.classes, cfg.biases, cfg.aligned_bias));
}

void register_shapeworld_concepts(ToyEmbeddingBackend& backend, const ShapeWorldConfig& cfg) {
    std::mt19937_64 rng(0);
    for (const auto& y : cfg.classes) {
        std::vector<Image> protos;
        for (int dr = -cfg.shape.max_shift; dr <= cfg.shape.max_shift; ++dr) {
            for (int dc = -cfg.shape.max_shift; dc <= cfg.shape.max_shift; ++dc) {
                RenderParams p;
                p.kind = shape_kind_for(y);
                p.image_size = cfg.image_size;
                p.size = cfg.shape.size;
                p.stroke = cfg.shape.stroke;
                p.shape_color = cfg.shape.color;
                p.offset_row = dr;
                p.offset_col = dc;
                protos.push_back(render_shape_image(p, rng));
            }
        }
        backend.register_concept(y, protos);
    }
    for (const auto& [word, color] : cfg.palettes) {
        Image flat(cfg.image_size, cfg.image_size, 3);
        for (std::size_t i = 0; i < flat.pixels.size(); ++i) flat.pixels[i] = color[i % 3];
        std::vector<Image> protos{flat};
        backend.register_concept(word, protos);
    }
}

}  // namespace fairgen
