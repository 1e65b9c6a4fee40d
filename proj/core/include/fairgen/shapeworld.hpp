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

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "fairgen/group_data.hpp"
#include "fairgen/image.hpp"

namespace fairgen {

class ToyEmbeddingBackend;

using Rgb = std::array<double, 3>;

enum class ShapeKind { square, cross };

/// Geometry and color of the foreground shape. "square" is a hollow frame and
/// "cross" a plus sign; both fit a size x size box with the given stroke.
struct ShapeStyle {
    int size = 8;
    int stroke = 2;
    Rgb color{0.95, 0.95, 0.95};
    double color_jitter = 0.03;
    int max_shift = 1;
};

/// Everything needed to draw one image.
struct RenderParams {
    ShapeKind kind = ShapeKind::square;
    int image_size = 16;
    int size = 8;
    int stroke = 2;
    Rgb shape_color{0.95, 0.95, 0.95};
    Rgb background{0.5, 0.5, 0.5};
    double noise_sigma = 0.0;
    int offset_row = 0;
    int offset_col = 0;
};

Image render_shape_image(const RenderParams& params, std::mt19937_64& rng);

/// Binary foreground mask of a shape centered with the given offset.
std::vector<bool> shape_mask(ShapeKind kind, int image_size, int size, int stroke, int offset_row, int offset_col);

/// ColoredShapes: y = shape, a = background palette.
struct ShapeWorldConfig {
    int image_size = 16;
    std::vector<std::string> classes{"square", "cross"};
    std::vector<std::string> biases{"warm", "cool"};
    std::map<std::string, std::string> aligned_bias{{"square", "warm"}, {"cross", "cool"}};
    std::map<std::string, Rgb> palettes{{"warm", Rgb{0.80, 0.50, 0.25}}, {"cool", Rgb{0.25, 0.50, 0.80}}};
    double palette_jitter = 0.05;
    ShapeStyle shape;
    double bias_ratio = 0.95;
    std::size_t n_train = 2000;
    std::size_t n_val = 400;
    std::size_t n_test = 400;
    double noise_sigma = 0.1;
    std::uint64_t seed = 0;
};

ShapeKind shape_kind_for(std::string_view class_label);

/// Train and val honor bias_ratio per class; test is group-balanced.
GroupedDataset generate_shapeworld(const ShapeWorldConfig& cfg);

/// Draws a single group member with the world's own style.
Image sample_shapeworld_image(const ShapeWorldConfig& cfg, const GroupKey& group, std::mt19937_64& rng);

/// Registers "square", "cross" and each palette word as visual concepts so
/// that class and bias prompts land near matching images.
void register_shapeworld_concepts(ToyEmbeddingBackend& backend, const ShapeWorldConfig& cfg);

}  // namespace fairgen
