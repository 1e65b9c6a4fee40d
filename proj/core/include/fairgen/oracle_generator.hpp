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

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include "fairgen/shapeworld.hpp"
#include "fairgen/synth_gen.hpp"

namespace fairgen {

enum class OracleFidelity { global_prior, fitted };

std::string_view to_string(OracleFidelity fidelity);
OracleFidelity parse_oracle_fidelity(std::string_view text);

/// Style a generator uses when it has not seen the data. Differs from the
/// world's own style in palette, stroke, size, shape color and noise.
struct PriorStyle {
    std::map<std::string, Rgb> palettes{{"warm", Rgb{0.92, 0.40, 0.30}}, {"cool", Rgb{0.30, 0.62, 0.72}}};
    double palette_jitter = 0.02;
    ShapeStyle shape{10, 1, Rgb{0.70, 0.70, 0.70}, 0.02, 2};
    double noise_sigma = 0.03;
};

/// Parameters the fitted oracle estimates from a group's images.
struct FittedShapeParams {
    Rgb background_mean{};
    Rgb background_std{};
    Rgb shape_color{};
    double noise_sigma = 0.0;
    int size = 0;
    int stroke = 0;
    int max_shift = 0;
    std::string source_class;
    std::string source_bias;
};

/// Estimates background, shape and noise statistics of ShapeWorld images whose
/// class word is given. Border pixels (outside every possible shape
/// placement) measure the background.
FittedShapeParams fit_shape_params(std::span<const Image> images, ShapeKind kind);

/// Parametric reference generator for the toy world.
///
/// fitted: fit() estimates FittedShapeParams from the images; sample() renders
/// the prompt's shape with the fitted geometry, colors and noise. When the
/// prompt names a different bias word than the fitted group (transfer), the
/// background palette for that word comes from the prior.
///
/// global_prior: fit() is a no-op; sample() renders from PriorStyle.
class OracleGenerator final : public GeneratorBackend {
public:
    OracleGenerator(OracleFidelity fidelity, std::uint64_t seed, ShapeWorldConfig world = {}, PriorStyle prior = {});

    std::shared_ptr<const GeneratorHandle> fit(std::span<const Image> images, const PromptSpec& prompt) override;
    std::vector<Image> sample(const GeneratorHandle* handle, const PromptSpec& prompt, std::size_t n,
                              const SamplerParams& params) override;

    OracleFidelity fidelity() const noexcept { return fidelity_; }
    std::size_t fit_calls() const noexcept { return fit_calls_; }

private:
    std::optional<std::string> find_word(const std::string& prompt, const std::vector<std::string>& vocabulary) const;

    OracleFidelity fidelity_;
    std::uint64_t seed_;
    ShapeWorldConfig world_;
    PriorStyle prior_;
    std::size_t fit_calls_ = 0;
};

std::unique_ptr<OracleGenerator> oracle_backend(OracleFidelity fidelity, std::uint64_t seed,
                                                ShapeWorldConfig world = {});

}  // namespace fairgen
