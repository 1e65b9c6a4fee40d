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

#include "fairgen/oracle_generator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

#include "fairgen/error.hpp"
#include "fairgen/hash.hpp"
#include "internal/text_io.hpp"

namespace fairgen {

std::string_view to_string(OracleFidelity fidelity) {
    return fidelity == OracleFidelity::fitted ? "fitted" : "global_prior";
}

OracleFidelity parse_oracle_fidelity(std::string_view text) {
    if (text == "fitted") return OracleFidelity::fitted;
    if (text == "global_prior") return OracleFidelity::global_prior;
    throw Error(ErrorKind::config, "unknown oracle fidelity '" + std::string(text) + "'");
}

namespace {

struct Candidate {
    int size;
    int stroke;
    int dr;
    int dc;
    std::vector<int> on;  // pixel indices
};

std::vector<Candidate> candidates(ShapeKind kind, int image_size) {
    std::vector<Candidate> out;
    for (int size = 5; size <= std::min(12, image_size - 2); ++size) {
        for (int stroke = 1; stroke <= 3; ++stroke) {
            for (int dr = -2; dr <= 2; ++dr) {
                for (int dc = -2; dc <= 2; ++dc) {
                    auto mask = shape_mask(kind, image_size, size, stroke, dr, dc);
                    Candidate c{size, stroke, dr, dc, {}};
                    for (int i = 0; i < int(mask.size()); ++i) {
                        if (mask[i]) c.on.push_back(i);
                    }
                    if (!c.on.empty() && int(c.on.size()) < image_size * image_size) out.push_back(std::move(c));
                }
            }
        }
    }
    return out;
}

struct OracleHandle final : GeneratorHandle {
    FittedShapeParams params;
};

}  // namespace

FittedShapeParams fit_shape_params(std::span<const Image> images, ShapeKind kind) {
    if (images.empty()) throw Error(ErrorKind::empty_input, "cannot fit an oracle on zero images");
    const int n = images.front().height;
    for (const auto& img : images) {
        if (img.height != n || img.width != n || img.channels != 3) {
            throw Error(ErrorKind::dimension_mismatch, "oracle expects square RGB images of one size");
        }
    }
    const auto cands = candidates(kind, n);
    const std::size_t npix = std::size_t(n) * n;

    std::vector<int> sizes, strokes;
    Rgb shape_sum{}, bg_sum{}, bg_sq{};
    double resid = 0.0;
    std::size_t resid_n = 0;
    int max_shift = 0;
    for (const auto& img : images) {
        std::array<double, 3> total{}, total_sq{};
        for (std::size_t p = 0; p < npix; ++p) {
            for (int ch = 0; ch < 3; ++ch) {
                const double v = img.pixels[p * 3 + ch];
                total[ch] += v;
                total_sq[ch] += v * v;
            }
        }
        double best = std::numeric_limits<double>::infinity();
        const Candidate* arg = nullptr;
        std::array<double, 3> best_on{};
        for (const auto& c : cands) {
            std::array<double, 3> on{};
            for (int p : c.on) {
                for (int ch = 0; ch < 3; ++ch) on[ch] += img.pixels[std::size_t(p) * 3 + ch];
            }
            const double n_on = double(c.on.size());
            const double n_off = double(npix) - n_on;
            double sse = 0.0;
            for (int ch = 0; ch < 3; ++ch) {
                const double off = total[ch] - on[ch];
                sse += total_sq[ch] - on[ch] * on[ch] / n_on - off * off / n_off;
            }
            if (sse < best) {
                best = sse;
                arg = &c;
                best_on = on;
            }
        }
        sizes.push_back(arg->size);
        strokes.push_back(arg->stroke);
        max_shift = std::max({max_shift, std::abs(arg->dr), std::abs(arg->dc)});
        const double n_on = double(arg->on.size());
        const double n_off = double(npix) - n_on;
        for (int ch = 0; ch < 3; ++ch) {
            shape_sum[ch] += best_on[ch] / n_on;
            const double bg = (total[ch] - best_on[ch]) / n_off;
            bg_sum[ch] += bg;
            bg_sq[ch] += bg * bg;
        }
        resid += std::max(0.0, best);
        resid_n += npix * 3 - 6;
    }

    auto mode = [](std::vector<int> v) {
        std::sort(v.begin(), v.end());
        int best = v.front(), count = 0;
        for (std::size_t i = 0; i < v.size();) {
            std::size_t j = i;
            while (j < v.size() && v[j] == v[i]) ++j;
            if (int(j - i) > count) {
                count = int(j - i);
                best = v[i];
            }
            i = j;
        }
        return best;
    };

    FittedShapeParams out;
    const double m = double(images.size());
    for (int ch = 0; ch < 3; ++ch) {
        out.shape_color[ch] = shape_sum[ch] / m;
        out.background_mean[ch] = bg_sum[ch] / m;
        const double var = images.size() > 1 ? (bg_sq[ch] - m * out.background_mean[ch] * out.background_mean[ch]) / (m - 1) : 0.0;
        out.background_std[ch] = std::sqrt(std::max(0.0, var));
    }
    out.noise_sigma = std::sqrt(resid / double(std::max<std::size_t>(resid_n, 1)));
    out.size = mode(sizes);
    out.stroke = mode(strokes);
    out.max_shift = max_shift;
    return out;
}

OracleGenerator::OracleGenerator(OracleFidelity fidelity, std::uint64_t seed, ShapeWorldConfig world, PriorStyle prior)
    : fidelity_(fidelity), seed_(seed), world_(std::move(world)), prior_(std::move(prior)) {}

std::optional<std::string> OracleGenerator::find_word(const std::string& prompt,
                                                      const std::vector<std::string>& vocabulary) const {
    std::string token;
    std::optional<std::string> found;
    auto flush = [&] {
        if (!found && std::find(vocabulary.begin(), vocabulary.end(), token) != vocabulary.end()) found = token;
        token.clear();
    };
    for (char ch : internal::to_lower(prompt)) {
        if (std::isalnum(static_cast<unsigned char>(ch)) || ch == '-') {
            token += ch;
        } else {
            flush();
        }
    }
    flush();
    return found;
}

std::shared_ptr<const GeneratorHandle> OracleGenerator::fit(std::span<const Image> images, const PromptSpec& prompt) {
    ++fit_calls_;
    if (fidelity_ == OracleFidelity::global_prior) {
        spdlog::warn("oracle in global_prior mode ignores fit data");
        return nullptr;
    }
    auto cls = find_word(prompt.positive, world_.classes);
    if (!cls) throw Error(ErrorKind::config, "prompt names no known class: \"" + prompt.positive + "\"");
    auto handle = std::make_shared<OracleHandle>();
    handle->params = fit_shape_params(images, shape_kind_for(*cls));
    handle->params.source_class = *cls;
    if (auto bias = find_word(prompt.positive, world_.biases)) {
        handle->params.source_bias = *bias;
    } else {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& [word, pal] : world_.palettes) {
            double d = 0;
            for (int ch = 0; ch < 3; ++ch) d += (pal[ch] - handle->params.background_mean[ch]) * (pal[ch] - handle->params.background_mean[ch]);
            if (d < best) {
                best = d;
                handle->params.source_bias = word;
            }
        }
    }
    return handle;
}

std::vector<Image> OracleGenerator::sample(const GeneratorHandle* handle, const PromptSpec& prompt, std::size_t n,
                                           const SamplerParams& params) {
    const auto* fitted = dynamic_cast<const OracleHandle*>(handle);
    if (fidelity_ == OracleFidelity::fitted && fitted == nullptr) {
        throw Error(ErrorKind::dependency, "fitted oracle asked to sample without a fitted handle");
    }
    auto cls = find_word(prompt.positive, world_.classes);
    auto bias = find_word(prompt.positive, world_.biases);
    if (!cls && fitted) cls = fitted->params.source_class;
    if (!cls) throw Error(ErrorKind::config, "prompt names no known class: \"" + prompt.positive + "\"");

    std::vector<Image> out;
    out.reserve(n);
    std::uniform_real_distribution<double> jitter(-1.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        std::mt19937_64 rng(mix64(seed_ ^ mix64(params.seed + i)));
        RenderParams p;
        p.kind = shape_kind_for(*cls);
        p.image_size = world_.image_size;
        int max_shift = 0;
        if (fitted) {
            const auto& f = fitted->params;
            p.size = f.size;
            p.stroke = f.stroke;
            const bool transfer = bias && *bias != f.source_bias;
            const Rgb* prior_pal = nullptr;
            if (transfer) {
                auto it = prior_.palettes.find(*bias);
                if (it == prior_.palettes.end()) throw Error(ErrorKind::config, "no prior palette for '" + *bias + "'");
                prior_pal = &it->second;
            }
            for (int ch = 0; ch < 3; ++ch) {
                const double base = prior_pal ? (*prior_pal)[ch] : f.background_mean[ch];
                p.background[ch] = base + f.background_std[ch] * gauss(rng);
                p.shape_color[ch] = f.shape_color[ch];
            }
            p.noise_sigma = f.noise_sigma;
            max_shift = f.max_shift;
        } else {
            std::string word;
            if (bias) {
                word = *bias;
            } else {
                auto it = prior_.palettes.begin();
                std::advance(it, std::uniform_int_distribution<std::size_t>(0, prior_.palettes.size() - 1)(rng));
                word = it->first;
            }
            auto it = prior_.palettes.find(word);
            if (it == prior_.palettes.end()) throw Error(ErrorKind::config, "no prior palette for '" + word + "'");
            p.size = prior_.shape.size;
            p.stroke = prior_.shape.stroke;
            for (int ch = 0; ch < 3; ++ch) {
                p.background[ch] = it->second[ch] + prior_.palette_jitter * jitter(rng);
                p.shape_color[ch] = prior_.shape.color[ch] + prior_.shape.color_jitter * jitter(rng);
            }
            p.noise_sigma = prior_.noise_sigma;
            max_shift = prior_.shape.max_shift;
        }
        std::uniform_int_distribution<int> shift(-max_shift, max_shift);
        p.offset_row = shift(rng);
        p.offset_col = shift(rng);
        out.push_back(render_shape_image(p, rng));
    }
    return out;
}

std::unique_ptr<OracleGenerator> oracle_backend(OracleFidelity fidelity, std::uint64_t seed, ShapeWorldConfig world) {
    return std::make_unique<OracleGenerator>(fidelity, seed, std::move(world));
}

}  // namespace fairgen
