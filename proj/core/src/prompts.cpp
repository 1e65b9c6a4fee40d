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

#include "fairgen/prompts.hpp"

#include <algorithm>
#include <array>

#include "fairgen/error.hpp"

namespace fairgen {

std::string_view to_string(DatasetId id) {
    switch (id) {
        case DatasetId::waterbirds: return "waterbirds";
        case DatasetId::celeba: return "celeba";
        case DatasetId::utkface: return "utkface";
        case DatasetId::shapeworld: return "shapeworld";
    }
    return "shapeworld";
}

std::string_view to_string(Strategy strategy) {
    switch (strategy) {
        case Strategy::vanilla: return "vanilla";
        case Strategy::lora_per_group: return "lora";
        case Strategy::dreambooth_per_group: return "dreambooth";
        case Strategy::clustered_dreambooth: return "clustered_dreambooth";
    }
    return "vanilla";
}

std::string_view to_string(PromptMode mode) { return mode == PromptMode::standard ? "standard" : "transfer"; }

DatasetId parse_dataset_id(std::string_view text) {
    for (auto id : {DatasetId::waterbirds, DatasetId::celeba, DatasetId::utkface, DatasetId::shapeworld}) {
        if (to_string(id) == text) return id;
    }
    throw Error(ErrorKind::catalog, "unknown dataset '" + std::string(text) + "'");
}

Strategy parse_strategy(std::string_view text) {
    for (auto s : {Strategy::vanilla, Strategy::lora_per_group, Strategy::dreambooth_per_group,
                   Strategy::clustered_dreambooth}) {
        if (to_string(s) == text) return s;
    }
    if (text == "lora_per_group") return Strategy::lora_per_group;
    if (text == "dreambooth_per_group") return Strategy::dreambooth_per_group;
    if (text == "clustered") return Strategy::clustered_dreambooth;
    throw Error(ErrorKind::catalog, "unknown strategy '" + std::string(text) + "'");
}

PromptMode parse_prompt_mode(std::string_view text) {
    if (text == "standard") return PromptMode::standard;
    if (text == "transfer") return PromptMode::transfer;
    throw Error(ErrorKind::catalog, "unknown prompt mode '" + std::string(text) + "'");
}

bool is_dreambooth(Strategy strategy) {
    return strategy == Strategy::dreambooth_per_group || strategy == Strategy::clustered_dreambooth;
}

const DatasetDescriptor& dataset_descriptor(DatasetId id) {
    static const std::array<DatasetDescriptor, 4> kDescriptors{{
        {DatasetId::waterbirds, {"landbird", "waterbird"}, {"land", "water"},
         {{"landbird", "land"}, {"waterbird", "water"}}, ContestedLabel::bias_label, ""},
        {DatasetId::celeba, {"non-blond", "blond"}, {"male", "female"},
         {{"non-blond", "male"}, {"blond", "female"}}, ContestedLabel::bias_label, "grayscale"},
        {DatasetId::utkface, {"male", "female"}, {"adult", "child"},
         {{"male", "child"}, {"female", "adult"}}, ContestedLabel::class_label, "grayscale"},
        {DatasetId::shapeworld, {"square", "cross"}, {"warm", "cool"},
         {{"square", "warm"}, {"cross", "cool"}}, ContestedLabel::bias_label, ""},
    }};
    return kDescriptors[static_cast<std::size_t>(id)];
}

std::string PromptSpec::full_negative() const {
    if (negative.empty()) return default_negative;
    if (default_negative.empty()) return negative;
    return negative + ", " + default_negative;
}

namespace {

constexpr std::string_view kClassSlot = "{class-label}";
constexpr std::string_view kBiasSlot = "{bias-label}";

enum class Family { vanilla, finetuned, dreambooth };

struct Template {
    std::string positive;
    std::string negative;
};

Template catalog_template(DatasetId dataset, Family family, const GroupKey& group, PromptMode mode) {
    switch (dataset) {
        case DatasetId::waterbirds:
            switch (family) {
                case Family::vanilla: return {"photo of a {class-label} on {bias-label}.", ""};
                case Family::finetuned: return {"Photo of a {class-label} on {bias-label}", ""};
                case Family::dreambooth: return {"photo of a [V] bird", ""};
            }
            break;
        case DatasetId::utkface:
            switch (family) {
                case Family::vanilla: return {"photo of a {class-label} {bias-label}.", ""};
                case Family::finetuned:
                    // The published transfer prompt reads "who is an child"; kept verbatim.
                    if (mode == PromptMode::transfer) return {"Photo of a {class-label} person who is an {bias-label}", ""};
                    return {"Photo of a {class-label} person who is a {bias-label}", ""};
                case Family::dreambooth: return {"photo of a [V] {class-label} person", ""};
            }
            break;
        case DatasetId::celeba: {
            const bool blond = group.class_label == "blond";
            switch (family) {
                case Family::vanilla:
                    if (blond) return {"photo of a {bias-label} person with blond hair", ""};
                    return {"photo of a {bias-label} person", "blond hair"};
                case Family::finetuned:
                    if (blond) return {"Photo of a {bias-label} person with blond hair", ""};
                    return {"Photo of a non-blond {bias-label} person", ""};
                case Family::dreambooth:
                    if (blond) return {"photo of a [V] person with blond hair", ""};
                    return {"photo of a [V] person", "blond hair"};
            }
            break;
        }
        case DatasetId::shapeworld:
            switch (family) {
                case Family::vanilla: return {"photo of a {class-label} on a {bias-label} background.", ""};
                case Family::finetuned: return {"Photo of a {class-label} on {bias-label}", ""};
                case Family::dreambooth: return {"photo of a [V] {class-label}", ""};
            }
            break;
    }
    throw Error(ErrorKind::catalog, "no template for dataset " + std::string(to_string(dataset)));
}

void replace_all(std::string& text, std::string_view from, std::string_view to) {
    for (auto pos = text.find(from); pos != std::string::npos; pos = text.find(from, pos + to.size())) {
        text.replace(pos, from.size(), to);
    }
}

std::string opposite_label(const std::vector<std::string>& labels, const std::string& label, const std::string& fallback) {
    if (labels.size() == 2) return labels[0] == label ? labels[1] : labels[0];
    if (fallback != label) return fallback;
    for (const auto& l : labels) {
        if (l != label) return l;
    }
    return label;
}

}  // namespace

PromptSpec render_prompts(DatasetId dataset, Strategy strategy, const GroupKey& group, PromptMode mode) {
    const auto& desc = dataset_descriptor(dataset);
    auto known = [](const std::vector<std::string>& v, const std::string& s) {
        return std::find(v.begin(), v.end(), s) != v.end();
    };
    if (!known(desc.classes, group.class_label) || !known(desc.biases, group.bias_label)) {
        throw Error(ErrorKind::catalog, "group " + group.to_string() + " is not in the " +
                                            std::string(to_string(dataset)) + " catalog");
    }

    // Vanilla prompts are unchanged in severe-bias runs.
    const bool transfer = mode == PromptMode::transfer && strategy != Strategy::vanilla;
    Family family = Family::finetuned;
    if (strategy == Strategy::vanilla) family = Family::vanilla;
    if (is_dreambooth(strategy) && !transfer) family = Family::dreambooth;

    Template t = catalog_template(dataset, family, group, transfer ? PromptMode::transfer : PromptMode::standard);
    PromptSpec spec;
    spec.default_negative = desc.default_negative;
    if (transfer) {
        const bool bias_contested = desc.contested == ContestedLabel::bias_label;
        const std::string slot(bias_contested ? kBiasSlot : kClassSlot);
        replace_all(t.positive, slot, "((" + slot + "))");
        spec.emphasis.insert(slot);
        std::string opposite;
        if (bias_contested) {
            opposite = opposite_label(desc.biases, group.bias_label, desc.aligned_bias.at(group.class_label));
        } else {
            std::string source_class = group.class_label;
            for (const auto& [y, a] : desc.aligned_bias) {
                if (a == group.bias_label) source_class = y;
            }
            opposite = opposite_label(desc.classes, group.class_label, source_class);
        }
        std::string emphasized = "((" + opposite + "))";
        t.negative = t.negative.empty() ? emphasized : t.negative + ", " + emphasized;
    }
    spec.positive_template = t.positive;
    spec.negative_template = t.negative;
    spec.positive = t.positive;
    spec.negative = t.negative;
    for (auto* s : {&spec.positive, &spec.negative}) {
        replace_all(*s, kClassSlot, group.class_label);
        replace_all(*s, kBiasSlot, group.bias_label);
    }
    return spec;
}

std::string render_catalog() {
    std::string out;
    for (auto dataset : {DatasetId::waterbirds, DatasetId::celeba, DatasetId::utkface, DatasetId::shapeworld}) {
        const auto& desc = dataset_descriptor(dataset);
        for (auto strategy : {Strategy::vanilla, Strategy::lora_per_group, Strategy::dreambooth_per_group,
                              Strategy::clustered_dreambooth}) {
            for (const auto& y : desc.classes) {
                for (const auto& a : desc.biases) {
                    for (auto mode : {PromptMode::standard, PromptMode::transfer}) {
                        auto spec = render_prompts(dataset, strategy, {y, a}, mode);
                        out += std::string(to_string(dataset)) + "|" + std::string(to_string(strategy)) + "|" + y + "|" +
                               a + "|" + std::string(to_string(mode)) + "\t" + spec.positive + "\t" + spec.negative +
                               "\t" + spec.full_negative() + "\n";
                    }
                }
            }
        }
    }
    return out;
}

}  // namespace fairgen
