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

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "fairgen/group_data.hpp"

namespace fairgen {

enum class DatasetId { waterbirds, celeba, utkface, shapeworld };
enum class Strategy { vanilla, lora_per_group, dreambooth_per_group, clustered_dreambooth };
enum class PromptMode { standard, transfer };
/// Which label a transfer prompt emphasizes (and negates).
enum class ContestedLabel { class_label, bias_label };

std::string_view to_string(DatasetId id);
std::string_view to_string(Strategy strategy);
std::string_view to_string(PromptMode mode);
DatasetId parse_dataset_id(std::string_view text);
Strategy parse_strategy(std::string_view text);
PromptMode parse_prompt_mode(std::string_view text);

bool is_dreambooth(Strategy strategy);

/// Label vocabulary and bias structure of a catalog dataset.
struct DatasetDescriptor {
    DatasetId id;
    std::vector<std::string> classes;
    std::vector<std::string> biases;
    std::map<std::string, std::string> aligned_bias;  // class -> aligned bias
    ContestedLabel contested = ContestedLabel::bias_label;
    /// Appended to every negative prompt at generation time (facial datasets).
    std::string default_negative;
};

const DatasetDescriptor& dataset_descriptor(DatasetId id);

/// A prompt before and after placeholder substitution. Templates use
/// {class-label}, {bias-label} and [V].
struct PromptSpec {
    std::string positive_template;
    std::string negative_template;
    std::set<std::string> emphasis;
    std::string positive;
    std::string negative;
    std::string default_negative;

    /// negative joined with the dataset-level default fragment.
    std::string full_negative() const;
};

/// Renders the catalog prompt for one group.
///
/// Transfer mode wraps the contested label in double parentheses and puts the
/// opposite contested label, also double-parenthesized, in the negative
/// prompt. Dreambooth variants drop the learnt [V] token in transfer mode and
/// fall back to the finetuned-model template, which names both labels.
/// Vanilla prompts are the same in both modes.
PromptSpec render_prompts(DatasetId dataset, Strategy strategy, const GroupKey& group, PromptMode mode);

/// Every (dataset, strategy, group, mode) combination in the catalog, one
/// line each, formatted as "dataset|strategy|class|bias|mode\tpositive\tnegative".
std::string render_catalog();

}  // namespace fairgen
