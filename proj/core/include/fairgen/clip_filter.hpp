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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fairgen/embedder.hpp"
#include "fairgen/group_data.hpp"

namespace fairgen {

enum class FilterMode { standard, severe };
enum class SelectionMethod { score, random };

struct FilterConfig {
    double alpha = 0.5;
    double keep_fraction = 0.75;
    FilterMode mode = FilterMode::standard;
    SelectionMethod selection = SelectionMethod::score;
    std::uint64_t seed = 0;  // random selection only

    /// alpha as actually applied: severe mode forces 1.
    double effective_alpha() const noexcept { return mode == FilterMode::severe ? 1.0 : alpha; }
    void validate() const;
};

struct ScoredCandidate {
    DatasetItem item;
    double clip_label = 0.0;
    std::optional<double> clip_centroid;
    double clip_score = 0.0;
};

/// "Photo of a {c}"
std::string label_prompt(std::string_view class_label);

double clip_label_score(const DatasetItem& item, std::string_view class_label, const EmbeddingBackend& backend);
double clip_centroid_score(const DatasetItem& item, const GroupEmbeddingStats& stats, const EmbeddingBackend& backend);

/// alpha * label + (1 - alpha) * centroid. A missing centroid is only allowed
/// when the effective alpha is 1.
double combined_score(double label, std::optional<double> centroid, const FilterConfig& cfg);

/// Centroids of the real groups, from precomputed embeddings.
std::map<GroupKey, GroupEmbeddingStats> real_group_centroids(const GroupedDataset& real,
                                                             const std::map<std::string, Embedding>& embeddings);

/// Scores every synthetic item against its own group. Groups missing from
/// centroids get no centroid term.
std::map<GroupKey, std::vector<ScoredCandidate>> score_candidates(
    const GroupedDataset& synth, const std::map<GroupKey, GroupEmbeddingStats>& centroids,
    const EmbeddingBackend& backend, const FilterConfig& cfg);

/// Number retained out of n: floor(n * keep), at least 1.
std::size_t retained_count(std::size_t n, double keep_fraction);

/// Per group: the highest scores (ties by item id) or, for random selection, a
/// seeded uniform subset. Retained candidates keep their input order.
std::vector<ScoredCandidate> select_top_group(const std::vector<ScoredCandidate>& candidates, const FilterConfig& cfg,
                                              std::uint64_t group_salt = 0);

std::map<GroupKey, std::vector<ScoredCandidate>> select_top(
    const std::map<GroupKey, std::vector<ScoredCandidate>>& candidates, const FilterConfig& cfg);

/// Filtered dataset with the same label metadata as the synthetic manifest.
GroupedDataset filtered_dataset(const GroupedDataset& synth,
                                const std::map<GroupKey, std::vector<ScoredCandidate>>& retained);

/// Scored manifest: the synthetic manifest plus clip_label, clip_centroid,
/// clip_score and retained columns.
std::string format_scored_manifest(const GroupedDataset& synth,
                                   const std::map<GroupKey, std::vector<ScoredCandidate>>& scored,
                                   const std::map<GroupKey, std::vector<ScoredCandidate>>& retained);

}  // namespace fairgen
