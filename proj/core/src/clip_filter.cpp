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

#include "fairgen/clip_filter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "fairgen/error.hpp"
#include "fairgen/hash.hpp"
#include "internal/text_io.hpp"

namespace fairgen {

void FilterConfig::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorKind::config, "alpha must lie in [0, 1]");
    if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) throw Error(ErrorKind::config, "keep_fraction must lie in (0, 1]");
}

std::string label_prompt(std::string_view class_label) { return "Photo of a " + std::string(class_label); }

namespace {

Embedding embed_item(const DatasetItem& item, const EmbeddingBackend& backend) {
    if (item.image.empty()) {
        throw Error(ErrorKind::evaluation, "scoring failed for item " + item.id + ": no decoded pixels");
    }
    try {
        return backend.embed_image(item.image);
    } catch (const std::exception& e) {
        throw Error(ErrorKind::evaluation, "scoring failed for item " + item.id + ": " + e.what());
    }
}

}  // namespace

double clip_label_score(const DatasetItem& item, std::string_view class_label, const EmbeddingBackend& backend) {
    return cosine_similarity(embed_item(item, backend), backend.embed_text(label_prompt(class_label)));
}

double clip_centroid_score(const DatasetItem& item, const GroupEmbeddingStats& stats, const EmbeddingBackend& backend) {
    if (stats.count == 0) throw Error(ErrorKind::empty_input, "centroid of an empty group");
    return cosine_similarity(embed_item(item, backend), stats.centroid);
}

double combined_score(double label, std::optional<double> centroid, const FilterConfig& cfg) {
    const double alpha = cfg.effective_alpha();
    if (!centroid) {
        if (alpha != 1.0) throw Error(ErrorKind::config, "centroid term missing with alpha < 1; use severe mode");
        return label;
    }
    if (alpha == 1.0) return label;
    return alpha * label + (1.0 - alpha) * *centroid;
}

std::map<GroupKey, GroupEmbeddingStats> real_group_centroids(const GroupedDataset& real,
                                                             const std::map<std::string, Embedding>& embeddings) {
    std::map<GroupKey, GroupEmbeddingStats> out;
    for (const auto& g : real.groups()) {
        std::vector<Embedding> es;
        for (auto i : real.group_members(g)) {
            auto it = embeddings.find(real[i].id);
            if (it == embeddings.end()) throw Error(ErrorKind::integrity, "no embedding for item " + real[i].id);
            es.push_back(it->second);
        }
        if (!es.empty()) out[g] = group_centroid(es, g);
    }
    return out;
}

std::map<GroupKey, std::vector<ScoredCandidate>> score_candidates(
    const GroupedDataset& synth, const std::map<GroupKey, GroupEmbeddingStats>& centroids,
    const EmbeddingBackend& backend, const FilterConfig& cfg) {
    cfg.validate();
    const bool need_centroid = cfg.effective_alpha() < 1.0;
    std::map<GroupKey, std::vector<ScoredCandidate>> out;
    std::map<std::string, Embedding> text_cache;
    for (const auto& item : synth.items()) {
        ScoredCandidate c;
        c.item = item;
        const auto e = embed_item(item, backend);
        auto t = text_cache.find(item.class_label);
        if (t == text_cache.end()) t = text_cache.emplace(item.class_label, backend.embed_text(label_prompt(item.class_label))).first;
        c.clip_label = cosine_similarity(e, t->second);
        auto cent = centroids.find(item.group());
        if (cent != centroids.end() && cent->second.count > 0) {
            c.clip_centroid = cosine_similarity(e, cent->second.centroid);
        } else if (need_centroid) {
            throw Error(ErrorKind::config, "no real centroid for group " + item.group().to_string() +
                                               " and alpha < 1; use severe mode");
        }
        c.clip_score = combined_score(c.clip_label, c.clip_centroid, cfg);
        out[item.group()].push_back(std::move(c));
    }
    return out;
}

std::size_t retained_count(std::size_t n, double keep_fraction) {
    if (n == 0) return 0;
    auto k = static_cast<std::size_t>(std::floor(double(n) * keep_fraction + 1e-9));
    return std::clamp<std::size_t>(k, 1, n);
}

std::vector<ScoredCandidate> select_top_group(const std::vector<ScoredCandidate>& candidates, const FilterConfig& cfg,
                                              std::uint64_t group_salt) {
    cfg.validate();
    if (candidates.empty()) throw Error(ErrorKind::selection, "no candidates to select from");
    const std::size_t keep = retained_count(candidates.size(), cfg.keep_fraction);
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    if (cfg.selection == SelectionMethod::random) {
        std::mt19937_64 rng(mix64(cfg.seed ^ group_salt));
        std::shuffle(order.begin(), order.end(), rng);
    } else {
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (candidates[a].clip_score != candidates[b].clip_score) return candidates[a].clip_score > candidates[b].clip_score;
            return candidates[a].item.id < candidates[b].item.id;
        });
    }
    order.resize(keep);
    std::sort(order.begin(), order.end());
    std::vector<ScoredCandidate> out;
    out.reserve(keep);
    for (auto i : order) out.push_back(candidates[i]);
    return out;
}

std::map<GroupKey, std::vector<ScoredCandidate>> select_top(
    const std::map<GroupKey, std::vector<ScoredCandidate>>& candidates, const FilterConfig& cfg) {
    std::map<GroupKey, std::vector<ScoredCandidate>> out;
    for (const auto& [g, cands] : candidates) {
        if (cands.empty()) throw Error(ErrorKind::selection, "group " + g.to_string() + " has no candidates");
        out[g] = select_top_group(cands, cfg, fnv1a64(g.to_string()));
    }
    return out;
}

GroupedDataset filtered_dataset(const GroupedDataset& synth,
                                const std::map<GroupKey, std::vector<ScoredCandidate>>& retained) {
    std::set<std::string> keep;
    for (const auto& [g, cands] : retained) {
        for (const auto& c : cands) keep.insert(c.item.id);
    }
    std::vector<DatasetItem> items;
    for (const auto& item : synth.items()) {
        if (keep.count(item.id)) items.push_back(item);
    }
    return synth.with_items(std::move(items));
}

std::string format_scored_manifest(const GroupedDataset& synth,
                                   const std::map<GroupKey, std::vector<ScoredCandidate>>& scored,
                                   const std::map<GroupKey, std::vector<ScoredCandidate>>& retained) {
    std::map<std::string, const ScoredCandidate*> by_id;
    for (const auto& [g, cands] : scored) {
        for (const auto& c : cands) by_id[c.item.id] = &c;
    }
    std::set<std::string> kept;
    for (const auto& [g, cands] : retained) {
        for (const auto& c : cands) kept.insert(c.item.id);
    }
    ExtraColumns extra;
    extra.names = {"clip_label", "clip_centroid", "clip_score", "retained"};
    for (const auto& item : synth.items()) {
        auto it = by_id.find(item.id);
        if (it == by_id.end()) {
            extra.values.push_back({"", "", "", "false"});
            continue;
        }
        const auto& c = *it->second;
        extra.values.push_back({internal::format_double(c.clip_label),
                                c.clip_centroid ? internal::format_double(*c.clip_centroid) : std::string(),
                                internal::format_double(c.clip_score), kept.count(item.id) ? "true" : "false"});
    }
    return format_manifest(synth, ManifestFormat::csv, &extra);
}

}  // namespace fairgen
