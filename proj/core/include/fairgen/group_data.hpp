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

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fairgen/image.hpp"

namespace fairgen {

enum class Split { train, val, test };
enum class Origin { real, synthetic };
enum class Alignment { aligned, conflicting };

std::string_view to_string(Split split);
std::string_view to_string(Origin origin);
std::string_view to_string(Alignment alignment);
Split parse_split(std::string_view text);
Origin parse_origin(std::string_view text);

/// The joint cell g = (y, a). Ordering is lexicographic on the label strings;
/// datasets expose their own declared order through GroupedDataset::groups().
struct GroupKey {
    std::string class_label;
    std::string bias_label;

    auto operator<=>(const GroupKey&) const = default;

    /// "class|bias"
    std::string to_string() const;
    static GroupKey parse(std::string_view text);
};

/// Where a synthetic item came from. Absent for real items.
struct Provenance {
    std::string strategy;
    std::string source_group;
    int cluster_index = -1;
    std::string prompt;
    std::string negative_prompt;
    std::uint64_t seed = 0;

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct DatasetItem {
    std::string id;
    /// File path, or an inline payload produced by encode_inline_image().
    std::string image_ref;
    /// Decoded pixels for inline payloads; empty for path references.
    Image image;
    std::string class_label;
    std::string bias_label;
    Split split = Split::train;
    Origin origin = Origin::real;
    std::optional<Provenance> provenance;

    GroupKey group() const { return {class_label, bias_label}; }

    /// Stores the pixels and sets image_ref to the matching inline payload.
    void set_inline_image(Image img);
};

/// Inline payload: "f64b64:<h>x<w>x<c>:<base64 of little-endian doubles>".
std::string encode_inline_image(const Image& image);
std::optional<Image> decode_inline_image(std::string_view ref);

using AlignmentMap = std::map<GroupKey, Alignment>;

/// Marks (y, aligned_bias[y]) aligned and every other bias of y conflicting.
AlignmentMap alignment_from_aligned_bias(const std::vector<std::string>& classes,
                                         const std::vector<std::string>& biases,
                                         const std::map<std::string, std::string>& aligned_bias);

class GroupedDataset {
public:
    GroupedDataset() = default;

    /// Validates label membership, id uniqueness and alignment coverage.
    GroupedDataset(std::vector<DatasetItem> items, std::vector<std::string> classes, std::vector<std::string> biases,
                   AlignmentMap alignment);

    const std::vector<DatasetItem>& items() const noexcept { return items_; }
    const DatasetItem& operator[](std::size_t i) const { return items_[i]; }
    std::size_t size() const noexcept { return items_.size(); }
    bool empty() const noexcept { return items_.empty(); }

    const std::vector<std::string>& classes() const noexcept { return classes_; }
    const std::vector<std::string>& biases() const noexcept { return biases_; }
    const AlignmentMap& alignment_map() const noexcept { return alignment_; }
    Alignment alignment(const GroupKey& group) const;

    /// Present groups in declared (class, bias) order.
    const std::vector<GroupKey>& groups() const noexcept { return group_order_; }
    const std::vector<std::size_t>& group_members(const GroupKey& group) const;
    std::size_t group_size(const GroupKey& group) const;
    std::map<GroupKey, std::size_t> group_sizes() const;

    int class_index(std::string_view class_label) const;
    int group_index_of(const GroupKey& group) const;

    GroupedDataset with_items(std::vector<DatasetItem> items) const;
    GroupedDataset filter_split(Split split) const;
    GroupedDataset subset(std::span<const std::size_t> indices) const;

private:
    void build_index();

    std::vector<DatasetItem> items_;
    std::vector<std::string> classes_;
    std::vector<std::string> biases_;
    AlignmentMap alignment_;
    std::vector<GroupKey> group_order_;
    std::map<GroupKey, std::vector<std::size_t>> index_;
};

enum class ManifestFormat { automatic, csv, jsonl };

/// Column mapping plus optional label metadata. When classes/biases are left
/// empty they are inferred in first-appearance order; when aligned_bias is
/// empty each class's majority bias is taken as aligned.
struct ManifestSchema {
    std::string id = "id";
    std::string image_ref = "image_ref";
    std::string class_label = "class_label";
    std::string bias_label = "bias_label";
    std::string split = "split";
    std::string origin = "origin";
    std::vector<std::string> classes;
    std::vector<std::string> biases;
    std::map<std::string, std::string> aligned_bias;
    ManifestFormat format = ManifestFormat::automatic;
};

GroupedDataset load_manifest(const std::filesystem::path& path, const ManifestSchema& schema = {});
GroupedDataset parse_manifest(std::string_view text, ManifestFormat format, const ManifestSchema& schema = {});

/// Extra per-item columns appended after the standard ones (scored manifests).
struct ExtraColumns {
    std::vector<std::string> names;
    std::vector<std::vector<std::string>> values;  // one row per item
};

std::string format_manifest(const GroupedDataset& ds, ManifestFormat format = ManifestFormat::csv,
                            const ExtraColumns* extra = nullptr);
void save_manifest(const GroupedDataset& ds, const std::filesystem::path& path, const ExtraColumns* extra = nullptr);

/// Either explicit per-group targets or a per-class bias ratio.
struct SplitSpec {
    std::map<GroupKey, std::size_t> target_counts;
    std::optional<double> bias_ratio;
    std::uint64_t seed = 0;
};

/// Largest conflicting count k with aligned / (aligned + k) >= ratio, floored
/// at 1 unless ratio == 1.
std::size_t conflicting_count_for_ratio(std::size_t aligned, double ratio);

GroupedDataset construct_biased_split(const GroupedDataset& pool, const SplitSpec& spec);

std::map<std::string, double> compute_bias_ratio(const GroupedDataset& ds);

enum class BalanceMode { group_uniform, class_uniform };

/// Infinite stream of balanced batches of item indices. Each stratum (group or
/// class) receives floor(B/K) draws per batch; the B mod K leftover slots go to
/// strata chosen uniformly without replacement. Draws within a stratum are
/// uniform with replacement.
class BalancedBatchSampler {
public:
    BalancedBatchSampler(const GroupedDataset& ds, std::size_t batch_size, BalanceMode mode, std::uint64_t seed);

    std::vector<std::size_t> next();
    std::size_t strata() const noexcept { return strata_.size(); }

private:
    std::vector<std::vector<std::size_t>> strata_;
    std::size_t batch_size_;
    std::mt19937_64 rng_;
};

std::vector<std::vector<std::size_t>> group_uniform_batches(const GroupedDataset& ds, std::size_t batch_size,
                                                            std::size_t num_batches, std::uint64_t seed,
                                                            BalanceMode mode = BalanceMode::group_uniform);

}  // namespace fairgen
