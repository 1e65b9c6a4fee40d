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

#include "fairgen/group_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fairgen/error.hpp"
#include "internal/text_io.hpp"

namespace fairgen {

using internal::format_double;

std::string_view to_string(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "train";
}

std::string_view to_string(Origin origin) { return origin == Origin::real ? "real" : "synthetic"; }

std::string_view to_string(Alignment alignment) {
    return alignment == Alignment::aligned ? "aligned" : "conflicting";
}

Split parse_split(std::string_view text) {
    if (text == "train") return Split::train;
    if (text == "val" || text == "valid" || text == "validation") return Split::val;
    if (text == "test") return Split::test;
    throw Error(ErrorKind::parse, "unknown split tag '" + std::string(text) + "'");
}

Origin parse_origin(std::string_view text) {
    if (text.empty() || text == "real") return Origin::real;
    if (text == "synthetic") return Origin::synthetic;
    throw Error(ErrorKind::parse, "unknown origin '" + std::string(text) + "'");
}

std::string GroupKey::to_string() const { return class_label + "|" + bias_label; }

GroupKey GroupKey::parse(std::string_view text) {
    auto bar = text.find('|');
    if (bar == std::string_view::npos) throw Error(ErrorKind::parse, "group key needs 'class|bias': " + std::string(text));
    return {std::string(text.substr(0, bar)), std::string(text.substr(bar + 1))};
}

// ---------------------------------------------------------------------------
// Inline image payloads

namespace {
constexpr std::string_view kInlinePrefix = "f64b64:";
}

std::string encode_inline_image(const Image& image) {
    std::string bytes(image.pixels.size() * sizeof(double), '\0');
    std::memcpy(bytes.data(), image.pixels.data(), bytes.size());
    std::ostringstream out;
    out << kInlinePrefix << image.height << 'x' << image.width << 'x' << image.channels << ':'
        << internal::base64_encode(bytes);
    return out.str();
}

std::optional<Image> decode_inline_image(std::string_view ref) {
    if (!ref.starts_with(kInlinePrefix)) return std::nullopt;
    ref.remove_prefix(kInlinePrefix.size());
    auto colon = ref.find(':');
    if (colon == std::string_view::npos) throw Error(ErrorKind::parse, "inline image without shape header");
    std::string_view shape = ref.substr(0, colon);
    int dims[3];
    for (int i = 0; i < 3; ++i) {
        auto x = shape.find('x');
        auto part = i < 2 ? shape.substr(0, x) : shape;
        auto v = internal::parse_int(part);
        if (!v || *v <= 0 || (i < 2 && x == std::string_view::npos)) {
            throw Error(ErrorKind::parse, "bad inline image shape '" + std::string(ref.substr(0, colon)) + "'");
        }
        dims[i] = static_cast<int>(*v);
        if (i < 2) shape.remove_prefix(x + 1);
    }
    auto bytes = internal::base64_decode(ref.substr(colon + 1));
    Image img(dims[0], dims[1], dims[2]);
    if (!bytes || bytes->size() != img.pixels.size() * sizeof(double)) {
        throw Error(ErrorKind::parse, "inline image payload does not match its shape");
    }
    std::memcpy(img.pixels.data(), bytes->data(), bytes->size());
    return img;
}

void DatasetItem::set_inline_image(Image img) {
    image_ref = encode_inline_image(img);
    image = std::move(img);
}

AlignmentMap alignment_from_aligned_bias(const std::vector<std::string>& classes,
                                         const std::vector<std::string>& biases,
                                         const std::map<std::string, std::string>& aligned_bias) {
    AlignmentMap out;
    for (const auto& y : classes) {
        auto it = aligned_bias.find(y);
        if (it == aligned_bias.end()) throw Error(ErrorKind::integrity, "no aligned bias declared for class " + y);
        if (std::find(biases.begin(), biases.end(), it->second) == biases.end()) {
            throw Error(ErrorKind::integrity, "aligned bias '" + it->second + "' is not a declared bias label");
        }
        for (const auto& a : biases) out[{y, a}] = a == it->second ? Alignment::aligned : Alignment::conflicting;
    }
    return out;
}

// ---------------------------------------------------------------------------
// GroupedDataset

GroupedDataset::GroupedDataset(std::vector<DatasetItem> items, std::vector<std::string> classes,
                               std::vector<std::string> biases, AlignmentMap alignment)
    : items_(std::move(items)), classes_(std::move(classes)), biases_(std::move(biases)), alignment_(std::move(alignment)) {
    std::set<std::string_view> seen;
    for (const auto& item : items_) {
        if (!seen.insert(item.id).second) throw Error(ErrorKind::integrity, "duplicate item id '" + item.id + "'");
    }
    build_index();
}

void GroupedDataset::build_index() {
    index_.clear();
    group_order_.clear();
    for (std::size_t i = 0; i < items_.size(); ++i) {
        const auto& item = items_[i];
        if (std::find(classes_.begin(), classes_.end(), item.class_label) == classes_.end()) {
            throw Error(ErrorKind::integrity, "item '" + item.id + "' has undeclared class '" + item.class_label + "'");
        }
        if (std::find(biases_.begin(), biases_.end(), item.bias_label) == biases_.end()) {
            throw Error(ErrorKind::integrity, "item '" + item.id + "' has undeclared bias '" + item.bias_label + "'");
        }
        index_[item.group()].push_back(i);
    }
    for (const auto& y : classes_) {
        for (const auto& a : biases_) {
            GroupKey g{y, a};
            if (!index_.contains(g)) continue;
            if (!alignment_.contains(g)) throw Error(ErrorKind::integrity, "alignment map misses group " + g.to_string());
            group_order_.push_back(std::move(g));
        }
    }
}

Alignment GroupedDataset::alignment(const GroupKey& group) const {
    auto it = alignment_.find(group);
    if (it == alignment_.end()) throw Error(ErrorKind::integrity, "no alignment for group " + group.to_string());
    return it->second;
}

const std::vector<std::size_t>& GroupedDataset::group_members(const GroupKey& group) const {
    static const std::vector<std::size_t> kEmpty;
    auto it = index_.find(group);
    return it == index_.end() ? kEmpty : it->second;
}

std::size_t GroupedDataset::group_size(const GroupKey& group) const { return group_members(group).size(); }

std::map<GroupKey, std::size_t> GroupedDataset::group_sizes() const {
    std::map<GroupKey, std::size_t> out;
    for (const auto& [g, members] : index_) out[g] = members.size();
    return out;
}

int GroupedDataset::class_index(std::string_view class_label) const {
    auto it = std::find(classes_.begin(), classes_.end(), class_label);
    if (it == classes_.end()) throw Error(ErrorKind::integrity, "unknown class '" + std::string(class_label) + "'");
    return static_cast<int>(it - classes_.begin());
}

int GroupedDataset::group_index_of(const GroupKey& group) const {
    auto it = std::find(group_order_.begin(), group_order_.end(), group);
    return it == group_order_.end() ? -1 : static_cast<int>(it - group_order_.begin());
}

GroupedDataset GroupedDataset::with_items(std::vector<DatasetItem> items) const {
    return GroupedDataset(std::move(items), classes_, biases_, alignment_);
}

GroupedDataset GroupedDataset::filter_split(Split split) const {
    std::vector<DatasetItem> out;
    for (const auto& item : items_) {
        if (item.split == split) out.push_back(item);
    }
    return with_items(std::move(out));
}

GroupedDataset GroupedDataset::subset(std::span<const std::size_t> indices) const {
    std::vector<DatasetItem> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(items_.at(i));
    return with_items(std::move(out));
}

// ---------------------------------------------------------------------------
// Manifest I/O

namespace {

const std::vector<std::string> kProvenanceColumns{"strategy", "source_group", "cluster_index",
                                                  "prompt", "negative_prompt", "seed"};

struct RawRow {
    std::string id, image_ref, class_label, bias_label, split, origin;
    std::optional<Provenance> provenance;
};

Provenance parse_provenance(const std::map<std::string, std::string>& fields) {
    Provenance p;
    p.strategy = fields.at("strategy");
    p.source_group = fields.at("source_group");
    auto ci = internal::parse_int(fields.at("cluster_index"));
    auto seed = internal::parse_uint(fields.at("seed"));
    if (!ci || !seed) throw Error(ErrorKind::parse, "bad provenance numbers");
    p.cluster_index = static_cast<int>(*ci);
    p.seed = *seed;
    p.prompt = fields.at("prompt");
    p.negative_prompt = fields.at("negative_prompt");
    return p;
}

GroupedDataset build_dataset(std::vector<RawRow> rows, const ManifestSchema& schema) {
    std::vector<std::string> classes = schema.classes;
    std::vector<std::string> biases = schema.biases;
    const bool infer_classes = classes.empty();
    const bool infer_biases = biases.empty();
    std::vector<DatasetItem> items;
    items.reserve(rows.size());
    for (auto& row : rows) {
        if (infer_classes && std::find(classes.begin(), classes.end(), row.class_label) == classes.end()) {
            classes.push_back(row.class_label);
        }
        if (infer_biases && std::find(biases.begin(), biases.end(), row.bias_label) == biases.end()) {
            biases.push_back(row.bias_label);
        }
        DatasetItem item;
        item.id = std::move(row.id);
        item.image_ref = std::move(row.image_ref);
        if (auto img = decode_inline_image(item.image_ref)) item.image = std::move(*img);
        item.class_label = std::move(row.class_label);
        item.bias_label = std::move(row.bias_label);
        item.split = parse_split(row.split);
        item.origin = parse_origin(row.origin);
        item.provenance = std::move(row.provenance);
        items.push_back(std::move(item));
    }

    std::map<std::string, std::string> aligned = schema.aligned_bias;
    if (aligned.empty()) {
        for (const auto& y : classes) {
            std::map<std::string, std::size_t> counts;
            for (const auto& item : items) {
                if (item.class_label == y) ++counts[item.bias_label];
            }
            std::string best = biases.empty() ? std::string() : biases.front();
            std::size_t best_count = 0;
            for (const auto& a : biases) {
                if (counts[a] > best_count) {
                    best = a;
                    best_count = counts[a];
                }
            }
            aligned[y] = best;
        }
    }
    auto alignment = alignment_from_aligned_bias(classes, biases, aligned);
    return GroupedDataset(std::move(items), std::move(classes), std::move(biases), std::move(alignment));
}

std::vector<RawRow> parse_csv_rows(std::string_view text, const ManifestSchema& schema) {
    auto table = internal::csv_parse(text);
    if (table.empty()) throw Error(ErrorKind::schema, "manifest has no header row");
    const auto& header = table.front();
    auto column = [&](const std::string& name, bool required) -> int {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            if (required) throw Error(ErrorKind::schema, "manifest is missing column '" + name + "'");
            return -1;
        }
        return static_cast<int>(it - header.begin());
    };
    const int c_id = column(schema.id, true);
    const int c_ref = column(schema.image_ref, true);
    const int c_class = column(schema.class_label, true);
    const int c_bias = column(schema.bias_label, true);
    const int c_split = column(schema.split, true);
    const int c_origin = column(schema.origin, false);
    std::map<std::string, int> prov_cols;
    for (const auto& name : kProvenanceColumns) prov_cols[name] = column(name, false);
    const bool has_prov = std::all_of(prov_cols.begin(), prov_cols.end(), [](const auto& kv) { return kv.second >= 0; });

    std::vector<RawRow> rows;
    rows.reserve(table.size() - 1);
    for (std::size_t r = 1; r < table.size(); ++r) {
        const auto& f = table[r];
        if (f.size() == 1 && f[0].empty()) continue;
        if (f.size() != header.size()) {
            throw Error(ErrorKind::parse, "row " + std::to_string(r) + " has " + std::to_string(f.size()) +
                                              " fields, header has " + std::to_string(header.size()));
        }
        RawRow row{f[c_id], f[c_ref], f[c_class], f[c_bias], f[c_split], c_origin >= 0 ? f[c_origin] : "real", {}};
        if (has_prov && !f[prov_cols["strategy"]].empty()) {
            std::map<std::string, std::string> fields;
            for (const auto& [name, idx] : prov_cols) fields[name] = f[idx];
            row.provenance = parse_provenance(fields);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<RawRow> parse_jsonl_rows(std::string_view text, const ManifestSchema& schema) {
    std::vector<RawRow> rows;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (internal::trim(line).empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": " + e.what());
        }
        auto get = [&](const std::string& key, bool required) -> std::string {
            if (!obj.contains(key)) {
                if (required) throw Error(ErrorKind::schema, "manifest is missing column '" + key + "'");
                return {};
            }
            return obj[key].get<std::string>();
        };
        RawRow row{get(schema.id, true),         get(schema.image_ref, true), get(schema.class_label, true),
                   get(schema.bias_label, true), get(schema.split, true),     get(schema.origin, false), {}};
        if (obj.contains("strategy")) {
            Provenance p;
            p.strategy = obj["strategy"].get<std::string>();
            p.source_group = obj.value("source_group", "");
            p.cluster_index = obj.value("cluster_index", -1);
            p.prompt = obj.value("prompt", "");
            p.negative_prompt = obj.value("negative_prompt", "");
            p.seed = obj.value("seed", std::uint64_t{0});
            row.provenance = std::move(p);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

GroupedDataset parse_manifest(std::string_view text, ManifestFormat format, const ManifestSchema& schema) {
    if (format == ManifestFormat::automatic) {
        auto first = text.find_first_not_of(" \t\r\n");
        format = first != std::string_view::npos && text[first] == '{' ? ManifestFormat::jsonl : ManifestFormat::csv;
    }
    auto rows = format == ManifestFormat::jsonl ? parse_jsonl_rows(text, schema) : parse_csv_rows(text, schema);
    return build_dataset(std::move(rows), schema);
}

GroupedDataset load_manifest(const std::filesystem::path& path, const ManifestSchema& schema) {
    if (!std::filesystem::exists(path)) throw Error(ErrorKind::io, "manifest not found: " + path.string());
    ManifestFormat format = schema.format;
    if (format == ManifestFormat::automatic) {
        auto ext = path.extension().string();
        if (ext == ".jsonl" || ext == ".ndjson") format = ManifestFormat::jsonl;
        if (ext == ".csv") format = ManifestFormat::csv;
    }
    return parse_manifest(internal::read_file(path), format, schema);
}

std::string format_manifest(const GroupedDataset& ds, ManifestFormat format, const ExtraColumns* extra) {
    const bool with_prov = std::any_of(ds.items().begin(), ds.items().end(),
                                       [](const DatasetItem& item) { return item.provenance.has_value(); });
    if (extra && extra->values.size() != ds.size()) {
        throw Error(ErrorKind::integrity, "extra columns do not cover every item");
    }
    std::string out;
    if (format == ManifestFormat::jsonl) {
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const auto& item = ds[i];
            nlohmann::ordered_json obj;
            obj["id"] = item.id;
            obj["image_ref"] = item.image_ref;
            obj["class_label"] = item.class_label;
            obj["bias_label"] = item.bias_label;
            obj["split"] = to_string(item.split);
            obj["origin"] = to_string(item.origin);
            if (item.provenance) {
                obj["strategy"] = item.provenance->strategy;
                obj["source_group"] = item.provenance->source_group;
                obj["cluster_index"] = item.provenance->cluster_index;
                obj["prompt"] = item.provenance->prompt;
                obj["negative_prompt"] = item.provenance->negative_prompt;
                obj["seed"] = item.provenance->seed;
            }
            if (extra) {
                for (std::size_t c = 0; c < extra->names.size(); ++c) obj[extra->names[c]] = extra->values[i][c];
            }
            out += obj.dump();
            out += '\n';
        }
        return out;
    }
    std::vector<std::string> header{"id", "image_ref", "class_label", "bias_label", "split", "origin"};
    if (with_prov) header.insert(header.end(), kProvenanceColumns.begin(), kProvenanceColumns.end());
    if (extra) header.insert(header.end(), extra->names.begin(), extra->names.end());
    out += internal::csv_join(header);
    out += '\n';
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto& item = ds[i];
        std::vector<std::string> fields{item.id,         item.image_ref, item.class_label, item.bias_label,
                                        std::string(to_string(item.split)), std::string(to_string(item.origin))};
        if (with_prov) {
            if (item.provenance) {
                const auto& p = *item.provenance;
                fields.insert(fields.end(), {p.strategy, p.source_group, std::to_string(p.cluster_index), p.prompt,
                                             p.negative_prompt, std::to_string(p.seed)});
            } else {
                fields.insert(fields.end(), kProvenanceColumns.size(), std::string());
            }
        }
        if (extra) fields.insert(fields.end(), extra->values[i].begin(), extra->values[i].end());
        out += internal::csv_join(fields);
        out += '\n';
    }
    return out;
}

void save_manifest(const GroupedDataset& ds, const std::filesystem::path& path, const ExtraColumns* extra) {
    auto format = path.extension() == ".jsonl" ? ManifestFormat::jsonl : ManifestFormat::csv;
    internal::write_file(path, format_manifest(ds, format, extra));
}

// ---------------------------------------------------------------------------
// Biased splits

std::size_t conflicting_count_for_ratio(std::size_t aligned, double ratio) {
    if (!(ratio > 0.0) || ratio > 1.0) throw Error(ErrorKind::config, "bias ratio must lie in (0, 1]");
    if (ratio >= 1.0) return 0;
    const double a = static_cast<double>(aligned);
    auto satisfies = [&](std::size_t k) { return a >= ratio * (a + static_cast<double>(k)); };
    auto k = static_cast<std::size_t>(std::floor(a * (1.0 - ratio) / ratio));
    while (satisfies(k + 1)) ++k;
    while (k > 0 && !satisfies(k)) --k;
    return std::max<std::size_t>(k, 1);
}

namespace {

std::vector<std::size_t> sample_without_replacement(const std::vector<std::size_t>& members, std::size_t k,
                                                    std::mt19937_64& rng) {
    std::vector<std::size_t> pool = members;
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(k);
    return pool;
}

}  // namespace

GroupedDataset construct_biased_split(const GroupedDataset& pool, const SplitSpec& spec) {
    if (spec.bias_ratio.has_value() == !spec.target_counts.empty()) {
        throw Error(ErrorKind::config, "split spec needs exactly one of target_counts or bias_ratio");
    }
    std::map<GroupKey, std::size_t> targets = spec.target_counts;
    if (spec.bias_ratio) {
        const double ratio = *spec.bias_ratio;
        for (const auto& y : pool.classes()) {
            std::size_t aligned = 0;
            std::vector<GroupKey> conflicting;
            for (const auto& a : pool.biases()) {
                GroupKey g{y, a};
                auto it = pool.alignment_map().find(g);
                if (it == pool.alignment_map().end()) continue;
                if (it->second == Alignment::aligned) {
                    aligned += pool.group_size(g);
                    targets[g] = pool.group_size(g);
                } else {
                    conflicting.push_back(g);
                }
            }
            if (aligned == 0) throw Error(ErrorKind::capacity, "class '" + y + "' has no aligned items to anchor the ratio");
            std::size_t want = conflicting.empty() ? 0 : conflicting_count_for_ratio(aligned, ratio);
            std::size_t available = 0;
            for (const auto& g : conflicting) available += pool.group_size(g);
            if (want > available) {
                throw Error(ErrorKind::capacity, "class '" + y + "' needs " + std::to_string(want) +
                                                     " conflicting items but group " + conflicting.front().to_string() +
                                                     " has only " + std::to_string(available));
            }
            // Split the conflicting budget across conflicting groups in
            // proportion to their pool sizes (largest remainder).
            std::vector<std::pair<double, std::size_t>> remainders;
            std::size_t assigned = 0;
            for (std::size_t i = 0; i < conflicting.size(); ++i) {
                double share = available ? double(want) * double(pool.group_size(conflicting[i])) / double(available) : 0.0;
                auto base = static_cast<std::size_t>(std::floor(share));
                targets[conflicting[i]] = base;
                assigned += base;
                remainders.emplace_back(share - double(base), i);
            }
            std::stable_sort(remainders.begin(), remainders.end(),
                             [](const auto& l, const auto& r) { return l.first > r.first; });
            for (std::size_t i = 0; assigned < want; ++i, ++assigned) ++targets[conflicting[remainders[i].second]];
        }
    }

    std::mt19937_64 rng(spec.seed);
    std::vector<std::size_t> chosen;
    for (const auto& y : pool.classes()) {
        for (const auto& a : pool.biases()) {
            GroupKey g{y, a};
            auto it = targets.find(g);
            if (it == targets.end() || it->second == 0) continue;
            const auto& members = pool.group_members(g);
            if (members.size() < it->second) {
                throw Error(ErrorKind::capacity, "group " + g.to_string() + " has " + std::to_string(members.size()) +
                                                     " items, target is " + std::to_string(it->second));
            }
            auto picked = sample_without_replacement(members, it->second, rng);
            chosen.insert(chosen.end(), picked.begin(), picked.end());
        }
    }
    for (const auto& [g, count] : targets) {
        if (count > 0 && std::find(pool.classes().begin(), pool.classes().end(), g.class_label) == pool.classes().end()) {
            throw Error(ErrorKind::capacity, "target group " + g.to_string() + " does not exist in the pool");
        }
    }
    std::sort(chosen.begin(), chosen.end());
    return pool.subset(chosen);
}

std::map<std::string, double> compute_bias_ratio(const GroupedDataset& ds) {
    std::map<std::string, double> out;
    for (const auto& y : ds.classes()) {
        std::size_t total = 0, aligned = 0;
        for (const auto& a : ds.biases()) {
            GroupKey g{y, a};
            std::size_t n = ds.group_size(g);
            total += n;
            if (n > 0 && ds.alignment(g) == Alignment::aligned) aligned += n;
        }
        if (total == 0) throw Error(ErrorKind::undefined_ratio, "class '" + y + "' has no items");
        out[y] = double(aligned) / double(total);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Balanced sampling

BalancedBatchSampler::BalancedBatchSampler(const GroupedDataset& ds, std::size_t batch_size, BalanceMode mode,
                                           std::uint64_t seed)
    : batch_size_(batch_size), rng_(seed) {
    if (mode == BalanceMode::group_uniform) {
        for (const auto& [g, alignment] : ds.alignment_map()) {
            (void)alignment;
            if (ds.group_size(g) == 0) throw Error(ErrorKind::sampling, "group " + g.to_string() + " is empty");
        }
        for (const auto& g : ds.groups()) strata_.push_back(ds.group_members(g));
    } else {
        for (const auto& y : ds.classes()) {
            std::vector<std::size_t> members;
            for (const auto& a : ds.biases()) {
                const auto& m = ds.group_members({y, a});
                members.insert(members.end(), m.begin(), m.end());
            }
            if (members.empty()) throw Error(ErrorKind::sampling, "class '" + y + "' is empty");
            std::sort(members.begin(), members.end());
            strata_.push_back(std::move(members));
        }
    }
    if (strata_.empty()) throw Error(ErrorKind::sampling, "nothing to sample from");
    if (batch_size_ < strata_.size()) {
        throw Error(ErrorKind::sampling, "batch size " + std::to_string(batch_size_) + " is smaller than the " +
                                             std::to_string(strata_.size()) + " strata");
    }
}

std::vector<std::size_t> BalancedBatchSampler::next() {
    const std::size_t k = strata_.size();
    std::vector<std::size_t> quota(k, batch_size_ / k);
    std::size_t extra = batch_size_ % k;
    if (extra) {
        std::vector<std::size_t> order(k);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng_);
        for (std::size_t i = 0; i < extra; ++i) ++quota[order[i]];
    }
    std::vector<std::size_t> batch;
    batch.reserve(batch_size_);
    for (std::size_t s = 0; s < k; ++s) {
        std::uniform_int_distribution<std::size_t> pick(0, strata_[s].size() - 1);
        for (std::size_t i = 0; i < quota[s]; ++i) batch.push_back(strata_[s][pick(rng_)]);
    }
    return batch;
}

std::vector<std::vector<std::size_t>> group_uniform_batches(const GroupedDataset& ds, std::size_t batch_size,
                                                            std::size_t num_batches, std::uint64_t seed,
                                                            BalanceMode mode) {
    BalancedBatchSampler sampler(ds, batch_size, mode, seed);
    std::vector<std::vector<std::size_t>> out;
    out.reserve(num_batches);
    for (std::size_t b = 0; b < num_batches; ++b) out.push_back(sampler.next());
    return out;
}

}  // namespace fairgen
