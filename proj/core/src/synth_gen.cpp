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

#include "fairgen/synth_gen.hpp"

#include <algorithm>
#include <random>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "fairgen/hash.hpp"

namespace fairgen {

using nlohmann::json;

namespace {

// Aligned group sharing the non-contested label of a conflicting target.
GroupKey transfer_source(const GroupedDataset& ds, const DatasetDescriptor& desc, const GroupKey& target) {
    std::vector<GroupKey> candidates;
    for (const auto& [g, al] : ds.alignment_map()) {
        if (al != Alignment::aligned) continue;
        const bool shares = desc.contested == ContestedLabel::bias_label ? g.class_label == target.class_label
                                                                           : g.bias_label == target.bias_label;
        if (shares) candidates.push_back(g);
    }
    if (candidates.size() != 1) {
        throw Error(ErrorKind::config, "no unique aligned source for conflicting group " + target.to_string());
    }
    return candidates.front();
}

std::vector<std::size_t> random_subset(std::span<const std::size_t> members, std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> out(members.begin(), members.end());
    if (n >= out.size()) return out;
    std::mt19937_64 rng(seed);
    std::shuffle(out.begin(), out.end(), rng);
    out.resize(n);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Image> images_of(const GroupedDataset& ds, std::span<const std::size_t> indices) {
    std::vector<Image> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(ds[i].image);
    return out;
}

json group_json(const GroupKey& g) { return json::array({g.class_label, g.bias_label}); }
GroupKey group_from_json(const json& j) { return {j.at(0).get<std::string>(), j.at(1).get<std::string>()}; }

}  // namespace

GenerationPlan build_plan(const GroupedDataset& ds, DatasetId dataset, Strategy strategy, bool severe,
                          std::size_t per_group_budget, SamplerParams sampler) {
    if (per_group_budget == 0) throw Error(ErrorKind::config, "per-group budget M must be positive");
    const auto& desc = dataset_descriptor(dataset);
    GenerationPlan plan;
    plan.dataset = dataset;
    plan.strategy = strategy;
    plan.severe = severe;
    plan.per_group_budget = per_group_budget;
    plan.sampler = sampler;
    for (const auto& y : ds.classes()) {
        for (const auto& a : ds.biases()) plan.groups.push_back({y, a});
    }

    std::vector<GroupKey> fitted;
    for (const auto& g : plan.groups) {
        const bool conflicting = ds.alignment(g) == Alignment::conflicting;
        if (severe && conflicting) {
            plan.transfer_map[g] = transfer_source(ds, desc, g);
        } else {
            fitted.push_back(g);
        }
    }

    std::size_t smallest = 0;
    for (const auto& g : fitted) {
        const auto n = ds.group_size(g);
        if (smallest == 0 || n < smallest) smallest = n;
    }
    if (strategy != Strategy::vanilla && smallest == 0) {
        throw Error(ErrorKind::empty_input, "no training images in the groups to be fitted");
    }

    switch (strategy) {
        case Strategy::vanilla: break;
        case Strategy::lora_per_group: plan.finetune_sample_budget = smallest; break;
        case Strategy::dreambooth_per_group: plan.finetune_sample_budget = kDreamboothSampleBudget; break;
        case Strategy::clustered_dreambooth: {
            plan.finetune_sample_budget = kDreamboothSampleBudget;
            plan.cluster_count = cluster_count_rule(smallest);
            const auto k = static_cast<std::size_t>(plan.cluster_count);
            if (per_group_budget % k != 0) {
                const std::size_t down = per_group_budget / k * k;
                const std::size_t up = down + k;
                throw Error(ErrorKind::divisibility,
                            "M=" + std::to_string(per_group_budget) + " is not divisible by k_D=" + std::to_string(k) +
                                "; try M=" + std::to_string(down == 0 ? up : down) + " or M=" + std::to_string(up));
            }
            plan.per_cluster_budget = per_group_budget / k;
            break;
        }
    }
    return plan;
}

std::string plan_to_json(const GenerationPlan& plan) {
    json j;
    j["dataset"] = std::string(to_string(plan.dataset));
    j["strategy"] = std::string(to_string(plan.strategy));
    j["per_group_budget"] = plan.per_group_budget;
    j["per_cluster_budget"] = plan.per_cluster_budget;
    j["finetune_sample_budget"] = plan.finetune_sample_budget;
    j["cluster_count"] = plan.cluster_count;
    j["severe"] = plan.severe;
    j["pooling"] = plan.pooling == TransferPooling::pooled ? "pooled" : "per_cluster";
    j["sampler"] = {{"guidance_scale", plan.sampler.guidance_scale},
                    {"steps", plan.sampler.steps},
                    {"seed", plan.sampler.seed}};
    j["groups"] = json::array();
    for (const auto& g : plan.groups) j["groups"].push_back(group_json(g));
    j["transfer_map"] = json::array();
    for (const auto& [t, s] : plan.transfer_map) {
        j["transfer_map"].push_back({{"target", group_json(t)}, {"source", group_json(s)}});
    }
    return j.dump(2);
}

GenerationPlan plan_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        GenerationPlan plan;
        plan.dataset = parse_dataset_id(j.at("dataset").get<std::string>());
        plan.strategy = parse_strategy(j.at("strategy").get<std::string>());
        plan.per_group_budget = j.at("per_group_budget").get<std::size_t>();
        plan.per_cluster_budget = j.at("per_cluster_budget").get<std::size_t>();
        plan.finetune_sample_budget = j.at("finetune_sample_budget").get<std::size_t>();
        plan.cluster_count = j.at("cluster_count").get<int>();
        plan.severe = j.at("severe").get<bool>();
        plan.pooling = j.value("pooling", "pooled") == "per_cluster" ? TransferPooling::per_cluster : TransferPooling::pooled;
        const auto& s = j.at("sampler");
        plan.sampler = {s.at("guidance_scale").get<double>(), s.at("steps").get<int>(), s.at("seed").get<std::uint64_t>()};
        for (const auto& g : j.at("groups")) plan.groups.push_back(group_from_json(g));
        for (const auto& e : j.at("transfer_map")) plan.transfer_map[group_from_json(e.at("target"))] = group_from_json(e.at("source"));
        return plan;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::parse, std::string("bad generation plan: ") + e.what());
    }
}

std::string diffusion_config_to_json(const DiffusionBackendConfig& c) {
    json j{{"base_model", c.base_model}, {"lora_rank", c.lora_rank},       {"lora_alpha", c.lora_alpha},
           {"finetune_steps", c.finetune_steps}, {"lr_scheduler", c.lr_scheduler},
           {"guidance_scale", c.guidance_scale}, {"timesteps", c.timesteps}};
    return j.dump(2);
}

DiffusionBackendConfig diffusion_config_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        DiffusionBackendConfig c;
        c.base_model = j.at("base_model").get<std::string>();
        c.lora_rank = j.at("lora_rank").get<int>();
        c.lora_alpha = j.at("lora_alpha").get<int>();
        c.finetune_steps = j.at("finetune_steps").get<int>();
        c.lr_scheduler = j.at("lr_scheduler").get<bool>();
        c.guidance_scale = j.at("guidance_scale").get<double>();
        c.timesteps = j.at("timesteps").get<int>();
        return c;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::parse, std::string("bad diffusion config: ") + e.what());
    }
}

DiffusionBackendConfig default_diffusion_config(DatasetId dataset, Strategy strategy) {
    DiffusionBackendConfig c;
    if (dataset == DatasetId::utkface && strategy == Strategy::clustered_dreambooth) c.timesteps = 25;
    return c;
}

std::shared_ptr<const GeneratorHandle> DiffusionAdapterBackend::fit(std::span<const Image> images, const PromptSpec& prompt) {
    journal_.push_back("fit n=" + std::to_string(images.size()) + " prompt=\"" + prompt.positive + "\"");
    return nullptr;
}

std::vector<Image> DiffusionAdapterBackend::sample(const GeneratorHandle*, const PromptSpec& prompt, std::size_t n,
                                                   const SamplerParams& params) {
    journal_.push_back("sample n=" + std::to_string(n) + " seed=" + std::to_string(params.seed) + " prompt=\"" +
                       prompt.positive + "\" negative=\"" + prompt.full_negative() + "\"");
    return {};
}

GroupedDataset run_generation(const GenerationPlan& plan, GeneratorBackend& backend, const GroupedDataset& ds,
                              const std::map<GroupKey, ClusterAssignment>* clusters) {
    const bool clustered = plan.strategy == Strategy::clustered_dreambooth;
    if (clustered && clusters == nullptr) throw Error(ErrorKind::config, "clustered strategy needs cluster assignments");
    if (!clustered && clusters != nullptr) throw Error(ErrorKind::config, "cluster assignments given for a non-clustered strategy");

    const std::string strategy_name(to_string(plan.strategy));
    std::vector<DatasetItem> items;
    std::vector<GroupKey> completed;
    std::map<GroupKey, std::shared_ptr<const GeneratorHandle>> pooled_handles;

    auto emit = [&](const GroupKey& target, const GroupKey& source, int cluster, const PromptSpec& prompt,
                    const GeneratorHandle* handle, std::size_t n) {
        SamplerParams params = plan.sampler;
        params.seed = mix64(plan.sampler.seed ^ fnv1a64(target.to_string()) ^
                            mix64(static_cast<std::uint64_t>(cluster + 1)));
        auto images = backend.sample(handle, prompt, n, params);
        if (images.size() != n) {
            throw Error(ErrorKind::dependency, "backend returned " + std::to_string(images.size()) + " of " +
                                                   std::to_string(n) + " images for " + target.to_string());
        }
        for (std::size_t i = 0; i < n; ++i) {
            DatasetItem item;
            item.id = "syn-" + strategy_name + "-" + target.class_label + "-" + target.bias_label + "-" +
                      (cluster >= 0 ? "c" + std::to_string(cluster) + "-" : std::string()) + std::to_string(i);
            item.class_label = target.class_label;
            item.bias_label = target.bias_label;
            item.split = Split::train;
            item.origin = Origin::synthetic;
            item.set_inline_image(std::move(images[i]));
            item.provenance = Provenance{strategy_name, source.to_string(), cluster, prompt.positive,
                                         prompt.full_negative(), params.seed + i};
            items.push_back(std::move(item));
        }
    };

    auto fit_on = [&](std::span<const std::size_t> indices, const PromptSpec& prompt) {
        auto imgs = images_of(ds, indices);
        return backend.fit(imgs, prompt);
    };

    auto fit_seed = [&](const GroupKey& g, int cluster) {
        return mix64(plan.sampler.seed ^ 0xf17ULL ^ fnv1a64(g.to_string()) ^
                     static_cast<std::uint64_t>(cluster + 1));
    };

    try {
        for (const auto& g : plan.groups) {
            auto tm = plan.transfer_map.find(g);
            const bool transfer = tm != plan.transfer_map.end();
            const GroupKey source = transfer ? tm->second : g;
            const PromptSpec prompt =
                render_prompts(plan.dataset, plan.strategy, g, transfer ? PromptMode::transfer : PromptMode::standard);
            const PromptSpec source_prompt = render_prompts(plan.dataset, plan.strategy, source, PromptMode::standard);

            if (plan.strategy == Strategy::vanilla) {
                emit(g, g, -1, prompt, nullptr, plan.per_group_budget);
            } else if (!clustered || (transfer && plan.pooling == TransferPooling::pooled)) {
                auto it = pooled_handles.find(source);
                if (it == pooled_handles.end()) {
                    const auto& members = ds.group_members(source);
                    auto chosen = random_subset(members, plan.finetune_sample_budget, fit_seed(source, -1));
                    it = pooled_handles.emplace(source, fit_on(chosen, source_prompt)).first;
                }
                emit(g, source, -1, prompt, it->second.get(), plan.per_group_budget);
            } else {
                auto ca = clusters->find(source);
                if (ca == clusters->end()) throw Error(ErrorKind::config, "no clusters for group " + source.to_string());
                if (ca->second.k != plan.cluster_count) {
                    throw Error(ErrorKind::config, "group " + source.to_string() + " has " + std::to_string(ca->second.k) +
                                                       " clusters, plan expects " + std::to_string(plan.cluster_count));
                }
                std::map<std::string, std::size_t> index_of;
                for (auto i : ds.group_members(source)) index_of[ds[i].id] = i;
                for (int c = 0; c < ca->second.k; ++c) {
                    std::vector<std::size_t> idx;
                    for (const auto& id : ca->second.members(c)) {
                        auto f = index_of.find(id);
                        if (f != index_of.end()) idx.push_back(f->second);
                    }
                    auto chosen = random_subset(idx, plan.finetune_sample_budget, fit_seed(source, c));
                    auto handle = fit_on(chosen, source_prompt);
                    emit(g, source, c, prompt, handle.get(), plan.per_cluster_budget);
                }
            }
            completed.push_back(g);
        }
    } catch (const PartialGenerationError&) {
        throw;
    } catch (const std::exception& e) {
        spdlog::error("generation stopped after {} of {} groups: {}", completed.size(), plan.groups.size(), e.what());
        auto partial = ds.with_items(std::move(items));
        throw PartialGenerationError(std::string("generation failed: ") + e.what(), completed, std::move(partial));
    }
    return ds.with_items(std::move(items));
}

}  // namespace fairgen
