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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairgen/error.hpp"
#include "fairgen/group_cluster.hpp"
#include "fairgen/group_data.hpp"
#include "fairgen/image.hpp"
#include "fairgen/prompts.hpp"

namespace fairgen {

struct SamplerParams {
    double guidance_scale = 7.5;
    int steps = 50;
    std::uint64_t seed = 0;
};

/// How a conflicting group is produced from a clustered source group in
/// severe mode: one model over the whole source group, or one per source
/// cluster.
enum class TransferPooling { pooled, per_cluster };

struct GenerationPlan {
    DatasetId dataset = DatasetId::shapeworld;
    Strategy strategy = Strategy::vanilla;
    std::size_t per_group_budget = 0;        // M
    std::size_t per_cluster_budget = 0;      // M_cl, clustered only
    std::size_t finetune_sample_budget = 0;  // l for LoRA, 100 for Dreambooth variants
    int cluster_count = 1;                   // k_D
    bool severe = false;
    std::map<GroupKey, GroupKey> transfer_map;  // conflicting target -> aligned source
    TransferPooling pooling = TransferPooling::pooled;
    SamplerParams sampler;
    std::vector<GroupKey> groups;  // every (y, a) of the dataset, declared order
};

inline constexpr std::size_t kDreamboothSampleBudget = 100;

/// Budgets, k_D and (in severe mode) the transfer map. In severe mode each
/// conflicting group is sourced from the aligned group that shares its
/// non-contested label, and k_D is computed over the groups that are fitted.
GenerationPlan build_plan(const GroupedDataset& ds, DatasetId dataset, Strategy strategy, bool severe,
                          std::size_t per_group_budget, SamplerParams sampler = {});

std::string plan_to_json(const GenerationPlan& plan);
GenerationPlan plan_from_json(const std::string& text);

class GeneratorHandle {
public:
    virtual ~GeneratorHandle() = default;
};

class GeneratorBackend {
public:
    virtual ~GeneratorBackend() = default;

    /// Trains a generator on one group (or cluster). May return null when the
    /// backend has nothing to fit.
    virtual std::shared_ptr<const GeneratorHandle> fit(std::span<const Image> images, const PromptSpec& prompt) = 0;

    /// Image i of the batch is drawn with seed params.seed + i.
    virtual std::vector<Image> sample(const GeneratorHandle* handle, const PromptSpec& prompt, std::size_t n,
                                      const SamplerParams& params) = 0;
};

/// Recorded configuration of a real diffusion finetuning backend. Execution is
/// a no-op: calls are journaled and sample() returns nothing.
struct DiffusionBackendConfig {
    std::string base_model = "stable-diffusion-v1-4";
    int lora_rank = 16;
    int lora_alpha = 16;
    int finetune_steps = 200;
    bool lr_scheduler = false;
    double guidance_scale = 7.5;
    int timesteps = 50;

    friend bool operator==(const DiffusionBackendConfig&, const DiffusionBackendConfig&) = default;
};

std::string diffusion_config_to_json(const DiffusionBackendConfig& cfg);
DiffusionBackendConfig diffusion_config_from_json(const std::string& text);

/// Per-dataset defaults: 25 timesteps for clustered UTKFace, 50 elsewhere.
DiffusionBackendConfig default_diffusion_config(DatasetId dataset, Strategy strategy);

class DiffusionAdapterBackend final : public GeneratorBackend {
public:
    explicit DiffusionAdapterBackend(DiffusionBackendConfig cfg) : cfg_(std::move(cfg)) {}

    std::shared_ptr<const GeneratorHandle> fit(std::span<const Image> images, const PromptSpec& prompt) override;
    std::vector<Image> sample(const GeneratorHandle* handle, const PromptSpec& prompt, std::size_t n,
                              const SamplerParams& params) override;

    const DiffusionBackendConfig& config() const noexcept { return cfg_; }
    const std::vector<std::string>& journal() const noexcept { return journal_; }

private:
    DiffusionBackendConfig cfg_;
    std::vector<std::string> journal_;
};

/// Raised when the backend fails part-way; carries what was produced.
class PartialGenerationError : public Error {
public:
    PartialGenerationError(const std::string& message, std::vector<GroupKey> completed, GroupedDataset partial)
        : Error(ErrorKind::partial_generation, message), completed_(std::move(completed)), partial_(std::move(partial)) {}

    const std::vector<GroupKey>& completed_groups() const noexcept { return completed_; }
    const GroupedDataset& partial_manifest() const noexcept { return partial_; }

private:
    std::vector<GroupKey> completed_;
    GroupedDataset partial_;
};

/// Generates exactly M items per group (M_cl per cluster for the clustered
/// strategy), all tagged origin=synthetic with full provenance.
GroupedDataset run_generation(const GenerationPlan& plan, GeneratorBackend& backend, const GroupedDataset& ds,
                              const std::map<GroupKey, ClusterAssignment>* clusters = nullptr);

}  // namespace fairgen
