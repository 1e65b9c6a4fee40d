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
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fairgen/group_data.hpp"
#include "fairgen/losses.hpp"
#include "fairgen/model.hpp"

namespace fairgen {

struct TrainConfig {
    double beta = 0.5;
    double tau = 1.0;
    int epochs = 20;
    double learning_rate = 1e-3;
    double weight_decay = 1e-3;
    std::size_t batch_size = 128;
    std::uint64_t seed = 0;
    SupConForm supcon_form = SupConForm::negatives_only;

    void validate() const;
};

struct GdroConfig {
    double eta = 0.01;
};

enum class FinetuneVariant { llr_all, llr_b, ft_b };

std::string_view to_string(FinetuneVariant variant);
FinetuneVariant parse_finetune_variant(std::string_view text);

struct ModelSpec {
    std::vector<int> encoder_widths{64, 32};
};

struct EpochRecord {
    int epoch = 0;
    double ce = 0.0;
    double supcon = 0.0;
    double total = 0.0;
};

struct TrainResult {
    ClassifierModel model;
    std::vector<EpochRecord> trajectory;
};

/// Flattened pixels minus 0.5, one column per item.
Eigen::MatrixXd input_matrix(const GroupedDataset& ds);
std::vector<int> class_indices(const GroupedDataset& ds);

ClassifierModel make_model(const GroupedDataset& ds, const ModelSpec& spec, std::uint64_t seed);

/// Full-network training with the combined loss on group-uniform batches.
TrainResult stage1_pretrain(ClassifierModel model, const GroupedDataset& synth, const TrainConfig& cfg);

/// LLR_all: frozen encoder, all real data, class-uniform batches.
/// LLR_b / FT_b: group-balanced subsample sized to the smallest group; FT_b
/// also trains the encoder.
TrainResult stage2_finetune(ClassifierModel pretrained, const GroupedDataset& real, FinetuneVariant variant,
                            const TrainConfig& cfg);

/// Cross-entropy only, shuffled unbalanced batches.
TrainResult erm_baseline(const GroupedDataset& real, const ModelSpec& spec, const TrainConfig& cfg);

/// GroupDRO on shuffled batches. Groups absent from a batch contribute zero
/// loss to that step's weight update.
TrainResult gdro_train(ClassifierModel model, const GroupedDataset& real, const TrainConfig& cfg,
                       const GdroConfig& gdro, bool train_encoder = true);
TrainResult gdro_baseline(const GroupedDataset& real, const ModelSpec& spec, const TrainConfig& cfg,
                          const GdroConfig& gdro);

/// One-stage alternatives: all real + balanced synthetic, or a group-balanced
/// mix of real and synthetic. Trained with the combined loss, shuffled batches.
enum class SingleStageMix { real_plus_synthetic, balanced_mix };
TrainResult single_stage_train(const GroupedDataset& real, const GroupedDataset& synth, SingleStageMix mix,
                               const ModelSpec& spec, const TrainConfig& cfg);

/// Group-balanced subsample: each group reduced to the smallest group size.
GroupedDataset balanced_subsample(const GroupedDataset& ds, std::uint64_t seed);

/// CSV: epoch,ce,supcon,total
std::string format_trajectory(const std::vector<EpochRecord>& trajectory);

}  // namespace fairgen
