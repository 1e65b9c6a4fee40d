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
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fairgen/clip_filter.hpp"
#include "fairgen/embedder.hpp"
#include "fairgen/error.hpp"
#include "fairgen/eval_metrics.hpp"
#include "fairgen/group_cluster.hpp"
#include "fairgen/prompts.hpp"
#include "fairgen/shapeworld.hpp"
#include "fairgen/synth_gen.hpp"
#include "fairgen/training.hpp"

namespace fairgen {

enum class Stage { split, embed, cluster, generate, score, filter, pretrain, finetune, evaluate, report };

std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view text);
const std::vector<Stage>& all_stages();

/// pipeline: generate, filter, pretrain on synthetic, finetune on real.
/// erm / gdro: baselines trained on the real split only.
/// single_stage: one training run on real plus synthetic.
enum class Method { pipeline, erm, gdro, single_stage };
enum class GeneratorKind { oracle_fitted, oracle_global_prior, diffusion };

std::string_view to_string(Method method);
std::string_view to_string(GeneratorKind kind);

struct ExperimentConfig {
    std::string label = "pipeline";
    Method method = Method::pipeline;

    // dataset
    DatasetId dataset = DatasetId::shapeworld;
    std::string manifest;                  // empty: procedural toy world
    std::optional<double> split_bias_ratio;  // re-split a loaded manifest's train items
    ShapeWorldConfig toy;

    // embedding and clustering
    int embed_dim = 128;
    std::uint64_t embed_seed = 7;
    bool cluster_normalized = false;
    int kmeans_max_iter = 100;

    // generation
    Strategy strategy = Strategy::clustered_dreambooth;
    std::size_t per_group_budget = 480;
    bool severe = false;
    GeneratorKind generator = GeneratorKind::oracle_fitted;
    TransferPooling pooling = TransferPooling::pooled;
    SamplerParams sampler;

    // filtering
    bool filter_enabled = true;
    FilterConfig filter;

    // training
    ModelSpec model;
    TrainConfig pretrain;
    TrainConfig finetune;
    FinetuneVariant variant = FinetuneVariant::llr_all;
    bool gdro_finetune = false;
    GdroConfig gdro;
    SingleStageMix single_stage_mix = SingleStageMix::real_plus_synthetic;

    // evaluation
    std::vector<ReportFormat> report_formats{ReportFormat::csv, ReportFormat::markdown};

    std::vector<std::uint64_t> seeds{0};
};

/// Toy defaults: paper hyperparameters except a learning rate of 0.01.
ExperimentConfig default_config();

std::string config_to_json(const ExperimentConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Copy with every seed-dependent field set from one run seed.
ExperimentConfig with_seed(const ExperimentConfig& cfg, std::uint64_t seed);

/// Hash of the canonical JSON of a single-seed config.
std::string config_hash(const ExperimentConfig& cfg, std::uint64_t seed);

struct PresetRow {
    std::string label;
    ExperimentConfig config;
};

std::vector<std::string> preset_names();
/// Rows of a named preset derived from a base config.
std::vector<PresetRow> preset_rows(const std::string& name, const ExperimentConfig& base = default_config());

// Stage kernels. Pure functions of their inputs; the on-disk runner and the
// in-memory runner share them.
GroupedDataset make_real_dataset(const ExperimentConfig& cfg);
std::unique_ptr<ToyEmbeddingBackend> make_embedder(const ExperimentConfig& cfg);
GenerationPlan make_plan(const ExperimentConfig& cfg, const GroupedDataset& train);
std::map<GroupKey, ClusterAssignment> cluster_sources(const ExperimentConfig& cfg, const GenerationPlan& plan,
                                                      const GroupedDataset& train,
                                                      const std::map<std::string, Embedding>& embeddings);
std::unique_ptr<GeneratorBackend> make_generator(const ExperimentConfig& cfg);
GroupedDataset generate_synthetic(const ExperimentConfig& cfg, const GenerationPlan& plan, GeneratorBackend& backend,
                                  const GroupedDataset& train, const std::map<GroupKey, ClusterAssignment>& clusters);
std::map<GroupKey, std::vector<ScoredCandidate>> score_synthetic(const ExperimentConfig& cfg,
                                                                 const GroupedDataset& synth,
                                                                 const GroupedDataset& train,
                                                                 const std::map<std::string, Embedding>& embeddings,
                                                                 const EmbeddingBackend& embedder);
TrainResult pretrain_model(const ExperimentConfig& cfg, const GroupedDataset& train, const GroupedDataset& filtered);
TrainResult finetune_model(const ExperimentConfig& cfg, const ClassifierModel& pretrained, const GroupedDataset& train);

struct RunResult {
    GroupMetrics stage1;  // after pretrain (pipeline); equals final for baselines
    GroupMetrics metrics;
    std::map<GroupKey, double> distribution;  // empty without generation
    std::size_t synthetic_count = 0;
    std::size_t filtered_count = 0;
};

/// Every stage in memory, no files.
RunResult run_in_memory(const ExperimentConfig& cfg, std::uint64_t seed);

/// FAIRGEN_RUNS_DIR, else ./runs.
std::filesystem::path runs_root();

struct StageOutcome {
    Stage stage = Stage::split;
    bool cache_hit = false;
    std::filesystem::path directory;
};

/// Runs one stage under <root>/<config-hash>/<stage>/. Upstream stages must
/// have completed; unchanged inputs make the call a cache hit.
StageOutcome run_stage(Stage stage, const ExperimentConfig& cfg, std::uint64_t seed,
                       const std::filesystem::path& root = runs_root());

std::vector<StageOutcome> run_all_stages(const ExperimentConfig& cfg, std::uint64_t seed,
                                         const std::filesystem::path& root = runs_root());

struct MatrixCellFailure {
    std::string label;
    std::uint64_t seed = 0;
    std::string message;
};

struct MatrixResult {
    std::vector<LabeledMetrics> runs;
    std::vector<MatrixCellFailure> failures;
    std::map<ReportFormat, std::string> reports;
    std::vector<std::filesystem::path> files;
};

/// Presets x seeds through the on-disk runner. A failing cell is recorded and
/// the matrix continues. Writes report.csv, report.md and SVG plots under
/// <root>/matrix/<hash>/.
MatrixResult run_matrix(const std::vector<std::string>& presets, const std::vector<std::uint64_t>& seeds,
                        const ExperimentConfig& base = default_config(),
                        const std::filesystem::path& root = runs_root());

/// Bar chart of mean WGA per label with std whiskers.
std::string svg_wga_by_method(const std::vector<LabeledMetrics>& runs);
/// WGA against bias ratio, one line per method; x values come from labels of
/// the form "<method>@<ratio>".
std::string svg_wga_vs_bias(const std::vector<LabeledMetrics>& runs);

/// 0 ok, 2 config, 3 dependency, 4 numerical.
int exit_code_for(ErrorKind kind);

}  // namespace fairgen
