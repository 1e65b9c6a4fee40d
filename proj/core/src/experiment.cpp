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

#include "fairgen/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "fairgen/hash.hpp"
#include "fairgen/oracle_generator.hpp"
#include "internal/text_io.hpp"

namespace fairgen {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

template <typename E>
E parse_enum(std::string_view text, std::initializer_list<E> values, std::string_view what) {
    for (E v : values) {
        if (to_string(v) == text) return v;
    }
    throw Error(ErrorKind::config, "unknown " + std::string(what) + " '" + std::string(text) + "'");
}

}  // namespace

std::string_view to_string(Stage stage) {
    switch (stage) {
        case Stage::split: return "split";
        case Stage::embed: return "embed";
        case Stage::cluster: return "cluster";
        case Stage::generate: return "generate";
        case Stage::score: return "score";
        case Stage::filter: return "filter";
        case Stage::pretrain: return "pretrain";
        case Stage::finetune: return "finetune";
        case Stage::evaluate: return "evaluate";
        case Stage::report: return "report";
    }
    return "split";
}

const std::vector<Stage>& all_stages() {
    static const std::vector<Stage> kStages{Stage::split,  Stage::embed,    Stage::cluster,  Stage::generate,
                                            Stage::score,  Stage::filter,   Stage::pretrain, Stage::finetune,
                                            Stage::evaluate, Stage::report};
    return kStages;
}

Stage parse_stage(std::string_view text) {
    for (auto s : all_stages()) {
        if (to_string(s) == text) return s;
    }
    throw Error(ErrorKind::config, "unknown stage '" + std::string(text) + "'");
}

std::string_view to_string(Method method) {
    switch (method) {
        case Method::pipeline: return "pipeline";
        case Method::erm: return "erm";
        case Method::gdro: return "gdro";
        case Method::single_stage: return "single_stage";
    }
    return "pipeline";
}

std::string_view to_string(GeneratorKind kind) {
    switch (kind) {
        case GeneratorKind::oracle_fitted: return "oracle_fitted";
        case GeneratorKind::oracle_global_prior: return "oracle_global_prior";
        case GeneratorKind::diffusion: return "diffusion";
    }
    return "oracle_fitted";
}

namespace {

std::string_view format_name(ReportFormat f) { return f == ReportFormat::csv ? "csv" : "markdown"; }
std::string_view mix_name(SingleStageMix m) {
    return m == SingleStageMix::real_plus_synthetic ? "real_plus_synthetic" : "balanced_mix";
}
std::string_view form_name(SupConForm f) { return f == SupConForm::negatives_only ? "negatives_only" : "standard"; }

json train_json(const TrainConfig& t) {
    return {{"beta", t.beta},
            {"tau", t.tau},
            {"epochs", t.epochs},
            {"learning_rate", t.learning_rate},
            {"weight_decay", t.weight_decay},
            {"batch_size", t.batch_size},
            {"seed", t.seed},
            {"supcon_form", form_name(t.supcon_form)}};
}

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, std::string_view where) {
    if (!obj.is_object()) throw Error(ErrorKind::config, "'" + std::string(where) + "' must be an object");
    for (const auto& [key, value] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw Error(ErrorKind::config, "unknown key '" + key + "' in " + std::string(where));
        }
    }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

TrainConfig train_from_json(const json& j, TrainConfig t, std::string_view where) {
    check_keys(j, {"beta", "tau", "epochs", "learning_rate", "weight_decay", "batch_size", "seed", "supcon_form"}, where);
    read(j, "beta", t.beta);
    read(j, "tau", t.tau);
    read(j, "epochs", t.epochs);
    read(j, "learning_rate", t.learning_rate);
    read(j, "weight_decay", t.weight_decay);
    read(j, "batch_size", t.batch_size);
    read(j, "seed", t.seed);
    if (j.contains("supcon_form")) {
        const auto f = j.at("supcon_form").get<std::string>();
        if (f == "negatives_only") t.supcon_form = SupConForm::negatives_only;
        else if (f == "standard") t.supcon_form = SupConForm::standard;
        else throw Error(ErrorKind::config, "unknown supcon_form '" + f + "'");
    }
    return t;
}

json rgb_json(const Rgb& c) { return json::array({c[0], c[1], c[2]}); }

}  // namespace

ExperimentConfig default_config() {
    ExperimentConfig cfg;
    cfg.pretrain.learning_rate = 0.01;
    cfg.finetune.learning_rate = 0.01;
    return cfg;
}

std::string config_to_json(const ExperimentConfig& c) {
    json j;
    j["label"] = c.label;
    j["method"] = to_string(c.method);
    json toy{{"image_size", c.toy.image_size},
             {"bias_ratio", c.toy.bias_ratio},
             {"n_train", c.toy.n_train},
             {"n_val", c.toy.n_val},
             {"n_test", c.toy.n_test},
             {"noise_sigma", c.toy.noise_sigma},
             {"palette_jitter", c.toy.palette_jitter},
             {"seed", c.toy.seed},
             {"shape",
              {{"size", c.toy.shape.size},
               {"stroke", c.toy.shape.stroke},
               {"color", rgb_json(c.toy.shape.color)},
               {"color_jitter", c.toy.shape.color_jitter},
               {"max_shift", c.toy.shape.max_shift}}}};
    j["dataset"] = {{"id", to_string(c.dataset)}, {"manifest", c.manifest}, {"toy", toy}};
    j["dataset"]["split_bias_ratio"] = c.split_bias_ratio ? json(*c.split_bias_ratio) : json(nullptr);
    j["embedding"] = {{"dim", c.embed_dim},
                      {"seed", c.embed_seed},
                      {"cluster_normalized", c.cluster_normalized},
                      {"kmeans_max_iter", c.kmeans_max_iter}};
    j["generation"] = {{"strategy", to_string(c.strategy)},
                       {"per_group_budget", c.per_group_budget},
                       {"severe", c.severe},
                       {"generator", to_string(c.generator)},
                       {"pooling", c.pooling == TransferPooling::pooled ? "pooled" : "per_cluster"},
                       {"sampler",
                        {{"guidance_scale", c.sampler.guidance_scale},
                         {"steps", c.sampler.steps},
                         {"seed", c.sampler.seed}}}};
    j["filter"] = {{"enabled", c.filter_enabled},
                   {"alpha", c.filter.alpha},
                   {"keep_fraction", c.filter.keep_fraction},
                   {"mode", c.filter.mode == FilterMode::severe ? "severe" : "standard"},
                   {"selection", c.filter.selection == SelectionMethod::random ? "random" : "score"},
                   {"seed", c.filter.seed}};
    j["train"] = {{"model", {{"encoder_widths", c.model.encoder_widths}}},
                  {"pretrain", train_json(c.pretrain)},
                  {"finetune", train_json(c.finetune)},
                  {"variant", to_string(c.variant)},
                  {"gdro_finetune", c.gdro_finetune},
                  {"gdro", {{"eta", c.gdro.eta}}},
                  {"single_stage_mix", mix_name(c.single_stage_mix)}};
    json formats = json::array();
    for (auto f : c.report_formats) formats.push_back(format_name(f));
    j["eval"] = {{"report_formats", formats}};
    j["seeds"] = c.seeds;
    return j.dump(2);
}

ExperimentConfig config_from_json(const std::string& text) {
    ExperimentConfig c = default_config();
    try {
        const json j = json::parse(text);
        check_keys(j, {"label", "method", "dataset", "embedding", "generation", "filter", "train", "eval", "seeds"}, "config");
        read(j, "label", c.label);
        if (j.contains("method")) {
            c.method = parse_enum(j.at("method").get<std::string>(),
                                  {Method::pipeline, Method::erm, Method::gdro, Method::single_stage}, "method");
        }
        if (j.contains("dataset")) {
            const auto& d = j.at("dataset");
            check_keys(d, {"id", "manifest", "split_bias_ratio", "toy"}, "dataset");
            if (d.contains("id")) c.dataset = parse_dataset_id(d.at("id").get<std::string>());
            read(d, "manifest", c.manifest);
            if (d.contains("split_bias_ratio") && !d.at("split_bias_ratio").is_null()) {
                c.split_bias_ratio = d.at("split_bias_ratio").get<double>();
            }
            if (d.contains("toy")) {
                const auto& t = d.at("toy");
                check_keys(t, {"image_size", "bias_ratio", "n_train", "n_val", "n_test", "noise_sigma", "palette_jitter",
                               "seed", "shape"},
                           "dataset.toy");
                read(t, "image_size", c.toy.image_size);
                read(t, "bias_ratio", c.toy.bias_ratio);
                read(t, "n_train", c.toy.n_train);
                read(t, "n_val", c.toy.n_val);
                read(t, "n_test", c.toy.n_test);
                read(t, "noise_sigma", c.toy.noise_sigma);
                read(t, "palette_jitter", c.toy.palette_jitter);
                read(t, "seed", c.toy.seed);
                if (t.contains("shape")) {
                    const auto& s = t.at("shape");
                    check_keys(s, {"size", "stroke", "color", "color_jitter", "max_shift"}, "dataset.toy.shape");
                    read(s, "size", c.toy.shape.size);
                    read(s, "stroke", c.toy.shape.stroke);
                    if (s.contains("color")) {
                        const auto v = s.at("color").get<std::vector<double>>();
                        if (v.size() != 3) throw Error(ErrorKind::config, "shape color needs 3 channels");
                        c.toy.shape.color = {v[0], v[1], v[2]};
                    }
                    read(s, "color_jitter", c.toy.shape.color_jitter);
                    read(s, "max_shift", c.toy.shape.max_shift);
                }
            }
        }
        if (j.contains("embedding")) {
            const auto& e = j.at("embedding");
            check_keys(e, {"dim", "seed", "cluster_normalized", "kmeans_max_iter"}, "embedding");
            read(e, "dim", c.embed_dim);
            read(e, "seed", c.embed_seed);
            read(e, "cluster_normalized", c.cluster_normalized);
            read(e, "kmeans_max_iter", c.kmeans_max_iter);
        }
        if (j.contains("generation")) {
            const auto& g = j.at("generation");
            check_keys(g, {"strategy", "per_group_budget", "severe", "generator", "pooling", "sampler"}, "generation");
            if (g.contains("strategy")) c.strategy = parse_strategy(g.at("strategy").get<std::string>());
            read(g, "per_group_budget", c.per_group_budget);
            read(g, "severe", c.severe);
            if (g.contains("generator")) {
                c.generator = parse_enum(g.at("generator").get<std::string>(),
                                         {GeneratorKind::oracle_fitted, GeneratorKind::oracle_global_prior,
                                          GeneratorKind::diffusion},
                                         "generator");
            }
            if (g.contains("pooling")) {
                const auto p = g.at("pooling").get<std::string>();
                if (p == "pooled") c.pooling = TransferPooling::pooled;
                else if (p == "per_cluster") c.pooling = TransferPooling::per_cluster;
                else throw Error(ErrorKind::config, "unknown pooling '" + p + "'");
            }
            if (g.contains("sampler")) {
                const auto& s = g.at("sampler");
                check_keys(s, {"guidance_scale", "steps", "seed"}, "generation.sampler");
                read(s, "guidance_scale", c.sampler.guidance_scale);
                read(s, "steps", c.sampler.steps);
                read(s, "seed", c.sampler.seed);
            }
        }
        if (j.contains("filter")) {
            const auto& f = j.at("filter");
            check_keys(f, {"enabled", "alpha", "keep_fraction", "mode", "selection", "seed"}, "filter");
            read(f, "enabled", c.filter_enabled);
            read(f, "alpha", c.filter.alpha);
            read(f, "keep_fraction", c.filter.keep_fraction);
            read(f, "seed", c.filter.seed);
            if (f.contains("mode")) {
                const auto m = f.at("mode").get<std::string>();
                if (m == "standard") c.filter.mode = FilterMode::standard;
                else if (m == "severe") c.filter.mode = FilterMode::severe;
                else throw Error(ErrorKind::config, "unknown filter mode '" + m + "'");
            }
            if (f.contains("selection")) {
                const auto s = f.at("selection").get<std::string>();
                if (s == "score") c.filter.selection = SelectionMethod::score;
                else if (s == "random") c.filter.selection = SelectionMethod::random;
                else throw Error(ErrorKind::config, "unknown selection '" + s + "'");
            }
        }
        if (j.contains("train")) {
            const auto& t = j.at("train");
            check_keys(t, {"model", "pretrain", "finetune", "variant", "gdro_finetune", "gdro", "single_stage_mix"}, "train");
            if (t.contains("model")) {
                check_keys(t.at("model"), {"encoder_widths"}, "train.model");
                read(t.at("model"), "encoder_widths", c.model.encoder_widths);
            }
            if (t.contains("pretrain")) c.pretrain = train_from_json(t.at("pretrain"), c.pretrain, "train.pretrain");
            if (t.contains("finetune")) c.finetune = train_from_json(t.at("finetune"), c.finetune, "train.finetune");
            if (t.contains("variant")) c.variant = parse_finetune_variant(t.at("variant").get<std::string>());
            read(t, "gdro_finetune", c.gdro_finetune);
            if (t.contains("gdro")) {
                check_keys(t.at("gdro"), {"eta"}, "train.gdro");
                read(t.at("gdro"), "eta", c.gdro.eta);
            }
            if (t.contains("single_stage_mix")) {
                const auto m = t.at("single_stage_mix").get<std::string>();
                if (m == "real_plus_synthetic") c.single_stage_mix = SingleStageMix::real_plus_synthetic;
                else if (m == "balanced_mix") c.single_stage_mix = SingleStageMix::balanced_mix;
                else throw Error(ErrorKind::config, "unknown single_stage_mix '" + m + "'");
            }
        }
        if (j.contains("eval")) {
            check_keys(j.at("eval"), {"report_formats"}, "eval");
            if (j.at("eval").contains("report_formats")) {
                c.report_formats.clear();
                for (const auto& f : j.at("eval").at("report_formats")) {
                    const auto s = f.get<std::string>();
                    if (s == "csv") c.report_formats.push_back(ReportFormat::csv);
                    else if (s == "markdown") c.report_formats.push_back(ReportFormat::markdown);
                    else throw Error(ErrorKind::config, "unknown report format '" + s + "'");
                }
            }
        }
        read(j, "seeds", c.seeds);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::config, std::string("bad experiment config: ") + e.what());
    }
    if (c.seeds.empty()) throw Error(ErrorKind::config, "seed list is empty");
    c.pretrain.validate();
    c.finetune.validate();
    c.filter.validate();
    return c;
}

ExperimentConfig load_config(const fs::path& path) {
    if (!fs::exists(path)) throw Error(ErrorKind::config, "config file not found: " + path.string());
    return config_from_json(internal::read_file(path));
}

ExperimentConfig with_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
    ExperimentConfig c = cfg;
    c.toy.seed = seed;
    c.sampler.seed = seed;
    c.filter.seed = seed;
    c.pretrain.seed = seed;
    c.finetune.seed = seed;
    c.seeds = {seed};
    return c;
}

std::string config_hash(const ExperimentConfig& cfg, std::uint64_t seed) {
    return hash_hex(config_to_json(with_seed(cfg, seed)));
}

// ---------------------------------------------------------------- presets

std::vector<std::string> preset_names() {
    return {"erm",  "gdro", "vanilla", "lora", "dreambooth", "clustered", "table1", "table1_severe",
            "table3_gdro_finetune", "table4_alpha_ablation", "table5_single_stage", "table6_selection",
            "table7_finetune", "loss_ablation", "supcon_form", "bias_sweep"};
}

namespace {

ExperimentConfig method_row(const ExperimentConfig& base, const std::string& key) {
    ExperimentConfig c = base;
    if (key == "erm") {
        c.method = Method::erm;
    } else if (key == "gdro") {
        c.method = Method::gdro;
    } else if (key == "vanilla") {
        c.method = Method::pipeline;
        c.strategy = Strategy::vanilla;
        c.generator = GeneratorKind::oracle_global_prior;
    } else if (key == "lora") {
        c.method = Method::pipeline;
        c.strategy = Strategy::lora_per_group;
        c.generator = GeneratorKind::oracle_fitted;
    } else if (key == "dreambooth") {
        c.method = Method::pipeline;
        c.strategy = Strategy::dreambooth_per_group;
        c.generator = GeneratorKind::oracle_fitted;
    } else if (key == "clustered") {
        c.method = Method::pipeline;
        c.strategy = Strategy::clustered_dreambooth;
        c.generator = GeneratorKind::oracle_fitted;
    } else {
        throw Error(ErrorKind::config, "unknown method preset '" + key + "'");
    }
    return c;
}

const std::map<std::string, std::string> kMethodLabels{{"erm", "ERM"},
                                                       {"gdro", "GDRO"},
                                                       {"vanilla", "Vanilla"},
                                                       {"lora", "LoRA"},
                                                       {"dreambooth", "Dreambooth"},
                                                       {"clustered", "Clustered Dreambooth"}};

ExperimentConfig severe_of(ExperimentConfig c) {
    c.toy.bias_ratio = 0.999;
    c.severe = true;
    return c;
}

std::string ratio_text(double r) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", r);
    return buf;
}

}  // namespace

std::vector<PresetRow> preset_rows(const std::string& name, const ExperimentConfig& base) {
    std::vector<PresetRow> rows;
    auto add = [&](std::string label, ExperimentConfig c) {
        c.label = label;
        rows.push_back({std::move(label), std::move(c)});
    };
    const std::vector<std::string> table1{"erm", "gdro", "vanilla", "lora", "dreambooth", "clustered"};
    if (kMethodLabels.count(name)) {
        add(kMethodLabels.at(name), method_row(base, name));
    } else if (name == "table1") {
        for (const auto& k : table1) add(kMethodLabels.at(k), method_row(base, k));
    } else if (name == "table1_severe") {
        for (const auto& k : table1) add(kMethodLabels.at(k), severe_of(method_row(base, k)));
    } else if (name == "table3_gdro_finetune") {
        add("GDRO", severe_of(method_row(base, "gdro")));
        add("Clustered Dreambooth + LLR_all", severe_of(method_row(base, "clustered")));
        auto c = severe_of(method_row(base, "clustered"));
        c.gdro_finetune = true;
        add("Clustered Dreambooth (Pretraining) + GDRO", c);
    } else if (name == "table4_alpha_ablation") {
        for (double a : {1.0, 0.0, 0.5}) {
            auto c = method_row(base, "clustered");
            c.filter.alpha = a;
            add("alpha=" + ratio_text(a), c);
        }
        auto c = method_row(base, "clustered");
        c.filter.selection = SelectionMethod::random;
        add("random", c);
    } else if (name == "table5_single_stage") {
        add("two-stage", method_row(base, "clustered"));
        auto c = method_row(base, "clustered");
        c.method = Method::single_stage;
        c.single_stage_mix = SingleStageMix::real_plus_synthetic;
        add("single-stage real+synthetic", c);
        c.single_stage_mix = SingleStageMix::balanced_mix;
        add("single-stage balanced mix", c);
    } else if (name == "table6_selection") {
        for (double k : {0.5, 0.75, 1.0}) {
            auto c = method_row(base, "clustered");
            c.filter.keep_fraction = k;
            add("keep=" + ratio_text(k), c);
        }
    } else if (name == "table7_finetune") {
        for (auto v : {FinetuneVariant::llr_all, FinetuneVariant::llr_b, FinetuneVariant::ft_b}) {
            auto c = method_row(base, "clustered");
            c.variant = v;
            std::string label(to_string(v));
            std::transform(label.begin(), label.end(), label.begin(), [](unsigned char ch) { return std::toupper(ch); });
            label.replace(label.find('_') + 1, std::string::npos, label.substr(label.find('_') + 1) == "ALL" ? "all" : "b");
            add(label, c);
        }
    } else if (name == "loss_ablation") {
        for (double b : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            auto c = method_row(base, "clustered");
            c.pretrain.beta = b;
            add("beta=" + ratio_text(b), c);
        }
    } else if (name == "supcon_form") {
        auto c = method_row(base, "clustered");
        add("supcon negatives-only", c);
        c.pretrain.supcon_form = SupConForm::standard;
        c.finetune.supcon_form = SupConForm::standard;
        add("supcon standard", c);
    } else if (name == "bias_sweep") {
        for (double r : {0.9, 0.95, 0.99, 0.999}) {
            for (const auto& k : {std::string("erm"), std::string("clustered")}) {
                auto c = method_row(base, k);
                c.toy.bias_ratio = r;
                c.severe = r >= 0.999;
                add(kMethodLabels.at(k) + "@" + ratio_text(r), c);
            }
        }
    } else {
        throw Error(ErrorKind::config, "unknown preset '" + name + "'");
    }
    return rows;
}

// ---------------------------------------------------------------- kernels

namespace {

ManifestSchema schema_for(const ExperimentConfig& cfg) {
    ManifestSchema s;
    if (cfg.dataset == DatasetId::shapeworld && cfg.manifest.empty()) {
        s.classes = cfg.toy.classes;
        s.biases = cfg.toy.biases;
        s.aligned_bias = cfg.toy.aligned_bias;
    } else {
        const auto& d = dataset_descriptor(cfg.dataset);
        s.classes = d.classes;
        s.biases = d.biases;
        s.aligned_bias = d.aligned_bias;
    }
    return s;
}

bool uses_generation(const ExperimentConfig& cfg) {
    return cfg.method == Method::pipeline || cfg.method == Method::single_stage;
}

FilterConfig effective_filter(const ExperimentConfig& cfg) {
    FilterConfig f = cfg.filter;
    if (cfg.severe) f.mode = FilterMode::severe;
    if (!cfg.filter_enabled) {
        f.keep_fraction = 1.0;
        f.selection = SelectionMethod::score;
    }
    return f;
}

}  // namespace

GroupedDataset make_real_dataset(const ExperimentConfig& cfg) {
    if (cfg.manifest.empty()) {
        if (cfg.dataset != DatasetId::shapeworld) {
            throw Error(ErrorKind::config, "dataset " + std::string(to_string(cfg.dataset)) + " needs a manifest path");
        }
        return generate_shapeworld(cfg.toy);
    }
    auto ds = load_manifest(cfg.manifest, schema_for(cfg));
    if (!cfg.split_bias_ratio) return ds;
    SplitSpec spec;
    spec.bias_ratio = cfg.split_bias_ratio;
    spec.seed = cfg.toy.seed;
    auto train = construct_biased_split(ds.filter_split(Split::train), spec);
    std::vector<DatasetItem> items = train.items();
    for (const auto& item : ds.items()) {
        if (item.split != Split::train) items.push_back(item);
    }
    return ds.with_items(std::move(items));
}

std::unique_ptr<ToyEmbeddingBackend> make_embedder(const ExperimentConfig& cfg) {
    auto backend = toy_backend(cfg.embed_seed, cfg.embed_dim);
    if (cfg.dataset == DatasetId::shapeworld) register_shapeworld_concepts(*backend, cfg.toy);
    return backend;
}

GenerationPlan make_plan(const ExperimentConfig& cfg, const GroupedDataset& train) {
    auto plan = build_plan(train, cfg.dataset, cfg.strategy, cfg.severe, cfg.per_group_budget, cfg.sampler);
    plan.pooling = cfg.pooling;
    return plan;
}

std::map<GroupKey, ClusterAssignment> cluster_sources(const ExperimentConfig& cfg, const GenerationPlan& plan,
                                                      const GroupedDataset& train,
                                                      const std::map<std::string, Embedding>& embeddings) {
    if (plan.strategy != Strategy::clustered_dreambooth) return {};
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < train.size(); ++i) {
        if (!plan.transfer_map.count(train[i].group())) keep.push_back(i);
    }
    KMeansOptions opt;
    opt.k = plan.cluster_count;
    opt.seed = cfg.sampler.seed;
    opt.max_iter = cfg.kmeans_max_iter;
    opt.normalize = cfg.cluster_normalized;
    return kmeans_per_group(train.subset(keep), embeddings, opt);
}

std::unique_ptr<GeneratorBackend> make_generator(const ExperimentConfig& cfg) {
    switch (cfg.generator) {
        case GeneratorKind::oracle_fitted: return oracle_backend(OracleFidelity::fitted, cfg.sampler.seed, cfg.toy);
        case GeneratorKind::oracle_global_prior:
            return oracle_backend(OracleFidelity::global_prior, cfg.sampler.seed, cfg.toy);
        case GeneratorKind::diffusion:
            return std::make_unique<DiffusionAdapterBackend>(default_diffusion_config(cfg.dataset, cfg.strategy));
    }
    throw Error(ErrorKind::config, "unknown generator");
}

GroupedDataset generate_synthetic(const ExperimentConfig&, const GenerationPlan& plan, GeneratorBackend& backend,
                                  const GroupedDataset& train, const std::map<GroupKey, ClusterAssignment>& clusters) {
    const bool clustered = plan.strategy == Strategy::clustered_dreambooth;
    return run_generation(plan, backend, train, clustered ? &clusters : nullptr);
}

std::map<GroupKey, std::vector<ScoredCandidate>> score_synthetic(const ExperimentConfig& cfg,
                                                                 const GroupedDataset& synth,
                                                                 const GroupedDataset& train,
                                                                 const std::map<std::string, Embedding>& embeddings,
                                                                 const EmbeddingBackend& embedder) {
    return score_candidates(synth, real_group_centroids(train, embeddings), embedder, effective_filter(cfg));
}

TrainResult pretrain_model(const ExperimentConfig& cfg, const GroupedDataset& train, const GroupedDataset& filtered) {
    switch (cfg.method) {
        case Method::pipeline:
            return stage1_pretrain(make_model(train, cfg.model, cfg.pretrain.seed), filtered, cfg.pretrain);
        case Method::erm: return erm_baseline(train, cfg.model, cfg.pretrain);
        case Method::gdro: return gdro_baseline(train, cfg.model, cfg.pretrain, cfg.gdro);
        case Method::single_stage:
            return single_stage_train(train, filtered, cfg.single_stage_mix, cfg.model, cfg.pretrain);
    }
    throw Error(ErrorKind::config, "unknown method");
}

TrainResult finetune_model(const ExperimentConfig& cfg, const ClassifierModel& pretrained, const GroupedDataset& train) {
    if (cfg.method != Method::pipeline) return {pretrained, {}};
    if (cfg.gdro_finetune) return gdro_train(pretrained, train, cfg.finetune, cfg.gdro, false);
    return stage2_finetune(pretrained, train, cfg.variant, cfg.finetune);
}

RunResult run_in_memory(const ExperimentConfig& base, std::uint64_t seed) {
    const auto cfg = with_seed(base, seed);
    const auto real = make_real_dataset(cfg);
    const auto train = real.filter_split(Split::train);
    const auto test = real.filter_split(Split::test);
    RunResult out;
    GroupedDataset filtered = train.with_items({});
    if (uses_generation(cfg)) {
        auto embedder = make_embedder(cfg);
        const auto embeddings = embed_dataset(train, *embedder);
        const auto plan = make_plan(cfg, train);
        const auto clusters = cluster_sources(cfg, plan, train, embeddings);
        auto backend = make_generator(cfg);
        const auto synth = generate_synthetic(cfg, plan, *backend, train, clusters);
        const auto scores = score_synthetic(cfg, synth, train, embeddings, *embedder);
        filtered = filtered_dataset(synth, select_top(scores, effective_filter(cfg)));
        out.synthetic_count = synth.size();
        out.filtered_count = filtered.size();
        out.distribution = distribution_report(test, synth, *embedder);
    }
    auto pre = pretrain_model(cfg, train, filtered);
    out.stage1 = evaluate(pre.model, test);
    auto fin = finetune_model(cfg, pre.model, train);
    out.metrics = evaluate(fin.model, test);
    return out;
}

// ---------------------------------------------------------------- on-disk runner

fs::path runs_root() {
    if (const char* env = std::getenv("FAIRGEN_RUNS_DIR"); env && *env) return env;
    return "runs";
}

namespace {

std::vector<Stage> upstream_of(Stage stage) {
    switch (stage) {
        case Stage::split: return {};
        case Stage::embed: return {Stage::split};
        case Stage::cluster: return {Stage::split, Stage::embed};
        case Stage::generate: return {Stage::split, Stage::cluster};
        case Stage::score: return {Stage::split, Stage::embed, Stage::generate};
        case Stage::filter: return {Stage::generate, Stage::score};
        case Stage::pretrain: return {Stage::split, Stage::filter};
        case Stage::finetune: return {Stage::split, Stage::pretrain};
        case Stage::evaluate: return {Stage::split, Stage::generate, Stage::pretrain, Stage::finetune};
        case Stage::report: return {Stage::evaluate};
    }
    return {};
}

struct RunContext {
    ExperimentConfig cfg;
    std::uint64_t seed;
    std::string hash;
    fs::path dir;

    fs::path stage_dir(Stage s) const { return dir / std::string(to_string(s)); }
    fs::path file(Stage s, const std::string& name) const { return stage_dir(s) / name; }
};

std::optional<json> read_done(const RunContext& ctx, Stage s) {
    const auto p = ctx.file(s, "done.json");
    if (!fs::exists(p)) return std::nullopt;
    try {
        return json::parse(internal::read_file(p));
    } catch (const json::exception&) {
        return std::nullopt;
    }
}

std::string digest_of(const json& done) { return hash_hex(done.at("outputs").dump() + done.at("inputs").dump()); }

GroupedDataset load_split(const RunContext& ctx, Split split) {
    return load_manifest(ctx.file(Stage::split, std::string(to_string(split)) + ".csv"), schema_for(ctx.cfg));
}

std::string model_metadata(const RunContext& ctx, Stage stage, const ClassifierModel& model) {
    json j{{"config_hash", ctx.hash},
           {"seed", ctx.seed},
           {"stage", to_string(stage)},
           {"encoder_hash", model.encoder_hash()},
           {"head_hash", model.head_hash()},
           {"config", json::parse(config_to_json(ctx.cfg))}};
    return j.dump(2);
}

GroupMetrics metrics_from_json(const std::string& text) {
    const json j = json::parse(text);
    GroupMetrics m;
    m.wga = j.at("wga").get<double>();
    m.aga = j.at("aga").get<double>();
    m.sample_accuracy = j.at("sample_accuracy").get<double>();
    for (const auto& g : j.at("groups")) {
        GroupKey key{g.at("class_label").get<std::string>(), g.at("bias_label").get<std::string>()};
        m.groups.push_back(key);
        m.per_group_accuracy[key] = g.at("accuracy").get<double>();
        m.group_sizes[key] = g.at("size").get<std::size_t>();
    }
    return m;
}

std::map<GroupKey, std::vector<ScoredCandidate>> load_scores(const RunContext& ctx, const GroupedDataset& synth) {
    const auto rows = internal::csv_parse(internal::read_file(ctx.file(Stage::score, "scores.csv")));
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < synth.size(); ++i) index[synth[i].id] = i;
    std::map<GroupKey, std::vector<ScoredCandidate>> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& f = rows[r];
        if (f.size() != 4) throw Error(ErrorKind::parse, "bad scores.csv row");
        auto it = index.find(f[0]);
        if (it == index.end()) throw Error(ErrorKind::integrity, "score for unknown item " + f[0]);
        ScoredCandidate c;
        c.item = synth[it->second];
        c.clip_label = internal::parse_double(f[1]).value();
        if (!f[2].empty()) c.clip_centroid = internal::parse_double(f[2]).value();
        c.clip_score = internal::parse_double(f[3]).value();
        out[c.item.group()].push_back(std::move(c));
    }
    return out;
}

void write_skip(const fs::path& dir) { internal::write_file(dir / "skipped.txt", "not used by this method\n"); }

// Writes this stage's artifacts into ctx.stage_dir(stage).
void execute(Stage stage, const RunContext& ctx) {
    const auto& cfg = ctx.cfg;
    const auto dir = ctx.stage_dir(stage);
    const bool gen = uses_generation(cfg);
    switch (stage) {
        case Stage::split: {
            const auto real = make_real_dataset(cfg);
            for (auto s : {Split::train, Split::val, Split::test}) {
                save_manifest(real.filter_split(s), dir / (std::string(to_string(s)) + ".csv"));
            }
            json ratios = json::object();
            for (const auto& [y, r] : compute_bias_ratio(real.filter_split(Split::train))) ratios[y] = r;
            internal::write_file(dir / "bias_ratio.json",
                                 json{{"config_hash", ctx.hash}, {"seed", ctx.seed}, {"bias_ratio", ratios}}.dump(2));
            return;
        }
        case Stage::embed: {
            if (!gen) return write_skip(dir);
            auto embedder = make_embedder(cfg);
            save_embeddings(embed_dataset(load_split(ctx, Split::train), *embedder), dir / "embeddings.json");
            return;
        }
        case Stage::cluster: {
            if (!gen) return write_skip(dir);
            const auto train = load_split(ctx, Split::train);
            const auto plan = make_plan(cfg, train);
            internal::write_file(dir / "plan.json", plan_to_json(plan));
            const auto clusters =
                cluster_sources(cfg, plan, train, load_embeddings(ctx.file(Stage::embed, "embeddings.json")));
            save_cluster_assignments(clusters, dir / "clusters.json");
            return;
        }
        case Stage::generate: {
            if (!gen) return write_skip(dir);
            const auto train = load_split(ctx, Split::train);
            const auto plan = plan_from_json(internal::read_file(ctx.file(Stage::cluster, "plan.json")));
            const auto clusters = load_cluster_assignments(ctx.file(Stage::cluster, "clusters.json"));
            auto backend = make_generator(cfg);
            try {
                save_manifest(generate_synthetic(cfg, plan, *backend, train, clusters), dir / "synthetic.csv");
            } catch (const PartialGenerationError& e) {
                save_manifest(e.partial_manifest(), dir / "partial_synthetic.csv");
                if (auto* adapter = dynamic_cast<DiffusionAdapterBackend*>(backend.get())) {
                    std::string journal = diffusion_config_to_json(adapter->config()) + "\n";
                    for (const auto& line : adapter->journal()) journal += line + "\n";
                    internal::write_file(dir / "journal.txt", journal);
                }
                throw Error(ErrorKind::dependency, e.what());
            }
            return;
        }
        case Stage::score: {
            if (!gen) return write_skip(dir);
            const auto train = load_split(ctx, Split::train);
            const auto synth = load_manifest(ctx.file(Stage::generate, "synthetic.csv"), schema_for(cfg));
            auto embedder = make_embedder(cfg);
            const auto scores = score_synthetic(cfg, synth, train, load_embeddings(ctx.file(Stage::embed, "embeddings.json")),
                                                *embedder);
            std::string csv = "id,clip_label,clip_centroid,clip_score\n";
            for (const auto& [g, cands] : scores) {
                for (const auto& c : cands) {
                    csv += internal::csv_join({c.item.id, internal::format_double(c.clip_label),
                                               c.clip_centroid ? internal::format_double(*c.clip_centroid) : "",
                                               internal::format_double(c.clip_score)}) +
                           "\n";
                }
            }
            internal::write_file(dir / "scores.csv", csv);
            return;
        }
        case Stage::filter: {
            if (!gen) return write_skip(dir);
            const auto synth = load_manifest(ctx.file(Stage::generate, "synthetic.csv"), schema_for(cfg));
            const auto scores = load_scores(ctx, synth);
            const auto retained = select_top(scores, effective_filter(cfg));
            save_manifest(filtered_dataset(synth, retained), dir / "filtered.csv");
            internal::write_file(dir / "scored_manifest.csv", format_scored_manifest(synth, scores, retained));
            return;
        }
        case Stage::pretrain: {
            const auto train = load_split(ctx, Split::train);
            const auto filtered = gen ? load_manifest(ctx.file(Stage::filter, "filtered.csv"), schema_for(cfg))
                                      : train.with_items({});
            const auto result = pretrain_model(cfg, train, filtered);
            result.model.save(dir / "model.bin");
            internal::write_file(dir / "model.json", model_metadata(ctx, stage, result.model));
            internal::write_file(dir / "trajectory.csv", format_trajectory(result.trajectory));
            return;
        }
        case Stage::finetune: {
            const auto train = load_split(ctx, Split::train);
            const auto pre = ClassifierModel::load(ctx.file(Stage::pretrain, "model.bin"));
            const auto result = finetune_model(cfg, pre, train);
            result.model.save(dir / "model.bin");
            internal::write_file(dir / "model.json", model_metadata(ctx, stage, result.model));
            internal::write_file(dir / "trajectory.csv", format_trajectory(result.trajectory));
            return;
        }
        case Stage::evaluate: {
            const auto test = load_split(ctx, Split::test);
            const auto pre = ClassifierModel::load(ctx.file(Stage::pretrain, "model.bin"));
            const auto fin = ClassifierModel::load(ctx.file(Stage::finetune, "model.bin"));
            internal::write_file(dir / "stage1_metrics.json", metrics_to_json(evaluate(pre, test), ctx.hash, ctx.seed));
            internal::write_file(dir / "metrics.json", metrics_to_json(evaluate(fin, test), ctx.hash, ctx.seed));
            if (gen) {
                const auto synth = load_manifest(ctx.file(Stage::generate, "synthetic.csv"), schema_for(cfg));
                auto embedder = make_embedder(cfg);
                json d{{"config_hash", ctx.hash}, {"seed", ctx.seed}, {"frechet", json::object()}};
                for (const auto& [g, v] : distribution_report(test, synth, *embedder)) d["frechet"][g.to_string()] = v;
                internal::write_file(dir / "distribution.json", d.dump(2));
            }
            return;
        }
        case Stage::report: {
            const auto metrics = metrics_from_json(internal::read_file(ctx.file(Stage::evaluate, "metrics.json")));
            std::vector<LabeledMetrics> runs{{cfg.label, metrics}};
            for (auto f : cfg.report_formats) {
                internal::write_file(dir / (f == ReportFormat::csv ? "report.csv" : "report.md"), emit_report(runs, f));
            }
            return;
        }
    }
}

void update_index(const RunContext& ctx) {
    json index{{"config_hash", ctx.hash}, {"seed", ctx.seed}, {"label", ctx.cfg.label}, {"stages", json::object()}};
    for (auto s : all_stages()) {
        if (auto done = read_done(ctx, s)) {
            index["stages"][std::string(to_string(s))] = {{"digest", digest_of(*done)}, {"outputs", done->at("outputs")}};
        }
    }
    internal::write_file(ctx.dir / "index.json", index.dump(2));
}

RunContext make_context(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& root) {
    RunContext ctx{with_seed(cfg, seed), seed, config_hash(cfg, seed), {}};
    ctx.dir = root / ctx.hash;
    return ctx;
}

}  // namespace

StageOutcome run_stage(Stage stage, const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& root) {
    const auto ctx = make_context(cfg, seed, root);
    fs::create_directories(ctx.dir);
    const auto config_path = ctx.dir / "config.json";
    if (!fs::exists(config_path)) internal::write_file(config_path, config_to_json(ctx.cfg));

    json inputs = json::object();
    for (auto up : upstream_of(stage)) {
        auto done = read_done(ctx, up);
        if (!done) {
            throw Error(ErrorKind::dependency, "stage '" + std::string(to_string(stage)) + "' needs the output of '" +
                                                   std::string(to_string(up)) + "'; run 'fairgen " +
                                                   std::string(to_string(up)) + "' first");
        }
        inputs[std::string(to_string(up))] = digest_of(*done);
    }

    StageOutcome outcome{stage, false, ctx.stage_dir(stage)};
    if (auto done = read_done(ctx, stage); done && done->at("inputs") == inputs) {
        bool complete = true;
        for (const auto& [name, h] : done->at("outputs").items()) complete = complete && fs::exists(outcome.directory / name);
        if (complete) {
            outcome.cache_hit = true;
            spdlog::info("{}: cache hit ({})", to_string(stage), ctx.hash);
            return outcome;
        }
    }

    fs::remove_all(outcome.directory);
    fs::create_directories(outcome.directory);
    spdlog::info("{}: running ({}, seed {})", to_string(stage), ctx.hash, seed);
    execute(stage, ctx);

    json outputs = json::object();
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(outcome.directory)) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& p : files) outputs[p.filename().string()] = hash_hex(internal::read_file(p));
    json done{{"stage", to_string(stage)},
              {"config_hash", ctx.hash},
              {"seed", seed},
              {"inputs", inputs},
              {"outputs", outputs}};
    internal::write_file(outcome.directory / "done.json", done.dump(2));
    update_index(ctx);
    return outcome;
}

std::vector<StageOutcome> run_all_stages(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& root) {
    std::vector<StageOutcome> out;
    for (auto s : all_stages()) out.push_back(run_stage(s, cfg, seed, root));
    return out;
}

// ---------------------------------------------------------------- plots

namespace {

struct Summary {
    std::string label;
    double mean = 0.0;
    double sd = 0.0;
};

std::vector<Summary> summarize(const std::vector<LabeledMetrics>& runs) {
    std::vector<Summary> out;
    std::vector<std::vector<double>> values;
    for (const auto& r : runs) {
        auto it = std::find_if(out.begin(), out.end(), [&](const Summary& s) { return s.label == r.label; });
        if (it == out.end()) {
            out.push_back({r.label});
            values.emplace_back();
            it = out.end() - 1;
        }
        values[std::size_t(it - out.begin())].push_back(100.0 * r.metrics.wga);
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& v = values[i];
        double m = 0;
        for (double x : v) m += x;
        m /= double(v.size());
        double var = 0;
        for (double x : v) var += (x - m) * (x - m);
        out[i].mean = m;
        out[i].sd = v.size() > 1 ? std::sqrt(var / double(v.size() - 1)) : 0.0;
    }
    return out;
}

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return buf;
}

constexpr double kLeft = 60, kTop = 20, kPlotH = 240, kBottom = 120;

std::string y_axis(double width) {
    std::string s;
    for (int t = 0; t <= 100; t += 20) {
        const double y = kTop + kPlotH * (1.0 - t / 100.0);
        s += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(y) + "\" x2=\"" + num(width - 10) + "\" y2=\"" + num(y) +
             "\" stroke=\"#ddd\"/>\n";
        s += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(y + 4) + "\" text-anchor=\"end\" font-size=\"11\">" +
             std::to_string(t) + "</text>\n";
    }
    s += "<text x=\"14\" y=\"" + num(kTop + kPlotH / 2) + "\" font-size=\"12\" transform=\"rotate(-90 14 " +
         num(kTop + kPlotH / 2) + ")\" text-anchor=\"middle\">WGA (%)</text>\n";
    return s;
}

}  // namespace

std::string svg_wga_by_method(const std::vector<LabeledMetrics>& runs) {
    const auto rows = summarize(runs);
    const double slot = 70;
    const double width = kLeft + slot * double(std::max<std::size_t>(rows.size(), 1)) + 20;
    const double height = kTop + kPlotH + kBottom;
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) + "\">\n";
    s += y_axis(width);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double x = kLeft + slot * double(i) + 15;
        const double h = kPlotH * std::clamp(rows[i].mean, 0.0, 100.0) / 100.0;
        const double y = kTop + kPlotH - h;
        s += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"40\" height=\"" + num(h) + "\" fill=\"#4a7ab5\"/>\n";
        const double lo = kTop + kPlotH * (1.0 - std::clamp(rows[i].mean - rows[i].sd, 0.0, 100.0) / 100.0);
        const double hi = kTop + kPlotH * (1.0 - std::clamp(rows[i].mean + rows[i].sd, 0.0, 100.0) / 100.0);
        s += "<line x1=\"" + num(x + 20) + "\" y1=\"" + num(lo) + "\" x2=\"" + num(x + 20) + "\" y2=\"" + num(hi) +
             "\" stroke=\"black\"/>\n";
        const double ly = kTop + kPlotH + 12;
        s += "<text x=\"" + num(x + 20) + "\" y=\"" + num(ly) + "\" font-size=\"11\" text-anchor=\"end\" transform=\"rotate(-40 " +
             num(x + 20) + " " + num(ly) + ")\">" + escape_xml(rows[i].label) + "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

std::string svg_wga_vs_bias(const std::vector<LabeledMetrics>& runs) {
    std::map<std::string, std::vector<std::pair<double, double>>> lines;
    for (const auto& r : summarize(runs)) {
        const auto at = r.label.rfind('@');
        if (at == std::string::npos) continue;
        auto ratio = internal::parse_double(r.label.substr(at + 1));
        if (!ratio) continue;
        lines[r.label.substr(0, at)].emplace_back(*ratio, r.mean);
    }
    double lo = 1.0, hi = 0.0;
    for (const auto& [m, pts] : lines) {
        for (const auto& [x, y] : pts) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
    }
    if (hi <= lo) {
        lo = std::min(lo, hi) - 0.01;
        hi = lo + 0.02;
    }
    const double width = 480, plot_w = width - kLeft - 30;
    const double height = kTop + kPlotH + 70;
    const char* colors[] = {"#4a7ab5", "#c0504d", "#9bbb59", "#8064a2", "#f79646"};
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) + "\">\n";
    s += y_axis(width);
    auto px = [&](double x) { return kLeft + plot_w * (x - lo) / (hi - lo); };
    auto py = [&](double y) { return kTop + kPlotH * (1.0 - std::clamp(y, 0.0, 100.0) / 100.0); };
    std::size_t k = 0;
    for (auto& [method, pts] : lines) {
        std::sort(pts.begin(), pts.end());
        std::string path;
        for (const auto& [x, y] : pts) path += (path.empty() ? "" : " ") + num(px(x)) + "," + num(py(y));
        const char* color = colors[k % 5];
        s += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"" + path + "\"/>\n";
        s += "<text x=\"" + num(kLeft + 8) + "\" y=\"" + num(kTop + kPlotH + 40 + 14.0 * double(k)) + "\" font-size=\"11\" fill=\"" +
             color + "\">" + escape_xml(method) + "</text>\n";
        ++k;
    }
    std::set<double> xs;
    for (const auto& [m, pts] : lines) {
        for (const auto& p : pts) xs.insert(p.first);
    }
    for (double x : xs) {
        s += "<text x=\"" + num(px(x)) + "\" y=\"" + num(kTop + kPlotH + 16) + "\" font-size=\"11\" text-anchor=\"middle\">" +
             ratio_text(x) + "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

MatrixResult run_matrix(const std::vector<std::string>& presets, const std::vector<std::uint64_t>& seeds,
                        const ExperimentConfig& base, const fs::path& root) {
    if (seeds.empty()) throw Error(ErrorKind::config, "seed list is empty");
    if (presets.empty()) throw Error(ErrorKind::config, "preset list is empty");
    std::vector<PresetRow> rows;
    for (const auto& p : presets) {
        for (auto& r : preset_rows(p, base)) rows.push_back(std::move(r));
    }
    MatrixResult result;
    for (const auto& row : rows) {
        for (auto seed : seeds) {
            try {
                run_all_stages(row.config, seed, root);
                const auto ctx = make_context(row.config, seed, root);
                result.runs.push_back(
                    {row.label, metrics_from_json(internal::read_file(ctx.file(Stage::evaluate, "metrics.json")))});
            } catch (const std::exception& e) {
                spdlog::error("matrix cell '{}' seed {} failed: {}", row.label, seed, e.what());
                result.failures.push_back({row.label, seed, e.what()});
            }
        }
    }

    std::string key;
    for (const auto& p : presets) key += p + ",";
    key += "|";
    for (auto s : seeds) key += std::to_string(s) + ",";
    key += "|" + config_to_json(base);
    const auto dir = root / "matrix" / hash_hex(key);
    fs::create_directories(dir);
    for (auto f : base.report_formats) {
        result.reports[f] = emit_report(result.runs, f);
        const auto path = dir / (f == ReportFormat::csv ? "report.csv" : "report.md");
        internal::write_file(path, result.reports[f]);
        result.files.push_back(path);
    }
    if (!result.runs.empty()) {
        internal::write_file(dir / "wga_by_method.svg", svg_wga_by_method(result.runs));
        result.files.push_back(dir / "wga_by_method.svg");
        const bool sweep = std::any_of(result.runs.begin(), result.runs.end(),
                                       [](const LabeledMetrics& r) { return r.label.find('@') != std::string::npos; });
        if (sweep) {
            internal::write_file(dir / "wga_vs_bias.svg", svg_wga_vs_bias(result.runs));
            result.files.push_back(dir / "wga_vs_bias.svg");
        }
    }
    json failures = json::array();
    for (const auto& f : result.failures) failures.push_back({{"label", f.label}, {"seed", f.seed}, {"error", f.message}});
    internal::write_file(dir / "failures.json", failures.dump(2));
    result.files.push_back(dir / "failures.json");
    return result;
}

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::dependency:
        case ErrorKind::io:
        case ErrorKind::integrity:
        case ErrorKind::partial_generation: return 3;
        case ErrorKind::numerical:
        case ErrorKind::undefined_similarity: return 4;
        default: return 2;
    }
}

}  // namespace fairgen
