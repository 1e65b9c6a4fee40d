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

#include "fairgen/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>

#include "fairgen/error.hpp"
#include "fairgen/hash.hpp"
#include "internal/text_io.hpp"

namespace fairgen {

void TrainConfig::validate() const {
    if (!(beta >= 0.0 && beta <= 1.0)) throw Error(ErrorKind::config, "beta must lie in [0, 1]");
    if (!(tau > 0.0)) throw Error(ErrorKind::config, "tau must be positive");
    if (epochs < 0) throw Error(ErrorKind::config, "epochs must be non-negative");
    if (!(learning_rate > 0.0)) throw Error(ErrorKind::config, "learning_rate must be positive");
    if (!(weight_decay >= 0.0)) throw Error(ErrorKind::config, "weight_decay must be non-negative");
    if (batch_size == 0) throw Error(ErrorKind::config, "batch_size must be positive");
}

std::string_view to_string(FinetuneVariant variant) {
    switch (variant) {
        case FinetuneVariant::llr_all: return "llr_all";
        case FinetuneVariant::llr_b: return "llr_b";
        case FinetuneVariant::ft_b: return "ft_b";
    }
    return "llr_all";
}

FinetuneVariant parse_finetune_variant(std::string_view text) {
    const auto t = internal::to_lower(text);
    if (t == "llr_all") return FinetuneVariant::llr_all;
    if (t == "llr_b") return FinetuneVariant::llr_b;
    if (t == "ft_b") return FinetuneVariant::ft_b;
    throw Error(ErrorKind::config, "unknown finetune variant '" + std::string(text) + "'");
}

Eigen::MatrixXd input_matrix(const GroupedDataset& ds) {
    if (ds.empty()) return {};
    const auto dim = static_cast<Eigen::Index>(ds[0].image.size());
    if (dim == 0) throw Error(ErrorKind::dependency, "item " + ds[0].id + " has no decoded pixels");
    Eigen::MatrixXd x(dim, static_cast<Eigen::Index>(ds.size()));
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto& px = ds[i].image.pixels;
        if (static_cast<Eigen::Index>(px.size()) != dim) {
            throw Error(ErrorKind::dimension_mismatch, "item " + ds[i].id + " has a different image size");
        }
        x.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(px.data(), dim).array() - 0.5;
    }
    return x;
}

std::vector<int> class_indices(const GroupedDataset& ds) {
    std::vector<int> out;
    out.reserve(ds.size());
    for (const auto& item : ds.items()) out.push_back(ds.class_index(item.class_label));
    return out;
}

ClassifierModel make_model(const GroupedDataset& ds, const ModelSpec& spec, std::uint64_t seed) {
    if (ds.empty()) throw Error(ErrorKind::empty_input, "cannot size a model from an empty dataset");
    return ClassifierModel(static_cast<int>(ds[0].image.size()), spec.encoder_widths,
                           static_cast<int>(ds.classes().size()), seed);
}

namespace {

enum class Batching { shuffled, group_uniform, class_uniform };

struct Data {
    Eigen::MatrixXd x;
    std::vector<int> y;
};

Data load(const GroupedDataset& ds) { return {input_matrix(ds), class_indices(ds)}; }

std::size_t steps_per_epoch(std::size_t n, std::size_t batch) { return (n + batch - 1) / batch; }

class BatchStream {
public:
    BatchStream(const GroupedDataset& ds, Batching mode, std::size_t batch, std::uint64_t seed)
        : mode_(mode), batch_(batch), rng_(seed), n_(ds.size()) {
        if (mode == Batching::shuffled) {
            order_.resize(n_);
            std::iota(order_.begin(), order_.end(), 0);
        } else {
            sampler_.emplace(ds, batch, mode == Batching::group_uniform ? BalanceMode::group_uniform
                                                                        : BalanceMode::class_uniform,
                             mix64(seed));
        }
    }

    void start_epoch() {
        if (mode_ == Batching::shuffled) {
            std::shuffle(order_.begin(), order_.end(), rng_);
            cursor_ = 0;
        }
    }

    std::vector<std::size_t> next() {
        if (mode_ != Batching::shuffled) return sampler_->next();
        const std::size_t end = std::min(n_, cursor_ + batch_);
        std::vector<std::size_t> out(order_.begin() + cursor_, order_.begin() + end);
        cursor_ = end;
        return out;
    }

private:
    Batching mode_;
    std::size_t batch_;
    std::mt19937_64 rng_;
    std::size_t n_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
    std::optional<BalancedBatchSampler> sampler_;
};

Eigen::MatrixXd gather(const Eigen::MatrixXd& x, const std::vector<std::size_t>& idx) {
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = x.col(static_cast<Eigen::Index>(idx[j]));
    return out;
}

[[noreturn]] void diverged(const std::vector<EpochRecord>& trajectory, int epoch) {
    throw Error(ErrorKind::numerical, "training diverged (non-finite loss) in epoch " + std::to_string(epoch) +
                                          "; trajectory so far:\n" + format_trajectory(trajectory));
}

// Combined-loss training loop shared by every non-GDRO procedure.
TrainResult train_combined(ClassifierModel model, const GroupedDataset& ds, const TrainConfig& cfg, Batching batching,
                           double beta, std::uint64_t salt) {
    cfg.validate();
    TrainResult result;
    if (cfg.epochs == 0 || ds.empty()) {
        result.model = std::move(model);
        return result;
    }
    const Data data = load(ds);
    BatchStream stream(ds, batching, cfg.batch_size, mix64(cfg.seed ^ salt));
    const std::size_t steps = steps_per_epoch(ds.size(), cfg.batch_size);
    const bool train_encoder = !model.encoder_frozen();
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        stream.start_epoch();
        EpochRecord rec{epoch, 0, 0, 0};
        for (std::size_t s = 0; s < steps; ++s) {
            const auto idx = stream.next();
            if (idx.empty()) continue;
            std::vector<int> y(idx.size());
            for (std::size_t j = 0; j < idx.size(); ++j) y[j] = data.y[idx[j]];
            const auto fwd = model.forward(gather(data.x, idx));
            auto loss = combined_loss(fwd.logits, fwd.features(), y, beta, cfg.tau, cfg.supcon_form);
            if (!std::isfinite(loss.value)) {
                rec.total = loss.value;
                result.trajectory.push_back(rec);
                diverged(result.trajectory, epoch);
            }
            rec.ce += loss.ce / double(steps);
            rec.supcon += loss.supcon / double(steps);
            rec.total += loss.value / double(steps);
            const auto grads = model.backward(fwd, loss.dlogits, train_encoder ? &loss.dfeatures : nullptr, train_encoder);
            model.sgd_step(grads, cfg.learning_rate, cfg.weight_decay);
        }
        result.trajectory.push_back(rec);
        spdlog::debug("epoch {} ce={:.4f} supcon={:.4f} total={:.4f}", epoch, rec.ce, rec.supcon, rec.total);
    }
    result.model = std::move(model);
    return result;
}

GroupedDataset merged(const GroupedDataset& a, const GroupedDataset& b) {
    std::vector<DatasetItem> items = a.items();
    items.insert(items.end(), b.items().begin(), b.items().end());
    return a.with_items(std::move(items));
}

}  // namespace

TrainResult stage1_pretrain(ClassifierModel model, const GroupedDataset& synth, const TrainConfig& cfg) {
    model.freeze_encoder(false);
    return train_combined(std::move(model), synth, cfg, Batching::group_uniform, cfg.beta, 0x5171);
}

GroupedDataset balanced_subsample(const GroupedDataset& ds, std::uint64_t seed) {
    std::size_t smallest = 0;
    bool first = true;
    for (const auto& [g, al] : ds.alignment_map()) {
        const auto n = ds.group_size(g);
        if (n == 0) throw Error(ErrorKind::empty_input, "group " + g.to_string() + " is empty; cannot balance");
        smallest = first ? n : std::min(smallest, n);
        first = false;
    }
    std::vector<std::size_t> keep;
    for (const auto& g : ds.groups()) {
        std::vector<std::size_t> members = ds.group_members(g);
        std::mt19937_64 rng(mix64(seed ^ fnv1a64(g.to_string())));
        std::shuffle(members.begin(), members.end(), rng);
        keep.insert(keep.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(smallest));
    }
    std::sort(keep.begin(), keep.end());
    return ds.subset(keep);
}

TrainResult stage2_finetune(ClassifierModel pretrained, const GroupedDataset& real, FinetuneVariant variant,
                            const TrainConfig& cfg) {
    switch (variant) {
        case FinetuneVariant::llr_all:
            pretrained.freeze_encoder(true);
            return train_combined(std::move(pretrained), real, cfg, Batching::class_uniform, cfg.beta, 0x5272);
        case FinetuneVariant::llr_b:
            pretrained.freeze_encoder(true);
            return train_combined(std::move(pretrained), balanced_subsample(real, cfg.seed), cfg, Batching::shuffled,
                                  cfg.beta, 0x5273);
        case FinetuneVariant::ft_b:
            pretrained.freeze_encoder(false);
            return train_combined(std::move(pretrained), balanced_subsample(real, cfg.seed), cfg, Batching::shuffled,
                                  cfg.beta, 0x5274);
    }
    throw Error(ErrorKind::config, "unknown finetune variant");
}

TrainResult erm_baseline(const GroupedDataset& real, const ModelSpec& spec, const TrainConfig& cfg) {
    return train_combined(make_model(real, spec, cfg.seed), real, cfg, Batching::shuffled, 1.0, 0xe7e7);
}

TrainResult gdro_train(ClassifierModel model, const GroupedDataset& real, const TrainConfig& cfg, const GdroConfig& gdro,
                       bool train_encoder) {
    cfg.validate();
    if (!(gdro.eta >= 0.0)) throw Error(ErrorKind::config, "GDRO eta must be non-negative");
    model.freeze_encoder(!train_encoder);
    TrainResult result;
    if (cfg.epochs == 0 || real.empty()) {
        result.model = std::move(model);
        return result;
    }
    const Data data = load(real);
    std::vector<int> group_of(real.size());
    std::vector<GroupKey> keys;
    std::map<GroupKey, double> q;
    for (const auto& [g, al] : real.alignment_map()) q[g] = 0.0;
    for (auto& [g, w] : q) {
        w = 1.0 / double(q.size());
        keys.push_back(g);
    }
    for (std::size_t i = 0; i < real.size(); ++i) {
        group_of[i] = static_cast<int>(std::find(keys.begin(), keys.end(), real[i].group()) - keys.begin());
    }
    BatchStream stream(real, Batching::shuffled, cfg.batch_size, mix64(cfg.seed ^ 0x6d70));
    const std::size_t steps = steps_per_epoch(real.size(), cfg.batch_size);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        stream.start_epoch();
        EpochRecord rec{epoch, 0, 0, 0};
        for (std::size_t s = 0; s < steps; ++s) {
            const auto idx = stream.next();
            if (idx.empty()) continue;
            const auto fwd = model.forward(gather(data.x, idx));
            const auto probs = softmax(fwd.logits);
            std::vector<double> sum(keys.size(), 0.0);
            std::vector<std::size_t> count(keys.size(), 0);
            for (std::size_t j = 0; j < idx.size(); ++j) {
                const int y = data.y[idx[j]];
                const double p = std::max(probs(y, static_cast<Eigen::Index>(j)), kProbabilityFloor);
                sum[group_of[idx[j]]] -= std::log(p);
                ++count[group_of[idx[j]]];
            }
            std::map<GroupKey, double> losses;
            for (std::size_t g = 0; g < keys.size(); ++g) {
                if (count[g] > 0) losses[keys[g]] = sum[g] / double(count[g]);
            }
            const auto step = gdro_loss(losses, q, gdro.eta);
            if (!std::isfinite(step.loss)) {
                rec.total = step.loss;
                result.trajectory.push_back(rec);
                diverged(result.trajectory, epoch);
            }
            q = step.weights;
            Eigen::MatrixXd dlogits = probs;
            for (std::size_t j = 0; j < idx.size(); ++j) {
                const auto col = static_cast<Eigen::Index>(j);
                const int g = group_of[idx[j]];
                dlogits(data.y[idx[j]], col) -= 1.0;
                dlogits.col(col) *= q[keys[g]] / double(count[g]);
            }
            const auto grads = model.backward(fwd, dlogits, nullptr, train_encoder);
            model.sgd_step(grads, cfg.learning_rate, cfg.weight_decay);
            rec.ce += step.loss / double(steps);
            rec.total += step.loss / double(steps);
        }
        result.trajectory.push_back(rec);
    }
    model.freeze_encoder(false);
    result.model = std::move(model);
    return result;
}

TrainResult gdro_baseline(const GroupedDataset& real, const ModelSpec& spec, const TrainConfig& cfg,
                          const GdroConfig& gdro) {
    return gdro_train(make_model(real, spec, cfg.seed), real, cfg, gdro, true);
}

TrainResult single_stage_train(const GroupedDataset& real, const GroupedDataset& synth, SingleStageMix mix,
                               const ModelSpec& spec, const TrainConfig& cfg) {
    GroupedDataset data = merged(real, synth);
    if (mix == SingleStageMix::balanced_mix) data = balanced_subsample(data, cfg.seed);
    return train_combined(make_model(data, spec, cfg.seed), data, cfg, Batching::shuffled, cfg.beta, 0x5153);
}

std::string format_trajectory(const std::vector<EpochRecord>& trajectory) {
    std::string out = "epoch,ce,supcon,total\n";
    for (const auto& r : trajectory) {
        out += std::to_string(r.epoch) + "," + internal::format_double(r.ce) + "," + internal::format_double(r.supcon) +
               "," + internal::format_double(r.total) + "\n";
    }
    return out;
}

}  // namespace fairgen
