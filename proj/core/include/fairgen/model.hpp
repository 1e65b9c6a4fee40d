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
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fairgen {

struct DenseLayer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;
};

/// Encoder e (ReLU MLP) followed by a single linear head c.
///
/// Batches are column-major: one sample per column.
class ClassifierModel {
public:
    ClassifierModel() = default;
    ClassifierModel(int input_dim, std::vector<int> encoder_widths, int num_classes, std::uint64_t seed);

    struct Forward {
        std::vector<Eigen::MatrixXd> activations;  // input, then each encoder layer output
        Eigen::MatrixXd logits;

        const Eigen::MatrixXd& features() const { return activations.back(); }
    };

    struct Gradients {
        std::vector<DenseLayer> encoder;  // empty when not requested
        DenseLayer head;
    };

    Forward forward(const Eigen::MatrixXd& inputs) const;
    Eigen::MatrixXd features(const Eigen::MatrixXd& inputs) const;
    Eigen::MatrixXd logits(const Eigen::MatrixXd& inputs) const;
    Eigen::MatrixXd head_logits(const Eigen::MatrixXd& features) const;
    std::vector<int> predict(const Eigen::MatrixXd& inputs) const;

    /// Backpropagates loss gradients w.r.t. logits and (optionally) features.
    Gradients backward(const Forward& fwd, const Eigen::MatrixXd& dlogits, const Eigen::MatrixXd* dfeatures,
                       bool with_encoder) const;

    /// Plain SGD with L2 weight decay. Encoder parameters are never touched
    /// while the encoder is frozen.
    void sgd_step(const Gradients& grads, double learning_rate, double weight_decay);

    void freeze_encoder(bool frozen) noexcept { encoder_frozen_ = frozen; }
    bool encoder_frozen() const noexcept { return encoder_frozen_; }

    int input_dim() const noexcept { return input_dim_; }
    int feature_dim() const;
    int num_classes() const noexcept { return static_cast<int>(head_.bias.size()); }
    const std::vector<int>& encoder_widths() const noexcept { return widths_; }

    const std::vector<DenseLayer>& encoder() const noexcept { return encoder_; }
    std::vector<DenseLayer>& encoder() noexcept { return encoder_; }
    const DenseLayer& head() const noexcept { return head_; }
    DenseLayer& head() noexcept { return head_; }

    std::string serialize_encoder() const;
    std::string serialize_head() const;
    std::string encoder_hash() const;
    std::string head_hash() const;

    /// Versioned binary blob.
    std::string serialize() const;
    static ClassifierModel deserialize(const std::string& blob);
    void save(const std::filesystem::path& path) const;
    static ClassifierModel load(const std::filesystem::path& path);

    friend bool operator==(const ClassifierModel& a, const ClassifierModel& b) { return a.serialize() == b.serialize(); }

private:
    int input_dim_ = 0;
    std::vector<int> widths_;
    std::vector<DenseLayer> encoder_;
    DenseLayer head_;
    bool encoder_frozen_ = false;
};

/// Column-wise softmax.
Eigen::MatrixXd softmax(const Eigen::MatrixXd& logits);

}  // namespace fairgen
