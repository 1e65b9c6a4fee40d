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

#include <map>
#include <span>

#include <Eigen/Dense>

#include "fairgen/group_data.hpp"

namespace fairgen {

inline constexpr double kProbabilityFloor = 1e-12;

/// Mean over the batch of -log p_hat[true class]. probs is classes x batch.
double ce_loss(const Eigen::MatrixXd& probs, std::span<const int> labels);

struct CrossEntropy {
    double value = 0.0;
    Eigen::MatrixXd dlogits;
};

/// Same loss evaluated from logits, with its gradient (softmax - onehot) / B.
CrossEntropy ce_loss_from_logits(const Eigen::MatrixXd& logits, std::span<const int> labels);

/// negatives_only: denominator sums over other-class samples only.
/// standard: denominator sums over every sample except the anchor.
enum class SupConForm { negatives_only, standard };

struct SupCon {
    double value = 0.0;
    Eigen::MatrixXd dfeatures;  // w.r.t. the raw (unnormalized) features
    std::size_t anchors_used = 0;
};

/// Supervised contrastive loss, summed over anchors.
///
/// For anchor j with positives P_j (same class, excluding j) and negatives N_j:
///   -1/|P_j| * sum_{p in P_j} log( exp(z_j.z_p / tau) / sum_{n in D_j} exp(z_j.z_n / tau) )
/// where z are L2-normalized features and D_j = N_j (negatives_only) or all
/// samples but j (standard). Anchors with empty P_j or N_j are skipped.
SupCon supcon_loss(const Eigen::MatrixXd& features, std::span<const int> labels, double tau,
                   SupConForm form = SupConForm::negatives_only, bool with_gradient = true);

struct CombinedLoss {
    double value = 0.0;
    double ce = 0.0;
    double supcon = 0.0;
    Eigen::MatrixXd dlogits;
    Eigen::MatrixXd dfeatures;
};

/// beta * CE + (1 - beta) * SupCon.
CombinedLoss combined_loss(const Eigen::MatrixXd& logits, const Eigen::MatrixXd& features, std::span<const int> labels,
                           double beta, double tau, SupConForm form = SupConForm::negatives_only);

struct GdroStep {
    double loss = 0.0;
    std::map<GroupKey, double> weights;
};

/// Exponentiated-gradient update q_g <- q_g exp(eta l_g), renormalized, then
/// the q-weighted loss.
GdroStep gdro_loss(const std::map<GroupKey, double>& group_losses, const std::map<GroupKey, double>& weights,
                   double eta);

}  // namespace fairgen
