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

#include "fairgen/losses.hpp"

#include <atomic>
#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

#include "fairgen/error.hpp"
#include "fairgen/model.hpp"

namespace fairgen {

namespace {

void check_labels(Eigen::Index classes, Eigen::Index batch, std::span<const int> labels) {
    if (static_cast<Eigen::Index>(labels.size()) != batch) {
        throw Error(ErrorKind::dimension_mismatch, "label count does not match batch size");
    }
    for (int y : labels) {
        if (y < 0 || (classes > 0 && y >= classes)) throw Error(ErrorKind::config, "label out of range");
    }
}

constexpr double kNormEps = 1e-12;

// first hit at warn, later ones at debug
void warn_once(std::atomic<bool>& seen, const char* message) {
    spdlog::log(seen.exchange(true) ? spdlog::level::debug : spdlog::level::warn, message);
}

std::atomic<bool> g_clamp_seen{false};
std::atomic<bool> g_small_batch_seen{false};
std::atomic<bool> g_no_anchor_seen{false};

}  // namespace

double ce_loss(const Eigen::MatrixXd& probs, std::span<const int> labels) {
    check_labels(probs.rows(), probs.cols(), labels);
    if (probs.cols() == 0) throw Error(ErrorKind::empty_input, "empty batch");
    double total = 0.0;
    bool clamped = false;
    for (Eigen::Index j = 0; j < probs.cols(); ++j) {
        double p = probs(labels[j], j);
        if (p < kProbabilityFloor) {
            p = kProbabilityFloor;
            clamped = true;
        }
        total -= std::log(p);
    }
    if (clamped) warn_once(g_clamp_seen, "cross-entropy: true-class probability clamped at 1e-12");
    return total / double(probs.cols());
}

CrossEntropy ce_loss_from_logits(const Eigen::MatrixXd& logits, std::span<const int> labels) {
    const auto probs = softmax(logits);
    CrossEntropy out;
    out.value = ce_loss(probs, labels);
    out.dlogits = probs;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) out.dlogits(labels[j], j) -= 1.0;
    out.dlogits /= double(logits.cols());
    return out;
}

SupCon supcon_loss(const Eigen::MatrixXd& features, std::span<const int> labels, double tau, SupConForm form,
                   bool with_gradient) {
    check_labels(0, features.cols(), labels);
    if (!(tau > 0.0)) throw Error(ErrorKind::config, "temperature must be positive");
    const Eigen::Index n = features.cols();
    SupCon out;
    out.dfeatures = Eigen::MatrixXd::Zero(features.rows(), n);
    if (n < 2) {
        warn_once(g_small_batch_seen, "supcon: batch smaller than 2; loss is 0");
        return out;
    }

    Eigen::VectorXd norms = features.colwise().norm().transpose();
    Eigen::MatrixXd z = features;
    for (Eigen::Index j = 0; j < n; ++j) z.col(j) /= std::max(norms[j], kNormEps);
    const Eigen::MatrixXd s = (z.transpose() * z) / tau;

    Eigen::MatrixXd ds = Eigen::MatrixXd::Zero(n, n);  // d loss / d s(j, k)
    std::vector<Eigen::Index> pos, den;
    for (Eigen::Index j = 0; j < n; ++j) {
        pos.clear();
        den.clear();
        bool has_negative = false;
        for (Eigen::Index k = 0; k < n; ++k) {
            if (k == j) continue;
            const bool same = labels[k] == labels[j];
            if (same) pos.push_back(k);
            else has_negative = true;
            if (!same || form == SupConForm::standard) den.push_back(k);
        }
        if (pos.empty() || !has_negative) continue;
        ++out.anchors_used;

        double m = -std::numeric_limits<double>::infinity();
        for (auto k : den) m = std::max(m, s(j, k));
        double sum = 0.0;
        for (auto k : den) sum += std::exp(s(j, k) - m);
        const double log_den = m + std::log(sum);

        const double w = 1.0 / double(pos.size());
        for (auto p : pos) out.value -= w * (s(j, p) - log_den);
        if (!with_gradient) continue;
        for (auto p : pos) ds(j, p) -= w;
        for (auto k : den) ds(j, k) += std::exp(s(j, k) - log_den);
    }
    if (out.anchors_used == 0) {
        warn_once(g_no_anchor_seen, "supcon: no anchor has both positives and negatives; loss is 0");
        return out;
    }
    if (!with_gradient) return out;

    // s = z^T z / tau  =>  dz = z (ds + ds^T) / tau
    const Eigen::MatrixXd dz = z * (ds + ds.transpose()) / tau;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double r = std::max(norms[j], kNormEps);
        if (norms[j] < kNormEps) {
            out.dfeatures.col(j) = dz.col(j) / r;
        } else {
            out.dfeatures.col(j) = (dz.col(j) - z.col(j) * z.col(j).dot(dz.col(j))) / r;
        }
    }
    return out;
}

CombinedLoss combined_loss(const Eigen::MatrixXd& logits, const Eigen::MatrixXd& features, std::span<const int> labels,
                           double beta, double tau, SupConForm form) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw Error(ErrorKind::config, "beta must lie in [0, 1]");
    CombinedLoss out;
    auto ce = ce_loss_from_logits(logits, labels);
    out.ce = ce.value;
    out.dlogits = beta * ce.dlogits;
    if (beta < 1.0) {
        auto sc = supcon_loss(features, labels, tau, form, true);
        out.supcon = sc.value;
        out.dfeatures = (1.0 - beta) * sc.dfeatures;
    } else {
        out.dfeatures = Eigen::MatrixXd::Zero(features.rows(), features.cols());
    }
    out.value = beta * out.ce + (1.0 - beta) * out.supcon;
    return out;
}

GdroStep gdro_loss(const std::map<GroupKey, double>& group_losses, const std::map<GroupKey, double>& weights,
                   double eta) {
    GdroStep out;
    double total = 0.0;
    for (const auto& [g, q] : weights) {
        auto it = group_losses.find(g);
        const double l = it == group_losses.end() ? 0.0 : it->second;
        if (!std::isfinite(l)) throw Error(ErrorKind::numerical, "non-finite loss for group " + g.to_string());
        if (q < 0.0) throw Error(ErrorKind::config, "negative group weight");
        const double nq = q * std::exp(eta * l);
        out.weights[g] = nq;
        total += nq;
    }
    if (!(total > 0.0) || !std::isfinite(total)) throw Error(ErrorKind::numerical, "group weights degenerated");
    for (auto& [g, q] : out.weights) {
        q /= total;
        auto it = group_losses.find(g);
        if (it != group_losses.end()) out.loss += q * it->second;
    }
    return out;
}

}  // namespace fairgen
