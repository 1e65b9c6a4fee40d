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

#include "fairgen/group_cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "fairgen/error.hpp"
#include "fairgen/hash.hpp"
#include "internal/text_io.hpp"

namespace fairgen {

int cluster_count_rule(std::size_t smallest_group_size) {
    const long rounded = std::lround(double(smallest_group_size) / 20.0);
    return static_cast<int>(std::clamp(rounded, 1L, 20L));
}

std::vector<std::string> ClusterAssignment::members(int cluster) const {
    std::vector<std::string> out;
    for (const auto& [id, label] : labels) {
        if (label == cluster) out.push_back(id);
    }
    return out;
}

namespace {

int nearest(const Embedding& p, std::span<const Embedding> centroids, double* dist = nullptr) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        double d = (p - centroids[c]).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    if (dist) *dist = best_d;
    return best;
}

std::vector<Embedding> kmeanspp_init(std::span<const Embedding> points, int k, std::mt19937_64& rng) {
    const std::size_t n = points.size();
    std::vector<Embedding> centers;
    std::vector<bool> chosen(n, false);
    std::size_t first = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    centers.push_back(points[first]);
    chosen[first] = true;
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = (points[i] - centers[0]).squaredNorm();
    while (static_cast<int>(centers.size()) < k) {
        double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        std::size_t pick = 0;
        if (total > 0.0) {
            double r = std::uniform_real_distribution<double>(0.0, total)(rng);
            double acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (r < acc && d2[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            std::vector<std::size_t> free;
            for (std::size_t i = 0; i < n; ++i) {
                if (!chosen[i]) free.push_back(i);
            }
            pick = free[std::uniform_int_distribution<std::size_t>(0, free.size() - 1)(rng)];
        }
        chosen[pick] = true;
        centers.push_back(points[pick]);
        for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], (points[i] - centers.back()).squaredNorm());
    }
    return centers;
}

std::vector<int> assign(std::span<const Embedding> points, std::span<const Embedding> centroids) {
    std::vector<int> labels(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) labels[i] = nearest(points[i], centroids);
    return labels;
}

/// Means of the labeled points; empty clusters take over the point farthest
/// from its centroid among clusters that can spare one.
std::vector<Embedding> update_centroids(std::span<const Embedding> points, std::vector<int>& labels, int k) {
    const auto d = points.front().size();
    std::vector<Embedding> sums(k, Embedding::Zero(d));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        sums[labels[i]] += points[i];
        ++counts[labels[i]];
    }
    std::vector<Embedding> centroids(k);
    for (int c = 0; c < k; ++c) centroids[c] = counts[c] ? Embedding(sums[c] / double(counts[c])) : Embedding::Zero(d);
    for (int c = 0; c < k; ++c) {
        if (counts[c]) continue;
        std::size_t far = points.size();
        double far_d = -1.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (counts[labels[i]] < 2) continue;
            double dd = (points[i] - centroids[labels[i]]).squaredNorm();
            if (dd > far_d) {
                far_d = dd;
                far = i;
            }
        }
        if (far == points.size()) break;
        const int src = labels[far];
        sums[src] -= points[far];
        --counts[src];
        centroids[src] = sums[src] / double(counts[src]);
        labels[far] = c;
        sums[c] = points[far];
        counts[c] = 1;
        centroids[c] = points[far];
    }
    return centroids;
}

}  // namespace

double within_cluster_sse(std::span<const Embedding> points, std::span<const int> labels,
                          std::span<const Embedding> centroids) {
    double sse = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) sse += (points[i] - centroids[labels[i]]).squaredNorm();
    return sse;
}

KMeansResult kmeans(std::span<const Embedding> points, int k, std::uint64_t seed, int max_iter) {
    if (points.empty()) throw Error(ErrorKind::empty_input, "k-means on an empty point set");
    if (k < 1 || static_cast<std::size_t>(k) > points.size()) {
        throw Error(ErrorKind::config, "k = " + std::to_string(k) + " for " + std::to_string(points.size()) + " points");
    }
    std::mt19937_64 rng(seed);
    KMeansResult result;
    result.centroids = kmeanspp_init(points, k, rng);
    result.labels = assign(points, result.centroids);
    result.sse_trajectory.push_back(within_cluster_sse(points, result.labels, result.centroids));
    for (int it = 0; it < max_iter; ++it) {
        std::vector<int> labels = result.labels;
        auto centroids = update_centroids(points, labels, k);
        auto next = assign(points, centroids);
        result.iterations = it + 1;
        result.sse_trajectory.push_back(within_cluster_sse(points, next, centroids));
        result.centroids = std::move(centroids);
        const bool fixed = next == result.labels;
        result.labels = std::move(next);
        if (fixed) {
            result.converged = true;
            break;
        }
    }
    // The final assignment step may have emptied a cluster.
    result.centroids = update_centroids(points, result.labels, k);
    return result;
}

std::map<GroupKey, ClusterAssignment> kmeans_per_group(const GroupedDataset& ds,
                                                       const std::map<std::string, Embedding>& embeddings,
                                                       const KMeansOptions& options) {
    std::map<GroupKey, ClusterAssignment> out;
    for (std::size_t gi = 0; gi < ds.groups().size(); ++gi) {
        const auto& g = ds.groups()[gi];
        std::vector<std::string> ids;
        for (auto idx : ds.group_members(g)) ids.push_back(ds[idx].id);
        std::sort(ids.begin(), ids.end());
        std::vector<Embedding> points;
        points.reserve(ids.size());
        for (const auto& id : ids) {
            auto it = embeddings.find(id);
            if (it == embeddings.end()) throw Error(ErrorKind::dependency, "no embedding for item '" + id + "'");
            points.push_back(options.normalize ? Embedding(it->second.normalized()) : it->second);
        }
        ClusterAssignment ca;
        ca.group = g;
        ca.k = options.k;
        if (static_cast<std::size_t>(options.k) > points.size()) {
            ca.k = static_cast<int>(points.size());
            ca.warning = "group " + g.to_string() + " has " + std::to_string(points.size()) + " items; k reduced from " +
                         std::to_string(options.k) + " to " + std::to_string(ca.k);
            spdlog::warn("{}", ca.warning);
        }
        Fnv1a h;
        h.update(g.to_string());
        ca.seed = mix64(options.seed ^ h.digest());
        auto result = kmeans(points, ca.k, ca.seed, options.max_iter);
        for (std::size_t i = 0; i < ids.size(); ++i) ca.labels[ids[i]] = result.labels[i];
        ca.centroids = std::move(result.centroids);
        ca.sse_trajectory = std::move(result.sse_trajectory);
        out.emplace(g, std::move(ca));
    }
    return out;
}

void save_cluster_assignments(const std::map<GroupKey, ClusterAssignment>& assignments,
                              const std::filesystem::path& path) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::array();
    for (const auto& [g, ca] : assignments) {
        nlohmann::ordered_json entry;
        entry["group"] = g.to_string();
        entry["k"] = ca.k;
        entry["seed"] = ca.seed;
        entry["labels"] = ca.labels;
        auto& cents = entry["centroids"];
        cents = nlohmann::ordered_json::array();
        for (const auto& c : ca.centroids) cents.push_back(std::vector<double>(c.data(), c.data() + c.size()));
        entry["sse_trajectory"] = ca.sse_trajectory;
        entry["warning"] = ca.warning;
        doc.push_back(std::move(entry));
    }
    internal::write_file(path, doc.dump(1));
}

std::map<GroupKey, ClusterAssignment> load_cluster_assignments(const std::filesystem::path& path) {
    auto doc = nlohmann::json::parse(internal::read_file(path));
    std::map<GroupKey, ClusterAssignment> out;
    for (const auto& entry : doc) {
        ClusterAssignment ca;
        ca.group = GroupKey::parse(entry.at("group").get<std::string>());
        ca.k = entry.at("k").get<int>();
        ca.seed = entry.at("seed").get<std::uint64_t>();
        ca.labels = entry.at("labels").get<std::map<std::string, int>>();
        for (const auto& c : entry.at("centroids")) {
            auto v = c.get<std::vector<double>>();
            ca.centroids.emplace_back(Eigen::Map<const Eigen::VectorXd>(v.data(), Eigen::Index(v.size())));
        }
        ca.sse_trajectory = entry.value("sse_trajectory", std::vector<double>{});
        ca.warning = entry.value("warning", "");
        out.emplace(ca.group, std::move(ca));
    }
    return out;
}

}  // namespace fairgen
