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
#include <span>
#include <string>
#include <vector>

#include "fairgen/embedder.hpp"
#include "fairgen/group_data.hpp"

namespace fairgen {

/// min(round(M_gs / 20), 20) with round-half-away-from-zero, floored at 1.
int cluster_count_rule(std::size_t smallest_group_size);

struct ClusterAssignment {
    GroupKey group;
    int k = 0;
    std::uint64_t seed = 0;
    std::map<std::string, int> labels;  // item id -> cluster index
    std::vector<Embedding> centroids;
    /// Within-cluster SSE after each Lloyd iteration (first entry: after seeding).
    std::vector<double> sse_trajectory;
    /// Set when the group had fewer items than the requested k.
    std::string warning;

    std::vector<std::string> members(int cluster) const;
};

/// Lloyd's algorithm on one point set with k-means++ seeding. Empty clusters
/// are refilled with the point farthest from its assigned centroid.
struct KMeansResult {
    std::vector<int> labels;
    std::vector<Embedding> centroids;
    std::vector<double> sse_trajectory;
    int iterations = 0;
    bool converged = false;
};

KMeansResult kmeans(std::span<const Embedding> points, int k, std::uint64_t seed, int max_iter);

double within_cluster_sse(std::span<const Embedding> points, std::span<const int> labels,
                          std::span<const Embedding> centroids);

struct KMeansOptions {
    int k = 1;
    std::uint64_t seed = 0;
    int max_iter = 100;
    bool normalize = false;  // cluster L2-normalized embeddings instead of raw ones
};

std::map<GroupKey, ClusterAssignment> kmeans_per_group(const GroupedDataset& ds,
                                                       const std::map<std::string, Embedding>& embeddings,
                                                       const KMeansOptions& options);

void save_cluster_assignments(const std::map<GroupKey, ClusterAssignment>& assignments,
                              const std::filesystem::path& path);
std::map<GroupKey, ClusterAssignment> load_cluster_assignments(const std::filesystem::path& path);

}  // namespace fairgen
