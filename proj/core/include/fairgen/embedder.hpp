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
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fairgen/group_data.hpp"
#include "fairgen/image.hpp"

namespace fairgen {

using Embedding = Eigen::VectorXd;

/// Stand-in for an image/text model with a shared embedding space.
class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;

    virtual Embedding embed_image(const Image& image) const = 0;
    virtual Embedding embed_text(std::string_view prompt) const = 0;
    virtual int dimension() const = 0;
};

struct GroupEmbeddingStats {
    GroupKey group;
    Embedding centroid;
    std::size_t count = 0;
};

/// u.v / (|u||v|); throws on zero vectors or mismatched dimensions.
double cosine_similarity(const Embedding& u, const Embedding& v);

/// Arithmetic mean of the (raw, unnormalized) embeddings.
GroupEmbeddingStats group_centroid(std::span<const Embedding> embeddings, const GroupKey& group);

struct GaussianStats {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
};

/// Sample mean and unbiased (n - 1) covariance.
GaussianStats fit_gaussian(std::span<const Embedding> samples);

/// |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}). The trace of the
/// product root is taken as Tr sqrt(S_a^{1/2} S_b S_a^{1/2}), which is
/// symmetric PSD and shares its spectrum with S_a S_b.
double frechet_distance(const GaussianStats& a, const GaussianStats& b);
double frechet_distance(std::span<const Embedding> a, std::span<const Embedding> b);

/// Desk-scale substitute for a CLIP-like model.
///
/// Images: a fixed linear map of the flattened pixels, then L2 normalization.
/// The map first splits the image into per-channel centered pixels (shape)
/// and scaled per-channel means (color), then applies a Gaussian random
/// projection whose entries derive from (seed, row, column), so any input
/// size works.
///
/// Text: normalized sum of per-token anchor vectors (stopwords dropped) plus a
/// small prompt-specific hashed component. A token's anchor is a hash-seeded
/// unit vector unless a visual concept has been registered for it. Prompts
/// that share a word therefore share a component.
class ToyEmbeddingBackend final : public EmbeddingBackend {
public:
    ToyEmbeddingBackend(std::uint64_t seed, int dimension);

    /// The concept anchor is the normalized mean embedding of the prototypes
    /// (e.g. one rendering per placement). Must be called before the backend
    /// is shared between threads.
    void register_concept(std::string word, std::span<const Image> prototypes);

    Embedding embed_image(const Image& image) const override;
    Embedding embed_text(std::string_view prompt) const override;
    int dimension() const override { return dimension_; }

    static std::vector<std::string> tokenize(std::string_view prompt);

private:
    const Eigen::MatrixXd& projection(std::size_t input_dim) const;
    Embedding token_anchor(std::string_view token) const;

    std::uint64_t seed_;
    int dimension_;
    std::map<std::string, Embedding, std::less<>> concepts_;
    mutable std::mutex cache_mutex_;
    mutable std::map<std::size_t, std::unique_ptr<Eigen::MatrixXd>> projections_;
};

std::unique_ptr<ToyEmbeddingBackend> toy_backend(std::uint64_t seed, int dimension);

/// Embeds every item of a dataset; keyed by item id.
std::map<std::string, Embedding> embed_dataset(const GroupedDataset& ds, const EmbeddingBackend& backend);

/// JSON object {"dimension": d, "embeddings": {id: [..], ...}}.
void save_embeddings(const std::map<std::string, Embedding>& embeddings, const std::filesystem::path& path);
std::map<std::string, Embedding> load_embeddings(const std::filesystem::path& path);

}  // namespace fairgen
