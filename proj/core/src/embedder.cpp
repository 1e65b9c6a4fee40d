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

#include "fairgen/embedder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <set>

#include <nlohmann/json.hpp>

#include "fairgen/error.hpp"
#include "fairgen/hash.hpp"
#include "internal/text_io.hpp"

namespace fairgen {

double cosine_similarity(const Embedding& u, const Embedding& v) {
    if (u.size() != v.size()) {
        throw Error(ErrorKind::dimension_mismatch,
                    "cosine of vectors with " + std::to_string(u.size()) + " and " + std::to_string(v.size()) + " entries");
    }
    const double nu = u.norm();
    const double nv = v.norm();
    if (nu == 0.0 || nv == 0.0) throw Error(ErrorKind::undefined_similarity, "cosine similarity with a zero vector");
    return std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
}

GroupEmbeddingStats group_centroid(std::span<const Embedding> embeddings, const GroupKey& group) {
    if (embeddings.empty()) throw Error(ErrorKind::empty_input, "centroid of an empty group " + group.to_string());
    Embedding sum = Embedding::Zero(embeddings.front().size());
    for (const auto& e : embeddings) {
        if (e.size() != sum.size()) throw Error(ErrorKind::dimension_mismatch, "mixed embedding dimensions");
        sum += e;
    }
    return {group, sum / double(embeddings.size()), embeddings.size()};
}

GaussianStats fit_gaussian(std::span<const Embedding> samples) {
    if (samples.size() < 2) throw Error(ErrorKind::empty_input, "a Gaussian fit needs at least 2 samples");
    const auto d = samples.front().size();
    Eigen::MatrixXd data(d, static_cast<Eigen::Index>(samples.size()));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].size() != d) throw Error(ErrorKind::dimension_mismatch, "mixed embedding dimensions");
        data.col(static_cast<Eigen::Index>(i)) = samples[i];
    }
    GaussianStats stats;
    stats.mean = data.rowwise().mean();
    Eigen::MatrixXd centered = data.colwise() - stats.mean;
    stats.covariance = centered * centered.transpose() / double(samples.size() - 1);
    return stats;
}

namespace {

constexpr double kNegativeEigenTolerance = 1e-8;
constexpr double kRegularization = 1e-6;

/// Square root of a symmetric PSD matrix; nullopt when an eigenvalue is
/// clearly negative.
std::optional<Eigen::MatrixXd> psd_sqrt(const Eigen::MatrixXd& m) {
    Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    if (eig.info() != Eigen::Success) return std::nullopt;
    Eigen::VectorXd values = eig.eigenvalues();
    if (values.size() && values.minCoeff() < -kNegativeEigenTolerance) return std::nullopt;
    values = values.cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
}

std::optional<double> trace_sqrt_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    auto root_a = psd_sqrt(a);
    if (!root_a) return std::nullopt;
    Eigen::MatrixXd inner = *root_a * b * *root_a;
    inner = 0.5 * (inner + inner.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(inner, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) return std::nullopt;
    const auto& values = eig.eigenvalues();
    if (values.size() && values.minCoeff() < -kNegativeEigenTolerance) return std::nullopt;
    return values.cwiseMax(0.0).cwiseSqrt().sum();
}

}  // namespace

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
    if (a.mean.size() != b.mean.size() || a.covariance.rows() != b.covariance.rows()) {
        throw Error(ErrorKind::dimension_mismatch, "Frechet distance between different dimensions");
    }
    auto tr_root = trace_sqrt_product(a.covariance, b.covariance);
    Eigen::MatrixXd ca = a.covariance;
    Eigen::MatrixXd cb = b.covariance;
    if (!tr_root) {
        const auto eye = Eigen::MatrixXd::Identity(ca.rows(), ca.cols());
        ca += kRegularization * eye;
        cb += kRegularization * eye;
        tr_root = trace_sqrt_product(ca, cb);
        if (!tr_root) throw Error(ErrorKind::numerical, "covariance product has no real square root");
    }
    const double value = (a.mean - b.mean).squaredNorm() + ca.trace() + cb.trace() - 2.0 * *tr_root;
    if (value < -kNegativeEigenTolerance) throw Error(ErrorKind::numerical, "negative Frechet distance");
    return std::max(value, 0.0);
}

double frechet_distance(std::span<const Embedding> a, std::span<const Embedding> b) {
    return frechet_distance(fit_gaussian(a), fit_gaussian(b));
}

// ---------------------------------------------------------------------------
// Toy backend

namespace {

constexpr double kColorWeight = 0.25;
constexpr double kPromptWeight = 0.25;

const std::set<std::string, std::less<>> kStopwords{"a",  "an",   "the",   "of",      "on",    "in", "with",
                                                    "who", "is",  "photo", "picture", "image", "and", "v"};

double unit_uniform(std::uint64_t bits) { return (double(bits >> 11) + 0.5) * 0x1.0p-53; }

/// Standard normal from a counter via Box-Muller.
double hashed_normal(std::uint64_t key) {
    const double u1 = unit_uniform(mix64(key));
    const double u2 = unit_uniform(mix64(key ^ 0xa5a5a5a5a5a5a5a5ull));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Embedding normalized_or_basis(Embedding v) {
    const double n = v.norm();
    if (n < 1e-12) {
        Embedding e = Embedding::Zero(v.size());
        e[0] = 1.0;
        return e;
    }
    return v / n;
}

Embedding hashed_unit_vector(std::uint64_t seed, std::string_view text, int dimension) {
    Fnv1a h;
    h.update(text);
    const std::uint64_t base = mix64(seed ^ h.digest());
    Embedding v(dimension);
    for (int i = 0; i < dimension; ++i) v[i] = hashed_normal(base + std::uint64_t(i) * 0x9e3779b97f4a7c15ull);
    return normalized_or_basis(std::move(v));
}

/// Per-channel centered pixels followed by weighted per-channel means.
Eigen::VectorXd image_features(const Image& image) {
    const std::size_t c = std::max(image.channels, 1);
    const std::size_t p = image.pixels.size() / c;
    Eigen::VectorXd phi(static_cast<Eigen::Index>(image.pixels.size() + c));
    std::vector<double> mean(c, 0.0);
    for (std::size_t i = 0; i < image.pixels.size(); ++i) mean[i % c] += image.pixels[i];
    for (auto& m : mean) m /= double(std::max<std::size_t>(p, 1));
    for (std::size_t i = 0; i < image.pixels.size(); ++i) phi[Eigen::Index(i)] = image.pixels[i] - mean[i % c];
    const double scale = kColorWeight * std::sqrt(double(p));
    for (std::size_t k = 0; k < c; ++k) phi[Eigen::Index(image.pixels.size() + k)] = scale * mean[k];
    return phi;
}

}  // namespace

ToyEmbeddingBackend::ToyEmbeddingBackend(std::uint64_t seed, int dimension) : seed_(seed), dimension_(dimension) {
    if (dimension < 2) throw Error(ErrorKind::config, "embedding dimension must be at least 2");
}

const Eigen::MatrixXd& ToyEmbeddingBackend::projection(std::size_t input_dim) const {
    std::lock_guard lock(cache_mutex_);
    auto& slot = projections_[input_dim];
    if (!slot) {
        auto m = std::make_unique<Eigen::MatrixXd>(dimension_, static_cast<Eigen::Index>(input_dim));
        const std::uint64_t base = mix64(seed_ ^ mix64(input_dim));
        const double scale = 1.0 / std::sqrt(double(dimension_));
        for (Eigen::Index j = 0; j < m->cols(); ++j) {
            for (Eigen::Index i = 0; i < m->rows(); ++i) {
                (*m)(i, j) = scale * hashed_normal(base + std::uint64_t(j) * std::uint64_t(dimension_) + std::uint64_t(i));
            }
        }
        slot = std::move(m);
    }
    return *slot;
}

Embedding ToyEmbeddingBackend::embed_image(const Image& image) const {
    if (image.empty()) throw Error(ErrorKind::empty_input, "cannot embed an empty image");
    Eigen::VectorXd phi = image_features(image);
    return normalized_or_basis(projection(static_cast<std::size_t>(phi.size())) * phi);
}

void ToyEmbeddingBackend::register_concept(std::string word, std::span<const Image> prototypes) {
    if (prototypes.empty()) throw Error(ErrorKind::empty_input, "concept '" + word + "' needs a prototype");
    Embedding sum = Embedding::Zero(dimension_);
    for (const auto& img : prototypes) sum += embed_image(img);
    concepts_[internal::to_lower(word)] = normalized_or_basis(sum);
}

std::vector<std::string> ToyEmbeddingBackend::tokenize(std::string_view prompt) {
    std::vector<std::string> tokens;
    std::string current;
    for (char ch : prompt) {
        auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c) || ch == '-') {
            current += static_cast<char>(std::tolower(c));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

Embedding ToyEmbeddingBackend::token_anchor(std::string_view token) const {
    if (auto it = concepts_.find(token); it != concepts_.end()) return it->second;
    return hashed_unit_vector(seed_ ^ 0x7465787400000000ull, token, dimension_);
}

Embedding ToyEmbeddingBackend::embed_text(std::string_view prompt) const {
    Embedding sum = kPromptWeight * hashed_unit_vector(seed_, prompt, dimension_);
    for (const auto& token : tokenize(prompt)) {
        if (kStopwords.contains(token)) continue;
        sum += token_anchor(token);
    }
    return normalized_or_basis(std::move(sum));
}

std::unique_ptr<ToyEmbeddingBackend> toy_backend(std::uint64_t seed, int dimension) {
    return std::make_unique<ToyEmbeddingBackend>(seed, dimension);
}

std::map<std::string, Embedding> embed_dataset(const GroupedDataset& ds, const EmbeddingBackend& backend) {
    std::map<std::string, Embedding> out;
    for (const auto& item : ds.items()) {
        if (item.image.empty()) throw Error(ErrorKind::io, "image for '" + item.id + "' is not loaded");
        out.emplace(item.id, backend.embed_image(item.image));
    }
    return out;
}

void save_embeddings(const std::map<std::string, Embedding>& embeddings, const std::filesystem::path& path) {
    nlohmann::ordered_json doc;
    doc["dimension"] = embeddings.empty() ? 0 : embeddings.begin()->second.size();
    auto& block = doc["embeddings"];
    block = nlohmann::ordered_json::object();
    for (const auto& [id, e] : embeddings) block[id] = std::vector<double>(e.data(), e.data() + e.size());
    internal::write_file(path, doc.dump());
}

std::map<std::string, Embedding> load_embeddings(const std::filesystem::path& path) {
    auto doc = nlohmann::json::parse(internal::read_file(path));
    std::map<std::string, Embedding> out;
    for (const auto& [id, values] : doc.at("embeddings").items()) {
        auto v = values.get<std::vector<double>>();
        out.emplace(id, Eigen::Map<const Eigen::VectorXd>(v.data(), Eigen::Index(v.size())));
    }
    return out;
}

}  // namespace fairgen
