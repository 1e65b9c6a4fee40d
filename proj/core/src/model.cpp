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

#include "fairgen/model.hpp"

#include <cmath>
#include <cstring>
#include <random>

#include "fairgen/error.hpp"
#include "fairgen/hash.hpp"
#include "internal/text_io.hpp"

namespace fairgen {

namespace {

constexpr char kMagic[4] = {'F', 'G', 'M', 'D'};
constexpr std::uint32_t kVersion = 1;

DenseLayer init_layer(int in, int out, double scale, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, scale);
    DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
    for (int c = 0; c < in; ++c) {
        for (int r = 0; r < out; ++r) layer.weight(r, c) = normal(rng);
    }
    return layer;
}

template <typename T>
void put(std::string& out, T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.append(buf, sizeof(T));
}

void put_layer(std::string& out, const DenseLayer& layer) {
    put<std::int32_t>(out, static_cast<std::int32_t>(layer.weight.rows()));
    put<std::int32_t>(out, static_cast<std::int32_t>(layer.weight.cols()));
    out.append(reinterpret_cast<const char*>(layer.weight.data()), sizeof(double) * layer.weight.size());
    out.append(reinterpret_cast<const char*>(layer.bias.data()), sizeof(double) * layer.bias.size());
}

struct Reader {
    const std::string& blob;
    std::size_t pos = 0;

    template <typename T>
    T get() {
        if (pos + sizeof(T) > blob.size()) throw Error(ErrorKind::parse, "truncated model blob");
        T value;
        std::memcpy(&value, blob.data() + pos, sizeof(T));
        pos += sizeof(T);
        return value;
    }

    void doubles(double* dst, std::size_t n) {
        if (pos + n * sizeof(double) > blob.size()) throw Error(ErrorKind::parse, "truncated model blob");
        std::memcpy(dst, blob.data() + pos, n * sizeof(double));
        pos += n * sizeof(double);
    }

    DenseLayer layer() {
        const auto rows = get<std::int32_t>();
        const auto cols = get<std::int32_t>();
        if (rows < 0 || cols < 0) throw Error(ErrorKind::parse, "bad layer shape in model blob");
        DenseLayer l{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows)};
        doubles(l.weight.data(), std::size_t(rows) * cols);
        doubles(l.bias.data(), std::size_t(rows));
        return l;
    }
};

}  // namespace

ClassifierModel::ClassifierModel(int input_dim, std::vector<int> encoder_widths, int num_classes, std::uint64_t seed)
    : input_dim_(input_dim), widths_(std::move(encoder_widths)) {
    if (input_dim <= 0 || num_classes <= 0) throw Error(ErrorKind::config, "model dimensions must be positive");
    std::mt19937_64 rng(mix64(seed ^ 0x6d6f64656cULL));
    int in = input_dim;
    for (int w : widths_) {
        if (w <= 0) throw Error(ErrorKind::config, "encoder widths must be positive");
        encoder_.push_back(init_layer(in, w, std::sqrt(2.0 / in), rng));
        in = w;
    }
    head_ = init_layer(in, num_classes, std::sqrt(1.0 / in), rng);
}

int ClassifierModel::feature_dim() const { return widths_.empty() ? input_dim_ : widths_.back(); }

ClassifierModel::Forward ClassifierModel::forward(const Eigen::MatrixXd& inputs) const {
    if (inputs.rows() != input_dim_) {
        throw Error(ErrorKind::dimension_mismatch, "model expects " + std::to_string(input_dim_) + " inputs, got " +
                                                       std::to_string(inputs.rows()));
    }
    Forward f;
    f.activations.reserve(encoder_.size() + 1);
    f.activations.push_back(inputs);
    for (const auto& layer : encoder_) {
        Eigen::MatrixXd z = layer.weight * f.activations.back();
        z.colwise() += layer.bias;
        f.activations.push_back(z.cwiseMax(0.0));
    }
    f.logits = head_logits(f.activations.back());
    return f;
}

Eigen::MatrixXd ClassifierModel::features(const Eigen::MatrixXd& inputs) const { return forward(inputs).features(); }

Eigen::MatrixXd ClassifierModel::logits(const Eigen::MatrixXd& inputs) const { return forward(inputs).logits; }

Eigen::MatrixXd ClassifierModel::head_logits(const Eigen::MatrixXd& features) const {
    Eigen::MatrixXd out = head_.weight * features;
    out.colwise() += head_.bias;
    return out;
}

std::vector<int> ClassifierModel::predict(const Eigen::MatrixXd& inputs) const {
    const auto z = logits(inputs);
    std::vector<int> out(z.cols());
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
        Eigen::Index arg = 0;
        z.col(j).maxCoeff(&arg);
        out[j] = static_cast<int>(arg);
    }
    return out;
}

ClassifierModel::Gradients ClassifierModel::backward(const Forward& fwd, const Eigen::MatrixXd& dlogits,
                                                     const Eigen::MatrixXd* dfeatures, bool with_encoder) const {
    Gradients g;
    const auto& feats = fwd.features();
    g.head.weight = dlogits * feats.transpose();
    g.head.bias = dlogits.rowwise().sum();
    if (!with_encoder) return g;

    Eigen::MatrixXd da = head_.weight.transpose() * dlogits;
    if (dfeatures) da += *dfeatures;
    g.encoder.resize(encoder_.size());
    for (std::size_t l = encoder_.size(); l-- > 0;) {
        const auto& out = fwd.activations[l + 1];
        Eigen::MatrixXd dz = (out.array() > 0.0).select(da, 0.0);
        g.encoder[l].weight = dz * fwd.activations[l].transpose();
        g.encoder[l].bias = dz.rowwise().sum();
        if (l > 0) da = encoder_[l].weight.transpose() * dz;
    }
    return g;
}

void ClassifierModel::sgd_step(const Gradients& grads, double learning_rate, double weight_decay) {
    auto step = [&](DenseLayer& p, const DenseLayer& d) {
        p.weight -= learning_rate * (d.weight + weight_decay * p.weight);
        p.bias -= learning_rate * (d.bias + weight_decay * p.bias);
    };
    step(head_, grads.head);
    if (encoder_frozen_ || grads.encoder.empty()) return;
    for (std::size_t l = 0; l < encoder_.size(); ++l) step(encoder_[l], grads.encoder[l]);
}

std::string ClassifierModel::serialize_encoder() const {
    std::string out;
    for (const auto& l : encoder_) put_layer(out, l);
    return out;
}

std::string ClassifierModel::serialize_head() const {
    std::string out;
    put_layer(out, head_);
    return out;
}

std::string ClassifierModel::encoder_hash() const { return hash_hex(serialize_encoder()); }
std::string ClassifierModel::head_hash() const { return hash_hex(serialize_head()); }

std::string ClassifierModel::serialize() const {
    std::string out(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kVersion);
    put<std::int32_t>(out, input_dim_);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(widths_.size()));
    for (int w : widths_) put<std::int32_t>(out, w);
    out += serialize_encoder();
    out += serialize_head();
    return out;
}

ClassifierModel ClassifierModel::deserialize(const std::string& blob) {
    if (blob.size() < sizeof kMagic || std::memcmp(blob.data(), kMagic, sizeof kMagic) != 0) {
        throw Error(ErrorKind::parse, "not a model blob");
    }
    Reader r{blob, sizeof kMagic};
    const auto version = r.get<std::uint32_t>();
    if (version != kVersion) throw Error(ErrorKind::parse, "unsupported model version " + std::to_string(version));
    ClassifierModel m;
    m.input_dim_ = r.get<std::int32_t>();
    const auto depth = r.get<std::uint32_t>();
    if (depth > 64) throw Error(ErrorKind::parse, "implausible encoder depth");
    for (std::uint32_t i = 0; i < depth; ++i) m.widths_.push_back(r.get<std::int32_t>());
    int in = m.input_dim_;
    for (int w : m.widths_) {
        m.encoder_.push_back(r.layer());
        if (m.encoder_.back().weight.rows() != w || m.encoder_.back().weight.cols() != in) {
            throw Error(ErrorKind::parse, "layer shape does not match header");
        }
        in = w;
    }
    m.head_ = r.layer();
    if (m.head_.weight.cols() != in) throw Error(ErrorKind::parse, "head shape does not match encoder");
    if (r.pos != blob.size()) throw Error(ErrorKind::parse, "trailing bytes in model blob");
    return m;
}

void ClassifierModel::save(const std::filesystem::path& path) const { internal::write_file(path, serialize()); }

ClassifierModel ClassifierModel::load(const std::filesystem::path& path) {
    return deserialize(internal::read_file(path));
}

Eigen::MatrixXd softmax(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd out(logits.rows(), logits.cols());
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
        const double m = logits.col(j).maxCoeff();
        out.col(j) = (logits.col(j).array() - m).exp();
        out.col(j) /= out.col(j).sum();
    }
    return out;
}

}  // namespace fairgen
