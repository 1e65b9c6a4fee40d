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

#include "test_support.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fairgen::testing {

TempDir::TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "fairgen-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

GroupedDataset labeled_dataset(const std::map<std::string, std::size_t>& counts, Split split, const std::string& prefix) {
    const ShapeWorldConfig world;
    std::vector<DatasetItem> items;
    std::size_t n = 0;
    for (const auto& [key, count] : counts) {
        const auto g = GroupKey::parse(key);
        for (std::size_t i = 0; i < count; ++i) {
            DatasetItem item;
            item.id = prefix + "-" + std::to_string(n++);
            item.image_ref = "images/" + item.id + ".png";
            item.class_label = g.class_label;
            item.bias_label = g.bias_label;
            item.split = split;
            items.push_back(std::move(item));
        }
    }
    return GroupedDataset(std::move(items), world.classes, world.biases,
                          alignment_from_aligned_bias(world.classes, world.biases, world.aligned_bias));
}

ShapeWorldConfig small_world(std::uint64_t seed, double bias_ratio) {
    ShapeWorldConfig cfg;
    cfg.seed = seed;
    cfg.bias_ratio = bias_ratio;
    cfg.n_train = 200;
    cfg.n_val = 40;
    cfg.n_test = 80;
    return cfg;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

}  // namespace fairgen::testing
