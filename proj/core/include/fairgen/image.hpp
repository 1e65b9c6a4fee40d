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

#include <cstddef>
#include <vector>

namespace fairgen {

/// Row-major, channel-last pixel buffer. Values are unbounded reals; the toy
/// renderer keeps them roughly within [0, 1].
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> pixels;

    Image() = default;
    Image(int h, int w, int c) : height(h), width(w), channels(c), pixels(std::size_t(h) * w * c, 0.0) {}

    std::size_t size() const noexcept { return pixels.size(); }
    bool empty() const noexcept { return pixels.empty(); }

    double& at(int row, int col, int ch) { return pixels[(std::size_t(row) * width + col) * channels + ch]; }
    double at(int row, int col, int ch) const { return pixels[(std::size_t(row) * width + col) * channels + ch]; }

    friend bool operator==(const Image&, const Image&) = default;
};

}  // namespace fairgen
