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

#include "fairgen/error.hpp"

namespace fairgen {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::schema: return "schema";
        case ErrorKind::integrity: return "integrity";
        case ErrorKind::parse: return "parse";
        case ErrorKind::io: return "io";
        case ErrorKind::capacity: return "capacity";
        case ErrorKind::undefined_ratio: return "undefined-ratio";
        case ErrorKind::sampling: return "sampling";
        case ErrorKind::undefined_similarity: return "undefined-similarity";
        case ErrorKind::dimension_mismatch: return "dimension-mismatch";
        case ErrorKind::empty_input: return "empty-input";
        case ErrorKind::numerical: return "numerical";
        case ErrorKind::config: return "config";
        case ErrorKind::divisibility: return "divisibility";
        case ErrorKind::catalog: return "catalog";
        case ErrorKind::partial_generation: return "partial-generation";
        case ErrorKind::selection: return "selection";
        case ErrorKind::evaluation: return "evaluation";
        case ErrorKind::dependency: return "dependency";
    }
    return "unknown";
}

}  // namespace fairgen
