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
#include <string>
#include <string_view>
#include <vector>

#include "fairgen/embedder.hpp"
#include "fairgen/group_data.hpp"
#include "fairgen/model.hpp"

namespace fairgen {

struct GroupMetrics {
    std::vector<GroupKey> groups;  // declared order
    std::map<GroupKey, double> per_group_accuracy;
    std::map<GroupKey, std::size_t> group_sizes;
    double wga = 0.0;
    double aga = 0.0;               // unweighted mean of group accuracies
    double sample_accuracy = 0.0;   // fraction of all items correct
};

GroupMetrics metrics_from_predictions(const GroupedDataset& test, std::span<const int> predicted_class);
GroupMetrics evaluate(const ClassifierModel& model, const GroupedDataset& test);

std::string metrics_to_json(const GroupMetrics& metrics, const std::string& config_hash, std::uint64_t seed);

/// Per-group Frechet distance between real and synthetic embeddings.
std::map<GroupKey, double> distribution_report(const GroupedDataset& real, const GroupedDataset& synth,
                                               const EmbeddingBackend& backend);

enum class ReportFormat { csv, markdown };

struct LabeledMetrics {
    std::string label;
    GroupMetrics metrics;
};

/// One row per distinct label (first-appearance order); repeated labels are
/// seed replicates and are reported as mean and sample standard deviation.
/// Values are percentages with two decimals.
std::string emit_report(const std::vector<LabeledMetrics>& runs, ReportFormat format);

struct ReportCell {
    double mean = 0.0;
    double stddev = 0.0;
};

struct ParsedReportRow {
    std::string label;
    std::size_t runs = 0;
    ReportCell wga;
    ReportCell aga;
    std::vector<std::pair<std::string, ReportCell>> groups;
};

std::vector<ParsedReportRow> parse_report(std::string_view text, ReportFormat format);

}  // namespace fairgen
