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

#include "fairgen/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "fairgen/error.hpp"
#include "fairgen/training.hpp"
#include "internal/text_io.hpp"

namespace fairgen {

GroupMetrics metrics_from_predictions(const GroupedDataset& test, std::span<const int> predicted_class) {
    if (test.empty()) throw Error(ErrorKind::evaluation, "test set is empty");
    if (predicted_class.size() != test.size()) throw Error(ErrorKind::dimension_mismatch, "one prediction per item expected");
    GroupMetrics m;
    for (const auto& y : test.classes()) {
        for (const auto& a : test.biases()) {
            GroupKey g{y, a};
            if (!test.alignment_map().count(g)) continue;
            if (test.group_size(g) == 0) throw Error(ErrorKind::evaluation, "test group " + g.to_string() + " is empty");
            m.groups.push_back(g);
        }
    }
    std::size_t correct_total = 0;
    double sum = 0.0;
    m.wga = 1.0;
    for (const auto& g : m.groups) {
        const auto& members = test.group_members(g);
        const int truth = test.class_index(g.class_label);
        std::size_t correct = 0;
        for (auto i : members) correct += predicted_class[i] == truth ? 1 : 0;
        const double acc = double(correct) / double(members.size());
        m.per_group_accuracy[g] = acc;
        m.group_sizes[g] = members.size();
        m.wga = std::min(m.wga, acc);
        sum += acc;
        correct_total += correct;
    }
    m.aga = sum / double(m.groups.size());
    m.sample_accuracy = double(correct_total) / double(test.size());
    return m;
}

GroupMetrics evaluate(const ClassifierModel& model, const GroupedDataset& test) {
    if (test.empty()) throw Error(ErrorKind::evaluation, "test set is empty");
    const auto pred = model.predict(input_matrix(test));
    return metrics_from_predictions(test, pred);
}

std::string metrics_to_json(const GroupMetrics& m, const std::string& config_hash, std::uint64_t seed) {
    nlohmann::json j;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["wga"] = m.wga;
    j["aga"] = m.aga;
    j["sample_accuracy"] = m.sample_accuracy;
    j["groups"] = nlohmann::json::array();
    for (const auto& g : m.groups) {
        j["groups"].push_back({{"class_label", g.class_label},
                               {"bias_label", g.bias_label},
                               {"accuracy", m.per_group_accuracy.at(g)},
                               {"size", m.group_sizes.at(g)}});
    }
    return j.dump(2);
}

std::map<GroupKey, double> distribution_report(const GroupedDataset& real, const GroupedDataset& synth,
                                               const EmbeddingBackend& backend) {
    std::map<GroupKey, double> out;
    for (const auto& g : real.groups()) {
        if (synth.group_size(g) == 0) continue;
        auto embed = [&](const GroupedDataset& ds) {
            std::vector<Embedding> es;
            for (auto i : ds.group_members(g)) es.push_back(backend.embed_image(ds[i].image));
            return es;
        };
        const auto a = embed(real);
        const auto b = embed(synth);
        if (a.size() < 2 || b.size() < 2) {
            throw Error(ErrorKind::empty_input, "group " + g.to_string() + " needs at least 2 items on both sides");
        }
        out[g] = frechet_distance(a, b);
    }
    return out;
}

namespace {

constexpr std::string_view kPm = " ± ";

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
    return buf;
}

std::string cell(const std::vector<double>& values) {
    if (values.empty()) return "";
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= double(values.size());
    if (values.size() == 1) return pct(mean);
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= double(values.size() - 1);
    return pct(mean) + std::string(kPm) + pct(std::sqrt(var));
}

ReportCell parse_cell(std::string_view text) {
    ReportCell c;
    const auto t = internal::trim(text);
    if (t.empty()) return c;
    const auto pm = t.find("±");
    auto mean = internal::parse_double(internal::trim(t.substr(0, pm)));
    if (!mean) throw Error(ErrorKind::parse, "bad report cell '" + t + "'");
    c.mean = *mean / 100.0;
    if (pm != std::string::npos) {
        auto sd = internal::parse_double(internal::trim(t.substr(pm + std::string("±").size())));
        if (!sd) throw Error(ErrorKind::parse, "bad report cell '" + t + "'");
        c.stddev = *sd / 100.0;
    }
    return c;
}

std::vector<std::string> split_row(std::string_view line, ReportFormat format) {
    if (format == ReportFormat::csv) {
        auto rows = internal::csv_parse(line);
        return rows.empty() ? std::vector<std::string>{} : rows.front();
    }
    std::vector<std::string> out;
    auto t = internal::trim(line);
    if (t.size() < 2 || t.front() != '|') return out;
    std::string current;
    for (std::size_t i = 1; i < t.size(); ++i) {
        if (t[i] == '\\' && i + 1 < t.size() && t[i + 1] == '|') {
            current += '|';
            ++i;
        } else if (t[i] == '|') {
            out.push_back(internal::trim(current));
            current.clear();
        } else {
            current += t[i];
        }
    }
    return out;
}

}  // namespace

std::string emit_report(const std::vector<LabeledMetrics>& runs, ReportFormat format) {
    std::vector<std::string> labels;
    std::vector<GroupKey> groups;
    for (const auto& r : runs) {
        if (std::find(labels.begin(), labels.end(), r.label) == labels.end()) labels.push_back(r.label);
        for (const auto& g : r.metrics.groups) {
            if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
        }
    }
    std::vector<std::string> header{"method", "runs", "WGA", "AGA"};
    for (const auto& g : groups) header.push_back(g.to_string());

    std::vector<std::vector<std::string>> rows;
    for (const auto& label : labels) {
        std::vector<double> wga, aga;
        std::vector<std::vector<double>> per(groups.size());
        for (const auto& r : runs) {
            if (r.label != label) continue;
            wga.push_back(r.metrics.wga);
            aga.push_back(r.metrics.aga);
            for (std::size_t k = 0; k < groups.size(); ++k) {
                auto it = r.metrics.per_group_accuracy.find(groups[k]);
                if (it != r.metrics.per_group_accuracy.end()) per[k].push_back(it->second);
            }
        }
        std::vector<std::string> row{label, std::to_string(wga.size()), cell(wga), cell(aga)};
        for (const auto& v : per) row.push_back(cell(v));
        rows.push_back(std::move(row));
    }

    std::string out;
    if (format == ReportFormat::csv) {
        out += internal::csv_join(header) + "\n";
        for (const auto& row : rows) out += internal::csv_join(row) + "\n";
        return out;
    }
    auto md_row = [](const std::vector<std::string>& cells) {
        std::string line = "|";
        for (const auto& c : cells) {
            std::string escaped;
            for (char ch : c) {
                if (ch == '|') escaped += '\\';
                escaped += ch;
            }
            line += " " + escaped + " |";
        }
        return line + "\n";
    };
    out += md_row(header);
    out += md_row(std::vector<std::string>(header.size(), "---"));
    for (const auto& row : rows) out += md_row(row);
    return out;
}

std::vector<ParsedReportRow> parse_report(std::string_view text, ReportFormat format) {
    std::vector<ParsedReportRow> out;
    std::vector<std::string> header;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        const auto line = text.substr(pos, nl - pos);
        pos = nl + 1;
        if (internal::trim(line).empty()) continue;
        auto cells = split_row(line, format);
        if (header.empty()) {
            header = std::move(cells);
            if (header.size() < 4) throw Error(ErrorKind::parse, "report header too short");
            continue;
        }
        if (!cells.empty() && cells[0] == "---") continue;
        if (cells.size() != header.size()) throw Error(ErrorKind::parse, "report row width does not match header");
        ParsedReportRow row;
        row.label = cells[0];
        row.runs = static_cast<std::size_t>(internal::parse_int(cells[1]).value_or(0));
        row.wga = parse_cell(cells[2]);
        row.aga = parse_cell(cells[3]);
        for (std::size_t k = 4; k < cells.size(); ++k) row.groups.emplace_back(header[k], parse_cell(cells[k]));
        out.push_back(std::move(row));
    }
    return out;
}

}  // namespace fairgen
