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

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "fairgen/experiment.hpp"

namespace {

using namespace fairgen;

std::vector<PresetRow> rows_for(const ExperimentConfig& base, const std::string& preset) {
    if (preset.empty()) return {{base.label, base}};
    return preset_rows(preset, base);
}

int run_command(const std::string& command, const std::string& config_path, std::vector<std::uint64_t> seeds,
                const std::vector<std::string>& presets) {
    const auto base = config_path.empty() ? default_config() : load_config(config_path);
    if (seeds.empty()) seeds = base.seeds;
    const auto root = runs_root();

    if (command == "matrix") {
        if (presets.empty()) throw Error(ErrorKind::config, "matrix needs at least one --preset");
        const auto result = run_matrix(presets, seeds, base, root);
        for (const auto& f : result.failures) {
            std::fprintf(stderr, "failed: %s seed %llu: %s\n", f.label.c_str(), static_cast<unsigned long long>(f.seed),
                         f.message.c_str());
        }
        if (auto it = result.reports.find(ReportFormat::markdown); it != result.reports.end()) {
            std::cout << it->second;
        } else if (!result.reports.empty()) {
            std::cout << result.reports.begin()->second;
        }
        for (const auto& p : result.files) std::cout << "wrote " << p.string() << "\n";
        return result.runs.empty() && !result.failures.empty() ? 3 : 0;
    }

    if (presets.size() > 1) throw Error(ErrorKind::config, "stage commands take at most one --preset");
    std::vector<Stage> stages;
    if (command == "all") stages = all_stages();
    else stages = {parse_stage(command)};

    for (const auto& row : rows_for(base, presets.empty() ? std::string() : presets.front())) {
        for (auto seed : seeds) {
            for (auto stage : stages) {
                const auto out = run_stage(stage, row.config, seed, root);
                std::cout << to_string(stage) << " [" << row.label << ", seed " << seed << "] "
                          << (out.cache_hit ? "cached" : "done") << " -> " << out.directory.string() << "\n";
            }
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Group-balanced synthetic pretraining pipeline"};
    std::string command;
    std::string config_path;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> presets;
    bool verbose = false;
    bool quiet = false;

    std::string commands = "all, matrix, presets";
    for (auto s : all_stages()) commands += ", " + std::string(to_string(s));
    app.add_option("command", command, "One of: " + commands)->required();
    app.add_option("--config,-c", config_path, "Experiment config (JSON)");
    app.add_option("--seed,-s", seeds, "Seed; repeat for several");
    app.add_option("--preset,-p", presets, "Preset name; repeat for matrix");
    app.add_flag("--verbose,-v", verbose, "Debug logging");
    app.add_flag("--quiet,-q", quiet, "Only errors");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::err : spdlog::level::info);

    if (command == "presets") {
        for (const auto& name : preset_names()) {
            std::cout << name << ":";
            for (const auto& row : preset_rows(name, default_config())) std::cout << " [" << row.label << "]";
            std::cout << "\n";
        }
        return 0;
    }

    try {
        return run_command(command, config_path, seeds, presets);
    } catch (const Error& e) {
        std::fprintf(stderr, "error (%s): %s\n", std::string(to_string(e.kind())).c_str(), e.what());
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
