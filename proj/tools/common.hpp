// Copyright 2026 The Brickstore Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "brickstore/container.hpp"
#include "brickstore/recorder.hpp"
#include "brickstore/synth.hpp"

namespace brickstore::cli {

// Exit codes. Library errors map to kErrorBase + wire code.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitErrorBase = 10;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0);

struct LatencySummary {
  size_t count = 0;
  double mean_ms = 0;
  double p50_ms = 0;
  double p99_ms = 0;
  double max_ms = 0;
};

// Nearest-rank percentiles over samples in seconds.
LatencySummary summarize(std::vector<double> seconds);
void to_json(nlohmann::json& j, const LatencySummary& s);

Durability parse_durability(const std::string& text);
std::string format_bytes(uint64_t bytes);
std::string format_time(uint64_t ns);

// Workload from a spec file, or a named preset.
Workload resolve_workload(const std::string& file, const std::string& preset, double duration, uint64_t seed);

// Records `w` into `root` unless a container already lives there.
ContainerMetadata ensure_container(const std::filesystem::path& root, const Workload& w);

// Writes every message of a container into a bag, in timestamp order.
void export_container_to_bag(const std::filesystem::path& root, const std::filesystem::path& bag_path);

nlohmann::json metadata_json(const ContainerMetadata& meta);
void print_metadata_table(const ContainerMetadata& meta);

std::vector<std::string> split_list(const std::string& text);

}  // namespace brickstore::cli
